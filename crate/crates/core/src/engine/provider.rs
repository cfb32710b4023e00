//! Sources of monitored environments for runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MachineState, MonitoredEnv};
use crate::machine::MachineDefinition;
use crate::value::{Type, Value};

pub trait InputProvider {
    /// Environment for step `index` (0-based), or `None` to end the run.
    fn next_env(&mut self, m: &MachineDefinition, index: usize, state: &MachineState) -> Option<MonitoredEnv>;
}

/// Replays a fixed list of environments.
#[derive(Clone, Debug, Default)]
pub struct ScriptedInputs {
    pub envs: Vec<MonitoredEnv>,
}

impl ScriptedInputs {
    pub fn new(envs: Vec<MonitoredEnv>) -> Self {
        ScriptedInputs { envs }
    }
}

impl InputProvider for ScriptedInputs {
    fn next_env(&mut self, _m: &MachineDefinition, index: usize, _s: &MachineState) -> Option<MonitoredEnv> {
        self.envs.get(index).cloned()
    }
}

/// Uniform random inputs from a seed; the clock advances by `clock_step` ms
/// per step, so the first step sees `clock_step`.
#[derive(Clone, Debug)]
pub struct RandomInputs {
    rng: ChaCha8Rng,
    pub clock_step: u64,
}

impl RandomInputs {
    pub fn new(seed: u64, clock_step: u64) -> Self {
        RandomInputs {
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock_step,
        }
    }
}

impl InputProvider for RandomInputs {
    fn next_env(&mut self, m: &MachineDefinition, _index: usize, state: &MachineState) -> Option<MonitoredEnv> {
        let mut env = MonitoredEnv::new();
        for loc in m.input_locs() {
            let ty = m.loc_type(loc);
            let v = match m.enumerate(ty) {
                Some(vals) => vals[self.rng.gen_range(0..vals.len())],
                None => match ty {
                    Type::Int => Value::Int(self.rng.gen_range(0..=10)),
                    Type::Duration => Value::Duration(self.rng.gen_range(0..=10) * 1000),
                    _ => Value::Instant(state.clock(m) + self.rng.gen_range(0..=10) * 1000),
                },
            };
            env.insert(loc, v);
        }
        if let Some(clock) = m.clock_loc() {
            env.insert(clock, Value::Instant(state.clock(m) + self.clock_step));
        }
        Some(env)
    }
}
