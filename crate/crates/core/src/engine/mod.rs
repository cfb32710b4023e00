//! Execution semantics: update sets, steps, runs and traces.

mod coverage;
mod eval;
mod provider;
mod update;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use coverage::{Coverage, CoverageReport};
pub use eval::{Atom, EvalError, Evaluator, InputSource};
pub use provider::{InputProvider, RandomInputs, ScriptedInputs};
pub use update::{Clash, UpdateSet};

use crate::machine::{FunctionKind, LocId, MachineDefinition, RuleAst};
use crate::value::Value;

/// Values supplied for monitored locations in one step.
pub type MonitoredEnv = BTreeMap<LocId, Value>;

/// A total assignment of locations to values. Monitored slots hold the
/// environment of the step that produced the state (defaults initially).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MachineState {
    values: Vec<Value>,
}

impl MachineState {
    pub fn initial(m: &MachineDefinition) -> Self {
        let values = (0..m.locations.len() as u32)
            .map(LocId)
            .map(|l| match m.init.get(&l) {
                Some(v) => *v,
                None => m.default_value(m.loc_type(l)),
            })
            .collect();
        MachineState { values }
    }

    pub fn from_values(values: Vec<Value>) -> Self {
        MachineState { values }
    }

    pub fn get(&self, loc: LocId) -> Value {
        self.values[loc.0 as usize]
    }

    pub fn set(&mut self, loc: LocId, v: Value) {
        self.values[loc.0 as usize] = v;
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    /// Current clock in milliseconds (0 for machines without the time library).
    pub fn clock(&self, m: &MachineDefinition) -> u64 {
        match m.clock_loc().map(|l| self.get(l)) {
            Some(Value::Instant(t)) => t,
            _ => 0,
        }
    }

    pub fn controlled(&self, m: &MachineDefinition) -> BTreeMap<LocId, Value> {
        m.controlled_locs().into_iter().map(|l| (l, self.get(l))).collect()
    }

    pub fn monitored_env(&self, m: &MachineDefinition) -> MonitoredEnv {
        m.monitored_locs().into_iter().map(|l| (l, self.get(l))).collect()
    }

    /// Value of a location given by name, rendered in model syntax.
    pub fn show(&self, m: &MachineDefinition, name: &str) -> Option<String> {
        m.loc_by_name(name).map(|l| m.display_value(&self.get(l)))
    }

    /// Controlled locations by name, rendered in model syntax.
    pub fn named_controlled(&self, m: &MachineDefinition) -> BTreeMap<String, String> {
        m.controlled_locs()
            .into_iter()
            .map(|l| (m.loc_name(l).to_string(), m.display_value(&self.get(l))))
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("inconsistent update set: '{location}' gets both {first} and {second}")]
    InconsistentUpdateSet {
        location: String,
        first: String,
        second: String,
    },
    #[error("clock went backwards from {previous} ms to {next} ms")]
    ClockRegression { previous: u64, next: u64 },
    #[error("machine has no main rule")]
    NoMainRule,
    #[error("'{0}' is not a monitored location")]
    NotMonitored(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("step {step}: {source}")]
pub struct RunError {
    pub step: usize,
    #[source]
    pub source: StepError,
}

/// Reads monitored values from an explicit environment.
pub struct EnvSource<'a> {
    pub env: &'a MonitoredEnv,
}

impl InputSource for EnvSource<'_> {
    fn monitored(&mut self, m: &MachineDefinition, loc: LocId) -> Result<Value, EvalError> {
        self.env
            .get(&loc)
            .copied()
            .ok_or_else(|| EvalError::MissingMonitoredInput(m.loc_name(loc).to_string()))
    }
}

/// Evaluates `rule` in `state` with monitored values from `env`.
pub fn eval_rule(
    m: &MachineDefinition,
    state: &MachineState,
    env: &MonitoredEnv,
    rule: &RuleAst,
) -> Result<UpdateSet, EvalError> {
    let mut ev = Evaluator::new(m, &state.values, EnvSource { env });
    let mut out = UpdateSet::new();
    ev.eval_rule(rule, &[], &mut out)?;
    Ok(out)
}

/// Everything one step produced.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: MachineState,
    pub updates: UpdateSet,
    /// Monitored locations the rules actually read.
    pub reads: BTreeSet<LocId>,
}

fn check_env(m: &MachineDefinition, state: &MachineState, env: &MonitoredEnv) -> Result<(), StepError> {
    for loc in env.keys() {
        if m.loc_kind(*loc) != FunctionKind::Monitored {
            return Err(StepError::NotMonitored(m.loc_name(*loc).to_string()));
        }
    }
    if let Some(clock) = m.clock_loc() {
        if let (Some(Value::Instant(next)), Value::Instant(prev)) = (env.get(&clock), state.get(clock)) {
            if *next < prev {
                return Err(StepError::ClockRegression {
                    previous: prev,
                    next: *next,
                });
            }
        }
    }
    Ok(())
}

/// Applies a consistent update set; monitored slots take the new environment.
pub fn apply(
    m: &MachineDefinition,
    state: &MachineState,
    env: &MonitoredEnv,
    updates: &UpdateSet,
) -> Result<MachineState, StepError> {
    if let Some(c) = updates.clash() {
        return Err(StepError::InconsistentUpdateSet {
            location: m.loc_name(c.loc).to_string(),
            first: m.display_value(&c.first),
            second: m.display_value(&c.second),
        });
    }
    let mut next = state.clone();
    for (l, v) in env {
        next.set(*l, *v);
    }
    for (l, v) in updates.iter() {
        next.set(l, v);
    }
    Ok(next)
}

/// Fires the main rule once, optionally recording coverage.
pub fn step_detailed(
    m: &MachineDefinition,
    state: &MachineState,
    env: &MonitoredEnv,
    coverage: Option<&mut Coverage>,
) -> Result<StepOutcome, StepError> {
    let main = m.main.ok_or(StepError::NoMainRule)?;
    check_env(m, state, env)?;
    let mut ev = Evaluator::new(m, &state.values, EnvSource { env });
    if let Some(c) = coverage {
        c.rule(main);
        ev = ev.with_coverage(c);
    }
    let mut updates = UpdateSet::new();
    ev.eval_rule(&m.macro_rule(main).body, &[], &mut updates)?;
    let reads = std::mem::take(&mut ev.reads);
    let next = apply(m, state, env, &updates)?;
    Ok(StepOutcome {
        state: next,
        updates,
        reads,
    })
}

pub fn step(m: &MachineDefinition, state: &MachineState, env: &MonitoredEnv) -> Result<MachineState, StepError> {
    step_detailed(m, state, env, None).map(|o| o.state)
}

/// States visited by a run and the environments that drove it.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub states: Vec<MachineState>,
    pub inputs: Vec<MonitoredEnv>,
}

impl Trace {
    pub fn new(initial: MachineState) -> Self {
        Trace {
            states: vec![initial],
            inputs: Vec::new(),
        }
    }

    pub fn last(&self) -> &MachineState {
        self.states.last().expect("a trace has at least one state")
    }

    pub fn push(&mut self, env: MonitoredEnv, state: MachineState) {
        self.inputs.push(env);
        self.states.push(state);
    }

    /// Number of steps taken.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Runs `n_steps` steps from the initial state.
pub fn run(m: &MachineDefinition, provider: &mut dyn InputProvider, n_steps: usize) -> Result<Trace, RunError> {
    run_from(m, MachineState::initial(m), provider, n_steps, None)
}

pub fn run_from(
    m: &MachineDefinition,
    initial: MachineState,
    provider: &mut dyn InputProvider,
    n_steps: usize,
    mut coverage: Option<&mut Coverage>,
) -> Result<Trace, RunError> {
    let mut trace = Trace::new(initial);
    for i in 0..n_steps {
        let Some(env) = provider.next_env(m, i, trace.last()) else {
            break;
        };
        let out = step_detailed(m, trace.last(), &env, coverage.as_deref_mut())
            .map_err(|source| RunError { step: i + 1, source })?;
        trace.push(env, out.state);
    }
    Ok(trace)
}
