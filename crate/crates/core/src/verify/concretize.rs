//! Clock-feasibility replay of abstract paths.
//!
//! Under the free-Boolean abstraction a path fixes which timers are expired
//! at each step. A concrete clock value realizes a step iff it lies at or
//! after every required expiry and strictly before every forbidden one. Only
//! interval ends and other timers' breakpoints need to be tried, since the
//! concrete behavior is constant between consecutive breakpoints.

use crate::engine::{self, Atom, MachineState, MonitoredEnv, Trace};
use crate::machine::MachineDefinition;
use crate::value::Value;

use super::ts::{Label, TransitionSystem};
use super::{TimerMode, VerifyError};

/// Violating states tried before falling back to an abstract-only report.
pub(super) const MAX_CANDIDATES: usize = 50;
const NODE_BUDGET: usize = 200_000;

fn env_for(m: &MachineDefinition, label: &Label, clock: Option<u64>) -> MonitoredEnv {
    let mut env = MonitoredEnv::new();
    for l in m.input_locs() {
        let v = label
            .iter()
            .find(|(a, _)| *a == Atom::Loc(l))
            .map(|(_, v)| *v)
            .unwrap_or_else(|| m.default_value(m.loc_type(l)));
        env.insert(l, v);
    }
    if let (Some(c), Some(t)) = (m.clock_loc(), clock) {
        env.insert(c, Value::Instant(t));
    }
    env
}

/// Absolute expiry instant of each timer in `s`.
fn thresholds(m: &MachineDefinition, s: &MachineState) -> Vec<u64> {
    (0..m.timers().len() as u32)
        .map(|t| {
            let start = match m.timer_start_loc(t).map(|l| s.get(l)) {
                Some(Value::Instant(x)) => x,
                _ => 0,
            };
            let dur = match m.timer_duration_loc(t).map(|l| s.get(l)) {
                Some(Value::Duration(x)) => x,
                _ => 0,
            };
            start.saturating_add(dur)
        })
        .collect()
}

fn candidates(m: &MachineDefinition, s: &MachineState, label: &Label) -> Vec<u64> {
    let thr = thresholds(m, s);
    let mut lo = s.clock(m);
    let mut hi = u64::MAX;
    for (a, v) in label {
        if let (Atom::Derived(_, Some(t)), Value::Bool(b)) = (a, v) {
            let th = thr[*t as usize];
            if *b {
                lo = lo.max(th);
            } else if th == 0 {
                return Vec::new();
            } else {
                hi = hi.min(th - 1);
            }
        }
    }
    if lo > hi {
        return Vec::new();
    }
    let mut c = vec![lo];
    if hi != u64::MAX {
        c.push(hi);
    }
    for th in thr {
        for x in [th.saturating_sub(1), th] {
            if x >= lo && x <= hi {
                c.push(x);
            }
        }
    }
    c.sort_unstable();
    c.dedup();
    c
}

struct Search<'a> {
    m: &'a MachineDefinition,
    ts: &'a TransitionSystem,
    path: &'a [(usize, Label)],
    nodes: usize,
}

impl Search<'_> {
    fn dfs(&mut self, trace: &mut Trace) -> Result<bool, VerifyError> {
        let i = trace.len();
        if i == self.path.len() {
            return Ok(true);
        }
        let (target, label) = &self.path[i];
        let s = trace.last().clone();
        for c in candidates(self.m, &s, label) {
            self.nodes += 1;
            if self.nodes > NODE_BUDGET {
                return Ok(false);
            }
            let env = env_for(self.m, label, Some(c));
            let Ok(next) = engine::step(self.m, &s, &env) else {
                continue;
            };
            if self.ts.project_state(&next) != self.ts.state(*target) {
                continue;
            }
            trace.push(env, next);
            if self.dfs(trace)? {
                return Ok(true);
            }
            trace.states.pop();
            trace.inputs.pop();
        }
        Ok(false)
    }
}

/// A concrete run following `path`, or `None` if no clock realizes it.
pub(crate) fn concretize(
    m: &MachineDefinition,
    ts: &TransitionSystem,
    path: &[(usize, Label)],
) -> Result<Option<Trace>, VerifyError> {
    if let TimerMode::BoundedClock { .. } = ts.mode {
        let trace = replay(m, ts, path, |i| {
            m.clock_loc().and_then(|c| match ts.value(path[i].0, c) {
                Some(Value::Instant(t)) => Some(t),
                _ => None,
            })
        })?;
        return Ok(Some(trace));
    }
    if m.clock_loc().is_none() {
        return Ok(Some(naive_replay(m, ts, path)?));
    }
    let mut search = Search {
        m,
        ts,
        path,
        nodes: 0,
    };
    let mut trace = Trace::new(MachineState::initial(m));
    Ok(search.dfs(&mut trace)?.then_some(trace))
}

fn replay(
    m: &MachineDefinition,
    _ts: &TransitionSystem,
    path: &[(usize, Label)],
    clock: impl Fn(usize) -> Option<u64>,
) -> Result<Trace, VerifyError> {
    let mut trace = Trace::new(MachineState::initial(m));
    for (i, (_, label)) in path.iter().enumerate() {
        let env = env_for(m, label, clock(i));
        let next = engine::step(m, trace.last(), &env)?;
        trace.push(env, next);
    }
    Ok(trace)
}

/// Replays labels on the test clock (1 s per step), ignoring timer atoms.
pub(crate) fn naive_replay(
    m: &MachineDefinition,
    ts: &TransitionSystem,
    path: &[(usize, Label)],
) -> Result<Trace, VerifyError> {
    replay(m, ts, path, |i| Some((i as u64 + 1) * 1000))
}
