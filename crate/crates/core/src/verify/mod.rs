//! Explicit-state reachability and invariant checking over a finite input
//! abstraction, with shortest counterexamples.

pub(crate) mod concretize;
mod property;
mod ts;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{EvalError, StepError, Trace};

pub use property::{parse_property, parse_property_file, InvariantProperty, PropertyForm};
pub use ts::{build_ts, Label, TransitionSystem};

/// Default cap on explored states.
pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;
/// Environment variable overriding the state budget.
pub const BUDGET_ENV: &str = "VENTASM_STATE_BUDGET";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimerMode {
    /// Every `expired(t)` becomes an unconstrained Boolean input.
    FreeBoolean,
    /// The clock advances by `tick` ms per step; no step goes past `horizon`.
    BoundedClock { tick: u64, horizon: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AbstractionConfig {
    pub timer_mode: TimerMode,
    pub state_budget: usize,
}

impl Default for AbstractionConfig {
    fn default() -> Self {
        AbstractionConfig {
            timer_mode: TimerMode::FreeBoolean,
            state_budget: budget_from_env(),
        }
    }
}

impl AbstractionConfig {
    pub fn bounded_clock(tick: u64, horizon: u64) -> Self {
        AbstractionConfig {
            timer_mode: TimerMode::BoundedClock { tick, horizon },
            ..Self::default()
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.state_budget = budget;
        self
    }
}

/// The budget from `VENTASM_STATE_BUDGET`, or the default.
pub fn budget_from_env() -> usize {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_STATE_BUDGET)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("state budget of {budget} exceeded")]
    StateSpaceBudgetExceeded { budget: usize },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown atom '{0}'")]
    UnknownAtom(String),
    #[error("'{0}' is not a controlled location of the machine; properties range over controlled state")]
    NonControlledAtom(String),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<VerifyError>,
    },
    #[error("monitored location '{0}' has an infinite domain")]
    InfiniteDomain(String),
    #[error("machine has no main rule")]
    NoMainRule,
    #[error("inconsistent update of '{location}' ({first} vs {second}) in a reachable state")]
    Inconsistent {
        location: String,
        first: String,
        second: String,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// A path to a violating state.
#[derive(Clone, Debug)]
pub struct Counterexample {
    pub property: InvariantProperty,
    /// Concrete run reproducing the violation. When `abstract_only` is set
    /// no clock assignment realizes the path and this replays inputs only.
    pub trace: Trace,
    /// Step index of the violating state (0 is the initial state).
    pub violated_at: usize,
    /// The abstract path has no clock-consistent concretization.
    pub abstract_only: bool,
    /// Abstract input labels, one per step, rendered by name.
    pub labels: Vec<BTreeMap<String, String>>,
}

#[derive(Clone, Debug)]
pub enum CheckOutcome {
    Verified,
    Violated(Box<Counterexample>),
}

impl CheckOutcome {
    pub fn is_verified(&self) -> bool {
        matches!(self, CheckOutcome::Verified)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            CheckOutcome::Violated(c) => Some(c),
            CheckOutcome::Verified => None,
        }
    }
}

/// Checks one invariant on a prebuilt transition system.
pub fn check_on(
    m: &crate::MachineDefinition,
    ts: &TransitionSystem,
    prop: &InvariantProperty,
) -> Result<CheckOutcome, VerifyError> {
    let mut violating = Vec::new();
    for id in 0..ts.len() {
        if !prop.holds(m, &ts.full_values(id))? {
            violating.push(id);
        }
    }
    if violating.is_empty() {
        return Ok(CheckOutcome::Verified);
    }
    // `ts` numbers states in BFS order, so lower ids have shorter paths.
    let mut first = None;
    for &id in violating.iter().take(concretize::MAX_CANDIDATES) {
        let path = ts.path_to(id);
        if let Some(trace) = concretize::concretize(m, ts, &path)? {
            return Ok(CheckOutcome::Violated(Box::new(Counterexample {
                property: prop.clone(),
                violated_at: path.len(),
                trace,
                abstract_only: false,
                labels: path.iter().map(|(_, l)| ts.render_label(m, l)).collect(),
            })));
        }
        if first.is_none() {
            first = Some(path);
        }
    }
    let path = first.expect("at least one violating state");
    Ok(CheckOutcome::Violated(Box::new(Counterexample {
        property: prop.clone(),
        violated_at: path.len(),
        trace: concretize::naive_replay(m, ts, &path)?,
        abstract_only: true,
        labels: path.iter().map(|(_, l)| ts.render_label(m, l)).collect(),
    })))
}

/// Builds the transition system and checks one invariant.
pub fn check_invariant(
    m: &crate::MachineDefinition,
    prop: &InvariantProperty,
    cfg: &AbstractionConfig,
) -> Result<CheckOutcome, VerifyError> {
    let ts = build_ts(m, cfg)?;
    check_on(m, &ts, prop)
}
