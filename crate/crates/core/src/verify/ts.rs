//! Reachable-state graphs under an input abstraction.
//!
//! Successors are enumerated lazily: the main rule is evaluated with a
//! partial input assignment and, whenever it reads an unassigned atom, the
//! evaluation is restarted once per value of that atom. Labels therefore
//! only mention atoms the rule actually read on that path.

use std::collections::{BTreeMap, HashMap};

use crate::engine::{Atom, EvalError, Evaluator, InputSource, UpdateSet};
use crate::machine::{FuncId, FunctionKind, LocId, MachineDefinition};
use crate::value::Value;

use super::{AbstractionConfig, TimerMode, VerifyError};

/// A partial assignment of input atoms, in the order they were read.
pub type Label = Vec<(Atom, Value)>;

#[derive(Clone, Debug)]
pub struct TransitionSystem {
    pub mode: TimerMode,
    /// Locations making up an abstract state.
    pub tracked: Vec<LocId>,
    template: Vec<Value>,
    states: Vec<Vec<Value>>,
    index: HashMap<Vec<Value>, usize>,
    edges: Vec<Vec<(usize, Label)>>,
    parent: Vec<Option<(usize, usize)>>,
}

struct AbstractSource<'l> {
    label: &'l Label,
    clock: Option<(LocId, Value)>,
    expired: Option<FuncId>,
}

impl AbstractSource<'_> {
    fn lookup(&self, atom: Atom) -> Result<Value, EvalError> {
        self.label
            .iter()
            .find(|(a, _)| *a == atom)
            .map(|(_, v)| *v)
            .ok_or(EvalError::NeedInput(atom))
    }
}

impl InputSource for AbstractSource<'_> {
    fn monitored(&mut self, _m: &MachineDefinition, loc: LocId) -> Result<Value, EvalError> {
        match self.clock {
            Some((c, v)) if c == loc => Ok(v),
            _ => self.lookup(Atom::Loc(loc)),
        }
    }

    fn intercept(&mut self, _m: &MachineDefinition, func: FuncId, arg: Option<u32>) -> Result<Option<Value>, EvalError> {
        if self.expired == Some(func) {
            return self.lookup(Atom::Derived(func, arg)).map(Some);
        }
        Ok(None)
    }
}

fn atom_domain(m: &MachineDefinition, atom: Atom) -> Result<Vec<Value>, VerifyError> {
    match atom {
        Atom::Derived(..) => Ok(vec![Value::Bool(false), Value::Bool(true)]),
        Atom::Loc(l) => m
            .enumerate(m.loc_type(l))
            .ok_or_else(|| VerifyError::InfiniteDomain(m.loc_name(l).to_string())),
    }
}

/// Builds the reachable graph breadth-first; state ids follow BFS order.
pub fn build_ts(m: &MachineDefinition, cfg: &AbstractionConfig) -> Result<TransitionSystem, VerifyError> {
    let main = m.main.ok_or(VerifyError::NoMainRule)?;
    let clock = m.clock_loc();
    let tracked: Vec<LocId> = (0..m.locations.len() as u32)
        .map(LocId)
        .filter(|&l| match cfg.timer_mode {
            TimerMode::FreeBoolean => m.loc_kind(l) == FunctionKind::Controlled && !m.is_library_loc(l),
            TimerMode::BoundedClock { .. } => m.loc_kind(l) == FunctionKind::Controlled || Some(l) == clock,
        })
        .collect();
    let template = crate::engine::MachineState::initial(m).values().to_vec();
    let mut ts = TransitionSystem {
        mode: cfg.timer_mode,
        tracked,
        template,
        states: Vec::new(),
        index: HashMap::new(),
        edges: Vec::new(),
        parent: Vec::new(),
    };
    let init = ts.project(&ts.template);
    ts.insert(init, None);
    let expired = match cfg.timer_mode {
        TimerMode::FreeBoolean => m.timelib.as_ref().map(|t| t.expired),
        TimerMode::BoundedClock { .. } => None,
    };

    let mut cursor = 0;
    while cursor < ts.states.len() {
        let full = ts.full_values(cursor);
        let clock_now = clock.map(|c| (c, full[c.0 as usize]));
        let next_clock = match (cfg.timer_mode, clock_now) {
            (TimerMode::FreeBoolean, Some((c, _))) => Some((c, Value::Instant(0))),
            (TimerMode::BoundedClock { tick, horizon }, Some((c, Value::Instant(t)))) => {
                if t + tick > horizon {
                    ts.edges.push(Vec::new());
                    cursor += 1;
                    continue;
                }
                Some((c, Value::Instant(t + tick)))
            }
            _ => None,
        };
        let mut out = Vec::new();
        let mut pending: Vec<Label> = vec![Vec::new()];
        while let Some(label) = pending.pop() {
            let mut ev = Evaluator::new(
                m,
                &full,
                AbstractSource {
                    label: &label,
                    clock: next_clock,
                    expired,
                },
            );
            let mut updates = UpdateSet::new();
            match ev.eval_rule(&m.macro_rule(main).body, &[], &mut updates) {
                Ok(()) => {
                    if let Some(c) = updates.clash() {
                        return Err(VerifyError::Inconsistent {
                            location: m.loc_name(c.loc).to_string(),
                            first: m.display_value(&c.first),
                            second: m.display_value(&c.second),
                        });
                    }
                    let mut next = full.clone();
                    for (l, v) in updates.iter() {
                        next[l.0 as usize] = v;
                    }
                    if let (Some((c, v)), TimerMode::BoundedClock { .. }) = (next_clock, cfg.timer_mode) {
                        next[c.0 as usize] = v;
                    }
                    out.push((ts.project(&next), label));
                }
                Err(EvalError::NeedInput(atom)) => {
                    for v in atom_domain(m, atom)?.into_iter().rev() {
                        let mut l = label.clone();
                        l.push((atom, v));
                        pending.push(l);
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        let mut edges = Vec::with_capacity(out.len());
        for (k, (succ, label)) in out.into_iter().enumerate() {
            let id = ts.insert(succ, Some((cursor, k)));
            if ts.states.len() > cfg.state_budget {
                return Err(VerifyError::StateSpaceBudgetExceeded {
                    budget: cfg.state_budget,
                });
            }
            edges.push((id, label));
        }
        ts.edges.push(edges);
        cursor += 1;
    }
    Ok(ts)
}

impl TransitionSystem {
    fn project(&self, full: &[Value]) -> Vec<Value> {
        self.tracked.iter().map(|l| full[l.0 as usize]).collect()
    }

    fn insert(&mut self, s: Vec<Value>, parent: Option<(usize, usize)>) -> usize {
        if let Some(&id) = self.index.get(&s) {
            return id;
        }
        let id = self.states.len();
        self.index.insert(s.clone(), id);
        self.states.push(s);
        self.parent.push(parent);
        id
    }

    /// Abstract image of a concrete state.
    pub fn project_state(&self, s: &crate::engine::MachineState) -> Vec<Value> {
        self.project(s.values())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn state(&self, id: usize) -> &[Value] {
        &self.states[id]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn edges(&self, id: usize) -> &[(usize, Label)] {
        &self.edges[id]
    }

    /// Distinct successor ids of a state.
    pub fn successors(&self, id: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.edges[id].iter().map(|(s, _)| *s).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn find(&self, tracked_values: &[Value]) -> Option<usize> {
        self.index.get(tracked_values).copied()
    }

    /// A full location vector for the state. Untracked locations keep their
    /// initial values.
    pub fn full_values(&self, id: usize) -> Vec<Value> {
        let mut v = self.template.clone();
        for (l, x) in self.tracked.iter().zip(&self.states[id]) {
            v[l.0 as usize] = *x;
        }
        v
    }

    /// Value of a tracked location in a state.
    pub fn value(&self, id: usize, loc: LocId) -> Option<Value> {
        self.tracked
            .iter()
            .position(|l| *l == loc)
            .map(|i| self.states[id][i])
    }

    /// BFS-tree path from the initial state: (target state, label) per step.
    pub fn path_to(&self, id: usize) -> Vec<(usize, Label)> {
        let mut path = Vec::new();
        let mut cur = id;
        while let Some((p, k)) = self.parent[cur] {
            path.push((cur, self.edges[p][k].1.clone()));
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn render_label(&self, m: &MachineDefinition, label: &Label) -> BTreeMap<String, String> {
        label
            .iter()
            .map(|(a, v)| (atom_name(m, *a), m.display_value(v)))
            .collect()
    }

    /// Tracked values by location name.
    pub fn render_state(&self, m: &MachineDefinition, id: usize) -> BTreeMap<String, String> {
        self.tracked
            .iter()
            .zip(&self.states[id])
            .map(|(l, v)| (m.loc_name(*l).to_string(), m.display_value(v)))
            .collect()
    }
}

pub fn atom_name(m: &MachineDefinition, a: Atom) -> String {
    match a {
        Atom::Loc(l) => m.loc_name(l).to_string(),
        Atom::Derived(f, Some(i)) => {
            let d = m.function(f);
            let elem = d
                .param
                .map(|p| m.domain(p).elements[i as usize].clone())
                .unwrap_or_default();
            format!("{}({elem})", d.name)
        }
        Atom::Derived(f, None) => m.function(f).name.clone(),
    }
}

