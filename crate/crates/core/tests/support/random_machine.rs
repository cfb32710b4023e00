//! Random boolean machines and a naive reference interpreter.
//!
//! Each case builds a small rule tree, renders it as model source and runs
//! it through the real front end and engine. The interpreter here collects
//! every fired update and calls a location clashing when it receives both
//! values.

use std::collections::BTreeMap;

use proptest::prelude::*;
use ventasm::dsl::ast::StripPositions;
use ventasm::engine::{self, MachineState, MonitoredEnv, StepError};
use ventasm::{dsl, MachineDefinition, Value};

#[derive(Clone, Copy, Debug)]
pub enum Op {
    And,
    Or,
    Eq,
    Ne,
    Implies,
}

#[derive(Clone, Debug)]
pub enum E {
    Lit(bool),
    /// Index into controlled locations followed by monitored ones.
    Loc(usize),
    Not(Box<E>),
    Bin(Op, Box<E>, Box<E>),
}

#[derive(Clone, Debug)]
pub enum R {
    Skip,
    Upd(usize, E),
    Par(Vec<R>),
    If(E, Box<R>, Option<Box<R>>),
    Call,
}

#[derive(Clone, Debug)]
pub struct Gen {
    pub nc: usize,
    pub nm: usize,
    pub main: R,
    pub aux: R,
}

fn expr() -> impl Strategy<Value = E> {
    let leaf = prop_oneof![any::<bool>().prop_map(E::Lit), (0usize..6).prop_map(E::Loc)];
    leaf.prop_recursive(3, 12, 2, |inner| {
        let op = prop_oneof![Just(Op::And), Just(Op::Or), Just(Op::Eq), Just(Op::Ne), Just(Op::Implies)];
        prop_oneof![
            inner.clone().prop_map(|e| E::Not(Box::new(e))),
            (op, inner.clone(), inner).prop_map(|(o, a, b)| E::Bin(o, Box::new(a), Box::new(b))),
        ]
    })
}

fn rule(calls: bool) -> impl Strategy<Value = R> {
    let mut leaves = vec![Just(R::Skip).boxed(), (0usize..3, expr()).prop_map(|(l, e)| R::Upd(l, e)).boxed()];
    if calls {
        leaves.push(Just(R::Call).boxed());
    }
    let leaf = proptest::strategy::Union::new(leaves);
    leaf.prop_recursive(4, 24, 4, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 1..5).prop_map(R::Par),
            (expr(), inner.clone(), proptest::option::of(inner)).prop_map(|(c, t, o)| R::If(c, Box::new(t), o.map(Box::new))),
        ]
    })
}

pub fn machine() -> impl Strategy<Value = Gen> {
    (1usize..=3, 0usize..=3, rule(true), rule(false)).prop_map(|(nc, nm, main, aux)| Gen { nc, nm, main, aux })
}

impl Gen {
    fn loc_name(&self, i: usize) -> String {
        let i = i % (self.nc + self.nm);
        if i < self.nc {
            format!("c{i}")
        } else {
            format!("m{}", i - self.nc)
        }
    }

    fn expr_src(&self, e: &E) -> String {
        match e {
            E::Lit(b) => b.to_string(),
            E::Loc(i) => self.loc_name(*i),
            E::Not(e) => format!("not ({})", self.expr_src(e)),
            E::Bin(op, a, b) => {
                let op = match op {
                    Op::And => "and",
                    Op::Or => "or",
                    Op::Eq => "=",
                    Op::Ne => "!=",
                    Op::Implies => "implies",
                };
                format!("({}) {op} ({})", self.expr_src(a), self.expr_src(b))
            }
        }
    }

    fn rule_src(&self, r: &R) -> String {
        match r {
            R::Skip => "skip".into(),
            R::Upd(l, e) => format!("c{} := {}", l % self.nc, self.expr_src(e)),
            R::Par(rs) => {
                let body: Vec<String> = rs.iter().map(|r| self.rule_src(r)).collect();
                format!("par\n{}\nendpar", body.join("\n"))
            }
            R::If(c, t, o) => match o {
                Some(o) => format!("if {} then\n{}\nelse\n{}\nendif", self.expr_src(c), self.rule_src(t), self.rule_src(o)),
                None => format!("if {} then\n{}\nendif", self.expr_src(c), self.rule_src(t)),
            },
            R::Call => "r_aux[]".into(),
        }
    }

    pub fn source(&self, main: &R) -> String {
        let mut s = String::from("asm Rand\n\nsignature:\n");
        for i in 0..self.nc {
            s += &format!("    dynamic controlled c{i}: Boolean\n");
        }
        for i in 0..self.nm {
            s += &format!("    dynamic monitored m{i}: Boolean\n");
        }
        s += &format!(
            "\ndefinitions:\n    rule r_aux =\n{}\n\n    main rule r_Main =\n{}\n\ndefault init s0:\n",
            self.rule_src(&self.aux),
            self.rule_src(main)
        );
        for i in 0..self.nc {
            s += &format!("    function c{i} = false\n");
        }
        s
    }

    // ---- oracle ----

    fn eval(&self, e: &E, vals: &[bool]) -> bool {
        match e {
            E::Lit(b) => *b,
            E::Loc(i) => vals[i % (self.nc + self.nm)],
            E::Not(e) => !self.eval(e, vals),
            E::Bin(op, a, b) => {
                let (a, b) = (self.eval(a, vals), self.eval(b, vals));
                match op {
                    Op::And => a && b,
                    Op::Or => a || b,
                    Op::Eq => a == b,
                    Op::Ne => a != b,
                    Op::Implies => !a || b,
                }
            }
        }
    }

    fn fire(&self, r: &R, vals: &[bool], out: &mut Vec<(usize, bool)>) {
        match r {
            R::Skip => {}
            R::Upd(l, e) => out.push((l % self.nc, self.eval(e, vals))),
            R::Par(rs) => rs.iter().for_each(|r| self.fire(r, vals, out)),
            R::If(c, t, o) => {
                if self.eval(c, vals) {
                    self.fire(t, vals, out)
                } else if let Some(o) = o {
                    self.fire(o, vals, out)
                }
            }
            R::Call => self.fire(&self.aux, vals, out),
        }
    }

    /// Next controlled values, or the clashing locations.
    fn oracle_step(&self, vals: &[bool]) -> Result<Vec<bool>, Vec<usize>> {
        let mut fired = Vec::new();
        self.fire(&self.main, vals, &mut fired);
        let mut seen: BTreeMap<usize, (bool, bool)> = BTreeMap::new();
        for (l, v) in fired {
            let e = seen.entry(l).or_insert((false, false));
            if v {
                e.1 = true
            } else {
                e.0 = true
            }
        }
        let clashes: Vec<usize> = seen.iter().filter(|(_, (f, t))| *f && *t).map(|(l, _)| *l).collect();
        if !clashes.is_empty() {
            return Err(clashes);
        }
        let mut next = vals[..self.nc].to_vec();
        for (l, (_, t)) in seen {
            next[l] = t;
        }
        Ok(next)
    }
}

/// Rotates and then reverses the children of every Par, recursively.
fn permute(r: &R, rotate: usize) -> R {
    match r {
        R::Par(rs) => {
            let mut v: Vec<R> = rs.iter().map(|r| permute(r, rotate)).collect();
            let n = v.len();
            v.rotate_left(rotate % n);
            v.reverse();
            R::Par(v)
        }
        R::If(c, t, o) => R::If(c.clone(), Box::new(permute(t, rotate)), o.as_ref().map(|o| Box::new(permute(o, rotate)))),
        other => other.clone(),
    }
}

fn state_of(g: &Gen, m: &MachineDefinition, vals: &[bool]) -> (MachineState, MonitoredEnv) {
    let mut s = MachineState::initial(m);
    let mut env = MonitoredEnv::new();
    for (i, v) in vals.iter().enumerate() {
        let loc = m.loc_by_name(&g.loc_name(i)).unwrap();
        if i < g.nc {
            s.set(loc, Value::Bool(*v));
        } else {
            env.insert(loc, Value::Bool(*v));
        }
    }
    (s, env)
}

fn assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u32 << n).map(move |bits| (0..n).map(|i| bits >> i & 1 == 1).collect())
}

/// Exhaustive agreement with the oracle over every state and input,
/// including clash detection, the frame property and untouched inputs.
pub fn check_step(g: &Gen) -> Result<(), String> {
    let src = g.source(&g.main);
    let m = dsl::parse_str(&src).map_err(|e| format!("{e}\n{src}"))?;
    for vals in assignments(g.nc + g.nm) {
        let (s, env) = state_of(g, &m, &vals);
        match (g.oracle_step(&vals), engine::step_detailed(&m, &s, &env, None)) {
            (Ok(next), Ok(out)) => {
                for (i, v) in next.iter().enumerate() {
                    let loc = m.loc_by_name(&format!("c{i}")).unwrap();
                    if out.state.get(loc) != Value::Bool(*v) {
                        return Err(format!("c{i} differs under {vals:?}\n{src}"));
                    }
                    if out.updates.get(loc).is_none() && out.state.get(loc) != s.get(loc) {
                        return Err(format!("frame violated for c{i}\n{src}"));
                    }
                }
                if env.iter().any(|(l, v)| out.state.get(*l) != *v) {
                    return Err(format!("monitored value changed\n{src}"));
                }
            }
            (Err(locs), Err(StepError::InconsistentUpdateSet { location, first, second })) => {
                if location != format!("c{}", locs[0]) || first == second {
                    return Err(format!("clash reported on {location} ({first}, {second}), expected c{}\n{src}", locs[0]));
                }
            }
            (want, got) => return Err(format!("oracle {want:?} vs engine {:?} under {vals:?}\n{src}", got.map(|o| o.state))),
        }
    }
    Ok(())
}

/// Reordering parallel children never changes the update set.
pub fn check_permutation(g: &Gen, rotate: usize) -> Result<(), String> {
    let m1 = dsl::parse_str(&g.source(&g.main)).map_err(|e| e.to_string())?;
    let permuted = Gen {
        aux: permute(&g.aux, rotate),
        ..g.clone()
    };
    let m2 = dsl::parse_str(&permuted.source(&permute(&g.main, rotate))).map_err(|e| e.to_string())?;
    let main1 = &m1.macro_rule(m1.main.unwrap()).body;
    let main2 = &m2.macro_rule(m2.main.unwrap()).body;
    for vals in assignments(g.nc + g.nm) {
        let (s1, env1) = state_of(g, &m1, &vals);
        let (s2, env2) = state_of(g, &m2, &vals);
        let u1 = engine::eval_rule(&m1, &s1, &env1, main1).map_err(|e| e.to_string())?;
        let u2 = engine::eval_rule(&m2, &s2, &env2, main2).map_err(|e| e.to_string())?;
        if !u1.equivalent(&u2) || u1.is_consistent() != u2.is_consistent() {
            return Err(format!("{u1:?} vs {u2:?}"));
        }
    }
    Ok(())
}

/// Printing then re-parsing yields the same tree, and printing is stable.
pub fn check_print_parse(g: &Gen) -> Result<(), String> {
    let a = dsl::parse_syntax(&g.source(&g.main)).map_err(|e| e.to_string())?;
    let printed = dsl::print_file(&a);
    let b = dsl::parse_syntax(&printed).map_err(|e| format!("{e}\n{printed}"))?;
    if a.strip_positions() != b.strip_positions() || dsl::print_file(&b) != printed {
        return Err(format!("print/parse is not a fixpoint:\n{printed}"));
    }
    Ok(())
}
