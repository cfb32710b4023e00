//! Rule and branch-arm coverage counters.

use serde::Serialize;

use crate::machine::{BranchId, MachineDefinition, MacroId, Origin, RuleAst};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coverage {
    rules: Vec<bool>,
    arms: Vec<[bool; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageReport {
    pub rule_coverage: f64,
    pub branch_coverage: f64,
    pub rules_fired: usize,
    pub rules_total: usize,
    pub arms_taken: usize,
    pub arms_total: usize,
    pub uncovered_rules: Vec<String>,
}

impl Coverage {
    pub fn new(m: &MachineDefinition) -> Self {
        Coverage {
            rules: vec![false; m.macros.len()],
            arms: vec![[false; 2]; m.n_branches as usize],
        }
    }

    pub fn rule(&mut self, id: MacroId) {
        self.rules[id.0 as usize] = true;
    }

    pub fn arm(&mut self, id: BranchId, taken: bool) {
        self.arms[id.0 as usize][usize::from(!taken)] = true;
    }

    pub fn merge(&mut self, other: &Coverage) {
        for (a, b) in self.rules.iter_mut().zip(&other.rules) {
            *a |= *b;
        }
        for (a, b) in self.arms.iter_mut().zip(&other.arms) {
            a[0] |= b[0];
            a[1] |= b[1];
        }
    }

    /// Coverage over the machine's own rules; every `if` has two arms,
    /// the implicit `else` included.
    pub fn report(&self, m: &MachineDefinition) -> CoverageReport {
        let mut rules_total = 0;
        let mut rules_fired = 0;
        let mut uncovered_rules = Vec::new();
        let mut branches = Vec::new();
        for (i, r) in m.macros.iter().enumerate() {
            if r.origin != Origin::Machine {
                continue;
            }
            rules_total += 1;
            if self.rules[i] {
                rules_fired += 1;
            } else {
                uncovered_rules.push(r.name.clone());
            }
            r.body.visit(&mut |n| {
                if let RuleAst::IfThenElse { id, .. } = n {
                    branches.push(*id);
                }
            });
        }
        let arms_total = branches.len() * 2;
        let arms_taken: usize = branches
            .iter()
            .map(|b| self.arms[b.0 as usize].iter().filter(|x| **x).count())
            .sum();
        let frac = |a: usize, t: usize| if t == 0 { 1.0 } else { a as f64 / t as f64 };
        CoverageReport {
            rule_coverage: frac(rules_fired, rules_total),
            branch_coverage: frac(arms_taken, arms_total),
            rules_fired,
            rules_total,
            arms_taken,
            arms_total,
            uncovered_rules,
        }
    }
}
