//! Minimality lint: declarations that the main rule can never reach.

use serde::Serialize;

use crate::machine::{FuncId, MachineDefinition, Origin, RuleAst, Symbol};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LintReport {
    /// Functions and macro rules of the machine never read, written or called
    /// from the main rule.
    pub unused_declarations: Vec<String>,
    /// Rule parameters whose name repeats a signature identifier.
    pub shadowed_names: Vec<String>,
}

impl LintReport {
    pub fn is_clean(&self) -> bool {
        self.unused_declarations.is_empty() && self.shadowed_names.is_empty()
    }
}

fn mark(f: FuncId, used: &mut [bool], q: &mut Vec<FuncId>) {
    if !used[f.0 as usize] {
        used[f.0 as usize] = true;
        q.push(f);
    }
}

pub fn lint(machine: &MachineDefinition) -> LintReport {
    let nf = machine.functions.len();
    let mut used_fn = vec![false; nf];
    let mut used_macro = vec![false; machine.macros.len()];
    let mut fn_queue = Vec::new();

    if let Some(main) = machine.main {
        let mut stack = vec![main];
        used_macro[main.0 as usize] = true;
        while let Some(m) = stack.pop() {
            machine.macro_rule(m).body.visit(&mut |r| match r {
                RuleAst::Update(t, v) => {
                    mark(t.func, &mut used_fn, &mut fn_queue);
                    if let Some(a) = &t.arg {
                        a.for_each_read(&mut |f| mark(f, &mut used_fn, &mut fn_queue));
                    }
                    v.for_each_read(&mut |f| mark(f, &mut used_fn, &mut fn_queue));
                }
                RuleAst::IfThenElse { cond, .. } => {
                    cond.for_each_read(&mut |f| mark(f, &mut used_fn, &mut fn_queue))
                }
                RuleAst::MacroCall(c, args) => {
                    for a in args {
                        a.for_each_read(&mut |f| mark(f, &mut used_fn, &mut fn_queue));
                    }
                    if !used_macro[c.0 as usize] {
                        used_macro[c.0 as usize] = true;
                        stack.push(*c);
                    }
                }
                RuleAst::Par(_) | RuleAst::Skip => {}
            });
        }
    }
    // Derived definitions pull in whatever they read.
    while let Some(f) = fn_queue.pop() {
        if let Some(d) = &machine.derived[f.0 as usize] {
            let body = d.body.clone();
            body.for_each_read(&mut |g| mark(g, &mut used_fn, &mut fn_queue));
        }
    }

    let mut report = LintReport::default();
    for (i, f) in machine.functions.iter().enumerate() {
        if f.origin == Origin::Machine && !used_fn[i] {
            report.unused_declarations.push(f.name.clone());
        }
    }
    for (i, m) in machine.macros.iter().enumerate() {
        if m.origin == Origin::Machine && !used_macro[i] {
            report.unused_declarations.push(m.name.clone());
        }
        if m.origin == Origin::Machine {
            for p in &m.params {
                if matches!(
                    machine.lookup(&p.name),
                    Some(Symbol::Function(_) | Symbol::Macro(_) | Symbol::Literal(_))
                ) {
                    report.shadowed_names.push(format!("{}.${}", m.name, p.name));
                }
            }
        }
    }
    report
}
