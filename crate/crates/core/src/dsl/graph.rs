//! Control-state diagram export (DOT) for machines dispatching on one mode location.

use std::collections::BTreeSet;
use std::fmt::Write;

use thiserror::Error;

use crate::machine::{CmpOp, Expr, FuncId, FunctionKind, MachineDefinition, MacroId, RuleAst};
use crate::value::{Type, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("main rule is not control-state shaped: {0}")]
    NotControlStateShaped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    /// Macro rule performing the mode update.
    pub via: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphDoc {
    pub mode: String,
    pub nodes: Vec<String>,
    pub edges: Vec<GraphEdge>,
}

impl GraphDoc {
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph states {\n    rankdir=LR;\n    node [shape=box, style=rounded];\n");
        for n in &self.nodes {
            let _ = writeln!(out, "    {n};");
        }
        for e in &self.edges {
            let _ = writeln!(out, "    {} -> {} [label=\"{}\"];", e.from, e.to, e.via);
        }
        out.push_str("}\n");
        out
    }
}

/// `mode = LITERAL` (either operand order) as (mode function, literal index).
fn mode_guard(e: &Expr) -> Option<(FuncId, u32)> {
    let Expr::Cmp(CmpOp::Eq, a, b) = e else {
        return None;
    };
    match (a.as_ref(), b.as_ref()) {
        (Expr::Read { func, arg: None }, Expr::Const(Value::Enum(v)))
        | (Expr::Const(Value::Enum(v)), Expr::Read { func, arg: None }) => Some((*func, v.index)),
        _ => None,
    }
}

fn collect_arms<'a>(
    r: &'a RuleAst,
    arms: &mut Vec<(FuncId, u32, &'a RuleAst)>,
) -> Result<(), GraphError> {
    match r {
        RuleAst::Par(rs) => rs.iter().try_for_each(|s| collect_arms(s, arms)),
        RuleAst::IfThenElse {
            cond,
            then,
            otherwise,
            ..
        } => {
            let (f, v) = mode_guard(cond).ok_or_else(|| {
                GraphError::NotControlStateShaped("a guard is not of the form mode = LITERAL".into())
            })?;
            arms.push((f, v, then));
            if let Some(o) = otherwise {
                collect_arms(o, arms)?;
            }
            Ok(())
        }
        RuleAst::Skip => Ok(()),
        _ => Err(GraphError::NotControlStateShaped(
            "main rule contains an unguarded rule".into(),
        )),
    }
}

fn scan(
    m: &MachineDefinition,
    r: &RuleAst,
    mode: FuncId,
    via: &str,
    seen: &mut BTreeSet<MacroId>,
    out: &mut Vec<(u32, String)>,
) {
    match r {
        RuleAst::Update(t, Expr::Const(Value::Enum(v))) if t.func == mode => {
            out.push((v.index, via.to_string()))
        }
        RuleAst::Update(..) | RuleAst::Skip => {}
        RuleAst::Par(rs) => rs.iter().for_each(|s| scan(m, s, mode, via, seen, out)),
        RuleAst::IfThenElse {
            then, otherwise, ..
        } => {
            scan(m, then, mode, via, seen, out);
            if let Some(o) = otherwise {
                scan(m, o, mode, via, seen, out);
            }
        }
        RuleAst::MacroCall(c, _) => {
            if seen.insert(*c) {
                let rule = m.macro_rule(*c);
                scan(m, &rule.body, mode, &rule.name, seen, out);
                seen.remove(c);
            }
        }
    }
}

pub fn export_state_graph(machine: &MachineDefinition) -> Result<GraphDoc, GraphError> {
    let main = machine
        .main
        .ok_or_else(|| GraphError::NotControlStateShaped("no main rule".into()))?;
    let mut arms = Vec::new();
    collect_arms(&machine.macro_rule(main).body, &mut arms)?;
    let mode = match arms.first() {
        Some((f, _, _)) => *f,
        None => {
            return Err(GraphError::NotControlStateShaped(
                "main rule has no guarded arms".into(),
            ))
        }
    };
    if arms.iter().any(|(f, _, _)| *f != mode) {
        return Err(GraphError::NotControlStateShaped(
            "guards read more than one mode location".into(),
        ));
    }
    let decl = machine.function(mode);
    let Type::Enum(dom) = decl.codomain else {
        return Err(GraphError::NotControlStateShaped("mode is not enumerated".into()));
    };
    if decl.kind != FunctionKind::Controlled {
        return Err(GraphError::NotControlStateShaped("mode is not controlled".into()));
    }
    let lits = &machine.domain(dom).elements;
    let mut edges: Vec<GraphEdge> = Vec::new();
    for (_, from, body) in &arms {
        let mut found = Vec::new();
        scan(
            machine,
            body,
            mode,
            &machine.macro_rule(main).name,
            &mut BTreeSet::new(),
            &mut found,
        );
        for (to, via) in found {
            if to == *from {
                continue;
            }
            let e = GraphEdge {
                from: lits[*from as usize].clone(),
                to: lits[to as usize].clone(),
                via,
            };
            if !edges.iter().any(|x| x.from == e.from && x.to == e.to) {
                edges.push(e);
            }
        }
    }
    Ok(GraphDoc {
        mode: decl.name.clone(),
        nodes: lits.clone(),
        edges,
    })
}
