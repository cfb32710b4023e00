//! Invariant properties: `g(p)`, `g(p implies q)` and `not f(p)`.

use std::fmt;

use crate::dsl::{ast, printer};
use crate::dsl::{self, ParseError};
use crate::machine::{Expr, FunctionKind, MachineDefinition, Origin};
use crate::value::{Type, Value};

use super::VerifyError;

#[derive(Clone, Debug, PartialEq)]
pub enum PropertyForm {
    Always(Expr),
    AlwaysImplies(Expr, Expr),
    Never(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantProperty {
    pub form: PropertyForm,
    /// Source text as written.
    pub text: String,
    /// The state predicate that must hold everywhere, in model syntax.
    pub invariant_text: String,
}

impl fmt::Display for InvariantProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn syntax(e: ParseError) -> VerifyError {
    match e {
        ParseError::UnresolvedSymbol { name, .. } => VerifyError::UnknownAtom(name),
        other => VerifyError::Syntax(other.to_string()),
    }
}

fn resolve_bool(m: &MachineDefinition, e: &ast::Expr) -> Result<Expr, VerifyError> {
    let (ir, ty) = dsl::resolve_expr(m, e).map_err(syntax)?;
    if ty != Type::Bool {
        return Err(VerifyError::Syntax(format!(
            "property body must be Boolean, found {}",
            m.type_name(ty)
        )));
    }
    let mut bad = None;
    ir.for_each_read(&mut |f| {
        let d = m.function(f);
        if bad.is_none() && (matches!(d.kind, FunctionKind::Monitored | FunctionKind::Derived) || d.origin != Origin::Machine) {
            bad = Some(d.name.clone());
        }
    });
    match bad {
        Some(name) => Err(VerifyError::NonControlledAtom(name)),
        None => Ok(ir),
    }
}

fn unary_call<'a>(e: &'a ast::Expr, name: &str) -> Option<&'a ast::Expr> {
    match e {
        ast::Expr::Ident { name: n, args, .. } if n == name && args.len() == 1 => Some(&args[0]),
        _ => None,
    }
}

/// Parses one property against a machine. An optional `LTLSPEC` prefix is accepted.
pub fn parse_property(m: &MachineDefinition, text: &str) -> Result<InvariantProperty, VerifyError> {
    let body = text.trim();
    let body = body.strip_prefix("LTLSPEC").unwrap_or(body).trim();
    let e = dsl::parse_expr_syntax(body).map_err(syntax)?;
    let invariant_text;
    let form = if let Some(inner) = unary_call(&e, "g") {
        invariant_text = printer::print_expr(inner);
        match inner {
            ast::Expr::Binary {
                op: ast::BinOp::Implies,
                lhs,
                rhs,
                ..
            } => PropertyForm::AlwaysImplies(resolve_bool(m, lhs)?, resolve_bool(m, rhs)?),
            p => PropertyForm::Always(resolve_bool(m, p)?),
        }
    } else if let ast::Expr::Not(inner, _) = &e {
        let p = unary_call(inner, "f").ok_or_else(|| {
            VerifyError::Syntax("expected g(...), g(p implies q) or not f(...)".into())
        })?;
        invariant_text = printer::print_expr(&ast::Expr::Not(Box::new(p.clone()), p.pos()));
        PropertyForm::Never(resolve_bool(m, p)?)
    } else {
        return Err(VerifyError::Syntax(
            "expected g(...), g(p implies q) or not f(...)".into(),
        ));
    };
    Ok(InvariantProperty {
        form,
        text: body.to_string(),
        invariant_text,
    })
}

/// Parses a property file: one property per line, `//` or `#` comments.
pub fn parse_property_file(m: &MachineDefinition, text: &str) -> Result<Vec<InvariantProperty>, VerifyError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split("//").next().unwrap_or("");
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let p = parse_property(m, line).map_err(|e| VerifyError::AtLine {
            line: i + 1,
            source: Box::new(e),
        })?;
        out.push(p);
    }
    Ok(out)
}

impl InvariantProperty {
    /// Whether the state (full location vector) satisfies the property.
    pub fn holds(&self, m: &MachineDefinition, values: &[Value]) -> Result<bool, VerifyError> {
        let eval = |e: &Expr| -> Result<bool, VerifyError> {
            let mut ev = crate::engine::Evaluator::new(m, values, NoInputs);
            let v = ev.eval(e, &[])?;
            v.as_bool()
                .ok_or_else(|| VerifyError::Syntax("property did not evaluate to a Boolean".into()))
        };
        Ok(match &self.form {
            PropertyForm::Always(p) => eval(p)?,
            PropertyForm::AlwaysImplies(p, q) => !eval(p)? || eval(q)?,
            PropertyForm::Never(p) => !eval(p)?,
        })
    }

    /// The state predicate every reachable state must satisfy.
    pub fn invariant(&self) -> Expr {
        match &self.form {
            PropertyForm::Always(p) => p.clone(),
            PropertyForm::AlwaysImplies(p, q) => Expr::Implies(Box::new(p.clone()), Box::new(q.clone())),
            PropertyForm::Never(p) => Expr::Not(Box::new(p.clone())),
        }
    }
}

struct NoInputs;

impl crate::engine::InputSource for NoInputs {
    fn monitored(
        &mut self,
        m: &MachineDefinition,
        loc: crate::machine::LocId,
    ) -> Result<Value, crate::engine::EvalError> {
        Err(crate::engine::EvalError::MissingMonitoredInput(m.loc_name(loc).to_string()))
    }
}
