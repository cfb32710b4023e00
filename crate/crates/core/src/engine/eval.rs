//! Rule and expression evaluation against a state and an input source.

use std::collections::BTreeSet;

use thiserror::Error;

use super::coverage::Coverage;
use super::update::UpdateSet;
use crate::machine::{CmpOp, Expr, FuncId, FunctionKind, LocId, MachineDefinition, RuleAst};
use crate::value::{EnumValue, Value};

/// An input the evaluator could not resolve on its own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    /// A monitored location.
    Loc(LocId),
    /// A derived function application abstracted as an input (e.g. `expired(t)`).
    Derived(FuncId, Option<u32>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("monitored location '{0}' has no value in this step")]
    MissingMonitoredInput(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("arithmetic out of range: {0}")]
    Arithmetic(String),
    #[error("'{0}' cannot be updated")]
    NotUpdatable(String),
    /// Raised by abstract sources to ask the caller to branch on an atom.
    #[error("evaluation needs a value for {0:?}")]
    NeedInput(Atom),
}

/// Supplier of monitored values (and optionally abstracted derived atoms).
pub trait InputSource {
    fn monitored(&mut self, m: &MachineDefinition, loc: LocId) -> Result<Value, EvalError>;

    /// Returns `Some` to override the evaluation of a derived application.
    fn intercept(
        &mut self,
        _m: &MachineDefinition,
        _func: FuncId,
        _arg: Option<u32>,
    ) -> Result<Option<Value>, EvalError> {
        Ok(None)
    }
}

/// Evaluates expressions and rules in one state. Controlled values come
/// from `values` (indexed by location), monitored values from the source.
pub struct Evaluator<'a, S: InputSource> {
    pub m: &'a MachineDefinition,
    pub values: &'a [Value],
    pub source: S,
    /// Monitored locations actually read.
    pub reads: BTreeSet<LocId>,
    pub coverage: Option<&'a mut Coverage>,
}

fn mismatch(what: &str, v: &Value) -> EvalError {
    EvalError::TypeMismatch(format!("expected {what}, found {v:?}"))
}

impl<'a, S: InputSource> Evaluator<'a, S> {
    pub fn new(m: &'a MachineDefinition, values: &'a [Value], source: S) -> Self {
        Evaluator {
            m,
            values,
            source,
            reads: BTreeSet::new(),
            coverage: None,
        }
    }

    pub fn with_coverage(mut self, cov: &'a mut Coverage) -> Self {
        self.coverage = Some(cov);
        self
    }

    fn bool(&mut self, e: &Expr, params: &[Value]) -> Result<bool, EvalError> {
        let v = self.eval(e, params)?;
        v.as_bool().ok_or_else(|| mismatch("Boolean", &v))
    }

    fn index(&mut self, e: &Expr, params: &[Value]) -> Result<u32, EvalError> {
        let v = self.eval(e, params)?;
        v.as_enum().map(|e| e.index).ok_or_else(|| mismatch("domain element", &v))
    }

    fn read_loc(&mut self, func: FuncId, arg: Option<u32>) -> Result<Value, EvalError> {
        let loc = self.m.loc_of(func, arg).ok_or_else(|| {
            EvalError::TypeMismatch(format!("no location for {}", self.m.function(func).name))
        })?;
        match self.m.loc_kind(loc) {
            FunctionKind::Monitored => {
                self.reads.insert(loc);
                self.source.monitored(self.m, loc)
            }
            _ => Ok(self.values[loc.0 as usize]),
        }
    }

    pub fn eval(&mut self, e: &Expr, params: &[Value]) -> Result<Value, EvalError> {
        Ok(match e {
            Expr::Const(v) => *v,
            Expr::Param(i) => *params
                .get(*i as usize)
                .ok_or_else(|| EvalError::TypeMismatch(format!("unbound parameter #{i}")))?,
            Expr::Read { func, arg } => {
                let arg = match arg {
                    Some(a) => Some(self.index(a, params)?),
                    None => None,
                };
                let decl = self.m.function(*func);
                match decl.kind {
                    FunctionKind::Static => self.m.statics[func.0 as usize].ok_or_else(|| {
                        EvalError::TypeMismatch(format!("static '{}' has no value", decl.name))
                    })?,
                    FunctionKind::Derived => {
                        if let Some(v) = self.source.intercept(self.m, *func, arg)? {
                            return Ok(v);
                        }
                        let def = self.m.derived[func.0 as usize].as_ref().ok_or_else(|| {
                            EvalError::TypeMismatch(format!("derived '{}' has no definition", decl.name))
                        })?;
                        let inner: Vec<Value> = match (arg, decl.param) {
                            (Some(i), Some(d)) => vec![Value::Enum(EnumValue { domain: d, index: i })],
                            _ => Vec::new(),
                        };
                        self.eval(&def.body, &inner)?
                    }
                    _ => self.read_loc(*func, arg)?,
                }
            }
            Expr::Not(a) => Value::Bool(!self.bool(a, params)?),
            Expr::And(a, b) => Value::Bool(self.bool(a, params)? && self.bool(b, params)?),
            Expr::Or(a, b) => Value::Bool(self.bool(a, params)? || self.bool(b, params)?),
            Expr::Implies(a, b) => Value::Bool(!self.bool(a, params)? || self.bool(b, params)?),
            Expr::Cmp(op, a, b) => {
                let l = self.eval(a, params)?;
                let r = self.eval(b, params)?;
                if l.ty() != r.ty() {
                    return Err(EvalError::TypeMismatch(format!("cannot compare {l:?} with {r:?}")));
                }
                Value::Bool(match op {
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                })
            }
            Expr::Add(a, b) => {
                let l = self.eval(a, params)?;
                let r = self.eval(b, params)?;
                arith(l, r, true)?
            }
            Expr::Sub(a, b) => {
                let l = self.eval(a, params)?;
                let r = self.eval(b, params)?;
                arith(l, r, false)?
            }
        })
    }

    /// Collects the update set of `rule`; clashes are recorded, not raised.
    pub fn eval_rule(&mut self, rule: &RuleAst, params: &[Value], out: &mut UpdateSet) -> Result<(), EvalError> {
        match rule {
            RuleAst::Skip => {}
            RuleAst::Par(rs) => {
                for r in rs {
                    self.eval_rule(r, params, out)?;
                }
            }
            RuleAst::Update(t, v) => {
                let arg = match &t.arg {
                    Some(a) => Some(self.index(a, params)?),
                    None => None,
                };
                let loc = self
                    .m
                    .loc_of(t.func, arg)
                    .filter(|l| self.m.loc_kind(*l) == FunctionKind::Controlled)
                    .ok_or_else(|| EvalError::NotUpdatable(self.m.function(t.func).name.clone()))?;
                let value = self.eval(v, params)?;
                out.insert(loc, value);
            }
            RuleAst::IfThenElse {
                cond,
                then,
                otherwise,
                id,
                ..
            } => {
                let c = self.bool(cond, params)?;
                if let Some(cov) = self.coverage.as_deref_mut() {
                    cov.arm(*id, c);
                }
                if c {
                    self.eval_rule(then, params, out)?;
                } else if let Some(o) = otherwise {
                    self.eval_rule(o, params, out)?;
                }
            }
            RuleAst::MacroCall(mid, args) => {
                let mut actual = Vec::with_capacity(args.len());
                for a in args {
                    actual.push(self.eval(a, params)?);
                }
                if let Some(cov) = self.coverage.as_deref_mut() {
                    cov.rule(*mid);
                }
                let body = &self.m.macro_rule(*mid).body;
                self.eval_rule(body, &actual, out)?;
            }
        }
        Ok(())
    }
}

fn arith(l: Value, r: Value, add: bool) -> Result<Value, EvalError> {
    let oob = || EvalError::Arithmetic(format!("{l:?} {} {r:?}", if add { "+" } else { "-" }));
    Ok(match (l, r, add) {
        (Value::Int(a), Value::Int(b), true) => Value::Int(a.checked_add(b).ok_or_else(oob)?),
        (Value::Int(a), Value::Int(b), false) => Value::Int(a.checked_sub(b).ok_or_else(oob)?),
        (Value::Duration(a), Value::Duration(b), true) => Value::Duration(a.checked_add(b).ok_or_else(oob)?),
        (Value::Duration(a), Value::Duration(b), false) => Value::Duration(a.saturating_sub(b)),
        // A timer started "in the future" has zero elapsed time.
        (Value::Instant(a), Value::Instant(b), false) => Value::Duration(a.saturating_sub(b)),
        (Value::Instant(a), Value::Duration(b), true) | (Value::Duration(b), Value::Instant(a), true) => {
            Value::Instant(a.checked_add(b).ok_or_else(oob)?)
        }
        (Value::Instant(a), Value::Duration(b), false) => Value::Instant(a.saturating_sub(b)),
        _ => return Err(EvalError::TypeMismatch(format!("bad operands {l:?}, {r:?}"))),
    })
}
