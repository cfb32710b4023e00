//! Resolved machine definition: signature, locations, rule IR and initial state.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dsl::ast::{AsmFile, Pos};
use crate::value::{DomainId, EnumValue, Type, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Monitored,
    Controlled,
    Derived,
    Static,
}

impl FunctionKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            FunctionKind::Monitored => "dynamic monitored",
            FunctionKind::Controlled => "dynamic controlled",
            FunctionKind::Derived => "derived",
            FunctionKind::Static => "static",
        }
    }
}

/// Where a declaration came from: the machine itself or an imported library.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Machine,
    Library(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacroId(pub u32);

/// A flat location: a nullary function, or one instance of a function
/// indexed by a finite domain (the timer-indexed library functions).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LocId(pub u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Enum,
    /// Elements are the static constants declared with this codomain.
    Abstract,
}

#[derive(Clone, Debug)]
pub struct Domain {
    pub name: String,
    pub kind: DomainKind,
    pub elements: Vec<String>,
    pub origin: Origin,
}

#[derive(Clone, Debug)]
pub struct FunctionDecl {
    pub name: String,
    pub kind: FunctionKind,
    pub param: Option<DomainId>,
    pub codomain: Type,
    pub origin: Origin,
    pub pos: Pos,
}

impl FunctionDecl {
    pub fn arity(&self) -> usize {
        usize::from(self.param.is_some())
    }
}

#[derive(Clone, Debug)]
pub struct LocationInfo {
    pub name: String,
    pub func: FuncId,
    pub arg: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Value),
    /// Read of a function; `arg` present for indexed functions.
    Read {
        func: FuncId,
        arg: Option<Box<Expr>>,
    },
    Param(u32),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Calls `f` for every function read in this expression.
    pub fn for_each_read(&self, f: &mut impl FnMut(FuncId)) {
        match self {
            Expr::Const(_) | Expr::Param(_) => {}
            Expr::Read { func, arg } => {
                f(*func);
                if let Some(a) = arg {
                    a.for_each_read(f);
                }
            }
            Expr::Not(e) => e.for_each_read(f),
            Expr::And(a, b)
            | Expr::Or(a, b)
            | Expr::Implies(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::Add(a, b)
            | Expr::Sub(a, b) => {
                a.for_each_read(f);
                b.for_each_read(f);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocTerm {
    pub func: FuncId,
    pub arg: Option<Expr>,
}

/// Identifier of an `if` node, used for branch coverage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchId(pub u32);

#[derive(Clone, Debug, PartialEq)]
pub enum RuleAst {
    Update(LocTerm, Expr),
    Par(Vec<RuleAst>),
    IfThenElse {
        cond: Expr,
        then: Box<RuleAst>,
        otherwise: Option<Box<RuleAst>>,
        id: BranchId,
        line: u32,
    },
    MacroCall(MacroId, Vec<Expr>),
    Skip,
}

impl RuleAst {
    /// Number of Update/Par/IfThenElse/MacroCall nodes in this tree.
    pub fn node_count(&self) -> usize {
        match self {
            RuleAst::Update(..) | RuleAst::MacroCall(..) => 1,
            RuleAst::Skip => 0,
            RuleAst::Par(rs) => 1 + rs.iter().map(RuleAst::node_count).sum::<usize>(),
            RuleAst::IfThenElse {
                then, otherwise, ..
            } => {
                1 + then.node_count() + otherwise.as_ref().map_or(0, |o| o.node_count())
            }
        }
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a RuleAst)) {
        f(self);
        match self {
            RuleAst::Par(rs) => rs.iter().for_each(|r| r.visit(f)),
            RuleAst::IfThenElse {
                then, otherwise, ..
            } => {
                then.visit(f);
                if let Some(o) = otherwise {
                    o.visit(f);
                }
            }
            _ => {}
        }
    }
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub domain: Type,
}

#[derive(Clone, Debug)]
pub struct MacroRule {
    pub name: String,
    pub params: Vec<Param>,
    pub body: RuleAst,
    pub origin: Origin,
    pub pos: Pos,
}

#[derive(Clone, Debug)]
pub struct DerivedDef {
    pub params: Vec<Param>,
    pub body: Expr,
}

/// Handles of the time library inside a machine that imports it.
#[derive(Clone, Debug)]
pub struct TimeLib {
    pub timer_domain: DomainId,
    pub now: FuncId,
    pub start: FuncId,
    pub duration: FuncId,
    pub elapsed: FuncId,
    pub expired: FuncId,
    pub reset_timer: MacroId,
    pub set_duration: MacroId,
}

/// A parsed and resolved abstract state machine.
#[derive(Clone, Debug)]
pub struct MachineDefinition {
    pub name: String,
    pub domains: Vec<Domain>,
    pub functions: Vec<FunctionDecl>,
    pub locations: Vec<LocationInfo>,
    pub(crate) loc_base: Vec<Option<u32>>,
    pub derived: Vec<Option<DerivedDef>>,
    pub statics: Vec<Option<Value>>,
    pub macros: Vec<MacroRule>,
    pub main: Option<MacroId>,
    pub init: BTreeMap<LocId, Value>,
    pub n_branches: u32,
    pub timelib: Option<TimeLib>,
    pub syntax: AsmFile,
    pub(crate) names: HashMap<String, Symbol>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symbol {
    Domain(DomainId),
    Function(FuncId),
    Literal(EnumValue),
    Macro(MacroId),
}

impl MachineDefinition {
    pub fn function(&self, id: FuncId) -> &FunctionDecl {
        &self.functions[id.0 as usize]
    }

    pub fn domain(&self, id: DomainId) -> &Domain {
        &self.domains[id.0 as usize]
    }

    pub fn macro_rule(&self, id: MacroId) -> &MacroRule {
        &self.macros[id.0 as usize]
    }

    pub fn location(&self, id: LocId) -> &LocationInfo {
        &self.locations[id.0 as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<Symbol> {
        self.names.get(name).copied()
    }

    pub fn function_id(&self, name: &str) -> Option<FuncId> {
        match self.lookup(name) {
            Some(Symbol::Function(f)) => Some(f),
            _ => None,
        }
    }

    pub fn macro_id(&self, name: &str) -> Option<MacroId> {
        match self.lookup(name) {
            Some(Symbol::Macro(m)) => Some(m),
            _ => None,
        }
    }

    /// Location of `func` applied to `arg` (the element index of its parameter domain).
    pub fn loc_of(&self, func: FuncId, arg: Option<u32>) -> Option<LocId> {
        let base = self.loc_base[func.0 as usize]?;
        let decl = self.function(func);
        match (decl.param, arg) {
            (None, None) => Some(LocId(base)),
            (Some(d), Some(i)) if (i as usize) < self.domain(d).elements.len() => {
                Some(LocId(base + i))
            }
            _ => None,
        }
    }

    /// Location for a textual name: `state`, or `start(timerApneaLag)`.
    pub fn loc_by_name(&self, name: &str) -> Option<LocId> {
        let name = name.trim();
        self.locations
            .iter()
            .position(|l| l.name == name)
            .map(|i| LocId(i as u32))
    }

    pub fn loc_kind(&self, loc: LocId) -> FunctionKind {
        self.function(self.location(loc).func).kind
    }

    pub fn loc_type(&self, loc: LocId) -> Type {
        self.function(self.location(loc).func).codomain
    }

    pub fn loc_name(&self, loc: LocId) -> &str {
        &self.location(loc).name
    }

    /// Whether a location belongs to an imported library rather than the machine.
    pub fn is_library_loc(&self, loc: LocId) -> bool {
        self.function(self.location(loc).func).origin != Origin::Machine
    }

    pub fn locations_of_kind(&self, kind: FunctionKind) -> impl Iterator<Item = LocId> + '_ {
        (0..self.locations.len() as u32)
            .map(LocId)
            .filter(move |l| self.loc_kind(*l) == kind)
    }

    pub fn controlled_locs(&self) -> Vec<LocId> {
        self.locations_of_kind(FunctionKind::Controlled).collect()
    }

    pub fn monitored_locs(&self) -> Vec<LocId> {
        self.locations_of_kind(FunctionKind::Monitored).collect()
    }

    /// Monitored locations supplied by the environment, excluding the clock.
    pub fn input_locs(&self) -> Vec<LocId> {
        let clock = self.clock_loc();
        self.monitored_locs()
            .into_iter()
            .filter(|l| Some(*l) != clock)
            .collect()
    }

    pub fn clock_loc(&self) -> Option<LocId> {
        self.timelib.as_ref().and_then(|t| self.loc_of(t.now, None))
    }

    /// Timer names in declaration order (elements of the timer domain).
    pub fn timers(&self) -> &[String] {
        match &self.timelib {
            Some(t) => &self.domain(t.timer_domain).elements,
            None => &[],
        }
    }

    pub fn timer_index(&self, name: &str) -> Option<u32> {
        self.timers()
            .iter()
            .position(|t| t == name)
            .map(|i| i as u32)
    }

    pub fn timer_start_loc(&self, timer: u32) -> Option<LocId> {
        let t = self.timelib.as_ref()?;
        self.loc_of(t.start, Some(timer))
    }

    pub fn timer_duration_loc(&self, timer: u32) -> Option<LocId> {
        let t = self.timelib.as_ref()?;
        self.loc_of(t.duration, Some(timer))
    }

    /// Current duration bound to `timer` in the initial state.
    pub fn timer_duration(&self, timer: u32) -> Option<u64> {
        let loc = self.timer_duration_loc(timer)?;
        match self.init.get(&loc) {
            Some(Value::Duration(d)) => Some(*d),
            _ => None,
        }
    }

    /// Rebinds a timer duration used by the initial state.
    pub fn set_timer_duration(&mut self, timer: &str, millis: u64) -> bool {
        let Some(idx) = self.timer_index(timer) else {
            return false;
        };
        let Some(loc) = self.timer_duration_loc(idx) else {
            return false;
        };
        self.init.insert(loc, Value::Duration(millis));
        true
    }

    pub fn literal_name(&self, v: EnumValue) -> &str {
        &self.domain(v.domain).elements[v.index as usize]
    }

    pub fn literal(&self, name: &str) -> Option<EnumValue> {
        match self.lookup(name) {
            Some(Symbol::Literal(v)) => Some(v),
            _ => None,
        }
    }

    pub fn type_name(&self, ty: Type) -> String {
        match ty {
            Type::Enum(d) => self.domain(d).name.clone(),
            other => other.builtin_name().unwrap_or("?").to_string(),
        }
    }

    /// Renders a value in model syntax (`true`, `OPEN`, `1500ms`).
    pub fn display_value(&self, v: &Value) -> String {
        match v {
            Value::Bool(b) => b.to_string(),
            Value::Enum(e) => self.literal_name(*e).to_string(),
            Value::Int(i) => i.to_string(),
            Value::Duration(ms) | Value::Instant(ms) => format!("{ms}ms"),
        }
    }

    /// Parses a value of the given type from its textual form.
    pub fn parse_value(&self, ty: Type, text: &str) -> Option<Value> {
        let text = text.trim();
        match ty {
            Type::Bool => match text {
                "true" => Some(Value::Bool(true)),
                "false" => Some(Value::Bool(false)),
                _ => None,
            },
            Type::Enum(d) => self
                .domain(d)
                .elements
                .iter()
                .position(|e| e == text)
                .map(|i| {
                    Value::Enum(EnumValue {
                        domain: d,
                        index: i as u32,
                    })
                }),
            Type::Int => text.parse().ok().map(Value::Int),
            Type::Duration | Type::Instant => {
                let ms = if let Some(ms) = text.strip_suffix("ms") {
                    ms.trim().parse().ok()?
                } else if let Some(s) = text.strip_suffix('s') {
                    crate::value::parse_secs(s)?
                } else {
                    crate::value::parse_secs(text)?
                };
                Some(if ty == Type::Duration {
                    Value::Duration(ms)
                } else {
                    Value::Instant(ms)
                })
            }
        }
    }

    /// All values of a finite type, `None` for numeric types.
    pub fn enumerate(&self, ty: Type) -> Option<Vec<Value>> {
        match ty {
            Type::Bool => Some(vec![Value::Bool(false), Value::Bool(true)]),
            Type::Enum(d) => Some(
                (0..self.domain(d).elements.len() as u32)
                    .map(|index| Value::Enum(EnumValue { domain: d, index }))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Default value used for unset locations: `false`, the first literal, or zero.
    pub fn default_value(&self, ty: Type) -> Value {
        match ty {
            Type::Bool => Value::Bool(false),
            Type::Enum(d) => Value::Enum(EnumValue { domain: d, index: 0 }),
            Type::Int => Value::Int(0),
            Type::Duration => Value::Duration(0),
            Type::Instant => Value::Instant(0),
        }
    }

    /// Macros reachable from the main rule, in first-call order (main first).
    pub fn reachable_macros(&self) -> Vec<MacroId> {
        let mut seen = vec![false; self.macros.len()];
        let mut order = Vec::new();
        let Some(main) = self.main else {
            return order;
        };
        let mut stack = vec![main];
        while let Some(m) = stack.pop() {
            if seen[m.0 as usize] {
                continue;
            }
            seen[m.0 as usize] = true;
            order.push(m);
            let mut calls = Vec::new();
            self.macro_rule(m).body.visit(&mut |r| {
                if let RuleAst::MacroCall(c, _) = r {
                    calls.push(*c);
                }
            });
            for c in calls.into_iter().rev() {
                stack.push(c);
            }
        }
        order
    }
}
