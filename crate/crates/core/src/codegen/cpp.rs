//! The controller class. Controlled locations are two-slot buffers: rules
//! read slot 0 and write slot 1, and `fireUpdateSet` copies 1 to 0.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::CodegenError;
use crate::machine::{CmpOp, Expr, FuncId, FunctionKind, MachineDefinition, MacroId, Origin, Param, RuleAst};
use crate::value::{Type, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SourceBundle {
    pub header_name: String,
    pub header: String,
    pub source_name: String,
    pub source: String,
}

pub(super) fn cpp_type(m: &MachineDefinition, ty: Type) -> String {
    match ty {
        Type::Bool => "bool".into(),
        Type::Int => "long".into(),
        Type::Duration | Type::Instant => "unsigned long".into(),
        Type::Enum(d) => m.domain(d).name.clone(),
    }
}

pub(super) fn cpp_value(m: &MachineDefinition, v: &Value) -> String {
    match v {
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => format!("{i}L"),
        Value::Duration(x) | Value::Instant(x) => format!("{x}UL"),
        Value::Enum(e) => m.literal_name(*e).to_string(),
    }
}

fn is_unsigned(t: Type) -> bool {
    matches!(t, Type::Duration | Type::Instant)
}

struct Gen<'a> {
    m: &'a MachineDefinition,
    macros: Vec<MacroId>,
    derived: Vec<FuncId>,
}

impl<'a> Gen<'a> {
    fn new(m: &'a MachineDefinition) -> Self {
        let macros = m.reachable_macros();
        // Derived functions read (transitively) from reachable code.
        let mut derived: BTreeSet<FuncId> = BTreeSet::new();
        let mut work: Vec<FuncId> = Vec::new();
        let note = |e: &Expr, work: &mut Vec<FuncId>| {
            e.for_each_read(&mut |f| {
                if m.function(f).kind == FunctionKind::Derived {
                    work.push(f);
                }
            })
        };
        for id in &macros {
            m.macro_rule(*id).body.visit(&mut |r| match r {
                RuleAst::Update(t, e) => {
                    if let Some(a) = &t.arg {
                        note(a, &mut work);
                    }
                    note(e, &mut work);
                }
                RuleAst::IfThenElse { cond, .. } => note(cond, &mut work),
                RuleAst::MacroCall(_, args) => args.iter().for_each(|a| note(a, &mut work)),
                _ => {}
            });
        }
        while let Some(f) = work.pop() {
            if derived.insert(f) {
                if let Some(def) = &m.derived[f.0 as usize] {
                    note(&def.body, &mut work);
                }
            }
        }
        Gen {
            m,
            macros,
            derived: derived.into_iter().collect(),
        }
    }

    fn ty_of(&self, e: &Expr, params: &[Param]) -> Type {
        match e {
            Expr::Const(v) => v.ty(),
            Expr::Read { func, .. } => self.m.function(*func).codomain,
            Expr::Param(i) => params[*i as usize].domain,
            Expr::Not(_) | Expr::And(..) | Expr::Or(..) | Expr::Implies(..) | Expr::Cmp(..) => Type::Bool,
            Expr::Add(a, b) => match (self.ty_of(a, params), self.ty_of(b, params)) {
                (Type::Instant, _) | (_, Type::Instant) => Type::Instant,
                (t, _) => t,
            },
            Expr::Sub(a, b) => match (self.ty_of(a, params), self.ty_of(b, params)) {
                (Type::Instant, Type::Instant) => Type::Duration,
                (t, _) => t,
            },
        }
    }

    fn expr(&self, e: &Expr, params: &[Param]) -> String {
        let m = self.m;
        match e {
            Expr::Const(v) => cpp_value(m, v),
            Expr::Param(i) => param_name(m, &params[*i as usize]),
            Expr::Read { func, arg } => {
                let d = m.function(*func);
                let idx = arg.as_ref().map(|a| format!("[{}]", self.expr(a, params)));
                let idx = idx.unwrap_or_default();
                match d.kind {
                    FunctionKind::Controlled => format!("{}{idx}[0]", d.name),
                    FunctionKind::Monitored => format!("{}{idx}", d.name),
                    FunctionKind::Derived => match arg {
                        Some(a) => format!("{}({})", d.name, self.expr(a, params)),
                        None => format!("{}()", d.name),
                    },
                    FunctionKind::Static => match m.statics[func.0 as usize] {
                        Some(v) => cpp_value(m, &v),
                        None => d.name.clone(),
                    },
                }
            }
            Expr::Not(a) => format!("!{}", self.atom(a, params)),
            Expr::And(a, b) => format!("({} && {})", self.expr(a, params), self.expr(b, params)),
            Expr::Or(a, b) => format!("({} || {})", self.expr(a, params), self.expr(b, params)),
            Expr::Implies(a, b) => format!("(!{} || {})", self.atom(a, params), self.expr(b, params)),
            Expr::Cmp(op, a, b) => {
                let o = match op {
                    CmpOp::Eq => "==",
                    CmpOp::Ne => "!=",
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                format!("({} {o} {})", self.expr(a, params), self.expr(b, params))
            }
            Expr::Add(a, b) => format!("({} + {})", self.expr(a, params), self.expr(b, params)),
            Expr::Sub(a, b) => {
                if is_unsigned(self.ty_of(a, params)) {
                    // Time differences saturate at zero, as in the interpreter.
                    format!("asmSatSub({}, {})", self.expr(a, params), self.expr(b, params))
                } else {
                    format!("({} - {})", self.expr(a, params), self.expr(b, params))
                }
            }
        }
    }

    /// An operand for a prefix operator, parenthesized unless already atomic.
    fn atom(&self, e: &Expr, params: &[Param]) -> String {
        let s = self.expr(e, params);
        match e {
            Expr::Read { .. } | Expr::Const(_) | Expr::Param(_) | Expr::Cmp(..) | Expr::And(..) | Expr::Or(..) => s,
            _ => format!("({s})"),
        }
    }

    fn rule(&self, out: &mut String, r: &RuleAst, params: &[Param], depth: usize) {
        let ind = "\t".repeat(depth);
        match r {
            RuleAst::Skip => {}
            RuleAst::Update(t, e) => {
                let d = self.m.function(t.func);
                let idx = t
                    .arg
                    .as_ref()
                    .map(|a| format!("[{}]", self.expr(a, params)))
                    .unwrap_or_default();
                let _ = writeln!(out, "{ind}{}{idx}[1] = {};", d.name, self.expr(e, params));
            }
            RuleAst::Par(rs) => rs.iter().for_each(|x| self.rule(out, x, params, depth)),
            RuleAst::MacroCall(id, args) => {
                let a: Vec<String> = args.iter().map(|x| self.expr(x, params)).collect();
                let _ = writeln!(out, "{ind}{}({});", self.m.macro_rule(*id).name, a.join(", "));
            }
            RuleAst::IfThenElse { .. } => {
                let _ = write!(out, "{ind}");
                self.if_chain(out, r, params, depth);
            }
        }
    }

    fn if_chain(&self, out: &mut String, r: &RuleAst, params: &[Param], depth: usize) {
        let ind = "\t".repeat(depth);
        let RuleAst::IfThenElse {
            cond, then, otherwise, ..
        } = r
        else {
            unreachable!("if_chain on a non-conditional")
        };
        let c = self.expr(cond, params);
        let c = if c.starts_with('(') && c.ends_with(')') && balanced_outer(&c) {
            c
        } else {
            format!("({c})")
        };
        let _ = writeln!(out, "if {c} {{");
        self.rule(out, then, params, depth + 1);
        match otherwise.as_deref() {
            None => {
                let _ = writeln!(out, "{ind}}}");
            }
            Some(o @ RuleAst::IfThenElse { .. }) => {
                let _ = write!(out, "{ind}}} else ");
                self.if_chain(out, o, params, depth);
            }
            Some(o) => {
                let _ = writeln!(out, "{ind}}} else {{");
                self.rule(out, o, params, depth + 1);
                let _ = writeln!(out, "{ind}}}");
            }
        }
    }

    fn signature(&self, params: &[Param]) -> String {
        params
            .iter()
            .map(|p| format!("{} {}", cpp_type(self.m, p.domain), param_name(self.m, p)))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Whether the first '(' closes at the last character.
fn balanced_outer(s: &str) -> bool {
    let mut depth = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 && i != s.len() - 1 {
                    return false;
                }
            }
            _ => {}
        }
    }
    true
}

fn param_name(m: &MachineDefinition, p: &Param) -> String {
    if m.lookup(&p.name).is_some() {
        format!("p_{}", p.name)
    } else {
        p.name.clone()
    }
}

fn provenance(m: &MachineDefinition, origin: &Origin, line: u32) -> String {
    match origin {
        Origin::Machine => format!("{}.asm:{line}", m.name),
        Origin::Library(l) => format!("{l}.asm:{line}"),
    }
}

fn check_supported(m: &MachineDefinition) -> Result<(), CodegenError> {
    let mut seen: HashSet<&str> = HashSet::new();
    for d in &m.domains {
        for e in &d.elements {
            if !seen.insert(e) {
                return Err(CodegenError::UnsupportedConstruct(format!(
                    "literal '{e}' appears in more than one domain"
                )));
            }
        }
    }
    if m.main.is_none() {
        return Err(CodegenError::UnsupportedConstruct("machine has no main rule".into()));
    }
    Ok(())
}

/// Generates the declaration and implementation units. Output is a pure
/// function of the machine.
pub fn generate_source(m: &MachineDefinition) -> Result<SourceBundle, CodegenError> {
    check_supported(m)?;
    let g = Gen::new(m);
    let class = &m.name;
    let guard = format!("{}_H", class.to_uppercase());
    let mut h = String::new();
    let _ = writeln!(h, "// Generated from {class}.asm. Do not edit.");
    let _ = writeln!(h, "#ifndef {guard}\n#define {guard}\n");
    for d in &m.domains {
        let _ = writeln!(h, "enum {} {{ {} }};", d.name, d.elements.join(", "));
    }
    if !m.domains.is_empty() {
        h.push('\n');
    }
    h.push_str(
        "// Time differences saturate at zero.\nstatic inline unsigned long asmSatSub(unsigned long a, unsigned long b) {\n\treturn a > b ? a - b : 0UL;\n}\n\n",
    );
    let _ = writeln!(h, "class {class} {{\npublic:");
    // Monitored functions are plain fields, controlled ones two-slot buffers.
    for kind in [FunctionKind::Monitored, FunctionKind::Controlled] {
        for f in m.functions.iter().filter(|f| f.kind == kind) {
            let ty = cpp_type(m, f.codomain);
            let dim = f
                .param
                .map(|p| format!("[{}]", m.domain(p).elements.len()))
                .unwrap_or_default();
            let slots = if kind == FunctionKind::Controlled { "[2]" } else { "" };
            let _ = writeln!(h, "\t{ty} {}{dim}{slots};", f.name);
        }
    }
    let _ = writeln!(h, "\n\t{class}();");
    let _ = writeln!(h, "\tvoid initControlledWithMonitored();");
    let _ = writeln!(h, "\tvoid fireUpdateSet();");
    let _ = writeln!(h, "\tvoid getInputs();");
    let _ = writeln!(h, "\tvoid setOutputs();");
    for f in &g.derived {
        let d = m.function(*f);
        let params = &m.derived[f.0 as usize].as_ref().expect("derived body").params;
        let _ = writeln!(h, "\t{} {}({});", cpp_type(m, d.codomain), d.name, g.signature(params));
    }
    for id in &g.macros {
        let r = m.macro_rule(*id);
        let _ = writeln!(h, "\tvoid {}({});", r.name, g.signature(&r.params));
    }
    let _ = writeln!(h, "}};\n\n#endif");

    let mut c = String::new();
    let _ = writeln!(c, "// Generated from {class}.asm. Do not edit.");
    let _ = writeln!(c, "#include \"{class}.h\"\n");
    let _ = writeln!(c, "{class}::{class}() {{");
    for l in m.monitored_locs() {
        let v = m.default_value(m.loc_type(l));
        let _ = writeln!(c, "\t{} = {};", lvalue(m, l), cpp_value(m, &v));
    }
    for l in m.controlled_locs() {
        let v = m.init.get(&l).copied().unwrap_or_else(|| m.default_value(m.loc_type(l)));
        let lv = lvalue(m, l);
        let _ = writeln!(c, "\t{lv}[0] = {lv}[1] = {};", cpp_value(m, &v));
    }
    c.push_str("}\n\n");
    let _ = writeln!(
        c,
        "// No controlled function is initialized from a monitored one; keeps\n// the buffers aligned.\nvoid {class}::initControlledWithMonitored() {{"
    );
    for l in m.controlled_locs() {
        let lv = lvalue(m, l);
        let _ = writeln!(c, "\t{lv}[1] = {lv}[0];");
    }
    c.push_str("}\n\n");
    let _ = writeln!(c, "void {class}::fireUpdateSet() {{");
    for l in m.controlled_locs() {
        let lv = lvalue(m, l);
        let _ = writeln!(c, "\t{lv}[0] = {lv}[1];");
    }
    c.push_str("}\n");
    for f in &g.derived {
        let d = m.function(*f);
        let def = m.derived[f.0 as usize].as_ref().expect("derived body");
        let _ = writeln!(c, "\n// derived {} ({})", d.name, provenance(m, &d.origin, d.pos.line));
        let _ = writeln!(
            c,
            "{} {class}::{}({}) {{\n\treturn {};\n}}",
            cpp_type(m, d.codomain),
            d.name,
            g.signature(&def.params),
            g.expr(&def.body, &def.params)
        );
    }
    for id in &g.macros {
        let r = m.macro_rule(*id);
        let _ = writeln!(c, "\n// rule {} ({})", r.name, provenance(m, &r.origin, r.pos.line));
        let _ = writeln!(c, "void {class}::{}({}) {{", r.name, g.signature(&r.params));
        g.rule(&mut c, &r.body, &r.params, 1);
        c.push_str("}\n");
    }
    Ok(SourceBundle {
        header_name: format!("{class}.h"),
        header: h,
        source_name: format!("{class}.cpp"),
        source: c,
    })
}

/// C++ lvalue of a location without the slot index.
pub(super) fn lvalue(m: &MachineDefinition, l: crate::machine::LocId) -> String {
    let info = m.location(l);
    let d = m.function(info.func);
    match (info.arg, d.param) {
        (Some(i), Some(p)) => format!("{}[{}]", d.name, m.domain(p).elements[i as usize]),
        _ => d.name.clone(),
    }
}
