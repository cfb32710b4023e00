//! Name resolution and type checking from syntax tree to machine IR.

use std::collections::{BTreeMap, HashMap};

use super::ast::{self, AsmFile, BinOp, Decl, Definition, FileKind, Pos, TimeUnit};
use super::ParseError;
use crate::machine::*;
use crate::value::{DomainId, EnumValue, Type, Value};

struct Resolver {
    domains: Vec<Domain>,
    domain_pos: Vec<Pos>,
    functions: Vec<FunctionDecl>,
    names: HashMap<String, Symbol>,
    macros: Vec<Option<MacroRule>>,
    macro_decls: Vec<(String, Vec<Param>, Origin, Pos)>,
    derived: Vec<Option<DerivedDef>>,
    statics: Vec<Option<Value>>,
    n_branches: u32,
    loc_base: Vec<Option<u32>>,
    locations: Vec<LocationInfo>,
}

type Scope<'a> = &'a [Param];

fn dup(name: &str, pos: Pos) -> ParseError {
    ParseError::DuplicateDeclaration {
        name: name.to_string(),
        pos,
    }
}

fn unresolved(name: &str, pos: Pos) -> ParseError {
    ParseError::UnresolvedSymbol {
        name: name.to_string(),
        pos,
    }
}

fn invalid(name: &str, pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError::Invalid {
        name: name.to_string(),
        pos,
        message: message.into(),
    }
}

impl Resolver {
    fn new() -> Self {
        Resolver {
            domains: Vec::new(),
            domain_pos: Vec::new(),
            functions: Vec::new(),
            names: HashMap::new(),
            macros: Vec::new(),
            macro_decls: Vec::new(),
            derived: Vec::new(),
            statics: Vec::new(),
            n_branches: 0,
            loc_base: Vec::new(),
            locations: Vec::new(),
        }
    }

    fn declare(&mut self, name: &str, sym: Symbol, pos: Pos) -> Result<(), ParseError> {
        if self.names.contains_key(name) || Type::from_builtin(name).is_some() {
            return Err(dup(name, pos));
        }
        self.names.insert(name.to_string(), sym);
        Ok(())
    }

    fn type_name(&self, ty: Type) -> String {
        match ty {
            Type::Enum(d) => self.domains[d.0 as usize].name.clone(),
            other => other.builtin_name().unwrap_or("?").to_string(),
        }
    }

    fn mismatch(&self, pos: Pos, expected: impl Into<String>, found: Type) -> ParseError {
        ParseError::TypeMismatch {
            pos,
            expected: expected.into(),
            found: self.type_name(found),
        }
    }

    fn resolve_type(&self, name: &str, pos: Pos) -> Result<Type, ParseError> {
        if let Some(t) = Type::from_builtin(name) {
            return Ok(t);
        }
        match self.names.get(name) {
            Some(Symbol::Domain(d)) => Ok(Type::Enum(*d)),
            _ => Err(unresolved(name, pos)),
        }
    }

    fn domain_of(&self, name: &str, pos: Pos) -> Result<DomainId, ParseError> {
        match self.resolve_type(name, pos)? {
            Type::Enum(d) => Ok(d),
            _ => Err(invalid(name, pos, "function parameters must range over a domain")),
        }
    }

    /// Declarations of one file: domains first, then functions.
    fn signature(&mut self, file: &AsmFile, origin: &Origin) -> Result<(), ParseError> {
        for d in &file.signature {
            match d {
                Decl::EnumDomain {
                    name,
                    literals,
                    pos,
                } => {
                    let id = DomainId(self.domains.len() as u32);
                    self.declare(name, Symbol::Domain(id), *pos)?;
                    self.domains.push(Domain {
                        name: name.clone(),
                        kind: DomainKind::Enum,
                        elements: literals.clone(),
                        origin: origin.clone(),
                    });
                    self.domain_pos.push(*pos);
                    for (i, lit) in literals.iter().enumerate() {
                        self.declare(
                            lit,
                            Symbol::Literal(EnumValue {
                                domain: id,
                                index: i as u32,
                            }),
                            *pos,
                        )?;
                    }
                }
                Decl::AbstractDomain { name, pos } => {
                    let id = DomainId(self.domains.len() as u32);
                    self.declare(name, Symbol::Domain(id), *pos)?;
                    self.domains.push(Domain {
                        name: name.clone(),
                        kind: DomainKind::Abstract,
                        elements: Vec::new(),
                        origin: origin.clone(),
                    });
                    self.domain_pos.push(*pos);
                }
                Decl::Function { .. } => {}
            }
        }
        Ok(())
    }

    fn functions(&mut self, file: &AsmFile, origin: &Origin) -> Result<(), ParseError> {
        for d in &file.signature {
            let Decl::Function {
                name,
                kind,
                param,
                codomain,
                pos,
            } = d
            else {
                continue;
            };
            let param = match param {
                Some(p) => Some(self.domain_of(p, *pos)?),
                None => None,
            };
            if param.is_some() && matches!(kind, FunctionKind::Static) {
                return Err(invalid(name, *pos, "static functions must be nullary"));
            }
            let codomain = self.resolve_type(codomain, *pos)?;
            let id = FuncId(self.functions.len() as u32);
            self.declare(name, Symbol::Function(id), *pos)?;
            self.functions.push(FunctionDecl {
                name: name.clone(),
                kind: *kind,
                param,
                codomain,
                origin: origin.clone(),
                pos: *pos,
            });
            self.derived.push(None);
            let mut static_value = None;
            if *kind == FunctionKind::Static {
                if let Type::Enum(dom) = codomain {
                    let domain = &mut self.domains[dom.0 as usize];
                    if domain.kind == DomainKind::Abstract {
                        domain.elements.push(name.clone());
                        static_value = Some(Value::Enum(EnumValue {
                            domain: dom,
                            index: domain.elements.len() as u32 - 1,
                        }));
                    }
                }
            }
            self.statics.push(static_value);
        }
        Ok(())
    }

    fn allocate_locations(&mut self) {
        for (i, f) in self.functions.iter().enumerate() {
            if !matches!(f.kind, FunctionKind::Monitored | FunctionKind::Controlled) {
                self.loc_base.push(None);
                continue;
            }
            let base = self.locations.len() as u32;
            self.loc_base.push(Some(base));
            match f.param {
                None => self.locations.push(LocationInfo {
                    name: f.name.clone(),
                    func: FuncId(i as u32),
                    arg: None,
                }),
                Some(d) => {
                    for (k, el) in self.domains[d.0 as usize].elements.iter().enumerate() {
                        self.locations.push(LocationInfo {
                            name: format!("{}({})", f.name, el),
                            func: FuncId(i as u32),
                            arg: Some(k as u32),
                        });
                    }
                }
            }
        }
    }

    fn register_macros(&mut self, file: &AsmFile, origin: &Origin) -> Result<(), ParseError> {
        for def in &file.definitions {
            let Definition::Rule(r) = def else { continue };
            let id = MacroId(self.macro_decls.len() as u32);
            self.declare(&r.name, Symbol::Macro(id), r.pos)?;
            let mut params = Vec::new();
            for p in &r.params {
                if params.iter().any(|q: &Param| q.name == p.name) {
                    return Err(dup(&format!("${}", p.name), r.pos));
                }
                params.push(Param {
                    name: p.name.clone(),
                    domain: self.resolve_type(&p.domain, r.pos)?,
                });
            }
            self.macro_decls
                .push((r.name.clone(), params, origin.clone(), r.pos));
            self.macros.push(None);
        }
        Ok(())
    }

    fn definitions(&mut self, file: &AsmFile) -> Result<Option<MacroId>, ParseError> {
        let mut main = None;
        for def in &file.definitions {
            match def {
                Definition::Function(fd) => {
                    let Some(Symbol::Function(fid)) = self.names.get(&fd.name).copied() else {
                        return Err(unresolved(&fd.name, fd.pos));
                    };
                    let decl = self.functions[fid.0 as usize].clone();
                    let mut params = Vec::new();
                    for p in &fd.params {
                        params.push(Param {
                            name: p.name.clone(),
                            domain: self.resolve_type(&p.domain, fd.pos)?,
                        });
                    }
                    match decl.kind {
                        FunctionKind::Derived => {
                            if self.derived[fid.0 as usize].is_some() {
                                return Err(dup(&fd.name, fd.pos));
                            }
                            let want = decl.param.map(Type::Enum);
                            let got = params.first().map(|p| p.domain);
                            if params.len() > 1 || want != got {
                                return Err(invalid(
                                    &fd.name,
                                    fd.pos,
                                    "definition parameters do not match the declaration",
                                ));
                            }
                            let (body, ty) = self.expr(&fd.body, &params)?;
                            if ty != decl.codomain {
                                return Err(self.mismatch(
                                    fd.body.pos(),
                                    self.type_name(decl.codomain),
                                    ty,
                                ));
                            }
                            self.derived[fid.0 as usize] = Some(DerivedDef { params, body });
                        }
                        FunctionKind::Static => {
                            if self.statics[fid.0 as usize].is_some() {
                                return Err(dup(&fd.name, fd.pos));
                            }
                            if !params.is_empty() {
                                return Err(invalid(&fd.name, fd.pos, "static functions are nullary"));
                            }
                            let value = self.constant(&fd.body, decl.codomain)?;
                            self.statics[fid.0 as usize] = Some(value);
                        }
                        _ => {
                            return Err(invalid(
                                &fd.name,
                                fd.pos,
                                "only derived and static functions have definitions",
                            ))
                        }
                    }
                }
                Definition::Rule(rd) => {
                    let Some(Symbol::Macro(mid)) = self.names.get(&rd.name).copied() else {
                        return Err(unresolved(&rd.name, rd.pos));
                    };
                    let params = self.macro_decls[mid.0 as usize].1.clone();
                    let body = self.rule(&rd.body, &params)?;
                    let (name, params, origin, pos) = self.macro_decls[mid.0 as usize].clone();
                    self.macros[mid.0 as usize] = Some(MacroRule {
                        name,
                        params,
                        body,
                        origin,
                        pos,
                    });
                    if rd.is_main {
                        if main.is_some() {
                            return Err(dup("main rule", rd.pos));
                        }
                        if !rd.params.is_empty() {
                            return Err(invalid(&rd.name, rd.pos, "the main rule takes no parameters"));
                        }
                        main = Some(mid);
                    }
                }
            }
        }
        Ok(main)
    }

    /// Evaluates a constant expression (literals, durations, static timers).
    fn constant(&self, e: &ast::Expr, ty: Type) -> Result<Value, ParseError> {
        let (ir, got) = self.expr(e, &[])?;
        if got != ty {
            return Err(self.mismatch(e.pos(), self.type_name(ty), got));
        }
        match ir {
            Expr::Const(v) => Ok(v),
            Expr::Read { func, arg: None }
                if self.functions[func.0 as usize].kind == FunctionKind::Static =>
            {
                self.statics[func.0 as usize]
                    .ok_or_else(|| invalid(&self.functions[func.0 as usize].name, e.pos(), "static has no value"))
            }
            _ => Err(invalid("init", e.pos(), "expected a constant")),
        }
    }

    fn expr(&self, e: &ast::Expr, scope: Scope) -> Result<(Expr, Type), ParseError> {
        match e {
            ast::Expr::Bool(b, _) => Ok((Expr::Const(Value::Bool(*b)), Type::Bool)),
            ast::Expr::Number { text, unit, pos } => {
                let value = match unit {
                    None => Value::Int(text.parse().map_err(|_| invalid(text, *pos, "bad integer"))?),
                    Some(TimeUnit::Millis) => {
                        Value::Duration(text.parse().map_err(|_| invalid(text, *pos, "bad duration"))?)
                    }
                    Some(TimeUnit::Secs) => Value::Duration(
                        crate::value::parse_secs(text)
                            .ok_or_else(|| invalid(text, *pos, "bad duration"))?,
                    ),
                };
                let ty = value.ty();
                Ok((Expr::Const(value), ty))
            }
            ast::Expr::Param(name, pos) => {
                let i = scope
                    .iter()
                    .position(|p| &p.name == name)
                    .ok_or_else(|| unresolved(&format!("${name}"), *pos))?;
                Ok((Expr::Param(i as u32), scope[i].domain))
            }
            ast::Expr::Ident { name, args, pos } => match self.names.get(name) {
                Some(Symbol::Literal(v)) if args.is_empty() => {
                    Ok((Expr::Const(Value::Enum(*v)), Type::Enum(v.domain)))
                }
                Some(Symbol::Function(fid)) => {
                    let decl = &self.functions[fid.0 as usize];
                    let arg = match (decl.param, args.as_slice()) {
                        (None, []) => None,
                        (Some(d), [a]) => {
                            let (ir, ty) = self.expr(a, scope)?;
                            if ty != Type::Enum(d) {
                                return Err(self.mismatch(a.pos(), self.domains[d.0 as usize].name.clone(), ty));
                            }
                            Some(Box::new(ir))
                        }
                        _ => {
                            return Err(invalid(
                                name,
                                *pos,
                                format!("expects {} argument(s)", decl.arity()),
                            ))
                        }
                    };
                    Ok((Expr::Read { func: *fid, arg }, decl.codomain))
                }
                Some(_) => Err(invalid(name, *pos, "is not a value")),
                None => Err(unresolved(name, *pos)),
            },
            ast::Expr::Not(inner, _) => {
                let (ir, ty) = self.expr(inner, scope)?;
                if ty != Type::Bool {
                    return Err(self.mismatch(inner.pos(), "Boolean", ty));
                }
                Ok((Expr::Not(Box::new(ir)), Type::Bool))
            }
            ast::Expr::Binary { op, lhs, rhs, pos } => {
                let (mut l, mut lt) = self.expr(lhs, scope)?;
                let (mut r, mut rt) = self.expr(rhs, scope)?;
                // A duration literal compared with an instant denotes that instant.
                if matches!(op, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge) {
                    if let (Type::Instant, Expr::Const(Value::Duration(ms))) = (lt, &r) {
                        (r, rt) = (Expr::Const(Value::Instant(*ms)), Type::Instant);
                    } else if let (Expr::Const(Value::Duration(ms)), Type::Instant) = (&l, rt) {
                        (l, lt) = (Expr::Const(Value::Instant(*ms)), Type::Instant);
                    }
                }
                let (l, r) = (Box::new(l), Box::new(r));
                match op {
                    BinOp::And | BinOp::Or | BinOp::Implies => {
                        if lt != Type::Bool {
                            return Err(self.mismatch(lhs.pos(), "Boolean", lt));
                        }
                        if rt != Type::Bool {
                            return Err(self.mismatch(rhs.pos(), "Boolean", rt));
                        }
                        let ir = match op {
                            BinOp::And => Expr::And(l, r),
                            BinOp::Or => Expr::Or(l, r),
                            _ => Expr::Implies(l, r),
                        };
                        Ok((ir, Type::Bool))
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if lt != rt {
                            return Err(self.mismatch(rhs.pos(), self.type_name(lt), rt));
                        }
                        let c = if *op == BinOp::Eq { CmpOp::Eq } else { CmpOp::Ne };
                        Ok((Expr::Cmp(c, l, r), Type::Bool))
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if lt != rt || !matches!(lt, Type::Int | Type::Duration | Type::Instant) {
                            return Err(self.mismatch(*pos, "two values of the same numeric type", rt));
                        }
                        let c = match op {
                            BinOp::Lt => CmpOp::Lt,
                            BinOp::Le => CmpOp::Le,
                            BinOp::Gt => CmpOp::Gt,
                            _ => CmpOp::Ge,
                        };
                        Ok((Expr::Cmp(c, l, r), Type::Bool))
                    }
                    BinOp::Add | BinOp::Sub => {
                        let ty = arith_type(*op, lt, rt)
                            .ok_or_else(|| self.mismatch(*pos, "compatible numeric operands", rt))?;
                        let ir = if *op == BinOp::Add {
                            Expr::Add(l, r)
                        } else {
                            Expr::Sub(l, r)
                        };
                        Ok((ir, ty))
                    }
                }
            }
        }
    }

    fn rule(&mut self, r: &ast::Rule, scope: Scope) -> Result<RuleAst, ParseError> {
        match r {
            ast::Rule::Skip { .. } => Ok(RuleAst::Skip),
            ast::Rule::Par { rules, .. } => {
                let mut out = Vec::with_capacity(rules.len());
                for sub in rules {
                    out.push(self.rule(sub, scope)?);
                }
                Ok(RuleAst::Par(out))
            }
            ast::Rule::If {
                cond,
                then,
                otherwise,
                pos,
            } => {
                let (c, ty) = self.expr(cond, scope)?;
                if ty != Type::Bool {
                    return Err(self.mismatch(cond.pos(), "Boolean", ty));
                }
                let id = BranchId(self.n_branches);
                self.n_branches += 1;
                let then = Box::new(self.rule(then, scope)?);
                let otherwise = match otherwise {
                    Some(o) => Some(Box::new(self.rule(o, scope)?)),
                    None => None,
                };
                Ok(RuleAst::IfThenElse {
                    cond: c,
                    then,
                    otherwise,
                    id,
                    line: pos.line,
                })
            }
            ast::Rule::Call { name, args, pos } => {
                let Some(Symbol::Macro(mid)) = self.names.get(name).copied() else {
                    return Err(unresolved(name, *pos));
                };
                let params = self.macro_decls[mid.0 as usize].1.clone();
                if params.len() != args.len() {
                    return Err(invalid(
                        name,
                        *pos,
                        format!("expects {} argument(s), got {}", params.len(), args.len()),
                    ));
                }
                let mut out = Vec::new();
                for (a, p) in args.iter().zip(&params) {
                    let (ir, ty) = self.expr(a, scope)?;
                    if ty != p.domain {
                        return Err(self.mismatch(a.pos(), self.type_name(p.domain), ty));
                    }
                    out.push(ir);
                }
                Ok(RuleAst::MacroCall(mid, out))
            }
            ast::Rule::Update { target, value, pos } => {
                let Some(Symbol::Function(fid)) = self.names.get(&target.name).copied() else {
                    return Err(unresolved(&target.name, target.pos));
                };
                let decl = self.functions[fid.0 as usize].clone();
                if decl.kind != FunctionKind::Controlled {
                    return Err(invalid(
                        &target.name,
                        *pos,
                        "only controlled functions can be updated",
                    ));
                }
                let arg = match (decl.param, &target.arg) {
                    (None, None) => None,
                    (Some(d), Some(a)) => {
                        let (ir, ty) = self.expr(a, scope)?;
                        if ty != Type::Enum(d) {
                            return Err(self.mismatch(a.pos(), self.domains[d.0 as usize].name.clone(), ty));
                        }
                        Some(ir)
                    }
                    _ => {
                        return Err(invalid(
                            &target.name,
                            *pos,
                            format!("expects {} argument(s)", decl.arity()),
                        ))
                    }
                };
                let (v, ty) = self.expr(value, scope)?;
                if ty != decl.codomain {
                    return Err(self.mismatch(value.pos(), self.type_name(decl.codomain), ty));
                }
                Ok(RuleAst::Update(LocTerm { func: fid, arg }, v))
            }
        }
    }

    fn check_recursion(&self) -> Result<(), ParseError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        fn dfs(
            m: usize,
            macros: &[Option<MacroRule>],
            color: &mut [u8],
            stack: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            color[m] = 1;
            stack.push(m);
            let mut calls = Vec::new();
            if let Some(rule) = &macros[m] {
                rule.body.visit(&mut |r| {
                    if let RuleAst::MacroCall(c, _) = r {
                        calls.push(c.0 as usize);
                    }
                });
            }
            for c in calls {
                if color[c] == 1 {
                    let at = stack.iter().position(|x| *x == c).unwrap_or(0);
                    let mut cycle = stack[at..].to_vec();
                    cycle.push(c);
                    return Some(cycle);
                }
                if color[c] == 0 {
                    if let Some(cy) = dfs(c, macros, color, stack) {
                        return Some(cy);
                    }
                }
            }
            stack.pop();
            color[m] = 2;
            None
        }
        let mut color = vec![0u8; self.macros.len()];
        for m in 0..self.macros.len() {
            if color[m] == 0 {
                let mut stack = Vec::new();
                if let Some(cycle) = dfs(m, &self.macros, &mut color, &mut stack) {
                    let names: Vec<_> = cycle
                        .iter()
                        .map(|i| self.macro_decls[*i].0.clone())
                        .collect();
                    return Err(ParseError::RecursiveMacro {
                        cycle: names.join(" -> "),
                    });
                }
            }
        }
        Ok(())
    }
}

fn arith_type(op: BinOp, l: Type, r: Type) -> Option<Type> {
    use Type::*;
    match (op, l, r) {
        (_, Int, Int) => Some(Int),
        (_, Duration, Duration) => Some(Duration),
        (BinOp::Sub, Instant, Instant) => Some(Duration),
        (_, Instant, Duration) => Some(Instant),
        (BinOp::Add, Duration, Instant) => Some(Instant),
        _ => None,
    }
}

pub(super) fn resolve(file: AsmFile) -> Result<MachineDefinition, ParseError> {
    let mut libs = Vec::new();
    for imp in &file.imports {
        let src = crate::timelib::library_source(&imp.name).ok_or_else(|| ParseError::UnknownImport {
            name: imp.name.clone(),
            pos: imp.pos,
        })?;
        if libs.iter().any(|(n, _): &(String, AsmFile)| n == &imp.name) {
            return Err(dup(&imp.name, imp.pos));
        }
        let lib = super::parser::parse_file(src)?;
        if lib.kind != FileKind::Module || !lib.imports.is_empty() {
            return Err(invalid(&imp.name, imp.pos, "libraries must be import-free modules"));
        }
        libs.push((imp.name.clone(), lib));
    }

    let mut r = Resolver::new();
    let mut files: Vec<(Origin, &AsmFile)> = libs
        .iter()
        .map(|(n, f)| (Origin::Library(n.clone()), f))
        .collect();
    files.push((Origin::Machine, &file));

    for (o, f) in &files {
        r.signature(f, o)?;
    }
    for (o, f) in &files {
        r.functions(f, o)?;
    }
    r.allocate_locations();
    for (o, f) in &files {
        r.register_macros(f, o)?;
    }
    let mut main = None;
    for (o, f) in &files {
        let m = r.definitions(f)?;
        if *o == Origin::Machine {
            main = m;
        } else if m.is_some() {
            return Err(invalid(&f.name, Pos::default(), "libraries cannot declare a main rule"));
        }
    }
    r.check_recursion()?;
    if file.kind == FileKind::Asm && main.is_none() {
        return Err(ParseError::Syntax {
            pos: Pos {
                line: 1,
                col: 1,
            },
            expected: "a 'main rule' in the definitions".into(),
        });
    }

    for (i, f) in r.functions.iter().enumerate() {
        match f.kind {
            FunctionKind::Derived if r.derived[i].is_none() => {
                return Err(invalid(&f.name, f.pos, "derived function has no definition"))
            }
            FunctionKind::Static if r.statics[i].is_none() => {
                return Err(invalid(&f.name, f.pos, "static function has no value"))
            }
            _ => {}
        }
    }

    let timelib = if libs.iter().any(|(n, _)| n == crate::timelib::LIBRARY_NAME) {
        let f = |n: &str| match r.names.get(n) {
            Some(Symbol::Function(id)) => Some(*id),
            _ => None,
        };
        let m = |n: &str| match r.names.get(n) {
            Some(Symbol::Macro(id)) => Some(*id),
            _ => None,
        };
        let d = match r.names.get("Timer") {
            Some(Symbol::Domain(d)) => Some(*d),
            _ => None,
        };
        Some(TimeLib {
            timer_domain: d.expect("library declares Timer"),
            now: f(crate::timelib::CLOCK).expect("library declares the clock"),
            start: f("start").expect("library declares start"),
            duration: f("duration").expect("library declares duration"),
            elapsed: f("elapsed").expect("library declares elapsed"),
            expired: f("expired").expect("library declares expired"),
            reset_timer: m("r_reset_timer").expect("library declares r_reset_timer"),
            set_duration: m("r_set_duration").expect("library declares r_set_duration"),
        })
    } else {
        None
    };

    let macros: Vec<MacroRule> = r
        .macros
        .iter()
        .cloned()
        .map(|m| m.expect("every registered macro has a body"))
        .collect();

    let mut machine = MachineDefinition {
        name: file.name.clone(),
        domains: r.domains.clone(),
        functions: r.functions.clone(),
        locations: r.locations.clone(),
        loc_base: r.loc_base.clone(),
        derived: r.derived.clone(),
        statics: r.statics.clone(),
        macros,
        main,
        init: BTreeMap::new(),
        n_branches: r.n_branches,
        timelib,
        syntax: file.clone(),
        names: r.names.clone(),
    };

    // Defaults, then timer starts at the initial clock, then explicit init entries.
    for loc in machine.controlled_locs() {
        let ty = machine.loc_type(loc);
        let v = machine.default_value(ty);
        machine.init.insert(loc, v);
    }
    if let Some(init) = &file.init {
        let mut seen = Vec::new();
        for entry in &init.entries {
            let Some(Symbol::Function(fid)) = r.names.get(&entry.name).copied() else {
                return Err(unresolved(&entry.name, entry.pos));
            };
            let decl = machine.function(fid).clone();
            if decl.kind != FunctionKind::Controlled {
                return Err(invalid(&entry.name, entry.pos, "only controlled functions are initialized"));
            }
            let arg = match (&decl.param, &entry.arg) {
                (None, None) => None,
                (Some(d), Some(a)) => match r.constant(a, Type::Enum(*d))? {
                    Value::Enum(e) => Some(e.index),
                    _ => unreachable!("constant of enum type"),
                },
                _ => {
                    return Err(invalid(
                        &entry.name,
                        entry.pos,
                        format!("expects {} argument(s)", decl.arity()),
                    ))
                }
            };
            let loc = machine
                .loc_of(fid, arg)
                .ok_or_else(|| invalid(&entry.name, entry.pos, "no such location"))?;
            if seen.contains(&loc) {
                return Err(dup(&machine.loc_name(loc).to_string(), entry.pos));
            }
            seen.push(loc);
            let v = r.constant(&entry.value, decl.codomain)?;
            machine.init.insert(loc, v);
        }
    }
    Ok(machine)
}

/// Resolves a free-standing expression against a machine's signature.
pub(super) fn resolve_expr(m: &MachineDefinition, e: &ast::Expr) -> Result<(Expr, Type), ParseError> {
    let mut r = Resolver::new();
    r.domains = m.domains.clone();
    r.functions = m.functions.clone();
    r.names = m.names.clone();
    r.statics = m.statics.clone();
    r.expr(e, &[])
}
