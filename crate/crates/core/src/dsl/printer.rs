//! Pretty printer producing source that re-parses to the same tree.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn print_file(file: &AsmFile) -> String {
    let mut out = String::new();
    let kw = match file.kind {
        FileKind::Asm => "asm",
        FileKind::Module => "module",
    };
    let _ = writeln!(out, "{kw} {}", file.name);
    for imp in &file.imports {
        let _ = writeln!(out, "import {}", imp.name);
    }
    out.push_str("\nsignature:\n");
    for d in &file.signature {
        out.push_str(INDENT);
        match d {
            Decl::EnumDomain { name, literals, .. } => {
                let _ = writeln!(out, "enum domain {name} = {{{}}}", literals.join(" | "));
            }
            Decl::AbstractDomain { name, .. } => {
                let _ = writeln!(out, "abstract domain {name}");
            }
            Decl::Function {
                name,
                kind,
                param,
                codomain,
                ..
            } => {
                let _ = match param {
                    Some(p) => writeln!(out, "{} {name}: {p} -> {codomain}", kind.keyword()),
                    None => writeln!(out, "{} {name}: {codomain}", kind.keyword()),
                };
            }
        }
    }
    out.push_str("\ndefinitions:\n");
    for d in &file.definitions {
        match d {
            Definition::Function(f) => {
                let _ = writeln!(
                    out,
                    "{INDENT}function {}{} = {}",
                    f.name,
                    params(&f.params),
                    print_expr(&f.body)
                );
            }
            Definition::Rule(r) => {
                let head = if r.is_main { "main rule" } else { "rule" };
                let _ = write!(out, "\n{INDENT}{head} {}{} =\n", r.name, params(&r.params));
                print_rule(&mut out, &r.body, 2);
            }
        }
    }
    if let Some(init) = &file.init {
        let _ = writeln!(out, "\ndefault init {}:", init.name);
        for e in &init.entries {
            let arg = e
                .arg
                .as_ref()
                .map(|a| format!("({})", print_expr(a)))
                .unwrap_or_default();
            let _ = writeln!(out, "{INDENT}function {}{arg} = {}", e.name, print_expr(&e.value));
        }
    }
    out
}

fn params(ps: &[ParamDecl]) -> String {
    if ps.is_empty() {
        return String::new();
    }
    let inner: Vec<_> = ps
        .iter()
        .map(|p| format!("${} in {}", p.name, p.domain))
        .collect();
    format!("({})", inner.join(", "))
}

fn pad(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

pub fn print_rule(out: &mut String, r: &Rule, depth: usize) {
    pad(out, depth);
    match r {
        Rule::Skip { .. } => out.push_str("skip\n"),
        Rule::Update { target, value, .. } => {
            let arg = target
                .arg
                .as_ref()
                .map(|a| format!("({})", print_expr(a)))
                .unwrap_or_default();
            let _ = writeln!(out, "{}{arg} := {}", target.name, print_expr(value));
        }
        Rule::Call { name, args, .. } => {
            let args: Vec<_> = args.iter().map(print_expr).collect();
            let _ = writeln!(out, "{name}[{}]", args.join(", "));
        }
        Rule::Par { rules, .. } => {
            out.push_str("par\n");
            for sub in rules {
                print_rule(out, sub, depth + 1);
            }
            pad(out, depth);
            out.push_str("endpar\n");
        }
        Rule::If {
            cond,
            then,
            otherwise,
            ..
        } => {
            let _ = writeln!(out, "if {} then", print_expr(cond));
            print_rule(out, then, depth + 1);
            if let Some(o) = otherwise {
                pad(out, depth);
                out.push_str("else\n");
                print_rule(out, o, depth + 1);
            }
            pad(out, depth);
            out.push_str("endif\n");
        }
    }
}

/// Renders an expression with the minimum parentheses needed to re-parse it.
pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Bool(b, _) => b.to_string(),
        Expr::Number { text, unit, .. } => match unit {
            None => text.clone(),
            Some(TimeUnit::Millis) => format!("{text}ms"),
            Some(TimeUnit::Secs) => format!("{text}s"),
        },
        Expr::Param(n, _) => format!("${n}"),
        Expr::Ident { name, args, .. } => {
            if args.is_empty() {
                name.clone()
            } else {
                let a: Vec<_> = args.iter().map(print_expr).collect();
                format!("{name}({})", a.join(", "))
            }
        }
        Expr::Not(inner, _) => match inner.as_ref() {
            Expr::Binary { op, .. } if op.precedence() < 4 => {
                format!("not ({})", print_expr(inner))
            }
            Expr::Not(..) => format!("not ({})", print_expr(inner)),
            _ => format!("not {}", print_expr(inner)),
        },
        Expr::Binary { op, lhs, rhs, .. } => {
            let prec = op.precedence();
            let l = child(lhs, prec, *op, true);
            let r = child(rhs, prec, *op, false);
            format!("{l} {} {r}", op.symbol())
        }
    }
}

fn is_cmp(op: BinOp) -> bool {
    op.precedence() == 5
}

fn child(e: &Expr, parent: u8, pop: BinOp, left: bool) -> String {
    let s = print_expr(e);
    let wrap = match e {
        Expr::Binary { op, .. } => {
            let p = op.precedence();
            if p != parent {
                p < parent
            } else if is_cmp(pop) {
                true
            } else if pop == BinOp::Implies {
                left
            } else {
                !left
            }
        }
        // `not` swallows everything binding tighter than `and`.
        Expr::Not(..) => parent >= 4,
        _ => false,
    };
    if wrap {
        format!("({s})")
    } else {
        s
    }
}
