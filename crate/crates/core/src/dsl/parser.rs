//! Recursive-descent parser for `.asm` sources.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::machine::FunctionKind;

const KEYWORDS: &[&str] = &[
    "asm",
    "module",
    "import",
    "signature",
    "definitions",
    "domain",
    "enum",
    "abstract",
    "dynamic",
    "monitored",
    "controlled",
    "derived",
    "static",
    "function",
    "rule",
    "macro",
    "main",
    "par",
    "endpar",
    "if",
    "then",
    "else",
    "endif",
    "skip",
    "default",
    "init",
    "not",
    "and",
    "or",
    "implies",
    "true",
    "false",
    "in",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    at: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: tokenize(src)?,
            at: 0,
        })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    pub(crate) fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn error<T>(&self, expected: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            expected: expected.into(),
        })
    }

    pub(crate) fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == kw)
    }

    pub(crate) fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    pub(crate) fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_kw(&mut self, kw: &str) -> Result<Pos, ParseError> {
        let pos = self.pos();
        if self.eat_kw(kw) {
            Ok(pos)
        } else {
            self.error(format!("'{kw}'"))
        }
    }

    pub(crate) fn expect_sym(&mut self, s: &str) -> Result<Pos, ParseError> {
        let pos = self.pos();
        if self.eat_sym(s) {
            Ok(pos)
        } else {
            self.error(format!("'{s}'"))
        }
    }

    pub(crate) fn ident(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Ident(w) if !KEYWORDS.contains(&w.as_str()) => {
                let pos = self.pos();
                self.advance();
                Ok((w, pos))
            }
            _ => self.error(what),
        }
    }

    // ---- file structure ----

    pub(crate) fn file(&mut self) -> Result<AsmFile, ParseError> {
        let kind = if self.eat_kw("asm") {
            FileKind::Asm
        } else if self.eat_kw("module") {
            FileKind::Module
        } else {
            return self.error("'asm' or 'module'");
        };
        let (name, _) = self.ident("machine name")?;
        let mut imports = Vec::new();
        while self.is_kw("import") {
            self.advance();
            let (name, pos) = self.ident("library name")?;
            imports.push(Import { name, pos });
        }
        self.expect_kw("signature")?;
        self.expect_sym(":")?;
        let mut signature = Vec::new();
        while !self.is_kw("definitions") {
            signature.extend(self.decl()?);
        }
        self.expect_kw("definitions")?;
        self.expect_sym(":")?;
        let mut definitions = Vec::new();
        while !self.at_eof() && !self.is_kw("default") {
            definitions.push(self.definition()?);
        }
        let init = if self.eat_kw("default") {
            Some(self.init_section()?)
        } else {
            None
        };
        if !self.at_eof() {
            return self.error("end of input");
        }
        Ok(AsmFile {
            kind,
            name,
            imports,
            signature,
            definitions,
            init,
        })
    }

    fn decl(&mut self) -> Result<Vec<Decl>, ParseError> {
        let pos = self.pos();
        if self.eat_kw("enum") {
            self.expect_kw("domain")?;
            let (name, _) = self.ident("domain name")?;
            self.expect_sym("=")?;
            self.expect_sym("{")?;
            let mut literals = vec![self.ident("enum literal")?.0];
            while self.eat_sym("|") || self.eat_sym(",") {
                literals.push(self.ident("enum literal")?.0);
            }
            self.expect_sym("}")?;
            return Ok(vec![Decl::EnumDomain {
                name,
                literals,
                pos,
            }]);
        }
        if self.eat_kw("abstract") {
            self.expect_kw("domain")?;
            let (name, _) = self.ident("domain name")?;
            return Ok(vec![Decl::AbstractDomain { name, pos }]);
        }
        let kind = if self.eat_kw("dynamic") {
            if self.eat_kw("monitored") {
                FunctionKind::Monitored
            } else if self.eat_kw("controlled") {
                FunctionKind::Controlled
            } else {
                return self.error("'monitored' or 'controlled'");
            }
        } else if self.eat_kw("monitored") {
            FunctionKind::Monitored
        } else if self.eat_kw("controlled") {
            FunctionKind::Controlled
        } else if self.eat_kw("derived") {
            FunctionKind::Derived
        } else if self.eat_kw("static") {
            FunctionKind::Static
        } else {
            return self.error("a declaration or 'definitions'");
        };
        let mut names = vec![self.ident("function name")?];
        while self.eat_sym(",") {
            names.push(self.ident("function name")?);
        }
        self.expect_sym(":")?;
        let (first, _) = self.ident("type name")?;
        let (param, codomain) = if self.eat_sym("->") {
            (Some(first), self.ident("type name")?.0)
        } else {
            (None, first)
        };
        Ok(names
            .into_iter()
            .map(|(name, npos)| Decl::Function {
                name,
                kind,
                param: param.clone(),
                codomain: codomain.clone(),
                pos: npos,
            })
            .collect())
    }

    fn params(&mut self) -> Result<Vec<ParamDecl>, ParseError> {
        let mut params = Vec::new();
        if self.eat_sym("(") {
            loop {
                let name = match self.peek().clone() {
                    Tok::Param(n) => {
                        self.advance();
                        n
                    }
                    _ => return self.error("'$' parameter"),
                };
                self.expect_kw("in")?;
                let (domain, _) = self.ident("parameter domain")?;
                params.push(ParamDecl { name, domain });
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(")")?;
        }
        Ok(params)
    }

    fn definition(&mut self) -> Result<Definition, ParseError> {
        let pos = self.pos();
        if self.eat_kw("function") {
            let (name, _) = self.ident("function name")?;
            let params = self.params()?;
            self.expect_sym("=")?;
            let body = self.expr()?;
            return Ok(Definition::Function(FunctionDef {
                name,
                params,
                body,
                pos,
            }));
        }
        let is_main = self.eat_kw("main");
        if !is_main {
            self.eat_kw("macro");
        }
        self.expect_kw("rule")?;
        let (name, _) = self.ident("rule name")?;
        let params = self.params()?;
        self.expect_sym("=")?;
        let body = self.rule()?;
        Ok(Definition::Rule(RuleDef {
            name,
            params,
            body,
            is_main,
            pos,
        }))
    }

    fn init_section(&mut self) -> Result<InitSection, ParseError> {
        self.expect_kw("init")?;
        let (name, _) = self.ident("init state name")?;
        self.expect_sym(":")?;
        let mut entries = Vec::new();
        while self.is_kw("function") {
            let pos = self.pos();
            self.advance();
            let (name, _) = self.ident("function name")?;
            let arg = if self.eat_sym("(") {
                let a = self.expr()?;
                self.expect_sym(")")?;
                Some(a)
            } else {
                None
            };
            self.expect_sym("=")?;
            let value = self.expr()?;
            entries.push(InitEntry {
                name,
                arg,
                value,
                pos,
            });
        }
        Ok(InitSection { name, entries })
    }

    // ---- rules ----

    pub(crate) fn rule(&mut self) -> Result<Rule, ParseError> {
        let pos = self.pos();
        if self.eat_kw("par") {
            let mut rules = Vec::new();
            while !self.is_kw("endpar") {
                if self.at_eof() {
                    return self.error("'endpar'");
                }
                rules.push(self.rule()?);
            }
            self.advance();
            if rules.is_empty() {
                return Err(ParseError::Syntax {
                    pos,
                    expected: "at least one rule inside par".into(),
                });
            }
            return Ok(Rule::Par { rules, pos });
        }
        if self.eat_kw("if") {
            let cond = self.expr()?;
            self.expect_kw("then")?;
            let then = Box::new(self.rule()?);
            let otherwise = if self.eat_kw("else") {
                Some(Box::new(self.rule()?))
            } else {
                None
            };
            self.expect_kw("endif")?;
            return Ok(Rule::If {
                cond,
                then,
                otherwise,
                pos,
            });
        }
        if self.eat_kw("skip") {
            return Ok(Rule::Skip { pos });
        }
        let (name, _) = self.ident("a rule")?;
        if self.eat_sym("[") {
            let mut args = Vec::new();
            if !self.is_sym("]") {
                args.push(self.expr()?);
                while self.eat_sym(",") {
                    args.push(self.expr()?);
                }
            }
            self.expect_sym("]")?;
            return Ok(Rule::Call { name, args, pos });
        }
        let arg = if self.eat_sym("(") {
            let a = self.expr()?;
            self.expect_sym(")")?;
            Some(Box::new(a))
        } else {
            None
        };
        self.expect_sym(":=")?;
        let value = self.expr()?;
        Ok(Rule::Update {
            target: Term { name, arg, pos },
            value,
            pos,
        })
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        match self.peek() {
            Tok::Ident(w) => match w.as_str() {
                "and" => Some(BinOp::And),
                "or" => Some(BinOp::Or),
                "implies" => Some(BinOp::Implies),
                _ => None,
            },
            Tok::Sym(s) => match *s {
                "=" => Some(BinOp::Eq),
                "!=" => Some(BinOp::Ne),
                "<" => Some(BinOp::Lt),
                "<=" => Some(BinOp::Le),
                ">" => Some(BinOp::Gt),
                ">=" => Some(BinOp::Ge),
                "+" => Some(BinOp::Add),
                "-" => Some(BinOp::Sub),
                _ => None,
            },
            _ => None,
        }
    }

    /// Precedence climbing. `implies` is right-associative, comparisons do not chain.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let pos = self.pos();
            self.advance();
            let next = match op {
                BinOp::Implies => prec,
                BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => prec + 1,
                _ => prec + 1,
            };
            let rhs = self.binary(next)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                pos,
            };
            if matches!(
                op,
                BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
            ) && matches!(
                self.peek_binop(),
                Some(BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
            ) {
                return self.error("parentheses around chained comparison");
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        if self.eat_kw("not") {
            let e = self.binary(4)?;
            return Ok(Expr::Not(Box::new(e), pos));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Sym("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.advance();
                Ok(Expr::Bool(w == "true", pos))
            }
            Tok::Number { text, unit } => {
                self.advance();
                let unit = match unit.as_deref() {
                    None => None,
                    Some("ms") => Some(TimeUnit::Millis),
                    Some("s") => Some(TimeUnit::Secs),
                    Some(_) => {
                        return Err(ParseError::Syntax {
                            pos,
                            expected: "time unit 'ms' or 's'".into(),
                        })
                    }
                };
                if unit != Some(TimeUnit::Secs) && text.contains('.') {
                    return Err(ParseError::Syntax {
                        pos,
                        expected: "integer literal (fractions only with 's')".into(),
                    });
                }
                Ok(Expr::Number { text, unit, pos })
            }
            Tok::Param(name) => {
                self.advance();
                Ok(Expr::Param(name, pos))
            }
            Tok::Ident(_) => {
                let (name, pos) = self.ident("an expression")?;
                let mut args = Vec::new();
                if self.eat_sym("(") {
                    if !self.is_sym(")") {
                        args.push(self.expr()?);
                        while self.eat_sym(",") {
                            args.push(self.expr()?);
                        }
                    }
                    self.expect_sym(")")?;
                }
                Ok(Expr::Ident { name, args, pos })
            }
            _ => self.error("an expression"),
        }
    }
}

/// Parses a complete model or module source into its syntax tree.
pub fn parse_file(src: &str) -> Result<AsmFile, ParseError> {
    Parser::new(src)?.file()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_source_fails_at_origin() {
        match parse_file("") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, Pos { line: 1, col: 1 }),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn else_if_chains_nest() {
        let mut p = Parser::new(
            "if a then x := true else if b then x := false endif endif",
        )
        .unwrap();
        let r = p.rule().unwrap();
        match r {
            Rule::If {
                otherwise: Some(o), ..
            } => assert!(matches!(*o, Rule::If { .. })),
            _ => panic!(),
        }
        assert!(p.at_eof());
    }

    #[test]
    fn precedence_of_connectives() {
        let mut p = Parser::new("not a = B and c or d implies e implies f").unwrap();
        let e = p.expr().unwrap().strip_positions();
        // ((not (a = B)) and c) or d  implies (e implies f)
        match e {
            Expr::Binary {
                op: BinOp::Implies,
                lhs,
                rhs,
                ..
            } => {
                assert!(matches!(*lhs, Expr::Binary { op: BinOp::Or, .. }));
                assert!(matches!(*rhs, Expr::Binary { op: BinOp::Implies, .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chained_comparison_rejected() {
        let mut p = Parser::new("a = b = c").unwrap();
        assert!(p.expr().is_err());
    }
}
