//! Syntax tree of the model language, as written. Names are unresolved.

use crate::machine::FunctionKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    Asm,
    Module,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsmFile {
    pub kind: FileKind,
    pub name: String,
    pub imports: Vec<Import>,
    pub signature: Vec<Decl>,
    pub definitions: Vec<Definition>,
    pub init: Option<InitSection>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Import {
    pub name: String,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decl {
    EnumDomain {
        name: String,
        literals: Vec<String>,
        pos: Pos,
    },
    AbstractDomain {
        name: String,
        pos: Pos,
    },
    Function {
        name: String,
        kind: FunctionKind,
        param: Option<String>,
        codomain: String,
        pos: Pos,
    },
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::EnumDomain { name, .. }
            | Decl::AbstractDomain { name, .. }
            | Decl::Function { name, .. } => name,
        }
    }

    pub fn pos(&self) -> Pos {
        match self {
            Decl::EnumDomain { pos, .. }
            | Decl::AbstractDomain { pos, .. }
            | Decl::Function { pos, .. } => *pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub domain: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Definition {
    Function(FunctionDef),
    Rule(RuleDef),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub body: Expr,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleDef {
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub body: Rule,
    pub is_main: bool,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitSection {
    pub name: String,
    pub entries: Vec<InitEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitEntry {
    pub name: String,
    pub arg: Option<Expr>,
    pub value: Expr,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rule {
    Update {
        target: Term,
        value: Expr,
        pos: Pos,
    },
    Par {
        rules: Vec<Rule>,
        pos: Pos,
    },
    If {
        cond: Expr,
        then: Box<Rule>,
        otherwise: Option<Box<Rule>>,
        pos: Pos,
    },
    Call {
        name: String,
        args: Vec<Expr>,
        pos: Pos,
    },
    Skip {
        pos: Pos,
    },
}

impl Rule {
    pub fn pos(&self) -> Pos {
        match self {
            Rule::Update { pos, .. }
            | Rule::Par { pos, .. }
            | Rule::If { pos, .. }
            | Rule::Call { pos, .. }
            | Rule::Skip { pos } => *pos,
        }
    }
}

/// Left-hand side of an update: a function name with an optional argument.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub name: String,
    pub arg: Option<Box<Expr>>,
    pub pos: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeUnit {
    Millis,
    Secs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    And,
    Or,
    Implies,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Implies => "implies",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(&self) -> u8 {
        match self {
            BinOp::Implies => 1,
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Bool(bool, Pos),
    /// Integer literal, or a duration literal when `unit` is set. `text` keeps the digits.
    Number {
        text: String,
        unit: Option<TimeUnit>,
        pos: Pos,
    },
    Ident {
        name: String,
        args: Vec<Expr>,
        pos: Pos,
    },
    Param(String, Pos),
    Not(Box<Expr>, Pos),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        pos: Pos,
    },
}

impl Expr {
    pub fn pos(&self) -> Pos {
        match self {
            Expr::Bool(_, pos)
            | Expr::Number { pos, .. }
            | Expr::Ident { pos, .. }
            | Expr::Param(_, pos)
            | Expr::Not(_, pos)
            | Expr::Binary { pos, .. } => *pos,
        }
    }
}

/// Position-erasure used to compare trees structurally.
pub trait StripPositions {
    fn strip_positions(&self) -> Self;
}

const Z: Pos = Pos { line: 0, col: 0 };

impl StripPositions for Expr {
    fn strip_positions(&self) -> Self {
        match self {
            Expr::Bool(b, _) => Expr::Bool(*b, Z),
            Expr::Number { text, unit, .. } => Expr::Number {
                text: text.clone(),
                unit: *unit,
                pos: Z,
            },
            Expr::Ident { name, args, .. } => Expr::Ident {
                name: name.clone(),
                args: args.iter().map(|a| a.strip_positions()).collect(),
                pos: Z,
            },
            Expr::Param(n, _) => Expr::Param(n.clone(), Z),
            Expr::Not(e, _) => Expr::Not(Box::new(e.strip_positions()), Z),
            Expr::Binary { op, lhs, rhs, .. } => Expr::Binary {
                op: *op,
                lhs: Box::new(lhs.strip_positions()),
                rhs: Box::new(rhs.strip_positions()),
                pos: Z,
            },
        }
    }
}

impl StripPositions for Rule {
    fn strip_positions(&self) -> Self {
        match self {
            Rule::Update { target, value, .. } => Rule::Update {
                target: Term {
                    name: target.name.clone(),
                    arg: target.arg.as_ref().map(|a| Box::new(a.strip_positions())),
                    pos: Z,
                },
                value: value.strip_positions(),
                pos: Z,
            },
            Rule::Par { rules, .. } => Rule::Par {
                rules: rules.iter().map(|r| r.strip_positions()).collect(),
                pos: Z,
            },
            Rule::If {
                cond,
                then,
                otherwise,
                ..
            } => Rule::If {
                cond: cond.strip_positions(),
                then: Box::new(then.strip_positions()),
                otherwise: otherwise.as_ref().map(|r| Box::new(r.strip_positions())),
                pos: Z,
            },
            Rule::Call { name, args, .. } => Rule::Call {
                name: name.clone(),
                args: args.iter().map(|a| a.strip_positions()).collect(),
                pos: Z,
            },
            Rule::Skip { .. } => Rule::Skip { pos: Z },
        }
    }
}

impl StripPositions for AsmFile {
    fn strip_positions(&self) -> Self {
        AsmFile {
            kind: self.kind,
            name: self.name.clone(),
            imports: self
                .imports
                .iter()
                .map(|i| Import {
                    name: i.name.clone(),
                    pos: Z,
                })
                .collect(),
            signature: self
                .signature
                .iter()
                .map(|d| match d {
                    Decl::EnumDomain { name, literals, .. } => Decl::EnumDomain {
                        name: name.clone(),
                        literals: literals.clone(),
                        pos: Z,
                    },
                    Decl::AbstractDomain { name, .. } => Decl::AbstractDomain {
                        name: name.clone(),
                        pos: Z,
                    },
                    Decl::Function {
                        name,
                        kind,
                        param,
                        codomain,
                        ..
                    } => Decl::Function {
                        name: name.clone(),
                        kind: *kind,
                        param: param.clone(),
                        codomain: codomain.clone(),
                        pos: Z,
                    },
                })
                .collect(),
            definitions: self
                .definitions
                .iter()
                .map(|d| match d {
                    Definition::Function(f) => Definition::Function(FunctionDef {
                        name: f.name.clone(),
                        params: f.params.clone(),
                        body: f.body.strip_positions(),
                        pos: Z,
                    }),
                    Definition::Rule(r) => Definition::Rule(RuleDef {
                        name: r.name.clone(),
                        params: r.params.clone(),
                        body: r.body.strip_positions(),
                        is_main: r.is_main,
                        pos: Z,
                    }),
                })
                .collect(),
            init: self.init.as_ref().map(|i| InitSection {
                name: i.name.clone(),
                entries: i
                    .entries
                    .iter()
                    .map(|e| InitEntry {
                        name: e.name.clone(),
                        arg: e.arg.as_ref().map(|a| a.strip_positions()),
                        value: e.value.strip_positions(),
                        pos: Z,
                    })
                    .collect(),
            }),
        }
    }
}
