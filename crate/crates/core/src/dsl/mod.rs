//! The textual model language: parsing, name resolution, printing and
//! static analyses (statistics, minimality lint, control-state graph).

pub mod ast;
pub mod graph;
pub(crate) mod lexer;
pub mod lint;
pub(crate) mod parser;
pub mod printer;
mod resolve;
pub mod stats;

use std::path::PathBuf;

use thiserror::Error;

use crate::machine::MachineDefinition;
use ast::Pos;

pub use graph::{export_state_graph, GraphDoc, GraphError};
pub use lint::{lint, LintReport};
pub use printer::print_file;
pub use stats::{stats, ModelStats};

/// Source text plus where it came from.
#[derive(Clone, Debug)]
pub struct SourceModel {
    pub text: String,
    pub origin: SourceOrigin,
}

#[derive(Clone, Debug)]
pub enum SourceOrigin {
    Inline,
    File(PathBuf),
}

impl SourceModel {
    pub fn inline(text: impl Into<String>) -> Self {
        SourceModel {
            text: text.into(),
            origin: SourceOrigin::Inline,
        }
    }

    pub fn from_file(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        Ok(SourceModel {
            text: std::fs::read_to_string(&path)?,
            origin: SourceOrigin::File(path),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {pos}: expected {expected}")]
    Syntax { pos: Pos, expected: String },
    #[error("duplicate declaration of '{name}' at {pos}")]
    DuplicateDeclaration { name: String, pos: Pos },
    #[error("unknown import '{name}' at {pos}")]
    UnknownImport { name: String, pos: Pos },
    #[error("unresolved symbol '{name}' at {pos}")]
    UnresolvedSymbol { name: String, pos: Pos },
    #[error("type mismatch at {pos}: expected {expected}, found {found}")]
    TypeMismatch {
        pos: Pos,
        expected: String,
        found: String,
    },
    #[error("'{name}' at {pos}: {message}")]
    Invalid {
        name: String,
        pos: Pos,
        message: String,
    },
    #[error("macro rules call each other recursively: {cycle}")]
    RecursiveMacro { cycle: String },
}

/// Parses and resolves a model source. Imports are resolved against the
/// bundled libraries; missing controlled initial values get type defaults.
pub fn parse(src: &SourceModel) -> Result<MachineDefinition, ParseError> {
    parse_str(&src.text)
}

pub fn parse_str(text: &str) -> Result<MachineDefinition, ParseError> {
    let file = parser::parse_file(text)?;
    resolve::resolve(file)
}

/// Parses and resolves one expression (e.g. a property atom) against `m`.
pub fn parse_expr(m: &MachineDefinition, text: &str) -> Result<(crate::machine::Expr, crate::value::Type), ParseError> {
    let e = parse_expr_syntax(text)?;
    resolve::resolve_expr(m, &e)
}

/// Parses one expression without resolving names.
pub fn parse_expr_syntax(text: &str) -> Result<ast::Expr, ParseError> {
    let mut p = parser::Parser::new(text)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return p.error("end of expression");
    }
    Ok(e)
}

pub fn resolve_expr(m: &MachineDefinition, e: &ast::Expr) -> Result<(crate::machine::Expr, crate::value::Type), ParseError> {
    resolve::resolve_expr(m, e)
}

/// Parses only the syntax tree, without name resolution.
pub fn parse_syntax(text: &str) -> Result<ast::AsmFile, ParseError> {
    parser::parse_file(text)
}
