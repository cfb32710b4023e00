//! Executable abstract-state-machine workbench for a pressure-mode
//! ventilator controller.

pub mod codegen;
pub mod dsl;
pub mod engine;
pub mod lung;
pub mod machine;
pub mod models;
pub mod testgen;
pub mod timelib;
pub mod refine;
pub mod scenario;
pub mod service;
pub mod value;
pub mod verify;

pub use dsl::{parse, parse_str, ParseError, SourceModel};
pub use machine::MachineDefinition;
pub use value::{Type, Value};
