//! C++ generation: a double-buffered controller class, the pin-binding
//! skeleton, and the microcontroller runtime (hardware I/O and loop).

mod cpp;
mod pins;
mod runtime;

use thiserror::Error;

pub use cpp::{generate_source, SourceBundle};
pub use pins::{generate_pin_config, Binding, PinConfig, PinMode};
pub use runtime::{generate_runtime, RuntimeBundle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodegenError {
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    #[error("pin config: {0}")]
    InvalidPinConfig(String),
    #[error("pin config is incomplete: '{0}' has no pin")]
    IncompletePinConfig(String),
}

/// C++ lvalue of a location, without the buffer slot (`start[timerRm]`).
pub fn lvalue_of(m: &crate::MachineDefinition, l: crate::machine::LocId) -> String {
    cpp::lvalue(m, l)
}

/// C++ literal for a value.
pub fn value_of(m: &crate::MachineDefinition, v: &crate::Value) -> String {
    cpp::cpp_value(m, v)
}

/// Instance name used by generated tests and loops (`mvmcontroller03`).
pub fn instance_name(m: &crate::MachineDefinition) -> String {
    m.name.to_lowercase()
}
