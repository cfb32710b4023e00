//! The `.a2c` pin-binding file.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::CodegenError;
use crate::machine::{FunctionKind, MachineDefinition, Origin};
use crate::value::Type;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PinMode {
    DigitalIn,
    DigitalOut,
    AnalogIn,
    AnalogOut,
}

impl PinMode {
    pub fn is_input(self) -> bool {
        matches!(self, PinMode::DigitalIn | PinMode::AnalogIn)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub mode: PinMode,
    pub function: String,
    pub pin: String,
    /// Literal driven LOW on a digital output; defaults to the first
    /// literal (`false` for Booleans).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PinConfig {
    pub arduino_version: String,
    pub step_time: u64,
    pub bindings: Vec<Binding>,
}

fn default_mode(kind: FunctionKind, ty: Type) -> PinMode {
    match (kind, ty) {
        (FunctionKind::Monitored, Type::Int) => PinMode::AnalogIn,
        (FunctionKind::Monitored, _) => PinMode::DigitalIn,
        (_, Type::Int) => PinMode::AnalogOut,
        _ => PinMode::DigitalOut,
    }
}

/// A skeleton listing every controlled and then every monitored function
/// of the machine itself, with empty pins.
pub fn generate_pin_config(m: &MachineDefinition) -> PinConfig {
    let mut bindings = Vec::new();
    for kind in [FunctionKind::Controlled, FunctionKind::Monitored] {
        for f in &m.functions {
            if f.kind == kind && f.origin == Origin::Machine && f.param.is_none() {
                bindings.push(Binding {
                    mode: default_mode(kind, f.codomain),
                    function: f.name.clone(),
                    pin: String::new(),
                    low: None,
                });
            }
        }
    }
    PinConfig {
        arduino_version: "UNO".into(),
        step_time: 0,
        bindings,
    }
}

impl PinConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pin config serializes")
    }

    /// Parses and validates a completed (or partial) config against `m`.
    pub fn from_json(m: &MachineDefinition, text: &str) -> Result<Self, CodegenError> {
        let cfg: PinConfig =
            serde_json::from_str(text).map_err(|e| CodegenError::InvalidPinConfig(e.to_string()))?;
        cfg.validate(m)?;
        Ok(cfg)
    }

    pub fn validate(&self, m: &MachineDefinition) -> Result<(), CodegenError> {
        let bad = |msg: String| Err(CodegenError::InvalidPinConfig(msg));
        let mut pins = HashSet::new();
        let mut funcs = HashSet::new();
        for b in &self.bindings {
            let Some(f) = m.function_id(&b.function).map(|id| m.function(id)) else {
                return bad(format!("unknown function '{}'", b.function));
            };
            if f.param.is_some() {
                return bad(format!("'{}' is not nullary", b.function));
            }
            let ok = match f.kind {
                FunctionKind::Monitored => b.mode.is_input(),
                FunctionKind::Controlled => !b.mode.is_input(),
                _ => false,
            };
            if !ok {
                return bad(format!("{:?} does not suit {} '{}'", b.mode, f.kind.keyword(), b.function));
            }
            let analog = matches!(b.mode, PinMode::AnalogIn | PinMode::AnalogOut);
            if analog != (f.codomain == Type::Int) {
                return bad(format!("'{}' needs a {} pin", b.function, if analog { "digital" } else { "analog" }));
            }
            if let Some(low) = &b.low {
                let valid = match f.codomain {
                    Type::Bool => low == "true" || low == "false",
                    ty => m.parse_value(ty, low).is_some(),
                };
                if !valid {
                    return bad(format!("'{low}' is not a value of '{}'", b.function));
                }
            }
            if !funcs.insert(b.function.as_str()) {
                return bad(format!("'{}' is bound twice", b.function));
            }
            if !b.pin.is_empty() && !pins.insert(b.pin.as_str()) {
                return bad(format!("pin {} is bound twice", b.pin));
            }
        }
        Ok(())
    }
}
