//! Hardware I/O unit and the Arduino-style loop.

use std::fmt::Write as _;

use serde::Serialize;

use super::cpp::cpp_value;
use super::{instance_name, CodegenError, PinConfig, PinMode};
use crate::machine::MachineDefinition;
use crate::value::{EnumValue, Type, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuntimeBundle {
    pub hardware_name: String,
    pub hardware: String,
    pub loop_name: String,
    pub loop_unit: String,
}

/// `D8` is digital pin 8; analog names such as `A5` are kept.
fn pin_expr(pin: &str) -> String {
    match pin.strip_prefix('D') {
        Some(n) if !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()) => n.to_string(),
        _ => pin.to_string(),
    }
}

/// The value driven LOW on a digital output.
fn low_value(m: &MachineDefinition, ty: Type, low: Option<&str>) -> Value {
    match (ty, low) {
        (Type::Bool, Some(l)) => Value::Bool(l == "true"),
        (Type::Enum(_), Some(l)) => m.parse_value(ty, l).unwrap_or_else(|| m.default_value(ty)),
        _ => m.default_value(ty),
    }
}

pub fn generate_runtime(m: &MachineDefinition, cfg: &PinConfig) -> Result<RuntimeBundle, CodegenError> {
    cfg.validate(m)?;
    if let Some(b) = cfg.bindings.iter().find(|b| b.pin.is_empty()) {
        return Err(CodegenError::IncompletePinConfig(b.function.clone()));
    }
    let class = &m.name;
    let mut hw = String::new();
    let _ = writeln!(hw, "// Generated from {class}.asm and its pin config. Do not edit.");
    let _ = writeln!(hw, "#include <Arduino.h>\n#include \"{class}.h\"\n");
    let _ = writeln!(hw, "void {class}::getInputs(){{");
    if m.clock_loc().is_some() {
        hw.push_str("\tmCurrTimeSecs = millis();\n");
    }
    for b in cfg.bindings.iter().filter(|b| b.mode.is_input()) {
        let f = m.function(m.function_id(&b.function).expect("validated"));
        let pin = pin_expr(&b.pin);
        let line = match (b.mode, f.codomain) {
            (PinMode::AnalogIn, _) => format!("{} = analogRead({pin});", b.function),
            (_, Type::Bool) => format!("{} = (digitalRead({pin}) == HIGH);", b.function),
            (_, ty @ Type::Enum(d)) => {
                let lo = m.default_value(ty);
                let hi = Value::Enum(EnumValue {
                    domain: d,
                    index: u32::from(m.domain(d).elements.len() > 1),
                });
                format!(
                    "{} = (digitalRead({pin}) == HIGH) ? {} : {};",
                    b.function,
                    cpp_value(m, &hi),
                    cpp_value(m, &lo)
                )
            }
            _ => format!("{} = digitalRead({pin});", b.function),
        };
        let _ = writeln!(hw, "\t{line}");
    }
    hw.push_str("}\n\n");
    let _ = writeln!(hw, "void {class}::setOutputs(){{");
    for b in cfg.bindings.iter().filter(|b| !b.mode.is_input()) {
        let f = m.function(m.function_id(&b.function).expect("validated"));
        let name = &b.function;
        let pin = pin_expr(&b.pin);
        let _ = writeln!(hw, "\tif ({name}[0] != {name}[1]){{");
        if b.mode == PinMode::AnalogOut {
            let _ = writeln!(hw, "\t\tanalogWrite({pin}, {name}[1]);");
        } else {
            let low = low_value(m, f.codomain, b.low.as_deref());
            let _ = writeln!(hw, "\t\tif({name}[1] == {})", cpp_value(m, &low));
            let _ = writeln!(hw, "\t\t\tdigitalWrite({pin}, LOW);\n\t\telse\n\t\t\tdigitalWrite({pin}, HIGH);");
        }
        hw.push_str("\t}\n");
    }
    hw.push_str("}\n");

    let inst = instance_name(m);
    let mut ino = String::new();
    let _ = writeln!(ino, "#include \"{class}.h\"\n");
    ino.push_str("void setup(){\n");
    for b in cfg.bindings.iter().filter(|b| !b.mode.is_input()) {
        let _ = writeln!(ino, "\tpinMode({}, OUTPUT);", pin_expr(&b.pin));
    }
    for b in cfg.bindings.iter().filter(|b| b.mode.is_input()) {
        let _ = writeln!(ino, "\tpinMode({}, INPUT);", pin_expr(&b.pin));
    }
    ino.push_str("}\n\n");
    let _ = writeln!(ino, "{class} {inst};\n");
    ino.push_str("void loop(){\n");
    for call in ["getInputs", "r_Main", "setOutputs", "fireUpdateSet"] {
        let _ = writeln!(ino, "\t{inst}.{call}();");
    }
    if cfg.step_time > 0 {
        let _ = writeln!(ino, "\tdelay({});", cfg.step_time);
    }
    ino.push_str("}\n");
    Ok(RuntimeBundle {
        hardware_name: "hw.cpp".into(),
        hardware: hw,
        loop_name: format!("{class}.ino"),
        loop_unit: ino,
    })
}
