//! Model dimensions: functions by kind and rule counts.

use serde::Serialize;

use crate::machine::{FunctionKind, MachineDefinition, Origin};

/// Counts over the machine's own declarations; imported libraries are excluded.
///
/// `n_rules_including_nested` counts each rule declaration plus every
/// update, `par`, `if` and macro-call node inside its body.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelStats {
    pub n_monitored: usize,
    pub n_controlled: usize,
    pub n_derived: usize,
    pub n_static: usize,
    pub n_rule_declarations: usize,
    pub n_rules_including_nested: usize,
}

pub fn stats(machine: &MachineDefinition) -> ModelStats {
    let mut s = ModelStats::default();
    for f in machine.functions.iter().filter(|f| f.origin == Origin::Machine) {
        match f.kind {
            FunctionKind::Monitored => s.n_monitored += 1,
            FunctionKind::Controlled => s.n_controlled += 1,
            FunctionKind::Derived => s.n_derived += 1,
            FunctionKind::Static => s.n_static += 1,
        }
    }
    for m in machine.macros.iter().filter(|m| m.origin == Origin::Machine) {
        s.n_rule_declarations += 1;
        s.n_rules_including_nested += 1 + m.body.node_count();
    }
    s
}

/// Statistics of the bundled time library taken on its own.
pub fn library_stats() -> ModelStats {
    let lib = super::parse_str(crate::timelib::TIME_LIBRARY)
        .expect("bundled time library parses");
    stats(&lib)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_signature_is_all_zero() {
        let m = super::super::parse_str("module Empty signature: definitions:").unwrap();
        assert_eq!(stats(&m), ModelStats::default());
    }

    #[test]
    fn time_library_row() {
        let s = library_stats();
        assert_eq!(
            (s.n_monitored, s.n_controlled, s.n_derived, s.n_static, s.n_rule_declarations),
            (1, 2, 2, 0, 2)
        );
    }
}
