//! Update-set semantics over randomly generated boolean machines, checked
//! against a naive reference interpreter.

#[path = "support/random_machine.rs"]
mod random_machine;

use proptest::prelude::*;
use random_machine::{check_permutation, check_print_parse, check_step, machine, Gen, E, R};
use ventasm::engine::{self, MachineState, MonitoredEnv};
use ventasm::{dsl, Value};

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn step_matches_oracle(g in machine()) {
        check_step(&g).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn par_is_order_insensitive(g in machine(), rotate in 0usize..4) {
        check_permutation(&g, rotate).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn print_parse_fixpoint(g in machine()) {
        check_print_parse(&g).map_err(TestCaseError::fail)?;
    }
}

#[test]
fn contradictory_par_clashes() {
    let g = Gen {
        nc: 1,
        nm: 0,
        main: R::Par(vec![R::Upd(0, E::Lit(true)), R::Upd(0, E::Lit(false))]),
        aux: R::Skip,
    };
    let m = dsl::parse_str(&g.source(&g.main)).unwrap();
    let s = MachineState::initial(&m);
    let err = engine::step(&m, &s, &MonitoredEnv::new()).unwrap_err();
    assert!(err.to_string().contains("'c0' gets both"), "{err}");
}

#[test]
fn duplicate_par_collapses() {
    let g = Gen {
        nc: 1,
        nm: 0,
        main: R::Par(vec![R::Upd(0, E::Lit(true)), R::Upd(0, E::Lit(true))]),
        aux: R::Skip,
    };
    let m = dsl::parse_str(&g.source(&g.main)).unwrap();
    let out = engine::step_detailed(&m, &MachineState::initial(&m), &MonitoredEnv::new(), None).unwrap();
    assert_eq!(out.updates.len(), 1);
    assert_eq!(out.state.get(m.loc_by_name("c0").unwrap()), Value::Bool(true));
}
