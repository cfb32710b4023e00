use std::time::Instant;

use ventasm::engine::{run, ScriptedInputs};
use ventasm::models::{self, load};
use ventasm::parse_str;
use ventasm::verify::{
    build_ts, check_invariant, check_on, parse_property, parse_property_file, AbstractionConfig, PropertyForm,
    VerifyError,
};

fn cfg() -> AbstractionConfig {
    AbstractionConfig::default()
}

#[test]
fn level0_has_exactly_the_five_control_states() {
    let m = load(0).unwrap();
    let ts = build_ts(&m, &cfg()).unwrap();
    assert_eq!(ts.len(), 5);
}

#[test]
fn self_loop_without_inputs_is_one_state_one_edge() {
    let m = parse_str("asm Loop\nsignature:\n controlled x: Boolean\ndefinitions:\n main rule r_Main = x := x\ndefault init s0:\n function x = true\n").unwrap();
    let ts = build_ts(&m, &cfg()).unwrap();
    assert_eq!((ts.len(), ts.edge_count()), (1, 1));
}

#[test]
fn level1_safety_properties_hold() {
    let m = load(1).unwrap();
    let t0 = Instant::now();
    let props = parse_property_file(&m, models::SAFETY_PROPERTIES).unwrap();
    assert_eq!(props.len(), 2);
    for p in &props {
        assert!(check_invariant(&m, p, &cfg()).unwrap().is_verified(), "{p}");
    }
    assert!(t0.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn level1_every_reachable_state_has_distinct_valves() {
    let m = load(1).unwrap();
    let ts = build_ts(&m, &cfg()).unwrap();
    let (i, o) = (m.loc_by_name("iValve").unwrap(), m.loc_by_name("oValve").unwrap());
    for id in 0..ts.len() {
        assert_ne!(ts.value(id, i), ts.value(id, o));
    }
}

#[test]
fn level2_valve_exclusion_fails_with_replayable_pause_counterexample() {
    let m = load(2).unwrap();
    let p = parse_property(&m, "not f(iValve = oValve)").unwrap();
    let out = check_invariant(&m, &p, &cfg()).unwrap();
    let cex = out.counterexample().expect("property must fail");
    assert!(!cex.abstract_only);
    assert_eq!(cex.trace.len(), cex.violated_at);
    let last = cex.trace.last();
    let phase = last.show(&m, "phase").unwrap();
    assert!(phase == "INPAUSE" || phase == "EXPAUSE", "{phase}");
    assert_eq!(last.show(&m, "iValve"), last.show(&m, "oValve"));

    // Replaying the recorded inputs through the engine reproduces the state.
    let mut inputs = ScriptedInputs::new(cex.trace.inputs.clone());
    let replay = run(&m, &mut inputs, cex.trace.len()).unwrap();
    assert_eq!(replay.last(), last);
    assert!(!p.holds(&m, replay.last().values()).unwrap());
}

#[test]
fn pause_properties_hold_on_levels_2_and_3() {
    for level in [2, 3] {
        let m = load(level).unwrap();
        let ts = build_ts(&m, &cfg()).unwrap();
        for p in parse_property_file(&m, models::PAUSE_PROPERTIES).unwrap() {
            assert!(check_on(&m, &ts, &p).unwrap().is_verified(), "level {level}: {p}");
        }
    }
}

#[test]
fn verbatim_pause_formula_is_accepted_everywhere() {
    for level in [2, 3] {
        let m = load(level).unwrap();
        let p = parse_property_file(&m, models::PAUSE_PROPERTY_VERBATIM).unwrap();
        assert!(check_invariant(&m, &p[0], &cfg()).unwrap().is_verified());
    }
}

#[test]
fn property_syntax() {
    let m = load(1).unwrap();
    assert!(matches!(parse_property(&m, "not f(iValve=oValve)").unwrap().form, PropertyForm::Never(_)));
    assert!(matches!(parse_property(&m, "g(true)").unwrap().form, PropertyForm::Always(_)));
    assert!(matches!(
        parse_property(&m, "LTLSPEC g(state = PCV_STATE implies true)").unwrap().form,
        PropertyForm::AlwaysImplies(..)
    ));
    assert_eq!(
        parse_property(&m, "g(x implies y)").unwrap_err(),
        VerifyError::UnknownAtom("x".into())
    );
    assert!(matches!(parse_property(&m, "g(state)"), Err(VerifyError::Syntax(_))));
    assert!(matches!(parse_property(&m, "f(true)"), Err(VerifyError::Syntax(_))));
    assert!(matches!(
        parse_property(&m, "g(stopRequested)"),
        Err(VerifyError::NonControlledAtom(_))
    ));
    let err = parse_property_file(&m, "# ok\ng(true)\ng(nope)\n").unwrap_err();
    assert!(matches!(err, VerifyError::AtLine { line: 3, .. }));
}

#[test]
fn budget_is_enforced() {
    let m = load(1).unwrap();
    let err = build_ts(&m, &cfg().with_budget(3)).unwrap_err();
    assert_eq!(err, VerifyError::StateSpaceBudgetExceeded { budget: 3 });
}

/// Every state reachable with a real clock has an abstract counterpart.
#[test]
fn free_boolean_over_approximates_bounded_clock() {
    for level in [0, 1] {
        let m = load(level).unwrap();
        let abs = build_ts(&m, &cfg()).unwrap();
        let conc = build_ts(&m, &AbstractionConfig::bounded_clock(1000, 20_000)).unwrap();
        let names: Vec<_> = abs.tracked.clone();
        for id in 0..conc.len() {
            let projected: Vec<_> = names.iter().map(|l| conc.value(id, *l).unwrap()).collect();
            assert!(abs.find(&projected).is_some(), "level {level}: {:?}", conc.render_state(&m, id));
        }
    }
}

#[test]
fn strengthening_is_monotone() {
    let m = load(2).unwrap();
    let ts = build_ts(&m, &cfg()).unwrap();
    let strong = parse_property(&m, "g(state = VENTILATIONOFF implies (iValve = CLOSED and oValve = OPEN))").unwrap();
    let weak = parse_property(&m, "g(state = VENTILATIONOFF implies iValve = CLOSED)").unwrap();
    assert!(check_on(&m, &ts, &strong).unwrap().is_verified());
    assert!(check_on(&m, &ts, &weak).unwrap().is_verified());
}
