use ventasm::engine::{run, ScriptedInputs};
use ventasm::models::{self, load, load_for_tests};
use ventasm::scenario::{
    from_counterexample, parse_scenario, run_scenario, Command, Scenario, ScenarioError, ScenarioVerdict,
};
use ventasm::verify::{check_invariant, parse_property, AbstractionConfig};

#[test]
fn pcv_start_scenario_parses_to_thirty_commands() {
    let sc = Scenario::parse(models::PCV_START_SCENARIO).unwrap();
    assert_eq!(sc.commands.len(), 30);
    assert_eq!(sc.step_count(), 6);
    assert_eq!(sc.load.as_deref(), Some("MVMController01.asm"));
    assert_eq!(Scenario::parse(&sc.to_text()).unwrap().commands.len(), 30);
}

#[test]
fn pcv_start_scenario_passes_on_levels_1_to_3() {
    for level in [1, 2, 3] {
        let m = load_for_tests(level).unwrap();
        let sc = parse_scenario(&m, models::PCV_START_SCENARIO).unwrap();
        let out = run_scenario(&m, &sc).unwrap();
        assert_eq!(out.verdict, ScenarioVerdict::Pass, "level {level}");
        assert_eq!(out.checks_passed, 20);
    }
}

#[test]
fn bare_step_and_set_on_controlled() {
    let sc = Scenario::parse("step").unwrap();
    assert!(matches!(sc.commands.as_slice(), [Command::Step { .. }]));
    let m = load(1).unwrap();
    assert!(matches!(
        parse_scenario(&m, "set state := PCV_STATE;"),
        Err(ScenarioError::SetOnControlled { line: 1, .. })
    ));
    assert!(matches!(
        parse_scenario(&m, "set nothing := true;"),
        Err(ScenarioError::UnknownLocation { .. })
    ));
    assert!(matches!(
        parse_scenario(&m, "set startupEnded := maybe;"),
        Err(ScenarioError::BadValue { .. })
    ));
    assert!(matches!(Scenario::parse("check state = ;"), Err(ScenarioError::Check { .. })));
    assert!(matches!(Scenario::parse("check state = STARTUP"), Err(ScenarioError::Syntax { .. })));
    assert!(matches!(Scenario::parse("jump;"), Err(ScenarioError::Syntax { .. })));
}

#[test]
fn initial_state_is_startup_at_every_level() {
    for level in models::LEVELS {
        let m = load(level).unwrap();
        let sc = parse_scenario(&m, "check state = STARTUP;").unwrap();
        assert!(run_scenario(&m, &sc).unwrap().passed());
    }
}

#[test]
fn output_valve_is_open_when_off() {
    let m = load(1).unwrap();
    let text = "set startupEnded := true;\nstep\nset selfTestPassed := true;\nstep\ncheck state = VENTILATIONOFF;\ncheck oValve = CLOSED;\n";
    let out = run_scenario(&m, &parse_scenario(&m, text).unwrap()).unwrap();
    assert_eq!(
        out.verdict,
        ScenarioVerdict::FailedCheck {
            index: 5,
            step: 2,
            expected: "CLOSED".into(),
            actual: "OPEN".into()
        }
    );
}

#[test]
fn scenario_runs_match_scripted_runs() {
    let m = load_for_tests(1).unwrap();
    let sc = parse_scenario(&m, models::PCV_START_SCENARIO).unwrap();
    let out = run_scenario(&m, &sc).unwrap();
    let mut inputs = ScriptedInputs::new(out.trace.inputs.clone());
    let direct = run(&m, &mut inputs, out.trace.len()).unwrap();
    assert_eq!(direct.states, out.trace.states);
    // The clock advances one second per step, starting at 1 s.
    let clocks: Vec<u64> = out.trace.states.iter().map(|s| s.clock(&m)).collect();
    assert_eq!(clocks, vec![0, 1000, 2000, 3000, 4000, 5000, 6000]);
}

#[test]
fn explicit_clock_and_persisting_inputs() {
    let m = load(1).unwrap();
    let text = "set startupEnded := true; set mCurrTimeSecs := 5;\nstep\nstep\ncheck mCurrTimeSecs = 6000ms;\ncheck startupEnded;\n";
    let out = run_scenario(&m, &parse_scenario(&m, text).unwrap()).unwrap();
    assert!(out.passed(), "{:?}", out.verdict);
}

#[test]
fn exported_counterexample_fails_at_recorded_step() {
    let m = load(2).unwrap();
    let p = parse_property(&m, "not f(iValve = oValve)").unwrap();
    let out = check_invariant(&m, &p, &AbstractionConfig::default()).unwrap();
    let cex = out.counterexample().unwrap();
    let sc = from_counterexample(&m, cex);
    let reparsed = parse_scenario(&m, &sc.to_text()).unwrap();
    match run_scenario(&m, &reparsed).unwrap().verdict {
        ScenarioVerdict::FailedCheck { step, .. } => assert_eq!(step, cex.violated_at),
        v => panic!("expected a failed check, got {v:?}"),
    }
}
