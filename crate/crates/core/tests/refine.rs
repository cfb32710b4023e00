use std::collections::HashSet;
use std::time::Instant;

use ventasm::engine::{run, RandomInputs};
use ventasm::models::{self, load};
use ventasm::refine::{check_refinement, default_glues, GlueMap, RefineError, RefinementVerdict};
use ventasm::verify::{build_ts, AbstractionConfig, TransitionSystem};
use ventasm::{parse_str, MachineDefinition};

fn cfg() -> AbstractionConfig {
    AbstractionConfig::default()
}

fn mutant_level1() -> MachineDefinition {
    let src = models::source(1).unwrap();
    let start = src.find("    rule r_runPCVInsp =").unwrap();
    let end = start + src[start..].find("\n\n").unwrap();
    let mutated = format!(
        "{}    rule r_runPCVInsp =\n        par\n            r_latchStop[]\n            state := PSV_STATE\n        endpar{}",
        &src[..start],
        &src[end..]
    );
    parse_str(&mutated).unwrap()
}

/// Glue names rendered from a transition-system state of `m`.
fn project(m: &MachineDefinition, ts: &TransitionSystem, id: usize, glue: &GlueMap) -> Vec<String> {
    glue.linked
        .iter()
        .map(|n| m.display_value(&ts.value(id, m.loc_by_name(n).unwrap()).unwrap()))
        .collect()
}

/// Independent oracle: every refined path of length <= depth has a glue
/// projection some abstract path reproduces (0 or 1 abstract steps per
/// refined step). Returns false on the first uncovered path.
fn bounded_trace_inclusion(a: &MachineDefinition, r: &MachineDefinition, glue: &GlueMap, depth: usize) -> bool {
    let ats = build_ts(a, &cfg()).unwrap();
    let rts = build_ts(r, &cfg()).unwrap();
    let mut frontier: Vec<(usize, Vec<usize>)> = vec![(0, vec![0])];
    for _ in 0..depth {
        let mut next = Vec::new();
        let mut seen = HashSet::new();
        for (rs, set) in frontier {
            for r2 in rts.successors(rs) {
                let want = project(r, &rts, r2, glue);
                let mut s2: Vec<usize> = set
                    .iter()
                    .flat_map(|&x| std::iter::once(x).chain(ats.successors(x)))
                    .filter(|&x| project(a, &ats, x, glue) == want)
                    .collect();
                s2.sort_unstable();
                s2.dedup();
                if s2.is_empty() {
                    return false;
                }
                if seen.insert((r2, s2.clone())) {
                    next.push((r2, s2));
                }
            }
        }
        frontier = next;
    }
    true
}

#[test]
fn refinement_chain_holds_under_default_glues() {
    for ((from, to), glue) in default_glues() {
        let t0 = Instant::now();
        let res = check_refinement(&load(from).unwrap(), &load(to).unwrap(), &glue, &cfg()).unwrap();
        assert_eq!(res.verdict, RefinementVerdict::Verified, "{from}->{to} {glue}");
        assert!(t0.elapsed().as_secs() < 60);
    }
}

#[test]
fn default_glue_contents() {
    let g = default_glues();
    let get = |k| g.iter().find(|(p, _)| *p == k).unwrap().1.linked.clone();
    assert_eq!(get((0, 1)), vec!["state"]);
    assert_eq!(get((1, 2)), vec!["state"]);
    assert!(get((2, 3)).contains(&"phase".to_string()));
}

#[test]
fn every_level_refines_itself_under_full_glue() {
    for level in models::LEVELS {
        let m = load(level).unwrap();
        let res = check_refinement(&m, &m, &GlueMap::all_controlled(&m), &cfg()).unwrap();
        assert_eq!(res.verdict, RefinementVerdict::Verified, "level {level}");
    }
}

#[test]
fn unconditional_psv_jump_is_refuted_with_replayable_witness() {
    let a = load(1).unwrap();
    let r = mutant_level1();
    let glue = GlueMap::new(["state", "phase", "iValve", "oValve"]);
    assert!(!bounded_trace_inclusion(&a, &r, &glue, 6));
    let res = check_refinement(&a, &r, &glue, &cfg()).unwrap();
    assert_eq!(res.verdict, RefinementVerdict::Refuted);
    let w = res.witness.expect("witness");
    assert!(!w.abstract_only);
    let mut inputs = ventasm::engine::ScriptedInputs::new(w.trace.inputs.clone());
    let replay = run(&r, &mut inputs, w.trace.len()).unwrap();
    assert_eq!(replay.last(), w.trace.last());
    assert_eq!(w.trace.last().show(&r, "state").as_deref(), Some("PSV_STATE"));
}

#[test]
fn valves_cannot_be_glued_between_levels_1_and_2() {
    let glue = GlueMap::new(["state", "iValve", "oValve"]);
    let res = check_refinement(&load(1).unwrap(), &load(2).unwrap(), &glue, &cfg()).unwrap();
    assert_eq!(res.verdict, RefinementVerdict::Refuted);
    let w = res.witness.expect("witness");
    let last = w.trace.last();
    let m2 = load(2).unwrap();
    assert_eq!(last.show(&m2, "iValve"), last.show(&m2, "oValve"));
}

#[test]
fn glue_errors() {
    assert_eq!(GlueMap::parse("glue A -> B\n// nothing\n"), Err(RefineError::EmptyGlue));
    assert!(matches!(GlueMap::parse("state\nnot a name\n"), Err(RefineError::GlueSyntax { line: 2, .. })));
    let a = load(0).unwrap();
    let r = load(1).unwrap();
    assert!(matches!(
        check_refinement(&a, &r, &GlueMap::new(["phase"]), &cfg()),
        Err(RefineError::UnknownLocation { .. })
    ));
    assert!(matches!(
        check_refinement(&a, &r, &GlueMap::new(Vec::<String>::new()), &cfg()),
        Err(RefineError::EmptyGlue)
    ));
}

/// Random concrete runs of the refined level, projected on the glue with
/// stutter collapsed, are all abstract traces.
#[test]
fn projections_of_random_runs_are_abstract_traces() {
    for ((from, to), glue) in default_glues() {
        let a = load(from).unwrap();
        let r = load(to).unwrap();
        let ats = build_ts(&a, &cfg()).unwrap();
        for seed in 0..1000u64 {
            let trace = run(&r, &mut RandomInputs::new(seed, 250), 30).unwrap();
            let mut proj: Vec<Vec<String>> = trace
                .states
                .iter()
                .map(|s| glue.linked.iter().map(|n| s.show(&r, n).unwrap()).collect())
                .collect();
            proj.dedup();
            let mut set = vec![0usize];
            assert_eq!(project(&a, &ats, 0, &glue), proj[0]);
            for (k, want) in proj[1..].iter().enumerate() {
                // Abstract steps that keep the current projection are free.
                let mut i = 0;
                while i < set.len() {
                    for x in ats.successors(set[i]) {
                        if project(&a, &ats, x, &glue) == proj[k] && !set.contains(&x) {
                            set.push(x);
                        }
                    }
                    i += 1;
                }
                let mut next: Vec<usize> = set
                    .iter()
                    .flat_map(|&x| std::iter::once(x).chain(ats.successors(x)))
                    .filter(|&x| project(&a, &ats, x, &glue) == *want)
                    .collect();
                next.sort_unstable();
                next.dedup();
                assert!(!next.is_empty(), "{from}->{to} seed {seed}: {proj:?}");
                set = next;
            }
        }
    }
}

