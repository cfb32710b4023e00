use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ventasm::lung::*;

fn run(p: &LungPatient, c: &VentCircuit, dt_ms: u64, total_ms: u64) -> (LungPatient, Vec<LungSample>) {
    let mut p = *p;
    let mut out = Vec::new();
    let mut t = 0;
    while t < total_ms {
        let (np, s) = step_lung(&p, c, dt_ms).unwrap();
        p = np;
        out.push(s);
        t += dt_ms;
    }
    (p, out)
}

fn inspiring() -> VentCircuit {
    VentCircuit {
        i_valve: Valve::Open,
        o_valve: Valve::Closed,
        ..VentCircuit::default()
    }
}

fn closed_form(p0: f64, target: f64, t: f64, tau: f64) -> f64 {
    target + (p0 - target) * (-t / tau).exp()
}

#[test]
fn inspiration_matches_closed_form_at_tau() {
    let (p, _) = run(&LungPatient::default(), &inspiring(), 10, 500);
    let oracle = closed_form(5.0, 20.0, 0.5, 0.5);
    assert!((oracle - 14.48).abs() < 0.01);
    assert!((p.palv - oracle).abs() / oracle < 0.002, "{} vs {oracle}", p.palv);
}

#[test]
fn expiration_starts_at_minus_one_and_a_half() {
    let p = LungPatient {
        palv: 20.0,
        ..LungPatient::default()
    };
    let (_, s) = step_lung(&p, &VentCircuit::default(), 1).unwrap();
    // Sample is taken after 1 ms; compare with the closed-form derivative.
    let expected = -1.5 * (-0.001f64 / 0.5).exp();
    assert!((s.flow - expected).abs() < 1e-3, "{}", s.flow);
    assert!((s.flow + 1.5).abs() < 0.01);
}

#[test]
fn ten_random_patients_track_the_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let r = rng.gen_range(2.0..50.0);
        let c = rng.gen_range(0.01..0.1);
        let p = LungPatient {
            resistance: r,
            compliance: c,
            ..LungPatient::default()
        };
        let tau = r * c;
        for k in [1.0, 2.0, 5.0] {
            let t_ms = (k * tau * 1000.0).round() as u64;
            let (end, _) = run(&p, &inspiring(), 1, t_ms);
            let oracle = closed_form(5.0, 20.0, t_ms as f64 / 1000.0, tau);
            assert!((end.palv - oracle).abs() / oracle < 0.01, "R={r} C={c} t={t_ms}");
        }
    }
}

#[test]
fn grid_refinement() {
    let p = LungPatient::default();
    let tau_ms = 500;
    for dt in [tau_ms / 20, tau_ms / 50] {
        let (a, _) = run(&p, &inspiring(), dt, 1000);
        let (b, _) = run(&p, &inspiring(), dt / 2, 1000);
        assert!((a.palv - b.palv).abs() / b.palv < 0.005);
    }
}

#[test]
fn convergence_after_five_tau() {
    let (_, samples) = run(&LungPatient::default(), &inspiring(), 10, 2500);
    let gaps: Vec<f64> = samples.iter().map(|s| (s.paw - s.palv).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    assert!(*gaps.last().unwrap() < 0.01 * 15.0);
}

#[test]
fn no_events_at_peep() {
    let (_, samples) = run(&LungPatient::default(), &VentCircuit::default(), 10, 1000);
    let c = VentCircuit::default();
    for i in 1..=samples.len() {
        assert!(detect_events(&samples[..i], &c).is_empty());
    }
}

#[test]
fn effort_triggers_one_drop_per_expiration() {
    let c = VentCircuit::default();
    let p = LungPatient {
        effort: Some(Effort {
            period_ms: 1000,
            magnitude: c.its + 0.1,
            duration_ms: 300,
            offset_ms: 0,
        }),
        ..LungPatient::default()
    };
    let (_, samples) = run(&p, &c, 10, 5000);
    let mut det = EventDetector::new();
    let drops = samples
        .iter()
        .filter(|s| det.observe(s, &c).contains(&LungEvent::DropPawIts))
        .count();
    assert_eq!(drops, 1);
    let first = samples.iter().position(|s| s.paw < c.peep - c.its).unwrap();
    assert!((samples[first].paw - (c.peep - c.its - 0.1)).abs() < 1e-9);
    assert!(detect_events(&samples[..=first], &c).contains(&LungEvent::DropPawIts));
    assert!(detect_events(&samples[..=first + 1], &c).is_empty());
}

#[test]
fn flow_drop_at_fraction_of_peak() {
    let c = inspiring();
    let (_, samples) = run(&LungPatient::default(), &c, 10, 1500);
    let peak = samples.iter().map(|s| s.flow).fold(0.0, f64::max);
    let mut det = EventDetector::new();
    for s in &samples {
        let ev = det.observe(s, &c);
        assert_eq!(ev.contains(&LungEvent::FlowDropPsv), s.flow < 0.3 * peak, "t={}", s.t_ms);
    }
    // The decay crosses 0.3 of the peak at about τ·ln(1/0.3).
    let first = samples.iter().position(|s| s.flow < 0.3 * peak).unwrap();
    let expected_ms = 500.0 * (1.0f64 / 0.3).ln();
    assert!((samples[first].t_ms as f64 - expected_ms).abs() <= 20.0);
}

#[test]
fn csv_export_has_header_and_rows() {
    let (_, mut samples) = run(&LungPatient::default(), &inspiring(), 10, 30);
    samples[1].events.insert(LungEvent::FlowDropPsv);
    let csv = to_csv(&samples);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,Paw,Palv,flow,events");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].ends_with(",flowDropPSV"));
}

proptest! {
    #[test]
    fn passivity(r in 1.0f64..50.0, c in 0.005f64..0.2, palv0 in 0.0f64..40.0,
                 phases in prop::collection::vec((0u8..3, 10u64..2000), 1..8)) {
        let mut p = LungPatient { resistance: r, compliance: c, palv: palv0, effort: None, t_ms: 0 };
        let base = VentCircuit::default();
        let lo = base.peep.min(palv0) - 1e-9;
        let hi = base.pinsp.max(palv0) + 1e-9;
        for (kind, dur) in phases {
            let (i, o) = match kind { 0 => (Valve::Open, Valve::Closed), 1 => (Valve::Closed, Valve::Open), _ => (Valve::Closed, Valve::Closed) };
            let circ = VentCircuit { i_valve: i, o_valve: o, ..base };
            let (np, s) = step_lung(&p, &circ, dur).unwrap();
            prop_assert!(s.palv >= lo && s.palv <= hi);
            p = np;
        }
    }

    #[test]
    fn plateau_is_exact(palv in -10.0f64..60.0, dt in 1u64..5000) {
        let p = LungPatient { palv, ..LungPatient::default() };
        let c = VentCircuit { i_valve: Valve::Closed, o_valve: Valve::Closed, ..VentCircuit::default() };
        let (np, s) = step_lung(&p, &c, dt).unwrap();
        prop_assert_eq!(np.palv, palv);
        prop_assert_eq!(s.flow, 0.0);
    }
}
