use http_body_util::BodyExt;
use tower::ServiceExt;
use ventasm::lung::{self, LungPatient, Valve, VentCircuit};
use ventasm::service::http::{router, AppState, ServiceConfig};
use ventasm::service::*;

fn core(level: u8) -> SessionCore {
    SessionCore::new(SessionSpec {
        level,
        ..SessionSpec::default()
    })
    .unwrap()
}

fn get<'a>(s: &'a SessionSample, loc: &str) -> &'a str {
    s.state.get(loc).map(String::as_str).unwrap_or("")
}

fn steps(c: &mut SessionCore, n: usize) {
    for _ in 0..n {
        c.step().unwrap();
    }
}

fn start_pcv(c: &mut SessionCore) {
    c.apply_command(OperatorCommand::StartupEnded).unwrap();
    c.step().unwrap();
    c.apply_command(OperatorCommand::SelfTestPassed).unwrap();
    c.step().unwrap();
    c.apply_command(OperatorCommand::StartVentilation).unwrap();
    c.step().unwrap();
}

#[test]
fn idle_session_stays_in_startup() {
    let mut c = core(3);
    assert_eq!(c.snapshot().step, 0);
    assert_eq!(get(c.snapshot(), "state"), "STARTUP");
    steps(&mut c, 20);
    assert_eq!(get(c.snapshot(), "state"), "STARTUP");
    assert_eq!(c.log().len(), 21);
}

#[test]
fn startup_and_self_test_reach_ventilation_off() {
    let mut c = core(3);
    c.apply_command(OperatorCommand::StartupEnded).unwrap();
    c.apply_command(OperatorCommand::SelfTestPassed).unwrap();
    steps(&mut c, 2);
    assert_eq!(get(c.snapshot(), "state"), "VENTILATIONOFF");
}

#[test]
fn commands_affect_the_very_next_step_and_momentary_ones_clear() {
    let mut c = core(3);
    start_pcv(&mut c);
    let s = c.snapshot();
    assert_eq!(s.monitored["startVentilation"], "true");
    assert_eq!((get(s, "state"), get(s, "phase"), get(s, "iValve")), ("PCV_STATE", "INSPIRATION", "OPEN"));
    c.step().unwrap();
    assert_eq!(c.snapshot().monitored["startVentilation"], "false");
    assert_eq!(c.snapshot().monitored["startupEnded"], "true");
}

#[test]
fn unsupported_command_is_rejected() {
    let mut c = core(0);
    assert!(matches!(
        c.apply_command(OperatorCommand::CmdInPause),
        Err(SessionError::UnsupportedCommand { .. })
    ));
}

/// Offline oracle: drive step_lung with the valve sequence of the log.
#[test]
fn pcv_waveform_matches_offline_lung_composition() {
    let mut c = core(3);
    start_pcv(&mut c);
    steps(&mut c, 150);
    let spec = c.spec().clone();
    let mut p = LungPatient { t_ms: 0, ..spec.patient };
    for s in &c.log()[1..] {
        let valve = |n: &str| if s.state[n] == "OPEN" { Valve::Open } else { Valve::Closed };
        let circ = VentCircuit {
            i_valve: valve("iValve"),
            o_valve: valve("oValve"),
            ..spec.circuit
        };
        let mut last = None;
        for _ in 0..spec.tick_ms / spec.lung_dt_ms {
            let (np, smp) = lung::step_lung(&p, &circ, spec.lung_dt_ms).unwrap();
            p = np;
            last = Some(smp);
        }
        let last = last.unwrap();
        assert_eq!(last.paw, s.lung.paw);
        assert_eq!(last.palv, s.lung.palv);
    }
    let paws: Vec<f64> = c.log()[3..].iter().map(|s| s.lung.paw).collect();
    assert!(paws.iter().all(|p| *p == spec.circuit.peep || *p == spec.circuit.pinsp));
    let rises = paws.windows(2).filter(|w| w[0] < w[1]).count();
    assert!(rises >= 2, "expected several breaths, saw {rises} rising edges");
}

fn step_until(c: &mut SessionCore, limit: usize, pred: impl Fn(&SessionSample) -> bool) {
    for _ in 0..limit {
        if pred(c.snapshot()) {
            return;
        }
        c.step().unwrap();
    }
    panic!("condition not reached in {limit} steps");
}

#[test]
fn expiratory_pause_closes_both_valves() {
    let mut c = core(3);
    start_pcv(&mut c);
    step_until(&mut c, 100, |s| s.state["phase"] == "EXPIRATION");
    // Press the button for the step at which the expiration timer runs out.
    let expiration_ms = 3333;
    let started = c.snapshot().t_ms;
    while c.snapshot().t_ms + c.spec().tick_ms < started + expiration_ms {
        c.step().unwrap();
    }
    c.apply_command(OperatorCommand::CmdExPause).unwrap();
    c.step().unwrap();
    let s = c.snapshot();
    assert_eq!((get(s, "phase"), get(s, "iValve"), get(s, "oValve")), ("EXPAUSE", "CLOSED", "CLOSED"));
    assert_eq!(s.lung.flow, 0.0);
}

#[test]
fn stop_during_inspiration_waits_for_expiration() {
    let mut c = core(3);
    start_pcv(&mut c);
    c.apply_command(OperatorCommand::StopRequested).unwrap();
    c.step().unwrap();
    assert_eq!(get(c.snapshot(), "state"), "PCV_STATE");
    assert_eq!(get(c.snapshot(), "stopVentilation"), "true");
    step_until(&mut c, 100, |s| s.state["state"] == "VENTILATIONOFF");
    let prev = &c.log()[c.log().len() - 2];
    assert_eq!(prev.state["phase"], "EXPIRATION");
}

#[test]
fn mode_switch_takes_effect_at_inspiration_end() {
    let mut c = core(3);
    start_pcv(&mut c);
    c.apply_command(OperatorCommand::RespirationMode(Mode::Psv)).unwrap();
    c.step().unwrap();
    assert_eq!(get(c.snapshot(), "state"), "PCV_STATE");
    step_until(&mut c, 100, |s| s.state["phase"] != "INSPIRATION");
    assert_eq!(get(c.snapshot(), "state"), "PSV_STATE");
}

#[test]
fn apnea_alarm_mirrors_backup_mode() {
    let mut c = core(3);
    c.apply_command(OperatorCommand::RespirationMode(Mode::Psv)).unwrap();
    start_pcv(&mut c);
    assert_eq!(get(c.snapshot(), "state"), "PSV_STATE");
    step_until(&mut c, 400, |s| s.alarms.apnea);
    assert_eq!(get(c.snapshot(), "state"), "PCV_STATE");
    assert!(c.log().iter().all(|s| s.alarms.apnea == (s.state["apneaBackupMode"] == "true")));
}

#[test]
fn patient_effort_triggers_breaths_in_psv() {
    let spec = SessionSpec {
        patient: LungPatient {
            effort: Some(lung::Effort {
                period_ms: 4000,
                magnitude: 4.0,
                duration_ms: 300,
                offset_ms: 1000,
            }),
            ..LungPatient::default()
        },
        ..SessionSpec::default()
    };
    let mut c = SessionCore::new(spec.clone()).unwrap();
    c.apply_command(OperatorCommand::RespirationMode(Mode::Psv)).unwrap();
    start_pcv(&mut c);
    steps(&mut c, 400);
    assert!(c.log().iter().all(|s| !s.alarms.apnea));
    let breaths = c.log().windows(2).filter(|w| w[0].state["phase"] != "INSPIRATION" && w[1].state["phase"] == "INSPIRATION").count();
    assert!(breaths >= 5, "{breaths}");
    replay_log(&spec, &parse_log(&c.export_log()).unwrap()).unwrap();
}

#[test]
fn log_has_one_line_per_step_plus_one_and_replays() {
    let mut c = core(3);
    start_pcv(&mut c);
    steps(&mut c, 60);
    let text = c.export_log();
    assert_eq!(text.lines().count() as u64, c.steps() + 1);
    let samples = parse_log(&text).unwrap();
    replay_log(c.spec(), &samples).unwrap();

    let mut tampered = samples.clone();
    tampered[30].state.insert("iValve".into(), "CLOSED".into());
    tampered[30].state.insert("oValve".into(), "OPEN".into());
    let flipped = samples[30].state["iValve"] == "OPEN";
    assert_eq!(replay_log(c.spec(), &tampered).is_err(), flipped || samples[30].state["oValve"] != "OPEN");
    let mut tampered = samples;
    tampered[10].lung.palv += 1e-12;
    assert!(matches!(replay_log(c.spec(), &tampered), Err(SessionError::ReplayMismatch { step: 10, .. })));
}

// HTTP layer

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<serde_json::Value>) -> (u16, serde_json::Value) {
    let mut req = axum::http::Request::builder().method(method).uri(uri);
    let body = match body {
        Some(b) => {
            req = req.header("content-type", "application/json");
            axum::body::Body::from(b.to_string())
        }
        None => axum::body::Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let json = serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, json)
}

async fn read_stream(app: &axum::Router, uri: &str, n: usize) -> Vec<SessionSample> {
    let req = axum::http::Request::get(uri).body(axum::body::Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();
    let mut buf = String::new();
    let mut out = Vec::new();
    while out.len() < n {
        let frame = body.frame().await.expect("stream ended early").unwrap();
        if let Ok(data) = frame.into_data() {
            buf.push_str(std::str::from_utf8(&data).unwrap());
        }
        while let Some(end) = buf.find("\n\n") {
            let event: String = buf.drain(..end + 2).collect();
            for line in event.lines() {
                if let Some(d) = line.strip_prefix("data: ") {
                    out.push(serde_json::from_str(d).unwrap());
                }
            }
        }
    }
    out
}

#[tokio::test]
async fn http_session_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::new(ServiceConfig {
        log_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    }));
    let (st, info) = call(&app, "POST", "/sessions", Some(serde_json::json!({"level": 3, "autoRun": false}))).await;
    assert_eq!(st, 201);
    let id = info["id"].as_str().unwrap().to_string();
    assert_eq!(info["status"], "paused");
    assert_eq!(info["snapshot"]["step"], 0);
    assert_eq!(info["snapshot"]["state"]["state"], "STARTUP");

    for cmd in ["startupEnded", "selfTestPassed"] {
        let (st, ack) = call(&app, "POST", &format!("/sessions/{id}/commands"), Some(serde_json::json!({"command": cmd}))).await;
        assert_eq!(st, 202);
        assert_eq!(ack["appliesAtStep"], 1);
    }
    let (st, _) = call(&app, "POST", &format!("/sessions/{id}/commands"), Some(serde_json::json!({"command": "warp"}))).await;
    assert_eq!(st, 422);
    let (st, _) = call(&app, "POST", &format!("/sessions/{id}/control"), Some(serde_json::json!({"action": "step", "count": 2}))).await;
    assert_eq!(st, 200);
    let (_, snap) = call(&app, "GET", &format!("/sessions/{id}/snapshot"), None).await;
    assert_eq!(snap["state"]["state"], "VENTILATIONOFF");
    assert_eq!(snap["step"], 2);

    call(&app, "POST", &format!("/sessions/{id}/commands"), Some(serde_json::json!({"command": "startVentilation"}))).await;
    call(&app, "POST", &format!("/sessions/{id}/control"), Some(serde_json::json!({"action": "step", "count": 30}))).await;

    let a = read_stream(&app, &format!("/sessions/{id}/stream"), 33).await;
    let b = read_stream(&app, &format!("/sessions/{id}/stream"), 33).await;
    assert_eq!(a, b);
    assert!(a.iter().enumerate().all(|(i, s)| s.step == i as u64));
    assert_eq!(a[3].state["phase"], "INSPIRATION");

    let (st, log) = call(&app, "GET", &format!("/sessions/{id}/log"), None).await;
    assert_eq!(st, 200);
    let log = parse_log(log.as_str().unwrap()).unwrap();
    assert_eq!(log, a);
    let (st, info) = call(&app, "DELETE", &format!("/sessions/{id}"), None).await;
    assert_eq!(st, 200);
    assert_eq!(info["status"], "stopped");
    let (st, _) = call(&app, "GET", &format!("/sessions/{id}/snapshot"), None).await;
    assert_eq!(st, 404);

    let persisted = std::fs::read_to_string(dir.path().join(format!("session-{id}.jsonl"))).unwrap();
    assert_eq!(parse_log(&persisted).unwrap(), a);
    replay_log(&SessionSpec::default(), &a).unwrap();
}

#[tokio::test]
async fn live_stream_delivers_without_gaps() {
    let app = router(AppState::new(ServiceConfig::default()));
    let (_, info) = call(&app, "POST", "/sessions", Some(serde_json::json!({"tickMs": 10, "lungDtMs": 10}))).await;
    let id = info["id"].as_str().unwrap().to_string();
    let (ua, ub) = (format!("/sessions/{id}/stream"), format!("/sessions/{id}/stream?from=5"));
    let (a, b) = tokio::join!(read_stream(&app, &ua, 25), read_stream(&app, &ub, 20));
    assert!(a.iter().enumerate().all(|(i, s)| s.step == i as u64));
    assert_eq!(&a[5..], &b[..]);
    let (st, _) = call(&app, "DELETE", &format!("/sessions/{id}"), None).await;
    assert_eq!(st, 200);
}

#[tokio::test]
async fn unknown_session_and_bad_spec() {
    let app = router(AppState::new(ServiceConfig {
        max_sessions: 1,
        ..ServiceConfig::default()
    }));
    let (st, _) = call(&app, "GET", "/sessions/99/snapshot", None).await;
    assert_eq!(st, 404);
    let (st, _) = call(&app, "POST", "/sessions/x/commands", Some(serde_json::json!({"command": "cmdRm"}))).await;
    assert_eq!(st, 404);
    let (st, _) = call(&app, "POST", "/sessions", Some(serde_json::json!({"level": 7}))).await;
    assert_eq!(st, 400);
    let (st, _) = call(&app, "POST", "/sessions", Some(serde_json::json!({"autoRun": false}))).await;
    assert_eq!(st, 201);
    let (st, _) = call(&app, "POST", "/sessions", Some(serde_json::json!({}))).await;
    assert_eq!(st, 503);
}

/// Every field the API emits is documented in the schema file.
#[test]
fn schema_documents_serialized_fields() {
    let schema = include_str!("../api/openapi.yaml");
    let mut c = core(3);
    start_pcv(&mut c);
    let sample = serde_json::to_value(c.snapshot()).unwrap();
    let spec = serde_json::to_value(SessionSpec {
        patient: LungPatient {
            effort: Some(lung::Effort {
                period_ms: 1,
                magnitude: 1.0,
                duration_ms: 1,
                offset_ms: 0,
            }),
            ..LungPatient::default()
        },
        ..SessionSpec::default()
    })
    .unwrap();
    fn keys(v: &serde_json::Value, skip_maps: bool, out: &mut Vec<String>) {
        if let serde_json::Value::Object(m) = v {
            for (k, x) in m {
                out.push(k.clone());
                if !(skip_maps && (k == "state" || k == "monitored")) {
                    keys(x, skip_maps, out);
                }
            }
        }
    }
    let mut all = Vec::new();
    keys(&sample, true, &mut all);
    keys(&spec, true, &mut all);
    for k in all {
        assert!(schema.contains(&format!("{k}:")), "schema lacks '{k}'");
    }
}
