//! Closed-loop sessions: controller, clock and lung simulator stepped
//! together, driven by operator commands.
//!
//! [`SessionCore`] is the synchronous loop body; [`http`] wraps it in an
//! HTTP and server-push API.

pub mod http;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, MachineState, MonitoredEnv, StepError};
use crate::lung::{self, EventDetector, LungError, LungEvent, LungPatient, LungSample, Valve, VentCircuit};
use crate::machine::{LocId, MachineDefinition};
use crate::models::{self, ConfigError, ControllerConfig, ModelError};
use crate::value::Value;

pub const DEFAULT_TICK_MS: u64 = 100;
pub const DEFAULT_LUNG_DT_MS: u64 = 10;

/// One of the panel inputs. Boolean commands set their location to true.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", content = "value")]
pub enum OperatorCommand {
    #[serde(rename = "startupEnded")]
    StartupEnded,
    #[serde(rename = "selfTestPassed")]
    SelfTestPassed,
    #[serde(rename = "startVentilation")]
    StartVentilation,
    #[serde(rename = "stopRequested")]
    StopRequested,
    #[serde(rename = "respirationMode")]
    RespirationMode(Mode),
    #[serde(rename = "cmdInPause")]
    CmdInPause,
    #[serde(rename = "cmdExPause")]
    CmdExPause,
    #[serde(rename = "cmdRm")]
    CmdRm,
    #[serde(rename = "dropPAW_ITS")]
    DropPawIts,
    #[serde(rename = "flowDropPSV")]
    FlowDropPsv,
    #[serde(rename = "pawGTMaxPinsp")]
    PawGtMaxPinsp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "PCV")]
    Pcv,
    #[serde(rename = "PSV")]
    Psv,
}

impl OperatorCommand {
    pub fn location(&self) -> &'static str {
        match self {
            OperatorCommand::StartupEnded => "startupEnded",
            OperatorCommand::SelfTestPassed => "selfTestPassed",
            OperatorCommand::StartVentilation => "startVentilation",
            OperatorCommand::StopRequested => "stopRequested",
            OperatorCommand::RespirationMode(_) => "respirationMode",
            OperatorCommand::CmdInPause => "cmdInPause",
            OperatorCommand::CmdExPause => "cmdExPause",
            OperatorCommand::CmdRm => "cmdRm",
            OperatorCommand::DropPawIts => "dropPAW_ITS",
            OperatorCommand::FlowDropPsv => "flowDropPSV",
            OperatorCommand::PawGtMaxPinsp => "pawGTMaxPinsp",
        }
    }

    /// Momentary inputs are true for exactly the step that consumes them;
    /// the others hold their value until changed.
    pub fn is_momentary(&self) -> bool {
        !matches!(
            self,
            OperatorCommand::StartupEnded | OperatorCommand::SelfTestPassed | OperatorCommand::RespirationMode(_)
        )
    }

    fn literal(&self) -> &'static str {
        match self {
            OperatorCommand::RespirationMode(Mode::Pcv) => "PCV",
            OperatorCommand::RespirationMode(Mode::Psv) => "PSV",
            _ => "true",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Running,
    Paused,
    Stopped,
}

/// Everything needed to start (or replay) a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SessionSpec {
    pub level: u8,
    /// Controller configuration in `key = value` form; empty means defaults.
    pub config: String,
    pub patient: LungPatient,
    pub circuit: VentCircuit,
    pub tick_ms: u64,
    pub lung_dt_ms: u64,
}

impl Default for SessionSpec {
    fn default() -> Self {
        SessionSpec {
            level: 3,
            config: String::new(),
            patient: LungPatient::default(),
            circuit: VentCircuit::default(),
            tick_ms: DEFAULT_TICK_MS,
            lung_dt_ms: DEFAULT_LUNG_DT_MS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Alarms {
    pub apnea: bool,
}

/// One committed step of a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSample {
    pub step: u64,
    pub t_ms: u64,
    /// Controlled locations after the step.
    pub state: BTreeMap<String, String>,
    /// Monitored inputs the step consumed (the initial defaults for step 0).
    pub monitored: BTreeMap<String, String>,
    pub lung: LungSample,
    pub alarms: Alarms,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lung(#[from] LungError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("tick of {tick} ms must be a positive multiple of the {dt} ms lung step")]
    BadTick { tick: u64, dt: u64 },
    #[error("level {level} has no monitored location '{location}'")]
    UnsupportedCommand { level: u8, location: String },
    #[error("session is stopped")]
    Stopped,
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("log line {line}: {message}")]
    BadLog { line: usize, message: String },
    #[error("replay diverges at step {step}: {message}")]
    ReplayMismatch { step: u64, message: String },
}

/// Machine, lung and input state of one closed-loop session.
pub struct SessionCore {
    spec: SessionSpec,
    machine: MachineDefinition,
    state: MachineState,
    patient: LungPatient,
    detector: EventDetector,
    /// Lung events raised during the last tick, fed to the next step.
    pending_events: Vec<LungEvent>,
    held: BTreeMap<LocId, Value>,
    queue: VecDeque<OperatorCommand>,
    log: Vec<SessionSample>,
    status: SessionStatus,
}

impl SessionCore {
    pub fn new(spec: SessionSpec) -> Result<Self, SessionError> {
        if spec.lung_dt_ms == 0 || spec.tick_ms < spec.lung_dt_ms || spec.tick_ms % spec.lung_dt_ms != 0 {
            return Err(SessionError::BadTick {
                tick: spec.tick_ms,
                dt: spec.lung_dt_ms,
            });
        }
        spec.patient.validate()?;
        spec.circuit.validate()?;
        let config = if spec.config.trim().is_empty() {
            models::default_config()
        } else {
            ControllerConfig::parse(&spec.config)?
        };
        let machine = models::load_with(spec.level, &config)?;
        let state = MachineState::initial(&machine);
        let patient = LungPatient { t_ms: 0, ..spec.patient };
        let mut core = SessionCore {
            machine,
            state,
            patient,
            detector: EventDetector::new(),
            pending_events: Vec::new(),
            held: BTreeMap::new(),
            queue: VecDeque::new(),
            log: Vec::new(),
            status: SessionStatus::Running,
            spec,
        };
        let circuit = core.circuit()?;
        let mut lung = lung::observe(&core.patient, &circuit)?;
        lung.events = core.detector.observe(&lung, &circuit);
        core.pending_events = lung.events.iter().copied().collect();
        let env = core.state.monitored_env(&core.machine);
        core.commit(&env, lung);
        Ok(core)
    }

    pub fn spec(&self) -> &SessionSpec {
        &self.spec
    }

    pub fn machine(&self) -> &MachineDefinition {
        &self.machine
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn set_status(&mut self, status: SessionStatus) {
        if self.status != SessionStatus::Stopped {
            self.status = status;
        }
    }

    /// Queues a command for the next step.
    pub fn apply_command(&mut self, cmd: OperatorCommand) -> Result<(), SessionError> {
        if self.status == SessionStatus::Stopped {
            return Err(SessionError::Stopped);
        }
        if self.machine.loc_by_name(cmd.location()).is_none() {
            return Err(SessionError::UnsupportedCommand {
                level: self.spec.level,
                location: cmd.location().into(),
            });
        }
        self.queue.push_back(cmd);
        Ok(())
    }

    pub fn snapshot(&self) -> &SessionSample {
        self.log.last().expect("a session always has its initial sample")
    }

    pub fn log(&self) -> &[SessionSample] {
        &self.log
    }

    pub fn steps(&self) -> u64 {
        self.log.len() as u64 - 1
    }

    /// JSON lines, one sample per line.
    pub fn export_log(&self) -> String {
        export_log(&self.log)
    }

    fn circuit(&self) -> Result<VentCircuit, LungError> {
        let valve = |name: &str, default: Valve| match self.state.show(&self.machine, name).as_deref() {
            Some("OPEN") => Valve::Open,
            Some(_) => Valve::Closed,
            None => default,
        };
        let c = VentCircuit {
            i_valve: valve("iValve", Valve::Closed),
            o_valve: valve("oValve", Valve::Open),
            ..self.spec.circuit
        };
        c.breath()?;
        Ok(c)
    }

    /// Monitored inputs for the next step: held values, queued commands,
    /// the lung's events from the last tick and the clock.
    fn next_env(&mut self) -> MonitoredEnv {
        let m = &self.machine;
        let mut env: MonitoredEnv = m
            .monitored_locs()
            .into_iter()
            .map(|l| (l, self.held.get(&l).copied().unwrap_or_else(|| m.default_value(m.loc_type(l)))))
            .collect();
        for ev in &self.pending_events {
            if let Some(l) = m.loc_by_name(ev.name()) {
                env.insert(l, Value::Bool(true));
            }
        }
        for cmd in self.queue.drain(..) {
            let Some(l) = m.loc_by_name(cmd.location()) else { continue };
            let v = m.parse_value(m.loc_type(l), cmd.literal()).expect("command literal fits its location");
            env.insert(l, v);
            if !cmd.is_momentary() {
                self.held.insert(l, v);
            }
        }
        if let Some(clock) = m.clock_loc() {
            env.insert(clock, Value::Instant((self.steps() + 1) * self.spec.tick_ms));
        }
        env
    }

    /// Runs one controller step and one tick of the lung.
    pub fn step(&mut self) -> Result<&SessionSample, SessionError> {
        if self.status == SessionStatus::Stopped {
            return Err(SessionError::Stopped);
        }
        let env = self.next_env();
        let result = self.advance(&env);
        match result {
            Ok(lung) => {
                self.commit(&env, lung);
                Ok(self.snapshot())
            }
            Err(e) => {
                self.status = SessionStatus::Stopped;
                Err(e)
            }
        }
    }

    fn advance(&mut self, env: &MonitoredEnv) -> Result<LungSample, SessionError> {
        let next = engine::step(&self.machine, &self.state, env)?;
        if phase_changed(&self.machine, &self.state, &next) {
            self.detector.reset();
        }
        self.state = next;
        let circuit = self.circuit()?;
        let (patient, lung) = run_lung(&self.patient, &circuit, &mut self.detector, self.spec.tick_ms, self.spec.lung_dt_ms)?;
        self.patient = patient;
        self.pending_events = lung.events.iter().copied().collect();
        Ok(lung)
    }

    fn commit(&mut self, env: &MonitoredEnv, lung: LungSample) {
        let m = &self.machine;
        let apnea = self.state.show(m, "apneaBackupMode").as_deref() == Some("true");
        let monitored = env
            .iter()
            .map(|(l, v)| (m.loc_name(*l).to_string(), m.display_value(v)))
            .collect();
        self.log.push(SessionSample {
            step: self.log.len() as u64,
            t_ms: self.state.clock(m).max(lung.t_ms),
            state: self.state.named_controlled(m),
            monitored,
            lung,
            alarms: Alarms { apnea },
        });
    }
}

/// Lung events are detected once per controller phase, so detection is
/// re-armed whenever the controller changes state or phase.
fn phase_changed(m: &MachineDefinition, before: &MachineState, after: &MachineState) -> bool {
    ["state", "phase"].iter().any(|n| before.show(m, n) != after.show(m, n))
}

/// Integrates one tick in lung-sized steps. The returned sample is the
/// last one, carrying every event raised during the tick.
fn run_lung(
    patient: &LungPatient,
    circuit: &VentCircuit,
    detector: &mut EventDetector,
    tick_ms: u64,
    dt_ms: u64,
) -> Result<(LungPatient, LungSample), LungError> {
    let mut p = *patient;
    let mut events = std::collections::BTreeSet::new();
    let mut last = None;
    for _ in 0..tick_ms / dt_ms {
        let (np, s) = lung::step_lung(&p, circuit, dt_ms)?;
        events.extend(detector.observe(&s, circuit));
        p = np;
        last = Some(s);
    }
    let mut s = last.expect("tick covers at least one lung step");
    s.events = events;
    Ok((p, s))
}

pub fn export_log(samples: &[SessionSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("samples serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_log(text: &str) -> Result<Vec<SessionSample>, SessionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| SessionError::BadLog {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Re-executes a log: operator inputs come from the log, lung events and
/// the clock are recomputed, and every controlled value and lung sample
/// must match exactly.
pub fn replay_log(spec: &SessionSpec, samples: &[SessionSample]) -> Result<(), SessionError> {
    let config = if spec.config.trim().is_empty() {
        models::default_config()
    } else {
        ControllerConfig::parse(&spec.config)?
    };
    let m = models::load_with(spec.level, &config)?;
    let first = samples.first().ok_or(SessionError::BadLog {
        line: 1,
        message: "empty log".into(),
    })?;
    let mut state = MachineState::initial(&m);
    let mut patient = LungPatient { t_ms: 0, ..spec.patient };
    let mut detector = EventDetector::new();
    let circuit_of = |state: &MachineState| {
        let valve = |name: &str, default: Valve| match state.show(&m, name).as_deref() {
            Some("OPEN") => Valve::Open,
            Some(_) => Valve::Closed,
            None => default,
        };
        VentCircuit {
            i_valve: valve("iValve", Valve::Closed),
            o_valve: valve("oValve", Valve::Open),
            ..spec.circuit
        }
    };
    let mut lung0 = lung::observe(&patient, &circuit_of(&state))?;
    lung0.events = detector.observe(&lung0, &circuit_of(&state));
    compare(0, &state.named_controlled(&m), &lung0, first)?;
    let mut events = lung0.events;
    let event_names: Vec<&str> = [LungEvent::DropPawIts, LungEvent::FlowDropPsv].iter().map(|e| e.name()).collect();
    for (k, s) in samples.iter().enumerate().skip(1) {
        let mut env = MonitoredEnv::new();
        for l in m.monitored_locs() {
            if Some(l) == m.clock_loc() {
                env.insert(l, Value::Instant(k as u64 * spec.tick_ms));
                continue;
            }
            let name = m.loc_name(l);
            let logged = s.monitored.get(name).ok_or_else(|| SessionError::ReplayMismatch {
                step: k as u64,
                message: format!("log lacks input '{name}'"),
            })?;
            let mut v = m.parse_value(m.loc_type(l), logged).ok_or_else(|| SessionError::BadLog {
                line: k + 1,
                message: format!("bad value '{logged}' for '{name}'"),
            })?;
            // A lung event forces its input high; the log may only add operator overrides.
            if event_names.contains(&name) && events.iter().any(|e| e.name() == name) {
                if v != Value::Bool(true) {
                    return Err(SessionError::ReplayMismatch {
                        step: k as u64,
                        message: format!("lung event '{name}' missing from the logged inputs"),
                    });
                }
                v = Value::Bool(true);
            }
            env.insert(l, v);
        }
        let next = engine::step(&m, &state, &env)?;
        if phase_changed(&m, &state, &next) {
            detector.reset();
        }
        state = next;
        let (np, lung) = run_lung(&patient, &circuit_of(&state), &mut detector, spec.tick_ms, spec.lung_dt_ms)?;
        patient = np;
        compare(k as u64, &state.named_controlled(&m), &lung, s)?;
        events = lung.events;
    }
    Ok(())
}

fn compare(step: u64, state: &BTreeMap<String, String>, lung: &LungSample, s: &SessionSample) -> Result<(), SessionError> {
    if s.step != step {
        return Err(SessionError::ReplayMismatch {
            step,
            message: format!("log line numbers step {}", s.step),
        });
    }
    if *state != s.state {
        let diff: Vec<String> = state
            .iter()
            .filter(|(k, v)| s.state.get(*k) != Some(v))
            .map(|(k, v)| format!("{k}: logged {:?}, replayed {v}", s.state.get(k)))
            .collect();
        return Err(SessionError::ReplayMismatch {
            step,
            message: diff.join("; "),
        });
    }
    if *lung != s.lung {
        return Err(SessionError::ReplayMismatch {
            step,
            message: "lung sample differs".into(),
        });
    }
    let apnea = state.get("apneaBackupMode").map(String::as_str) == Some("true");
    if apnea != s.alarms.apnea {
        return Err(SessionError::ReplayMismatch {
            step,
            message: "apnea alarm does not mirror apneaBackupMode".into(),
        });
    }
    Ok(())
}
