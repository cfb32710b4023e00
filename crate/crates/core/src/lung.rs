//! Single-compartment RC lung driven by the two valves.
//!
//! Airway pressure is set by the valves: the inspiratory target with the
//! input valve open, PEEP with the output valve open, and the alveolar
//! pressure itself when both are closed (plateau). The expiratory valve is
//! one-way, so an inspiratory effort that pulls alveolar pressure below
//! PEEP stops the flow and shows up at the airway as a pressure drop.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integration never uses sub-steps longer than this fraction of R·C.
const SUBSTEPS_PER_TAU: f64 = 200.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Valve {
    Open,
    Closed,
}

/// Periodic inspiratory effort: a muscle pressure of `magnitude` during
/// the first `duration_ms` of every `period_ms`, starting at `offset_ms`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Effort {
    pub period_ms: u64,
    pub magnitude: f64,
    pub duration_ms: u64,
    #[serde(default)]
    pub offset_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LungPatient {
    /// cmH2O per L/s.
    pub resistance: f64,
    /// L per cmH2O.
    pub compliance: f64,
    /// Elastic recoil pressure of the compartment, cmH2O.
    pub palv: f64,
    pub effort: Option<Effort>,
    /// Simulated time, ms.
    pub t_ms: u64,
}

impl Default for LungPatient {
    fn default() -> Self {
        LungPatient {
            resistance: 10.0,
            compliance: 0.05,
            palv: 5.0,
            effort: None,
            t_ms: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct VentCircuit {
    pub pinsp: f64,
    pub peep: f64,
    pub i_valve: Valve,
    pub o_valve: Valve,
    /// Inhale trigger sensitivity, cmH2O below PEEP.
    pub its: f64,
    pub flow_peak_fraction: f64,
}

impl Default for VentCircuit {
    fn default() -> Self {
        VentCircuit {
            pinsp: 20.0,
            peep: 5.0,
            i_valve: Valve::Closed,
            o_valve: Valve::Open,
            its: 2.0,
            flow_peak_fraction: 0.3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LungEvent {
    #[serde(rename = "dropPAW_ITS")]
    DropPawIts,
    #[serde(rename = "flowDropPSV")]
    FlowDropPsv,
}

impl LungEvent {
    pub fn name(self) -> &'static str {
        match self {
            LungEvent::DropPawIts => "dropPAW_ITS",
            LungEvent::FlowDropPsv => "flowDropPSV",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Breath {
    Inspiration,
    Expiration,
    Hold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LungSample {
    pub t_ms: u64,
    pub paw: f64,
    /// Alveolar pressure including any muscle effort.
    pub palv: f64,
    /// L/s, positive into the lung.
    pub flow: f64,
    pub breath: Breath,
    pub events: BTreeSet<LungEvent>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LungError {
    #[error("both valves are open")]
    BothValvesOpen,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time step must be positive")]
    ZeroStep,
}

impl LungPatient {
    pub fn tau(&self) -> f64 {
        self.resistance * self.compliance
    }

    pub fn validate(&self) -> Result<(), LungError> {
        if !(self.resistance > 0.0 && self.compliance > 0.0) {
            return Err(LungError::InvalidParameter("resistance and compliance must be positive".into()));
        }
        if !self.palv.is_finite() {
            return Err(LungError::InvalidParameter("alveolar pressure must be finite".into()));
        }
        if let Some(e) = self.effort {
            if e.period_ms == 0 || e.duration_ms > e.period_ms || !e.magnitude.is_finite() {
                return Err(LungError::InvalidParameter("effort needs 0 < duration <= period".into()));
            }
        }
        Ok(())
    }

    fn muscle(&self, t_ms: u64) -> f64 {
        match self.effort {
            Some(e) if t_ms >= e.offset_ms && (t_ms - e.offset_ms) % e.period_ms < e.duration_ms => e.magnitude,
            _ => 0.0,
        }
    }

    /// Parses a `key = value` profile (resistance, compliance, palv,
    /// effortPeriod, effortMagnitude, effortDuration, effortOffset;
    /// times in ms).
    pub fn parse_profile(text: &str) -> Result<Self, LungError> {
        let mut p = LungPatient::default();
        let (mut period, mut magnitude, mut duration, mut offset) = (None, None, None, 0);
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LungError::InvalidParameter(format!("expected key = value: '{line}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| LungError::InvalidParameter(format!("'{}' is not a number", v.trim())))?;
            match k.trim() {
                "resistance" => p.resistance = v,
                "compliance" => p.compliance = v,
                "palv" => p.palv = v,
                "effortPeriod" => period = Some(v as u64),
                "effortMagnitude" => magnitude = Some(v),
                "effortDuration" => duration = Some(v as u64),
                "effortOffset" => offset = v as u64,
                other => return Err(LungError::InvalidParameter(format!("unknown key '{other}'"))),
            }
        }
        if let (Some(period_ms), Some(magnitude)) = (period, magnitude) {
            p.effort = Some(Effort {
                period_ms,
                magnitude,
                duration_ms: duration.unwrap_or(300),
                offset_ms: offset,
            });
        }
        p.validate()?;
        Ok(p)
    }
}

impl VentCircuit {
    pub fn validate(&self) -> Result<(), LungError> {
        if !(self.pinsp > self.peep && self.peep >= 0.0) {
            return Err(LungError::InvalidParameter("need Pinsp > PEEP >= 0".into()));
        }
        if !(self.flow_peak_fraction > 0.0 && self.flow_peak_fraction < 1.0) {
            return Err(LungError::InvalidParameter("flow peak fraction must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn breath(&self) -> Result<Breath, LungError> {
        match (self.i_valve, self.o_valve) {
            (Valve::Open, Valve::Open) => Err(LungError::BothValvesOpen),
            (Valve::Open, Valve::Closed) => Ok(Breath::Inspiration),
            (Valve::Closed, Valve::Open) => Ok(Breath::Expiration),
            (Valve::Closed, Valve::Closed) => Ok(Breath::Hold),
        }
    }
}

/// Airway pressure and flow for an effective alveolar pressure.
fn airway(breath: Breath, c: &VentCircuit, palv: f64, r: f64) -> (f64, f64) {
    match breath {
        Breath::Inspiration => (c.pinsp, (c.pinsp - palv) / r),
        Breath::Expiration if palv >= c.peep => (c.peep, (c.peep - palv) / r),
        // One-way PEEP valve: no inflow, the airway reads the alveoli.
        Breath::Expiration | Breath::Hold => (palv, 0.0),
    }
}

/// Advances the lung by `dt_ms` using forward Euler with sub-steps of at
/// most τ/200. The returned sample has no events; see [`EventDetector`].
pub fn step_lung(patient: &LungPatient, circuit: &VentCircuit, dt_ms: u64) -> Result<(LungPatient, LungSample), LungError> {
    if dt_ms == 0 {
        return Err(LungError::ZeroStep);
    }
    patient.validate()?;
    let breath = circuit.breath()?;
    let mut p = *patient;
    let dt = dt_ms as f64 / 1000.0;
    let n = (dt * SUBSTEPS_PER_TAU / p.tau()).ceil().max(1.0) as u64;
    let h = dt / n as f64;
    for k in 0..n {
        let t = p.t_ms + (k * dt_ms) / n;
        let palv = p.palv - p.muscle(t);
        let (_, flow) = airway(breath, circuit, palv, p.resistance);
        p.palv += flow * h / p.compliance;
    }
    p.t_ms += dt_ms;
    let palv = p.palv - p.muscle(p.t_ms);
    let (paw, flow) = airway(breath, circuit, palv, p.resistance);
    Ok((
        p,
        LungSample {
            t_ms: p.t_ms,
            paw,
            palv,
            flow,
            breath,
            events: BTreeSet::new(),
        },
    ))
}

/// Sample of the current signals without advancing time.
pub fn observe(patient: &LungPatient, circuit: &VentCircuit) -> Result<LungSample, LungError> {
    patient.validate()?;
    let breath = circuit.breath()?;
    let palv = patient.palv - patient.muscle(patient.t_ms);
    let (paw, flow) = airway(breath, circuit, palv, patient.resistance);
    Ok(LungSample {
        t_ms: patient.t_ms,
        paw,
        palv,
        flow,
        breath,
        events: BTreeSet::new(),
    })
}

/// Incremental event detection over a sample stream.
#[derive(Clone, Debug, Default)]
pub struct EventDetector {
    last: Option<Breath>,
    peak_flow: f64,
    fired_drop: bool,
}

impl EventDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forgets the current phase, e.g. when the controller starts a new one.
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn observe(&mut self, s: &LungSample, c: &VentCircuit) -> BTreeSet<LungEvent> {
        if self.last != Some(s.breath) {
            self.peak_flow = 0.0;
            self.fired_drop = false;
            self.last = Some(s.breath);
        }
        let mut ev = BTreeSet::new();
        match s.breath {
            Breath::Expiration => {
                if !self.fired_drop && s.paw < c.peep - c.its {
                    self.fired_drop = true;
                    ev.insert(LungEvent::DropPawIts);
                }
            }
            Breath::Inspiration => {
                self.peak_flow = self.peak_flow.max(s.flow);
                if self.peak_flow > 0.0 && s.flow < c.flow_peak_fraction * self.peak_flow {
                    ev.insert(LungEvent::FlowDropPsv);
                }
            }
            Breath::Hold => {}
        }
        ev
    }
}

/// Events of the last sample given everything before it.
pub fn detect_events(history: &[LungSample], circuit: &VentCircuit) -> BTreeSet<LungEvent> {
    let mut d = EventDetector::new();
    let mut ev = BTreeSet::new();
    for s in history {
        ev = d.observe(s, circuit);
    }
    ev
}

/// CSV with columns t,Paw,Palv,flow,events (events joined by `|`).
pub fn to_csv(samples: &[LungSample]) -> String {
    let mut out = String::from("t,Paw,Palv,flow,events\n");
    for s in samples {
        let ev: Vec<&str> = s.events.iter().map(|e| e.name()).collect();
        let _ = writeln!(
            out,
            "{:.3},{:.4},{:.4},{:.5},{}",
            s.t_ms as f64 / 1000.0,
            s.paw,
            s.palv,
            s.flow,
            ev.join("|")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circuit(i: Valve, o: Valve) -> VentCircuit {
        VentCircuit {
            i_valve: i,
            o_valve: o,
            ..VentCircuit::default()
        }
    }

    #[test]
    fn plateau_keeps_pressure() {
        let p = LungPatient {
            palv: 17.0,
            ..LungPatient::default()
        };
        let (p2, s) = step_lung(&p, &circuit(Valve::Closed, Valve::Closed), 100).unwrap();
        assert_eq!(s.flow, 0.0);
        assert_eq!(p2.palv, 17.0);
        assert_eq!(s.paw, 17.0);
    }

    #[test]
    fn both_open_is_a_fault() {
        let r = step_lung(&LungPatient::default(), &circuit(Valve::Open, Valve::Open), 10);
        assert_eq!(r.unwrap_err(), LungError::BothValvesOpen);
    }

    #[test]
    fn profile_parsing() {
        let p = LungPatient::parse_profile("resistance = 5\ncompliance=0.1 # stiff\neffortPeriod=4000\neffortMagnitude=3\n").unwrap();
        assert_eq!(p.resistance, 5.0);
        assert_eq!(p.effort.unwrap().duration_ms, 300);
        assert!(LungPatient::parse_profile("resistance = -1").is_err());
        assert!(LungPatient::parse_profile("colour = 3").is_err());
    }
}
