//! The bundled controller models, their configuration and companion assets.

use thiserror::Error;

use crate::dsl::{self, ParseError};
use crate::machine::MachineDefinition;
use crate::value::{format_secs, parse_secs};

pub const LEVELS: [u8; 4] = [0, 1, 2, 3];

const SOURCES: [&str; 4] = [
    include_str!("../models/MVMController00.asm"),
    include_str!("../models/MVMController01.asm"),
    include_str!("../models/MVMController02.asm"),
    include_str!("../models/MVMController03.asm"),
];

pub const DEFAULT_CONFIG: &str = include_str!("../models/default.config");
pub const TEST_CONFIG: &str = include_str!("../models/test.config");
pub const SAFETY_PROPERTIES: &str = include_str!("../properties/safety.prop");
pub const PAUSE_PROPERTIES: &str = include_str!("../properties/pauses.prop");
pub const PAUSE_PROPERTY_VERBATIM: &str = include_str!("../properties/pauses_verbatim.prop");
pub const PCV_START_SCENARIO: &str = include_str!("../scenarios/pcv_start.avalla");

const GLUES: [((u8, u8), &str); 4] = [
    ((0, 1), include_str!("../glue/00_01.glue")),
    ((1, 2), include_str!("../glue/01_02.glue")),
    ((2, 3), include_str!("../glue/02_03.glue")),
    ((0, 2), include_str!("../glue/00_02.glue")),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no bundled model for level {0} (expected 0..=3)")]
    UnknownLevel(u8),
    #[error("bundled model {name} is corrupted: {source}")]
    Corrupted {
        name: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {message}")]
    Invalid { key: String, message: String },
}

pub fn model_name(level: u8) -> String {
    format!("MVMController0{level}")
}

pub fn source(level: u8) -> Result<&'static str, ModelError> {
    SOURCES
        .get(level as usize)
        .copied()
        .ok_or(ModelError::UnknownLevel(level))
}

/// Parses a bundled level and binds the default configuration.
pub fn load(level: u8) -> Result<MachineDefinition, ModelError> {
    load_with(level, &default_config())
}

pub fn load_with(level: u8, config: &ControllerConfig) -> Result<MachineDefinition, ModelError> {
    let mut m = dsl::parse_str(source(level)?).map_err(|source| ModelError::Corrupted {
        name: model_name(level),
        source,
    })?;
    config.apply(&mut m);
    Ok(m)
}

/// Level loaded with the pinned test configuration (1 s test clock).
pub fn load_for_tests(level: u8) -> Result<MachineDefinition, ModelError> {
    load_with(level, &test_config())
}

/// Glue file text for a pair of levels, when one is bundled.
pub fn glue_source(from: u8, to: u8) -> Option<&'static str> {
    GLUES.iter().find(|(k, _)| *k == (from, to)).map(|(_, g)| *g)
}

/// Timing parameters of the controller; all durations in milliseconds.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    /// Breaths per minute.
    pub respiratory_rate: f64,
    /// Inspiratory and expiratory parts of the I:E ratio.
    pub ie_ratio: (f64, f64),
    pub inspiration_dur_pcv: u64,
    pub expiration_dur_pcv: u64,
    pub min_insp_time_psv: u64,
    pub max_insp_time_psv: u64,
    pub min_exp_time_psv: u64,
    pub apnea_lag: u64,
    pub trigger_window_delay: u64,
    pub in_pause_dur: u64,
    pub ex_pause_dur: u64,
    pub rm_dur: u64,
}

/// Config keys paired with the timer each one binds.
const TIMER_KEYS: [(&str, &str); 10] = [
    ("inspirationDurPCV", "timerInspirationDurPCV"),
    ("expirationDurPCV", "timerExpirationDurPCV"),
    ("minInspTimePSV", "timerMinInspTimePSV"),
    ("maxInspTimePSV", "timerMaxInspTimePSV"),
    ("minExpTimePSV", "timerMinExpTimePSV"),
    ("apneaLag", "timerApneaLag"),
    ("triggerWindowDelay", "timerTriggerWindowDelay"),
    ("inPauseDur", "timerInPause"),
    ("exPauseDur", "timerExPause"),
    ("rmDur", "timerRm"),
];

/// Inspiration and expiration durations (ms) for a rate and I:E ratio.
pub fn phase_durations(respiratory_rate: f64, ie: (f64, f64)) -> Result<(u64, u64), ConfigError> {
    let bad = |key: &str, message: &str| ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    };
    if !(respiratory_rate.is_finite() && respiratory_rate > 0.0) {
        return Err(bad("respiratoryRate", "must be positive"));
    }
    if !(ie.0.is_finite() && ie.1.is_finite() && ie.0 > 0.0 && ie.1 > 0.0) {
        return Err(bad("ieRatio", "both parts must be positive"));
    }
    let cycle = 60_000.0 / respiratory_rate;
    let insp = (cycle * ie.0 / (ie.0 + ie.1)).round() as u64;
    let exp = cycle.round() as u64 - insp;
    if insp == 0 || exp == 0 {
        return Err(bad("respiratoryRate", "phases shorter than 1 ms"));
    }
    Ok((insp, exp))
}

pub fn default_config() -> ControllerConfig {
    ControllerConfig::parse(DEFAULT_CONFIG).expect("bundled default config is valid")
}

pub fn test_config() -> ControllerConfig {
    ControllerConfig::parse(TEST_CONFIG).expect("bundled test config is valid")
}

fn parse_duration(key: &str, text: &str) -> Result<u64, ConfigError> {
    let text = text.trim();
    let ms = if let Some(ms) = text.strip_suffix("ms") {
        ms.trim().parse().ok()
    } else {
        parse_secs(text.strip_suffix('s').unwrap_or(text))
    };
    match ms {
        Some(v) if v > 0 => Ok(v),
        Some(_) => Err(ConfigError::Invalid {
            key: key.into(),
            message: "durations must be positive".into(),
        }),
        None => Err(ConfigError::Invalid {
            key: key.into(),
            message: format!("'{text}' is not a duration"),
        }),
    }
}

impl ControllerConfig {
    /// Parses `key = value` lines; `#` starts a comment. Keys absent from the
    /// text keep their defaults, and PCV phase durations are derived from
    /// the rate and ratio unless given explicitly.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut rr = 12.0;
        let mut ie = (1.0, 2.0);
        let mut explicit: Vec<(&str, u64)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: "expected key = value".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "respiratoryRate" => {
                    rr = value.parse().map_err(|_| ConfigError::Invalid {
                        key: key.into(),
                        message: format!("'{value}' is not a number"),
                    })?
                }
                "ieRatio" => {
                    let parsed = value
                        .split_once(':')
                        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                    ie = parsed.ok_or_else(|| ConfigError::Invalid {
                        key: key.into(),
                        message: format!("'{value}' is not of the form I:E"),
                    })?;
                }
                _ => {
                    let (k, _) = TIMER_KEYS
                        .iter()
                        .find(|(k, _)| *k == key)
                        .ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
                    explicit.push((k, parse_duration(key, value)?));
                }
            }
        }
        let (insp, exp) = phase_durations(rr, ie)?;
        let mut c = ControllerConfig {
            respiratory_rate: rr,
            ie_ratio: ie,
            inspiration_dur_pcv: insp,
            expiration_dur_pcv: exp,
            min_insp_time_psv: 300,
            max_insp_time_psv: 3000,
            min_exp_time_psv: 500,
            apnea_lag: 30_000,
            trigger_window_delay: 300,
            in_pause_dur: 1000,
            ex_pause_dur: 1000,
            rm_dur: 1000,
        };
        for (k, v) in explicit {
            *c.slot(k) = v;
        }
        Ok(c)
    }

    /// Configuration for a rate and ratio, other durations at their defaults.
    pub fn from_rate(respiratory_rate: f64, ie_ratio: (f64, f64)) -> Result<Self, ConfigError> {
        let (insp, exp) = phase_durations(respiratory_rate, ie_ratio)?;
        Ok(ControllerConfig {
            respiratory_rate,
            ie_ratio,
            inspiration_dur_pcv: insp,
            expiration_dur_pcv: exp,
            ..default_config()
        })
    }

    fn slot(&mut self, key: &str) -> &mut u64 {
        match key {
            "inspirationDurPCV" => &mut self.inspiration_dur_pcv,
            "expirationDurPCV" => &mut self.expiration_dur_pcv,
            "minInspTimePSV" => &mut self.min_insp_time_psv,
            "maxInspTimePSV" => &mut self.max_insp_time_psv,
            "minExpTimePSV" => &mut self.min_exp_time_psv,
            "apneaLag" => &mut self.apnea_lag,
            "triggerWindowDelay" => &mut self.trigger_window_delay,
            "inPauseDur" => &mut self.in_pause_dur,
            "exPauseDur" => &mut self.ex_pause_dur,
            _ => &mut self.rm_dur,
        }
    }

    /// (timer name, duration in ms) for every configured timer.
    pub fn timer_durations(&self) -> Vec<(&'static str, u64)> {
        let mut c = self.clone();
        TIMER_KEYS
            .iter()
            .map(|(k, t)| (*t, *c.slot(k)))
            .collect()
    }

    /// Binds the durations of the timers the machine declares.
    pub fn apply(&self, m: &mut MachineDefinition) {
        for (timer, ms) in self.timer_durations() {
            m.set_timer_duration(timer, ms);
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "respiratoryRate = {}\nieRatio = {}:{}\n",
            self.respiratory_rate, self.ie_ratio.0, self.ie_ratio.1
        );
        let mut c = self.clone();
        for (k, _) in TIMER_KEYS {
            out.push_str(&format!("{k} = {}s\n", format_secs(*c.slot(k))));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_ratio_splits_evenly() {
        assert_eq!(phase_durations(60.0, (1.0, 1.0)).unwrap(), (500, 500));
    }

    #[test]
    fn zero_ratio_is_rejected() {
        assert!(phase_durations(12.0, (0.0, 2.0)).is_err());
        assert!(ControllerConfig::parse("ieRatio = 0:1").is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = default_config();
        assert_eq!(ControllerConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn unknown_level() {
        assert_eq!(load(4).unwrap_err(), ModelError::UnknownLevel(4));
    }
}
