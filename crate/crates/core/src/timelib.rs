//! The bundled time library imported by the controller models.
//!
//! Timers are elements of the abstract `Timer` domain; a model introduces
//! them as static constants. All times are whole milliseconds.

pub const LIBRARY_NAME: &str = "TimeLibrary";

/// Name of the monitored clock function.
pub const CLOCK: &str = "mCurrTimeSecs";

pub const TIME_LIBRARY: &str = r#"module TimeLibrary

signature:
    abstract domain Timer
    dynamic monitored mCurrTimeSecs: Instant
    dynamic controlled start: Timer -> Instant
    dynamic controlled duration: Timer -> Duration
    derived elapsed: Timer -> Duration
    derived expired: Timer -> Boolean

definitions:
    function elapsed($t in Timer) = mCurrTimeSecs - start($t)
    function expired($t in Timer) = elapsed($t) >= duration($t)

    rule r_reset_timer($t in Timer) = start($t) := mCurrTimeSecs
    rule r_set_duration($t in Timer, $d in Duration) = duration($t) := $d
"#;

/// Source text of a bundled library, by import name.
pub fn library_source(name: &str) -> Option<&'static str> {
    (name == LIBRARY_NAME).then_some(TIME_LIBRARY)
}
