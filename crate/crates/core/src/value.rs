//! Runtime values carried by ASM locations.

use std::fmt;

/// Index of a domain inside a [`crate::machine::MachineDefinition`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DomainId(pub u32);

/// An element of an enumerated (or abstract) domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnumValue {
    pub domain: DomainId,
    pub index: u32,
}

/// A value held by a location or produced by an expression.
///
/// Durations and instants are whole milliseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Enum(EnumValue),
    Int(i64),
    Duration(u64),
    Instant(u64),
}

impl Value {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_enum(&self) -> Option<EnumValue> {
        match self {
            Value::Enum(e) => Some(*e),
            _ => None,
        }
    }

    pub fn ty(&self) -> Type {
        match self {
            Value::Bool(_) => Type::Bool,
            Value::Enum(e) => Type::Enum(e.domain),
            Value::Int(_) => Type::Int,
            Value::Duration(_) => Type::Duration,
            Value::Instant(_) => Type::Instant,
        }
    }
}

/// Static type of a function codomain, parameter or expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Bool,
    Int,
    Duration,
    Instant,
    Enum(DomainId),
}

impl Type {
    /// Name of a built-in type, `None` for user domains.
    pub fn builtin_name(&self) -> Option<&'static str> {
        match self {
            Type::Bool => Some("Boolean"),
            Type::Int => Some("Integer"),
            Type::Duration => Some("Duration"),
            Type::Instant => Some("Instant"),
            Type::Enum(_) => None,
        }
    }

    pub fn from_builtin(name: &str) -> Option<Type> {
        match name {
            "Boolean" => Some(Type::Bool),
            "Integer" => Some(Type::Int),
            "Duration" => Some(Type::Duration),
            "Instant" => Some(Type::Instant),
            _ => None,
        }
    }
}

/// Formats milliseconds as seconds with the shortest exact decimal form.
pub fn format_secs(ms: u64) -> String {
    let whole = ms / 1000;
    let frac = ms % 1000;
    if frac == 0 {
        return whole.to_string();
    }
    let mut s = format!("{whole}.{frac:03}");
    while s.ends_with('0') {
        s.pop();
    }
    s
}

/// Parses a decimal number of seconds (at most millisecond precision).
pub fn parse_secs(text: &str) -> Option<u64> {
    let text = text.trim();
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, f),
        None => (text, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if frac.len() > 3 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let mut frac_ms = 0u64;
    for (i, c) in frac.chars().enumerate() {
        frac_ms += (c as u64 - '0' as u64) * 10u64.pow(2 - i as u32);
    }
    whole.checked_mul(1000)?.checked_add(frac_ms)
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Enum(d) => write!(f, "domain#{}", d.0),
            other => f.write_str(other.builtin_name().unwrap_or("?")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seconds_round_trip() {
        assert_eq!(format_secs(1667), "1.667");
        assert_eq!(format_secs(2000), "2");
        assert_eq!(format_secs(1500), "1.5");
        assert_eq!(parse_secs("1.5"), Some(1500));
        assert_eq!(parse_secs("0.3"), Some(300));
        assert_eq!(parse_secs("12"), Some(12000));
        assert_eq!(parse_secs("1.2345"), None);
        assert_eq!(parse_secs(""), None);
        for ms in [0u64, 1, 10, 999, 1000, 4999, 123456] {
            assert_eq!(parse_secs(&format_secs(ms)), Some(ms));
        }
    }
}
