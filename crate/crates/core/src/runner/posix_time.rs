//! `time -p` output: three lines `real <s>`, `user <s>`, `sys <s>`.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Non-negative duration with centisecond resolution, the precision `time -p`
/// reports. Text form is always `<int>.<2 digits>`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Seconds(u64);

impl Seconds {
    pub const ZERO: Seconds = Seconds(0);

    pub const fn from_centis(centis: u64) -> Self {
        Seconds(centis)
    }

    pub fn from_secs_f64(secs: f64) -> Option<Self> {
        (secs.is_finite() && secs >= 0.0).then(|| Seconds((secs * 100.0).round() as u64))
    }

    pub fn centis(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn as_duration(self) -> Duration {
        Duration::from_millis(self.0 * 10)
    }
}

impl From<Duration> for Seconds {
    /// Rounds to the nearest centisecond.
    fn from(d: Duration) -> Self {
        Seconds(((d.as_millis() + 5) / 10) as u64)
    }
}

impl fmt::Display for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid seconds value `{0}`")]
pub struct SecondsParseError(pub String);

impl FromStr for Seconds {
    type Err = SecondsParseError;

    /// Accepts `12`, `12.3`, `12.345` (rounded half-up to centiseconds) and
    /// the `,` decimal separator some locales produce. Signs are rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || SecondsParseError(s.to_string());
        let (int, frac) = match s.split_once(['.', ',']) {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let whole: u64 = int.parse().map_err(|_| err())?;
        let frac_bytes = frac.as_bytes();
        let digit = |i: usize| frac_bytes.get(i).map_or(0, |b| (b - b'0') as u64);
        let mut centis = digit(0) * 10 + digit(1);
        if digit(2) >= 5 {
            centis += 1;
        }
        whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(centis))
            .map(Seconds)
            .ok_or_else(err)
    }
}

impl Serialize for Seconds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Seconds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRecord {
    pub real: Seconds,
    pub user: Seconds,
    pub sys: Seconds,
}

impl TimeRecord {
    pub fn new(real: Seconds, user: Seconds, sys: Seconds) -> Self {
        TimeRecord { real, user, sys }
    }

    /// Render as `time -p` would.
    pub fn format(&self) -> String {
        format!("real {}\nuser {}\nsys {}\n", self.real, self.user, self.sys)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimeParseError {
    #[error("no `real` line in time output")]
    NoRecord,
    #[error("time output lacks a `{0}` line after `real`")]
    Missing(&'static str),
    #[error("bad `{field}` value `{value}`")]
    BadValue { field: &'static str, value: String },
}

/// Extract the last `real`/`user`/`sys` record from an error stream.
///
/// Anything before the final `real` line is ignored, so solver chatter on
/// stderr does not matter; the `user` and `sys` lines must follow it
/// directly.
pub fn parse_posix_time(text: &str) -> Result<TimeRecord, TimeParseError> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let start = lines
        .iter()
        .rposition(|l| field_of(l, "real").is_some())
        .ok_or(TimeParseError::NoRecord)?;
    let value = |idx: usize, field: &'static str| -> Result<Seconds, TimeParseError> {
        let raw = lines
            .get(idx)
            .and_then(|l| field_of(l, field))
            .ok_or(TimeParseError::Missing(field))?;
        raw.parse().map_err(|_| TimeParseError::BadValue {
            field,
            value: raw.to_string(),
        })
    };
    Ok(TimeRecord {
        real: value(start, "real")?,
        user: value(start + 1, "user")?,
        sys: value(start + 2, "sys")?,
    })
}

fn field_of<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let mut parts = line.split_whitespace();
    if parts.next()? != key {
        return None;
    }
    let v = parts.next()?;
    parts.next().is_none().then_some(v)
}
