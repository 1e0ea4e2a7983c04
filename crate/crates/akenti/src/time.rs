//! Compact certificate timestamps, the injectable clock, and time-of-day
//! values used in constraint comparisons.

use std::fmt;
use std::sync::Mutex;

use chrono::{DateTime, Datelike, TimeZone, Timelike, Utc};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimeError {
    #[error("malformed timestamp {0:?}: expected YYMMDDHHMMSSZ")]
    MalformedTimestamp(String),
    #[error("malformed time of day {0:?}")]
    MalformedTime(String),
}

/// A UTC instant carried in certificate headers, serialized as
/// `YYMMDDHHMMSSZ`. Two-digit years pivot at 50: 00-49 map to 2000-2049,
/// 50-99 to 1950-1999.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompactTime(DateTime<Utc>);

impl CompactTime {
    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        CompactTime(dt)
    }

    pub fn from_ymd_hms(y: i32, mo: u32, d: u32, h: u32, mi: u32, s: u32) -> Option<Self> {
        Utc.with_ymd_and_hms(y, mo, d, h, mi, s)
            .single()
            .map(CompactTime)
    }

    pub fn datetime(&self) -> DateTime<Utc> {
        self.0
    }

    pub fn parse(text: &str) -> Result<Self, TimeError> {
        let bad = || TimeError::MalformedTimestamp(text.to_string());
        let bytes = text.as_bytes();
        if bytes.len() != 13 || bytes[12] != b'Z' || !bytes[..12].iter().all(u8::is_ascii_digit) {
            return Err(bad());
        }
        let num = |i: usize| -> u32 {
            (bytes[i] - b'0') as u32 * 10 + (bytes[i + 1] - b'0') as u32
        };
        let yy = num(0);
        let year = if yy < 50 { 2000 + yy } else { 1900 + yy } as i32;
        Utc.with_ymd_and_hms(year, num(2), num(4), num(6), num(8), num(10))
            .single()
            .map(CompactTime)
            .ok_or_else(bad)
    }

    /// Renders `YYMMDDHHMMSSZ`. The year is emitted modulo 100; round trips
    /// are exact within the 1950-2049 pivot window.
    pub fn format(&self) -> String {
        let t = self.0;
        format!(
            "{:02}{:02}{:02}{:02}{:02}{:02}Z",
            t.year().rem_euclid(100),
            t.month(),
            t.day(),
            t.hour(),
            t.minute(),
            t.second()
        )
    }

    pub fn plus_seconds(&self, secs: i64) -> Self {
        CompactTime(self.0 + chrono::Duration::seconds(secs))
    }

    pub fn seconds_until(&self, later: &CompactTime) -> i64 {
        (later.0 - self.0).num_seconds()
    }
}

impl fmt::Display for CompactTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format())
    }
}

/// Time source for everything that checks validity periods or evaluates
/// time-of-day conditions. Virtual in tests, wall clock in service mode.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;

    /// Minutes since midnight UTC, as used by `time` comparisons.
    fn time_of_day(&self) -> u32 {
        let now = self.now();
        now.hour() * 60 + now.minute()
    }
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Settable clock for tests and the scenario runner.
pub struct FixedClock(Mutex<DateTime<Utc>>);

impl FixedClock {
    pub fn new(at: DateTime<Utc>) -> Self {
        FixedClock(Mutex::new(at))
    }

    pub fn at_compact(text: &str) -> Result<Self, TimeError> {
        Ok(FixedClock::new(CompactTime::parse(text)?.datetime()))
    }

    pub fn set(&self, at: DateTime<Utc>) {
        *self.0.lock().unwrap() = at;
    }

    pub fn advance_seconds(&self, secs: i64) {
        let mut t = self.0.lock().unwrap();
        *t += chrono::Duration::seconds(secs);
    }

    /// Keeps the date, replaces the time of day.
    pub fn set_time_of_day(&self, minutes: u32) {
        let mut t = self.0.lock().unwrap();
        let date = t.date_naive();
        let tod = chrono::NaiveTime::from_hms_opt(minutes / 60, minutes % 60, 0).unwrap();
        *t = Utc.from_utc_datetime(&date.and_time(tod));
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap()
    }
}

/// Formats minutes-since-midnight as `HH:MM` for SYSTEM context maps.
pub fn format_time_of_day(minutes: u32) -> String {
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

/// Parses a time-of-day value to minutes since midnight (0-1439).
///
/// Accepted forms: `H[H][:MM]` on a 24-hour clock, or `H[H][:MM]` followed
/// by `am`/`pm`. `12am` is midnight (0), `12pm` is noon (720).
pub fn parse_time_of_day(value: &str) -> Result<u32, TimeError> {
    let bad = || TimeError::MalformedTime(value.to_string());
    let trimmed = value.trim();
    let lower = trimmed.to_ascii_lowercase();
    let (clock, meridiem) = if let Some(rest) = lower.strip_suffix("am") {
        (rest, Some(false))
    } else if let Some(rest) = lower.strip_suffix("pm") {
        (rest, Some(true))
    } else {
        (lower.as_str(), None)
    };
    let (h_str, m_str) = match clock.split_once(':') {
        Some((h, m)) => (h, Some(m)),
        None => (clock, None),
    };
    if h_str.is_empty() || h_str.len() > 2 || !h_str.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let hour: u32 = h_str.parse().map_err(|_| bad())?;
    let minute: u32 = match m_str {
        Some(m) => {
            if m.len() != 2 || !m.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            m.parse().map_err(|_| bad())?
        }
        None => 0,
    };
    if minute > 59 {
        return Err(bad());
    }
    let hour = match meridiem {
        None => {
            if hour > 23 {
                return Err(bad());
            }
            hour
        }
        Some(pm) => {
            if hour == 0 || hour > 12 {
                return Err(bad());
            }
            match (hour, pm) {
                (12, false) => 0,
                (12, true) => 12,
                (h, false) => h,
                (h, true) => h + 12,
            }
        }
    };
    Ok(hour * 60 + minute)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_parse_pivot() {
        let t = CompactTime::parse("010504001529Z").unwrap();
        assert_eq!(t.datetime(), Utc.with_ymd_and_hms(2001, 5, 4, 0, 15, 29).unwrap());
        let t = CompactTime::parse("990101000000Z").unwrap();
        assert_eq!(t.datetime().year(), 1999);
        let t = CompactTime::parse("500101000000Z").unwrap();
        assert_eq!(t.datetime().year(), 1950);
        let t = CompactTime::parse("490101000000Z").unwrap();
        assert_eq!(t.datetime().year(), 2049);
    }

    #[test]
    fn compact_round_trip() {
        for s in ["010504001529Z", "050504001529Z", "491231235959Z", "500101000000Z"] {
            assert_eq!(CompactTime::parse(s).unwrap().format(), s);
        }
    }

    #[test]
    fn compact_rejects_malformed() {
        for s in ["", "0105040015Z", "010504001529", "01050400152Z9", "011304001529Z", "010532001529Z", "01050400152 Z"] {
            assert!(CompactTime::parse(s).is_err(), "accepted {s:?}");
        }
    }

    #[test]
    fn time_of_day_examples() {
        assert_eq!(parse_time_of_day("5pm").unwrap(), 1020);
        assert_eq!(parse_time_of_day("8am").unwrap(), 480);
        assert_eq!(parse_time_of_day("18:30").unwrap(), 1110);
        assert_eq!(parse_time_of_day("12am").unwrap(), 0);
        assert_eq!(parse_time_of_day("12pm").unwrap(), 720);
        assert_eq!(parse_time_of_day("0:00").unwrap(), 0);
        assert_eq!(parse_time_of_day("23:59").unwrap(), 1439);
    }

    #[test]
    fn time_of_day_rejects() {
        for s in ["25:00", "24:00", "13pm", "0pm", "5:7", "5:", "", "noon", "5 pm-ish"] {
            assert!(parse_time_of_day(s).is_err(), "accepted {s:?}");
        }
    }

    #[test]
    fn fixed_clock_time_of_day() {
        let clock = FixedClock::at_compact("030615123000Z").unwrap();
        assert_eq!(clock.time_of_day(), 750);
        clock.set_time_of_day(1110);
        assert_eq!(clock.time_of_day(), 1110);
        assert_eq!(format_time_of_day(clock.time_of_day()), "18:30");
    }
}
