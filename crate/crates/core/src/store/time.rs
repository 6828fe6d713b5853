use std::fmt;

use chrono::{DateTime, LocalResult, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SECONDS_PER_HOUR: i64 = 3600;

/// A UTC instant aligned to the start of an hour, counted in hours since the
/// Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hour(pub i64);

impl Hour {
    /// Truncates to the containing hour.
    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Hour(dt.timestamp().div_euclid(SECONDS_PER_HOUR))
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.0 * SECONDS_PER_HOUR, 0).expect("hour index in chrono range")
    }

    pub fn from_ymd_h(year: i32, month: u32, day: u32, hour: u32) -> Option<Self> {
        let naive = NaiveDate::from_ymd_opt(year, month, day)?.and_hms_opt(hour, 0, 0)?;
        Some(Self::from_datetime(naive.and_utc()))
    }

    /// Days since the epoch (UTC calendar date).
    pub fn day(self) -> i64 {
        self.0.div_euclid(24)
    }

    pub fn hour_of_day(self) -> u32 {
        self.0.rem_euclid(24) as u32
    }

    pub fn date(self) -> NaiveDate {
        self.to_datetime().date_naive()
    }

    pub fn offset(self, hours: i64) -> Self {
        Hour(self.0 + hours)
    }

    /// Parses an ISO-8601 timestamp, truncating to the hour.
    ///
    /// Stamps carrying an offset (`Z`, `+01:00`) are taken as-is; naive
    /// stamps are interpreted in `zone`. An ambiguous local time (DST
    /// fall-back) resolves to the earlier instant; a non-existent one
    /// (spring-forward gap) is an error.
    pub fn parse(raw: &str, zone: Tz) -> Result<Self, TimeParseError> {
        let raw = raw.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
            return Ok(Self::from_datetime(dt.with_timezone(&Utc)));
        }
        for fmt in [
            "%Y-%m-%dT%H:%M:%S%.f%:z",
            "%Y-%m-%d %H:%M:%S%.f%:z",
            "%Y-%m-%dT%H:%M%:z",
            "%Y-%m-%dT%H:%M:%S%z",
        ] {
            if let Ok(dt) = DateTime::parse_from_str(raw, fmt) {
                return Ok(Self::from_datetime(dt.with_timezone(&Utc)));
            }
        }
        let naive = parse_naive(raw).ok_or_else(|| TimeParseError::Malformed(raw.to_owned()))?;
        if zone == Tz::UTC {
            return Ok(Self::from_datetime(naive.and_utc()));
        }
        match zone.from_local_datetime(&naive) {
            LocalResult::Single(dt) | LocalResult::Ambiguous(dt, _) => {
                Ok(Self::from_datetime(dt.with_timezone(&Utc)))
            }
            LocalResult::None => Err(TimeParseError::NonexistentLocal {
                raw: raw.to_owned(),
                zone: zone.name().to_owned(),
            }),
        }
    }
}

fn parse_naive(raw: &str) -> Option<NaiveDateTime> {
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    None
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimeParseError {
    #[error("unparseable timestamp {0:?}")]
    Malformed(String),
    #[error("local time {raw:?} does not exist in zone {zone}")]
    NonexistentLocal { raw: String, zone: String },
}

impl fmt::Display for Hour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dt = self.to_datetime();
        write!(
            f,
            "{}T{:02}:00:00Z",
            dt.date_naive().format("%Y-%m-%d"),
            dt.hour()
        )
    }
}

/// Parses with naive stamps read as UTC.
impl std::str::FromStr for Hour {
    type Err = TimeParseError;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        Hour::parse(raw, Tz::UTC)
    }
}

impl Serialize for Hour {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Hour {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncates_minutes() {
        let a = Hour::parse("2020-01-01T05:59:59Z", Tz::UTC).unwrap();
        let b = Hour::parse("2020-01-01 05:00", Tz::UTC).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hour_of_day(), 5);
        assert_eq!(a.to_string(), "2020-01-01T05:00:00Z");
    }

    #[test]
    fn offsets_normalize_to_utc() {
        let local = Hour::parse("2020-01-01T01:00:00+01:00", Tz::UTC).unwrap();
        assert_eq!(local, Hour::from_ymd_h(2020, 1, 1, 0).unwrap());
    }

    #[test]
    fn naive_stamps_use_default_zone() {
        let cph: Tz = "Europe/Copenhagen".parse().unwrap();
        // winter: UTC+1
        let h = Hour::parse("2020-01-01 01:00:00", cph).unwrap();
        assert_eq!(h, Hour::from_ymd_h(2020, 1, 1, 0).unwrap());
        // summer: UTC+2
        let h = Hour::parse("2020-07-01T02:00:00", cph).unwrap();
        assert_eq!(h, Hour::from_ymd_h(2020, 7, 1, 0).unwrap());
    }

    #[test]
    fn dst_edges() {
        let cph: Tz = "Europe/Copenhagen".parse().unwrap();
        // 2020-10-25 02:30 happens twice; earlier is 00:30 UTC
        let h = Hour::parse("2020-10-25 02:30", cph).unwrap();
        assert_eq!(h, Hour::from_ymd_h(2020, 10, 25, 0).unwrap());
        // 2020-03-29 02:30 never happens
        assert!(matches!(
            Hour::parse("2020-03-29 02:30", cph),
            Err(TimeParseError::NonexistentLocal { .. })
        ));
    }

    #[test]
    fn negative_epochs_floor() {
        let h = Hour::parse("1969-12-31T23:30:00Z", Tz::UTC).unwrap();
        assert_eq!(h, Hour(-1));
        assert_eq!(h.hour_of_day(), 23);
        assert_eq!(h.day(), -1);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Hour::parse("yesterday", Tz::UTC).is_err());
    }
}
