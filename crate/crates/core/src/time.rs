//! UTC epoch-second helpers. Hour buckets are closed-open `[t, t + 3600)`.

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};

pub const HOUR: i64 = 3600;
pub const DAY: i64 = 24 * HOUR;
/// Calendar-free month: one twelfth of a 365-day year.
pub const MONTH: i64 = 730 * HOUR;

pub fn floor_hour(ts: i64) -> i64 {
    ts.div_euclid(HOUR) * HOUR
}

pub fn is_hour_boundary(ts: i64) -> bool {
    ts.rem_euclid(HOUR) == 0
}

/// Parses either integer epoch seconds or an RFC 3339 / ISO-8601 timestamp.
pub fn parse_ts(s: &str) -> Result<i64> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Ok(secs);
    }
    DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.with_timezone(&Utc).timestamp())
        .or_else(|_| {
            // Accept a bare "YYYY-MM-DDTHH:MM:SS" as UTC.
            chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
                .map(|n| n.and_utc().timestamp())
        })
        .map_err(|_| Error::invalid(format!("unparseable timestamp {s:?}")))
}

pub fn format_ts(ts: i64) -> String {
    match DateTime::<Utc>::from_timestamp(ts, 0) {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Secs, true),
        None => ts.to_string(),
    }
}

/// Hour of day (0..24) in UTC.
pub fn hour_of_day(ts: i64) -> i64 {
    ts.rem_euclid(DAY) / HOUR
}

/// Serde adapter: timestamps as ISO-8601 strings on the way out, ISO or
/// integer epoch seconds on the way in.
pub mod iso {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(ts: &i64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_ts(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(v),
            Raw::Text(t) => super::parse_ts(&t).map_err(serde::de::Error::custom),
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(ts: &Option<i64>, s: S) -> Result<S::Ok, S::Error> {
            match ts {
                Some(t) => super::serialize(t, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<i64>, D::Error> {
            #[derive(Deserialize)]
            struct W(#[serde(with = "super")] i64);
            Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
        }
    }
}
