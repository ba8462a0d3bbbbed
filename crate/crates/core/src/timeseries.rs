//! Interval-data model: point identifiers, sampled series, hourly
//! resampling, and the inner join of load with the six weather streams.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{format_ts, parse_ts, HOUR};

/// Identifier of a measured or predicted quantity, e.g. `campus-main-kw`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PointId(String);

impl PointId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::invalid("point id must be non-empty"));
        }
        Ok(PointId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// File-system-safe, injective encoding of the id. Characters outside
    /// `[A-Za-z0-9.-]` (and `_` itself) become `_XX` hex escapes, and a
    /// leading `.` is escaped so the result is never a hidden file.
    pub fn sanitized(&self) -> String {
        let mut out = String::with_capacity(self.0.len());
        for (i, b) in self.0.bytes().enumerate() {
            let keep = b.is_ascii_alphanumeric() || b == b'-' || (b == b'.' && i > 0);
            if keep {
                out.push(b as char);
            } else {
                out.push_str(&format!("_{b:02X}"));
            }
        }
        out
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for PointId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        PointId::new(s)
    }
}

impl From<PointId> for String {
    fn from(p: PointId) -> String {
        p.0
    }
}

impl std::str::FromStr for PointId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PointId::new(s)
    }
}

/// One timestamped measurement; `None` marks a missing value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub ts: i64,
    pub value: Option<f64>,
}

impl Sample {
    pub fn present(ts: i64, value: f64) -> Self {
        Sample { ts, value: Some(value) }
    }

    pub fn missing(ts: i64) -> Self {
        Sample { ts, value: None }
    }
}

/// Timestamped measurement stream for one point.
///
/// Timestamps are strictly increasing multiples of `resolution_s` and every
/// present value is finite. Construction validates both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSeries {
    point: PointId,
    unit: String,
    resolution_s: i64,
    samples: Vec<Sample>,
}

impl IntervalSeries {
    pub fn new(
        point: PointId,
        unit: impl Into<String>,
        resolution_s: i64,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        if resolution_s <= 0 {
            return Err(Error::invalid(format!(
                "{point}: resolution must be positive, got {resolution_s}"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.ts.rem_euclid(resolution_s) != 0 {
                return Err(Error::invalid(format!(
                    "{point}: timestamp {} is not a multiple of resolution {resolution_s}s",
                    format_ts(s.ts)
                )));
            }
            if let Some(v) = s.value {
                if !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "{point}: non-finite value at {}",
                        format_ts(s.ts)
                    )));
                }
            }
            if i > 0 && samples[i - 1].ts >= s.ts {
                return Err(Error::invalid(format!(
                    "{point}: timestamps not strictly increasing at {}",
                    format_ts(s.ts)
                )));
            }
        }
        Ok(IntervalSeries {
            point,
            unit: unit.into(),
            resolution_s,
            samples,
        })
    }

    /// Dense series starting at `start` with one value per step.
    pub fn from_values(
        point: PointId,
        unit: impl Into<String>,
        resolution_s: i64,
        start: i64,
        values: impl IntoIterator<Item = Option<f64>>,
    ) -> Result<Self> {
        let samples = values
            .into_iter()
            .enumerate()
            .map(|(i, value)| Sample {
                ts: start + i as i64 * resolution_s,
                value,
            })
            .collect();
        IntervalSeries::new(point, unit, resolution_s, samples)
    }

    pub fn point(&self) -> &PointId {
        &self.point
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn resolution_s(&self) -> i64 {
        self.resolution_s
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn present_count(&self) -> usize {
        self.samples.iter().filter(|s| s.value.is_some()).count()
    }

    /// `(first, last)` timestamps, if any.
    pub fn range(&self) -> Option<(i64, i64)> {
        Some((self.samples.first()?.ts, self.samples.last()?.ts))
    }

    /// Same point, unit and resolution with replaced samples.
    pub fn with_samples(&self, samples: Vec<Sample>) -> Result<Self> {
        IntervalSeries::new(self.point.clone(), self.unit.clone(), self.resolution_s, samples)
    }

    /// Samples with `start <= ts < end`.
    pub fn slice(&self, start: i64, end: i64) -> IntervalSeries {
        let lo = self.samples.partition_point(|s| s.ts < start);
        let hi = self.samples.partition_point(|s| s.ts < end);
        IntervalSeries {
            point: self.point.clone(),
            unit: self.unit.clone(),
            resolution_s: self.resolution_s,
            samples: self.samples[lo..hi].to_vec(),
        }
    }

    /// Reads the `ts,value` CSV format. Timestamps may be ISO-8601 UTC or
    /// epoch seconds; an empty value field is a missing sample. The
    /// resolution is inferred as the smallest timestamp step (hourly for a
    /// single-row file).
    pub fn read_csv(reader: impl Read, point: PointId, unit: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "ts" || &headers[1] != "value" {
            return Err(Error::invalid(format!(
                "{point}: expected header `ts,value`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let ts = parse_ts(rec.get(0).unwrap_or(""))?;
            let raw = rec.get(1).unwrap_or("");
            let value = if raw.is_empty() {
                None
            } else {
                Some(raw.parse::<f64>().map_err(|_| {
                    Error::invalid(format!("{point}: bad value {raw:?} at {}", format_ts(ts)))
                })?)
            };
            samples.push(Sample { ts, value });
        }
        let resolution = samples
            .windows(2)
            .map(|w| w[1].ts - w[0].ts)
            .filter(|d| *d > 0)
            .min()
            .unwrap_or(HOUR);
        IntervalSeries::new(point, unit, resolution, samples)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["ts", "value"])?;
        for s in &self.samples {
            let v = s.value.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([format_ts(s.ts), v])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path, point: PointId, unit: &str) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        IntervalSeries::read_csv(f, point, unit)
    }
}

/// The six weather inputs, in model column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherField {
    RelHumidity,
    Pressure,
    DryBulbTemp,
    Ghi,
    CloudCover,
    WindSpeed,
}

impl WeatherField {
    pub const ALL: [WeatherField; 6] = [
        WeatherField::RelHumidity,
        WeatherField::Pressure,
        WeatherField::DryBulbTemp,
        WeatherField::Ghi,
        WeatherField::CloudCover,
        WeatherField::WindSpeed,
    ];

    pub fn unit(self) -> &'static str {
        match self {
            WeatherField::RelHumidity => "%",
            WeatherField::Pressure => "hPa",
            WeatherField::DryBulbTemp => "°C",
            WeatherField::Ghi => "W/m²",
            WeatherField::CloudCover => "%",
            WeatherField::WindSpeed => "m/s",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeatherField::RelHumidity => "rel_humidity",
            WeatherField::Pressure => "pressure",
            WeatherField::DryBulbTemp => "dry_bulb_temp",
            WeatherField::Ghi => "ghi",
            WeatherField::CloudCover => "cloud_cover",
            WeatherField::WindSpeed => "wind_speed",
        }
    }
}

/// One hour of the six weather features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherFrame {
    pub ts: i64,
    pub rel_humidity: f64,
    pub pressure: f64,
    pub dry_bulb_temp: f64,
    pub ghi: f64,
    pub cloud_cover: f64,
    pub wind_speed: f64,
}

impl WeatherFrame {
    pub fn from_array(ts: i64, v: [f64; 6]) -> Self {
        WeatherFrame {
            ts,
            rel_humidity: v[0],
            pressure: v[1],
            dry_bulb_temp: v[2],
            ghi: v[3],
            cloud_cover: v[4],
            wind_speed: v[5],
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.rel_humidity,
            self.pressure,
            self.dry_bulb_temp,
            self.ghi,
            self.cloud_cover,
            self.wind_speed,
        ]
    }

    /// Checks finiteness and the physical ranges of each field.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::invalid(format!(
                "weather at {}: {what} out of range",
                format_ts(self.ts)
            )))
        };
        if self.as_array().iter().any(|v| !v.is_finite()) {
            return bad("non-finite field");
        }
        if !(0.0..=100.0).contains(&self.rel_humidity) {
            return bad("rel_humidity");
        }
        if self.pressure <= 0.0 {
            return bad("pressure");
        }
        if self.ghi < 0.0 {
            return bad("ghi");
        }
        if !(0.0..=100.0).contains(&self.cloud_cover) {
            return bad("cloud_cover");
        }
        if self.wind_speed < 0.0 {
            return bad("wind_speed");
        }
        Ok(())
    }
}

/// Averages a sub-hourly series into hourly buckets `[t, t+3600)`.
///
/// Only hours that contain at least one input sample appear in the output;
/// an hour whose samples are all missing yields a missing value.
pub fn resample_hourly(series: &IntervalSeries) -> Result<IntervalSeries> {
    let res = series.resolution_s();
    if res > HOUR || HOUR % res != 0 {
        return Err(Error::invalid(format!(
            "{}: resolution {res}s does not divide 3600s",
            series.point()
        )));
    }
    let mut buckets: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for s in series.samples() {
        let hour = s.ts.div_euclid(HOUR) * HOUR;
        let slot = buckets.entry(hour).or_insert((0.0, 0));
        if let Some(v) = s.value {
            slot.0 += v;
            slot.1 += 1;
        }
    }
    let samples = buckets
        .into_iter()
        .map(|(ts, (sum, n))| Sample {
            ts,
            value: (n > 0).then(|| sum / n as f64),
        })
        .collect();
    IntervalSeries::new(series.point().clone(), series.unit(), HOUR, samples)
}

/// One joined hour: weather features plus the load value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedRow {
    pub ts: i64,
    pub weather: WeatherFrame,
    pub load: f64,
}

impl AlignedRow {
    /// The seven model columns: six weather fields then load.
    pub fn columns(&self) -> [f64; 7] {
        let w = self.weather.as_array();
        [w[0], w[1], w[2], w[3], w[4], w[5], self.load]
    }
}

/// Inner join of one load series with the six weather series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedTable {
    pub point: PointId,
    pub rows: Vec<AlignedRow>,
}

impl AlignedTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn start(&self) -> Option<i64> {
        self.rows.first().map(|r| r.ts)
    }

    /// Exclusive end: one hour past the last row.
    pub fn end(&self) -> Option<i64> {
        self.rows.last().map(|r| r.ts + HOUR)
    }

    /// Index of the row stamped `ts`, if present.
    pub fn index_of(&self, ts: i64) -> Option<usize> {
        self.rows.binary_search_by_key(&ts, |r| r.ts).ok()
    }

    /// True when rows `lo..=hi` are consecutive hours.
    pub fn is_consecutive(&self, lo: usize, hi: usize) -> bool {
        hi < self.rows.len()
            && lo <= hi
            && self.rows[hi].ts - self.rows[lo].ts == (hi - lo) as i64 * HOUR
    }
}

/// Joins load with the six weather series (in [`WeatherField::ALL`] order),
/// keeping only hours where all seven have a present value.
pub fn align(load: &IntervalSeries, weather: &[IntervalSeries]) -> Result<AlignedTable> {
    if weather.len() != 6 {
        return Err(Error::invalid(format!(
            "expected 6 weather series, got {}",
            weather.len()
        )));
    }
    for s in std::iter::once(load).chain(weather) {
        if s.resolution_s() != HOUR {
            return Err(Error::invalid(format!(
                "{}: align needs hourly series, got {}s",
                s.point(),
                s.resolution_s()
            )));
        }
    }

    let lookups: Vec<BTreeMap<i64, f64>> = weather
        .iter()
        .map(|s| {
            s.samples()
                .iter()
                .filter_map(|x| x.value.map(|v| (x.ts, v)))
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    'outer: for s in load.samples() {
        let Some(load_v) = s.value else { continue };
        let mut w = [0.0; 6];
        for (slot, lookup) in w.iter_mut().zip(&lookups) {
            match lookup.get(&s.ts) {
                Some(v) => *slot = *v,
                None => continue 'outer,
            }
        }
        rows.push(AlignedRow {
            ts: s.ts,
            weather: WeatherFrame::from_array(s.ts, w),
            load: load_v,
        });
    }

    if rows.is_empty() {
        let ranges = std::iter::once(load)
            .chain(weather)
            .map(|s| match s.range() {
                Some((a, b)) => format!("{} [{} .. {}]", s.point(), format_ts(a), format_ts(b)),
                None => format!("{} (empty)", s.point()),
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::invalid(format!(
            "no hour is present in all seven series: {ranges}"
        )));
    }
    Ok(AlignedTable {
        point: load.point().clone(),
        rows,
    })
}
