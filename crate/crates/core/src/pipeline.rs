//! Supervised windows, chronological split, scaling, per-point training,
//! and issuance of 18-hour forecast grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::lstm::{self, Example, LossCurve, Matrix, TrainConfig};
use crate::registry::ModelRecord;
use crate::time::{format_ts, is_hour_boundary, HOUR, MONTH};
use crate::timeseries::{AlignedRow, AlignedTable, PointId};

/// Hours ahead covered by one forecast issuance.
pub const HORIZON: usize = 18;

/// Columns: six weather fields then load.
pub const COLUMNS: usize = 7;
pub const COLUMN_NAMES: [&str; COLUMNS] = [
    "rel_humidity",
    "pressure",
    "dry_bulb_temp",
    "ghi",
    "cloud_cover",
    "wind_speed",
    "load",
];
const LOAD: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// The six weather features (d = 6).
    #[default]
    WeatherOnly,
    /// Weather plus past load (d = 7).
    WeatherAndLoad,
}

impl FeatureMode {
    pub fn input_dim(self) -> usize {
        match self {
            FeatureMode::WeatherOnly => 6,
            FeatureMode::WeatherAndLoad => 7,
        }
    }
}

/// Per-column standardisation fitted on the training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: [f64; COLUMNS],
    pub std: [f64; COLUMNS],
    /// First and last timestamp of the rows the statistics came from.
    pub fit_start: i64,
    pub fit_end: i64,
}

impl FeatureScaler {
    /// Population mean and standard deviation of each column. A column
    /// with zero spread is rejected by name.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a AlignedRow>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = [0.0; COLUMNS];
        let (mut start, mut end) = (i64::MAX, i64::MIN);
        let rows: Vec<&AlignedRow> = rows.into_iter().collect();
        for r in &rows {
            n += 1;
            start = start.min(r.ts);
            end = end.max(r.ts);
            for (s, v) in sum.iter_mut().zip(r.columns()) {
                *s += v;
            }
        }
        if n == 0 {
            return Err(Error::invalid("cannot fit a scaler on zero rows"));
        }
        let mean = sum.map(|s| s / n as f64);
        let mut var = [0.0; COLUMNS];
        for r in &rows {
            for ((acc, v), m) in var.iter_mut().zip(r.columns()).zip(mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var.map(|v| (v / n as f64).sqrt());
        if let Some(col) = std.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::invalid(format!(
                "column `{}` has zero variance on the training rows",
                COLUMN_NAMES[col]
            )));
        }
        Ok(FeatureScaler { mean, std, fit_start: start, fit_end: end })
    }

    pub fn apply(&self, row: &[f64; COLUMNS]) -> [f64; COLUMNS] {
        std::array::from_fn(|i| (row[i] - self.mean[i]) / self.std[i])
    }

    pub fn invert(&self, row: &[f64; COLUMNS]) -> [f64; COLUMNS] {
        std::array::from_fn(|i| row[i] * self.std[i] + self.mean[i])
    }

    pub fn apply_load(&self, v: f64) -> f64 {
        (v - self.mean[LOAD]) / self.std[LOAD]
    }

    pub fn invert_load(&self, v: f64) -> f64 {
        v * self.std[LOAD] + self.mean[LOAD]
    }
}

/// Months of train and test data; the boundary is filled in by the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_months: u32,
    pub test_months: u32,
    pub boundary: Option<i64>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_months: 10, test_months: 2, boundary: None }
    }
}

/// One supervised pair, by reference into an [`AlignedTable`]: input rows
/// `start .. start+L`, targets the load of the following `K` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    /// Timestamp of the last input row (the issuance hour).
    pub issue_ts: i64,
    pub first_target_ts: i64,
    pub last_target_ts: i64,
}

impl Window {
    /// Raw feature matrix and target vector in original units.
    pub fn raw(&self, table: &AlignedTable, mode: FeatureMode, lookback: usize, horizon: usize) -> (Matrix, Vec<f64>) {
        let d = mode.input_dim();
        let rows = &table.rows[self.start..self.start + lookback];
        let x = Matrix::from_fn(lookback, d, |r, c| rows[r].columns()[c]);
        let y = table.rows[self.start + lookback..self.start + lookback + horizon]
            .iter()
            .map(|r| r.load)
            .collect();
        (x, y)
    }

    /// Scaled example ready for the LSTM.
    pub fn example(
        &self,
        table: &AlignedTable,
        scaler: &FeatureScaler,
        mode: FeatureMode,
        lookback: usize,
        horizon: usize,
    ) -> Example {
        let x = scaled_inputs(&table.rows[self.start..self.start + lookback], scaler, mode);
        let y = table.rows[self.start + lookback..self.start + lookback + horizon]
            .iter()
            .map(|r| scaler.apply_load(r.load))
            .collect();
        Example { x, y }
    }
}

fn scaled_inputs(rows: &[AlignedRow], scaler: &FeatureScaler, mode: FeatureMode) -> Matrix {
    let d = mode.input_dim();
    let mut data = Vec::with_capacity(rows.len() * d);
    for r in rows {
        data.extend_from_slice(&scaler.apply(&r.columns())[..d]);
    }
    Matrix::from_vec(rows.len(), d, data).expect("row-major fill")
}

/// Every window whose `L` input rows and `K` target rows are consecutive
/// hours with no gap.
pub fn build_windows(table: &AlignedTable, lookback: usize, horizon: usize) -> Result<Vec<Window>> {
    if lookback == 0 || horizon == 0 {
        return Err(Error::invalid("lookback and horizon must be >= 1"));
    }
    let span = lookback + horizon;
    let n = table.len();
    let mut out = Vec::new();
    if n >= span {
        // Length of the consecutive run ending at each row.
        let mut run = vec![1usize; n];
        for i in 1..n {
            if table.rows[i].ts - table.rows[i - 1].ts == HOUR {
                run[i] = run[i - 1] + 1;
            }
        }
        for end in span - 1..n {
            if run[end] >= span {
                let start = end + 1 - span;
                out.push(Window {
                    start,
                    issue_ts: table.rows[start + lookback - 1].ts,
                    first_target_ts: table.rows[start + lookback].ts,
                    last_target_ts: table.rows[end].ts,
                });
            }
        }
    }
    if out.is_empty() {
        let gaps = table
            .rows
            .windows(2)
            .filter(|w| w[1].ts - w[0].ts != HOUR)
            .take(5)
            .map(|w| format!("{} -> {}", format_ts(w[0].ts), format_ts(w[1].ts)))
            .collect::<Vec<_>>();
        return Err(Error::invalid(format!(
            "no run of {span} consecutive hours in {} rows (first gaps: {})",
            n,
            if gaps.is_empty() { "none".to_string() } else { gaps.join(", ") }
        )));
    }
    Ok(out)
}

/// Result of [`chronological_split`].
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<Window>,
    pub test: Vec<Window>,
    /// Windows whose targets straddle the boundary.
    pub dropped: usize,
    pub boundary: i64,
}

/// Splits windows at `boundary = data end − test_months`. A window is
/// train when all of its targets fall before the boundary and test when
/// all of them fall at or after it; straddlers are dropped.
pub fn chronological_split(table: &AlignedTable, windows: &[Window], spec: &SplitSpec) -> Result<Split> {
    let (start, end) = match (table.start(), table.end()) {
        (Some(s), Some(e)) => (s, e),
        _ => return Err(Error::invalid("cannot split an empty table")),
    };
    let need = (spec.train_months + spec.test_months) as i64 * MONTH;
    if end - start < need {
        return Err(Error::invalid(format!(
            "data spans {:.1} months, split needs {} + {}",
            (end - start) as f64 / MONTH as f64,
            spec.train_months,
            spec.test_months
        )));
    }
    let boundary = end - spec.test_months as i64 * MONTH;
    let mut split = Split { train: Vec::new(), test: Vec::new(), dropped: 0, boundary };
    for w in windows {
        if w.last_target_ts < boundary {
            split.train.push(*w);
        } else if w.first_target_ts >= boundary {
            split.test.push(*w);
        } else {
            split.dropped += 1;
        }
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::invalid(format!(
            "split at {} leaves {} train and {} test windows",
            format_ts(boundary),
            split.train.len(),
            split.test.len()
        )));
    }
    Ok(split)
}

/// Fits the scaler on exactly the rows touched by the training windows.
pub fn fit_scaler(table: &AlignedTable, train: &[Window], lookback: usize, horizon: usize) -> Result<FeatureScaler> {
    let mut used = vec![false; table.len()];
    for w in train {
        used[w.start..w.start + lookback + horizon].iter_mut().for_each(|u| *u = true);
    }
    FeatureScaler::fit(table.rows.iter().zip(used).filter(|(_, u)| *u).map(|(r, _)| r))
}

/// Error summary over a set of test windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub pairs: usize,
    /// Original units (kW²).
    pub overall_mse: f64,
    pub per_step_mse: Vec<f64>,
    /// Standardised units.
    pub overall_mse_scaled: f64,
    pub per_step_mse_scaled: Vec<f64>,
}

impl Metrics {
    /// `step,mse` rows in original units, steps numbered from 1.
    pub fn per_step_csv(&self) -> String {
        let mut s = String::from("step,mse\n");
        for (k, v) in self.per_step_mse.iter().enumerate() {
            s.push_str(&format!("{},{}\n", k + 1, v));
        }
        s
    }
}

/// A trained model plus everything needed to run it on raw rows.
#[derive(Debug, Clone, Copy)]
pub struct ModelView<'a> {
    pub params: &'a lstm::LstmParameters,
    pub head: &'a lstm::RegressorHead,
    pub scaler: &'a FeatureScaler,
    pub mode: FeatureMode,
    pub lookback: usize,
}

impl<'a> From<&'a ModelRecord> for ModelView<'a> {
    fn from(r: &'a ModelRecord) -> Self {
        ModelView {
            params: &r.params,
            head: &r.head,
            scaler: &r.scaler,
            mode: r.feature_mode,
            lookback: r.train_config.lookback,
        }
    }
}

impl ModelView<'_> {
    /// Forecast in original units from exactly `lookback` raw rows.
    pub fn predict_rows(&self, rows: &[AlignedRow]) -> Result<Vec<f64>> {
        let x = scaled_inputs(rows, self.scaler, self.mode);
        let y = lstm::predict(self.params, self.head, &x)?;
        Ok(y.into_iter().map(|v| self.scaler.invert_load(v)).collect())
    }
}

/// Overall and per-horizon-step MSE of `model` on `windows`.
pub fn evaluate_windows(model: ModelView<'_>, table: &AlignedTable, windows: &[Window]) -> Result<Metrics> {
    if windows.is_empty() {
        return Err(Error::invalid("evaluate: empty test set"));
    }
    let k = model.head.outputs();
    let mut per = vec![0.0; k];
    let mut per_scaled = vec![0.0; k];
    for w in windows {
        let rows = &table.rows[w.start..w.start + model.lookback];
        let x = scaled_inputs(rows, model.scaler, model.mode);
        let y_scaled = lstm::predict(model.params, model.head, &x)?;
        let targets = &table.rows[w.start + model.lookback..w.start + model.lookback + k];
        for (j, (ys, t)) in y_scaled.iter().zip(targets).enumerate() {
            let e = model.scaler.invert_load(*ys) - t.load;
            per[j] += e * e;
            let es = ys - model.scaler.apply_load(t.load);
            per_scaled[j] += es * es;
        }
    }
    let n = windows.len() as f64;
    per.iter_mut().for_each(|v| *v /= n);
    per_scaled.iter_mut().for_each(|v| *v /= n);
    Ok(Metrics {
        pairs: windows.len(),
        overall_mse: per.iter().sum::<f64>() / k as f64,
        per_step_mse: per,
        overall_mse_scaled: per_scaled.iter().sum::<f64>() / k as f64,
        per_step_mse_scaled: per_scaled,
    })
}

/// Evaluates a stored model on test windows.
pub fn evaluate(record: &ModelRecord, table: &AlignedTable, test: &[Window]) -> Result<Metrics> {
    evaluate_windows(ModelView::from(record), table, test)
}

/// Feature layout and split used when training a point model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub feature_mode: FeatureMode,
    pub split: SplitSpec,
}

/// Windows, split, scaler and scaled examples for one training run.
pub struct PreparedData {
    pub windows: Vec<Window>,
    pub split: Split,
    pub scaler: FeatureScaler,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

pub fn prepare(table: &AlignedTable, lookback: usize, pipeline: &PipelineConfig) -> Result<PreparedData> {
    let windows = build_windows(table, lookback, HORIZON)?;
    let split = chronological_split(table, &windows, &pipeline.split)?;
    let scaler = fit_scaler(table, &split.train, lookback, HORIZON)?;
    let mode = pipeline.feature_mode;
    let train = split.train.iter().map(|w| w.example(table, &scaler, mode, lookback, HORIZON)).collect();
    let test = split.test.iter().map(|w| w.example(table, &scaler, mode, lookback, HORIZON)).collect();
    Ok(PreparedData { windows, split, scaler, train, test })
}

/// Builds windows, splits, fits the scaler on train rows, trains the LSTM
/// and packages the result. Loss curves are in scaled units.
///
/// With `warm_start`, training continues from that record's weights when
/// their shapes match the requested configuration.
pub fn train_point_model(
    point: &PointId,
    table: &AlignedTable,
    cfg: &TrainConfig,
    pipeline: &PipelineConfig,
    created_at: i64,
    warm_start: Option<&ModelRecord>,
) -> Result<(ModelRecord, LossCurve)> {
    let run = || -> Result<(ModelRecord, LossCurve)> {
        cfg.validate()?;
        let data = prepare(table, cfg.lookback, pipeline)?;
        let d = pipeline.feature_mode.input_dim();
        let (p0, h0) = match warm_start {
            Some(r)
                if r.params.input_dim() == d
                    && r.params.hidden_dim() == cfg.hidden_dim
                    && r.head.outputs() == HORIZON =>
            {
                (r.params.clone(), r.head.clone())
            }
            _ => lstm::init_parameters(cfg.seed, d, cfg.hidden_dim, HORIZON)?,
        };
        let out = lstm::train_from(p0, h0, &data.train, &data.test, cfg, &mut |_| {})?;
        let view = ModelView {
            params: &out.params,
            head: &out.head,
            scaler: &data.scaler,
            mode: pipeline.feature_mode,
            lookback: cfg.lookback,
        };
        let metrics = evaluate_windows(view, table, &data.split.test)?;
        let record = ModelRecord {
            point: point.clone(),
            version: 0,
            created_at,
            feature_mode: pipeline.feature_mode,
            train_config: cfg.clone(),
            split: SplitSpec { boundary: Some(data.split.boundary), ..pipeline.split },
            scaler: data.scaler,
            params: out.params,
            head: out.head,
            metrics,
        };
        Ok((record, out.curve))
    };
    run().context(format!("point {point}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastEntry {
    #[serde(with = "crate::time::iso")]
    pub ts: i64,
    pub val: f64,
}

/// One issuance: 18 hourly values following `issued_at`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForecastGrid {
    pub point: PointId,
    #[serde(with = "crate::time::iso")]
    pub issued_at: i64,
    pub model_version: u64,
    pub entries: Vec<ForecastEntry>,
}

impl ForecastGrid {
    /// Exactly 18 finite entries at `issued_at + k·1h`, `k = 1..=18`.
    pub fn validate(&self) -> Result<()> {
        if !is_hour_boundary(self.issued_at) {
            return Err(Error::invalid("issued_at is not on an hour boundary"));
        }
        if self.entries.len() != HORIZON {
            return Err(Error::invalid(format!("grid has {} entries, expected {HORIZON}", self.entries.len())));
        }
        for (k, e) in self.entries.iter().enumerate() {
            if e.ts != self.issued_at + (k as i64 + 1) * HOUR {
                return Err(Error::invalid(format!("entry {k} is stamped {}", format_ts(e.ts))));
            }
            if !e.val.is_finite() {
                return Err(Error::invalid(format!("entry {k} is not finite")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Runs the model on the last `lookback` hours ending at `issued_at` and
/// returns 18 values in original units.
pub fn issue_forecast(record: &ModelRecord, latest: &[AlignedRow], issued_at: i64) -> Result<ForecastGrid> {
    let lookback = record.train_config.lookback;
    if !is_hour_boundary(issued_at) {
        return Err(Error::invalid(format!("issued_at {} is not on an hour boundary", format_ts(issued_at))));
    }
    if latest.len() != lookback {
        return Err(Error::invalid(format!("need {lookback} input hours, got {}", latest.len())));
    }
    for (i, r) in latest.iter().enumerate() {
        let expect = issued_at - (lookback - 1 - i) as i64 * HOUR;
        if r.ts != expect {
            return Err(Error::invalid(format!(
                "input window has a gap: expected {}, found {}",
                format_ts(expect),
                format_ts(r.ts)
            )));
        }
    }
    let values = ModelView::from(record).predict_rows(latest)?;
    let entries = values
        .into_iter()
        .enumerate()
        .map(|(k, val)| ForecastEntry { ts: issued_at + (k as i64 + 1) * HOUR, val })
        .collect();
    let grid = ForecastGrid {
        point: record.point.clone(),
        issued_at,
        model_version: record.version,
        entries,
    };
    grid.validate()?;
    Ok(grid)
}

/// The `lookback` rows ending at `issued_at`, if all are present.
pub fn latest_rows(table: &AlignedTable, issued_at: i64, lookback: usize) -> Result<&[AlignedRow]> {
    let end = table
        .index_of(issued_at)
        .ok_or_else(|| Error::invalid(format!("no aligned row at {}", format_ts(issued_at))))?;
    if end + 1 < lookback || !table.is_consecutive(end + 1 - lookback, end) {
        return Err(Error::invalid(format!(
            "the {lookback} hours ending at {} are not all present",
            format_ts(issued_at)
        )));
    }
    Ok(&table.rows[end + 1 - lookback..=end])
}

/// Repeat-last-24-hours forecast: the value for `issue + k` is the load
/// observed at `issue + k − 24h`.
pub fn persistence_forecast(table: &AlignedTable, issue_ts: i64, horizon: usize) -> Option<Vec<f64>> {
    (1..=horizon as i64)
        .map(|k| table.index_of(issue_ts + k * HOUR - 24 * HOUR).map(|i| table.rows[i].load))
        .collect()
}

/// Model versus persistence on the same test windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillReport {
    pub model_mse: f64,
    pub persistence_mse: f64,
    /// Sampled issuance times and how many the model won.
    pub sampled: usize,
    pub model_wins: usize,
}

impl SkillReport {
    pub fn win_rate(&self) -> f64 {
        self.model_wins as f64 / self.sampled.max(1) as f64
    }
}

/// Overall MSE of model and persistence over all `windows`, plus
/// per-issuance comparisons at `samples` evenly spaced windows.
pub fn skill_vs_persistence(
    record: &ModelRecord,
    table: &AlignedTable,
    windows: &[Window],
    samples: usize,
) -> Result<SkillReport> {
    let view = ModelView::from(record);
    let lookback = view.lookback;
    let usable: Vec<&Window> = windows
        .iter()
        .filter(|w| persistence_forecast(table, w.issue_ts, HORIZON).is_some())
        .collect();
    if usable.is_empty() {
        return Err(Error::invalid("no window has 24 h of history for persistence"));
    }
    let mut errs = Vec::with_capacity(usable.len());
    for w in &usable {
        let pred = view.predict_rows(&table.rows[w.start..w.start + lookback])?;
        let truth: Vec<f64> = table.rows[w.start + lookback..w.start + lookback + HORIZON]
            .iter()
            .map(|r| r.load)
            .collect();
        let pers = persistence_forecast(table, w.issue_ts, HORIZON).expect("filtered");
        errs.push((lstm::mse(&truth, &pred)?, lstm::mse(&truth, &pers)?));
    }
    let n = errs.len() as f64;
    let model_mse = errs.iter().map(|e| e.0).sum::<f64>() / n;
    let persistence_mse = errs.iter().map(|e| e.1).sum::<f64>() / n;
    let samples = samples.min(errs.len());
    let mut wins = 0;
    for s in 0..samples {
        let idx = s * errs.len() / samples;
        if errs[idx].0 < errs[idx].1 {
            wins += 1;
        }
    }
    Ok(SkillReport { model_mse, persistence_mse, sampled: samples, model_wins: wins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::WeatherFrame;

    fn table_from(ts_hours: impl IntoIterator<Item = i64>) -> AlignedTable {
        let rows = ts_hours
            .into_iter()
            .map(|h| {
                let ts = h * HOUR;
                let f = h as f64;
                AlignedRow {
                    ts,
                    weather: WeatherFrame::from_array(ts, [f, f * 2.0, (f * 0.3).sin(), f % 5.0, f % 7.0, f % 3.0]),
                    load: 100.0 + f,
                }
            })
            .collect();
        AlignedTable { point: PointId::new("p").unwrap(), rows }
    }

    #[test]
    fn window_count() {
        let t = table_from(0..100);
        assert_eq!(build_windows(&t, 24, 18).unwrap().len(), 59);
    }

    #[test]
    fn windows_skip_gaps() {
        let t = table_from((0..50).chain(51..100));
        let ws = build_windows(&t, 24, 18).unwrap();
        assert!(ws.iter().all(|w| t.is_consecutive(w.start, w.start + 41)));
        // Runs of 50 and 49 rows: 9 + 8 windows.
        assert_eq!(ws.len(), 9 + 8);
        assert!(build_windows(&table_from((0..30).chain(31..60)), 24, 18).is_err());
    }

    #[test]
    fn base_case_window() {
        let t = table_from(0..2);
        let ws = build_windows(&t, 1, 1).unwrap();
        assert_eq!(ws.len(), 1);
        let (x, y) = ws[0].raw(&t, FeatureMode::WeatherOnly, 1, 1);
        assert_eq!(x.row(0), &t.rows[0].columns()[..6]);
        assert_eq!(y, vec![t.rows[1].load]);
        let (x7, _) = ws[0].raw(&t, FeatureMode::WeatherAndLoad, 1, 1);
        assert_eq!(x7.row(0), &t.rows[0].columns());
    }

    #[test]
    fn split_year() {
        let t = table_from(0..8760);
        let ws = build_windows(&t, 24, 18).unwrap();
        let s = chronological_split(&t, &ws, &SplitSpec::default()).unwrap();
        assert_eq!(s.boundary, 10 * MONTH);
        let frac = s.train.len() as f64 / ws.len() as f64;
        assert!((frac - 10.0 / 12.0).abs() < 0.01, "{frac}");
        assert_eq!(s.train.len() + s.test.len() + s.dropped, ws.len());
        assert_eq!(s.dropped, 17);
        let last_train = s.train.iter().map(|w| w.last_target_ts).max().unwrap();
        let first_test = s.test.iter().map(|w| w.first_target_ts).min().unwrap();
        assert!(last_train < first_test);
    }

    #[test]
    fn split_too_short_rejected() {
        let t = table_from(0..(3 * 730));
        let ws = build_windows(&t, 24, 18).unwrap();
        assert!(chronological_split(&t, &ws, &SplitSpec::default()).is_err());
    }

    #[test]
    fn split_with_all_windows_in_first_month() {
        let mut t = table_from(0..730);
        t.rows.extend(table_from([12 * 730 - 1]).rows);
        let ws = build_windows(&t, 24, 18).unwrap();
        let err = chronological_split(&t, &ws, &SplitSpec::default()).unwrap_err();
        assert!(err.to_string().contains("0 test"), "{err}");
    }

    #[test]
    fn scaler_rejects_constant_column() {
        let mut t = table_from(0..50);
        t.rows.iter_mut().for_each(|r| r.weather.pressure = 1013.0);
        let err = FeatureScaler::fit(&t.rows).unwrap_err();
        assert!(err.to_string().contains("pressure"));
    }

    #[test]
    fn scaler_standardises_train_rows() {
        let t = table_from(0..300);
        let ws = build_windows(&t, 24, 18).unwrap();
        let sc = fit_scaler(&t, &ws[..100], 24, 18).unwrap();
        let used = &t.rows[..100 + 41];
        for c in 0..COLUMNS {
            let scaled: Vec<f64> = used.iter().map(|r| sc.apply(&r.columns())[c]).collect();
            let m = scaled.iter().sum::<f64>() / scaled.len() as f64;
            let v = scaled.iter().map(|x| (x - m).powi(2)).sum::<f64>() / scaled.len() as f64;
            assert!(m.abs() < 1e-9);
            assert!((v - 1.0).abs() < 1e-9);
        }
        assert_eq!(sc.fit_end, 140 * HOUR);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scaler_round_trip(rows in prop::collection::vec(prop::array::uniform7(-1e4f64..1e4), 3..40)) {
                let t = AlignedTable {
                    point: PointId::new("p").unwrap(),
                    rows: rows.iter().enumerate().map(|(i, c)| AlignedRow {
                        ts: i as i64 * HOUR,
                        weather: WeatherFrame::from_array(i as i64 * HOUR, [c[0], c[1], c[2], c[3], c[4], c[5]]),
                        load: c[6],
                    }).collect(),
                };
                let Ok(sc) = FeatureScaler::fit(&t.rows) else { return Ok(()) };
                for r in &t.rows {
                    let back = sc.invert(&sc.apply(&r.columns()));
                    for (a, b) in back.iter().zip(r.columns()) {
                        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0) * 10.0);
                    }
                }
            }

            #[test]
            fn windows_reference_real_rows(gaps in prop::collection::btree_set(0i64..200, 0..10)) {
                let t = table_from((0..200).filter(|h| !gaps.contains(h)));
                if let Ok(ws) = build_windows(&t, 5, 3) {
                    for w in ws {
                        prop_assert!(t.is_consecutive(w.start, w.start + 7));
                        prop_assert_eq!(w.issue_ts, t.rows[w.start + 4].ts);
                        prop_assert!(t.index_of(w.last_target_ts).is_some());
                    }
                }
            }
        }
    }

    #[test]
    fn persistence_repeats_yesterday() {
        let t = table_from(0..100);
        let p = persistence_forecast(&t, 50 * HOUR, 18).unwrap();
        assert_eq!(p[0], t.rows[27].load);
        assert_eq!(p[17], t.rows[44].load);
        assert!(persistence_forecast(&t, 10 * HOUR, 18).is_none());
    }
}
