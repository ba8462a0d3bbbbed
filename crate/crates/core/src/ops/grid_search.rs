//! Manual hyperparameter sweep. Results are ranked and reported; nothing
//! is stored or promoted.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lstm::{self, TrainConfig};
use crate::pipeline::{self, PipelineConfig, HORIZON};
use crate::timeseries::AlignedTable;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    /// 1-based; failed variants rank after all successes.
    pub rank: usize,
    pub variant: usize,
    pub learning_rate: f64,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lookback: usize,
    pub final_train_mse: Option<f64>,
    pub final_test_mse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
}

impl GridReport {
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_some())
    }

    pub fn best(&self) -> Option<&GridRow> {
        self.rows.first().filter(|r| r.error.is_none())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "rank", "variant", "learning_rate", "hidden_dim", "epochs", "batch_size", "lookback", "final_train_mse",
            "final_test_mse", "error",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.rank.to_string(),
                r.variant.to_string(),
                r.learning_rate.to_string(),
                r.hidden_dim.to_string(),
                r.epochs.to_string(),
                r.batch_size.to_string(),
                r.lookback.to_string(),
                opt(r.final_train_mse),
                opt(r.final_test_mse),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::invalid(e.to_string()))?)
            .map_err(|e| Error::invalid(e.to_string()))
    }
}

/// Cartesian product of learning rates and hidden sizes over `base`.
pub fn expand_grid(base: &TrainConfig, learning_rates: &[f64], hidden_dims: &[usize]) -> Vec<TrainConfig> {
    let mut out = Vec::new();
    for &lr in learning_rates {
        for &h in hidden_dims {
            out.push(TrainConfig { learning_rate: lr, hidden_dim: h, ..base.clone() });
        }
    }
    out
}

/// Trains every variant on the same table and split, ranked by final
/// test MSE (scaled units). A failing variant is reported, not fatal.
pub fn grid_search(table: &AlignedTable, pipeline_cfg: &PipelineConfig, variants: &[TrainConfig]) -> Result<GridReport> {
    if variants.is_empty() {
        return Err(Error::invalid("grid search needs at least one variant"));
    }
    let mut rows = Vec::with_capacity(variants.len());
    for (i, cfg) in variants.iter().enumerate() {
        let run = || -> Result<lstm::LossCurve> {
            cfg.validate()?;
            let data = pipeline::prepare(table, cfg.lookback, pipeline_cfg)?;
            let (p, h) = lstm::init_parameters(cfg.seed, pipeline_cfg.feature_mode.input_dim(), cfg.hidden_dim, HORIZON)?;
            Ok(lstm::train_from(p, h, &data.train, &data.test, cfg, &mut |_| {})?.curve)
        };
        let (train, test, error) = match run() {
            Ok(curve) => {
                let last = curve.last().expect("at least one epoch");
                (Some(last.train_mse), Some(last.test_mse), None)
            }
            Err(e) => (None, None, Some(e.to_string())),
        };
        log::info!("grid variant {i}: lr={} H={} -> {test:?}", cfg.learning_rate, cfg.hidden_dim);
        rows.push(GridRow {
            rank: 0,
            variant: i,
            learning_rate: cfg.learning_rate,
            hidden_dim: cfg.hidden_dim,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            lookback: cfg.lookback,
            final_train_mse: train,
            final_test_mse: test,
            error,
        });
    }
    rows.sort_by(|a, b| match (a.final_test_mse, b.final_test_mse) {
        (Some(x), Some(y)) => x.total_cmp(&y).then(a.variant.cmp(&b.variant)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.variant.cmp(&b.variant),
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(GridReport { rows })
}
