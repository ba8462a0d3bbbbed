use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backprop::{backward_accumulate, mse_unchecked, BackwardScratch};
use super::cell::{check_shapes, forward_into, SequenceCache};
use super::matrix::Matrix;
use super::params::{all_slices_mut, init_parameters, Gradients, LstmParameters, RegressorHead};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    /// Input window length in hours.
    pub lookback: usize,
    pub hidden_dim: usize,
    /// Global L2 clipping threshold for each batch gradient.
    pub grad_clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            batch_size: 32,
            lookback: 24,
            hidden_dim: 16,
            grad_clip_norm: 5.0,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be a finite non-negative number"));
        }
        if self.batch_size == 0 || self.lookback == 0 || self.hidden_dim == 0 {
            return Err(Error::invalid("batch_size, lookback and hidden_dim must be >= 1"));
        }
        if !(self.grad_clip_norm > 0.0) {
            return Err(Error::invalid("grad_clip_norm must be > 0"));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::invalid("Adam needs 0 <= beta < 1 and eps > 0"));
            }
        }
        Ok(())
    }
}

/// One supervised sequence: `x` is `L×d`, `y` has `K` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Matrix,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}

/// Per-epoch train and test MSE.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub entries: Vec<EpochLoss>,
}

impl LossCurve {
    pub fn first(&self) -> Option<&EpochLoss> {
        self.entries.first()
    }

    pub fn last(&self) -> Option<&EpochLoss> {
        self.entries.last()
    }

    /// `epoch,train_mse,test_mse` rows.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "epoch,train_mse,test_mse")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.epoch, e.train_mse, e.test_mse)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii")
    }
}

/// What one optimizer step did, reported to training observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub epoch: usize,
    pub batch: usize,
    pub batch_loss: f64,
    pub grad_norm: f64,
    pub clipped_norm: f64,
    /// L2 norm of the applied parameter change.
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: LstmParameters,
    pub head: RegressorHead,
    pub curve: LossCurve,
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, grads: &Gradients) -> Self {
        let zeros: Vec<Vec<f64>> = grads.slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Optimizer { kind, lr, step: 0, m: zeros.clone(), v: zeros }
    }

    /// Applies one update and returns the L2 norm of the change.
    fn apply(&mut self, p: &mut LstmParameters, head: &mut RegressorHead, g: &Gradients) -> f64 {
        self.step += 1;
        let mut sq = 0.0;
        let targets = all_slices_mut(p, head);
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, gs) in targets.into_iter().zip(g.slices()) {
                    for (wi, gi) in w.iter_mut().zip(gs) {
                        let delta = self.lr * gi;
                        *wi -= delta;
                        sq += delta * delta;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let bc1 = 1.0 - beta1.powi(self.step);
                let bc2 = 1.0 - beta2.powi(self.step);
                for (((w, gs), m), v) in targets.into_iter().zip(g.slices()).zip(&mut self.m).zip(&mut self.v) {
                    for (((wi, gi), mi), vi) in w.iter_mut().zip(gs).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        let delta = self.lr * m_hat / (v_hat.sqrt() + eps);
                        *wi -= delta;
                        sq += delta * delta;
                    }
                }
            }
        }
        sq.sqrt()
    }
}

/// Mean per-example MSE over a set.
pub fn evaluate_mse(p: &LstmParameters, head: &RegressorHead, set: &[Example]) -> f64 {
    let mut cache = SequenceCache::default();
    let total: f64 = set
        .iter()
        .map(|ex| {
            forward_into(p, head, &ex.x, &mut cache);
            mse_unchecked(&ex.y, &cache.yhat)
        })
        .sum();
    total / set.len().max(1) as f64
}

fn check_dataset(set: &[Example], d: usize, k: usize, what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::invalid(format!("{what} partition is empty")));
    }
    for (n, ex) in set.iter().enumerate() {
        if ex.x.rows() == 0 || ex.x.cols() != d || ex.y.len() != k {
            return Err(Error::invalid(format!(
                "{what} example {n} has shape {}x{} -> {}, expected Lx{d} -> {k}",
                ex.x.rows(),
                ex.x.cols(),
                ex.y.len()
            )));
        }
    }
    Ok(())
}

/// Trains a fresh model initialised from `cfg.seed`.
pub fn train(train_set: &[Example], test_set: &[Example], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let first = train_set
        .first()
        .ok_or_else(|| Error::invalid("train partition is empty"))?;
    let (p, head) = init_parameters(cfg.seed, first.x.cols(), cfg.hidden_dim, first.y.len())?;
    train_from(p, head, train_set, test_set, cfg, &mut |_| {})
}

/// Mini-batch training from given weights.
///
/// Each epoch shuffles the training set with a generator seeded from
/// `cfg.seed`, averages per-example gradients over each batch, clips the
/// batch gradient to `cfg.grad_clip_norm` (global L2) and applies one
/// optimizer step. After every epoch both partitions are re-evaluated in
/// full. The run is bitwise reproducible for fixed inputs and seed.
pub fn train_from(
    mut p: LstmParameters,
    mut head: RegressorHead,
    train_set: &[Example],
    test_set: &[Example],
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&UpdateInfo),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    p.validate()?;
    head.validate(p.hidden_dim())?;
    let (d, k) = (p.input_dim(), head.outputs());
    check_dataset(train_set, d, k, "train")?;
    check_dataset(test_set, d, k, "test")?;
    check_shapes(&p, &head, &train_set[0].x)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grads = Gradients::zeros_like(&p, &head);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, &grads);
    let mut cache = SequenceCache::default();
    let mut scratch = BackwardScratch::default();
    let mut curve = LossCurve::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            grads.fill_zero();
            let mut batch_loss = 0.0;
            for &idx in chunk {
                let ex = &train_set[idx];
                forward_into(&p, &head, &ex.x, &mut cache);
                batch_loss += backward_accumulate(&p, &head, &cache, &ex.y, &mut grads, &mut scratch);
            }
            let n = chunk.len() as f64;
            batch_loss /= n;
            grads.scale(1.0 / n);
            let grad_norm = grads.norm();
            if !batch_loss.is_finite() || !grad_norm.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("non-finite loss or gradient in batch {batch}"),
                });
            }
            if grad_norm > cfg.grad_clip_norm {
                grads.scale(cfg.grad_clip_norm / grad_norm);
            }
            let clipped_norm = grad_norm.min(cfg.grad_clip_norm);
            let update_norm = opt.apply(&mut p, &mut head, &grads);
            observer(&UpdateInfo { epoch, batch, batch_loss, grad_norm, clipped_norm, update_norm });
        }

        let train_mse = evaluate_mse(&p, &head, train_set);
        let test_mse = evaluate_mse(&p, &head, test_set);
        if !train_mse.is_finite() {
            return Err(Error::Divergence { epoch, detail: format!("train MSE is {train_mse}") });
        }
        curve.entries.push(EpochLoss { epoch, train_mse, test_mse });
    }
    Ok(TrainOutcome { params: p, head, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Targets are the sum and last value of the sequence's first column.
    fn toy(seed: u64, n: usize) -> Vec<Example> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x = Matrix::from_fn(6, 2, |_, _| rng.gen_range(-1.0..1.0));
                let s: f64 = (0..6).map(|r| x.get(r, 0)).sum::<f64>() / 3.0;
                let y = vec![s, x.get(5, 0)];
                Example { x, y }
            })
            .collect()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig { epochs: 30, hidden_dim: 6, batch_size: 8, learning_rate: 1e-2, ..Default::default() }
    }

    #[test]
    fn learns_toy_problem() {
        let out = train(&toy(1, 200), &toy(2, 50), &small_cfg()).unwrap();
        let (first, last) = (out.curve.first().unwrap(), out.curve.last().unwrap());
        assert_eq!(out.curve.entries.len(), 30);
        assert!(last.train_mse < 0.2 * first.train_mse, "{first:?} -> {last:?}");
        assert!(last.test_mse < first.test_mse);
    }

    #[test]
    fn zero_learning_rate_is_flat() {
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 4, ..small_cfg() };
        let out = train(&toy(1, 40), &toy(2, 10), &cfg).unwrap();
        let e0 = out.curve.entries[0];
        assert!(out.curve.entries.iter().all(|e| e.train_mse == e0.train_mse && e.test_mse == e0.test_mse));
    }

    #[test]
    fn bitwise_reproducible() {
        let cfg = TrainConfig { epochs: 5, ..small_cfg() };
        let a = train(&toy(1, 64), &toy(2, 16), &cfg).unwrap();
        let b = train(&toy(1, 64), &toy(2, 16), &cfg).unwrap();
        let bits = |c: &LossCurve| -> Vec<(u64, u64)> {
            c.entries.iter().map(|e| (e.train_mse.to_bits(), e.test_mse.to_bits())).collect()
        };
        assert_eq!(bits(&a.curve), bits(&b.curve));
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn sgd_updates_respect_clip() {
        let cfg = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.5,
            grad_clip_norm: 0.05,
            epochs: 3,
            ..small_cfg()
        };
        let (p, h) = init_parameters(cfg.seed, 2, cfg.hidden_dim, 2).unwrap();
        let mut seen = 0;
        let mut clipped_any = false;
        train_from(p, h, &toy(3, 64), &toy(4, 8), &cfg, &mut |u| {
            seen += 1;
            clipped_any |= u.grad_norm > cfg.grad_clip_norm;
            assert!(u.clipped_norm <= cfg.grad_clip_norm * (1.0 + 1e-12));
            assert!(u.update_norm <= cfg.learning_rate * cfg.grad_clip_norm * (1.0 + 1e-12));
        })
        .unwrap();
        assert!(seen > 0 && clipped_any);
    }

    #[test]
    fn divergence_names_epoch() {
        let mut train_set = toy(1, 16);
        train_set[3].y[0] = 1e300;
        let err = train(&train_set, &toy(2, 4), &TrainConfig { epochs: 2, ..small_cfg() }).unwrap_err();
        match err {
            Error::Divergence { epoch, .. } => assert_eq!(epoch, 1),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_empty_or_ragged() {
        assert!(train(&[], &toy(2, 4), &small_cfg()).is_err());
        assert!(train(&toy(1, 4), &[], &small_cfg()).is_err());
        let mut bad = toy(1, 4);
        bad[2].y.push(0.0);
        assert!(train(&bad, &toy(2, 4), &small_cfg()).is_err());
    }

    #[test]
    fn curve_csv() {
        let c = LossCurve { entries: vec![EpochLoss { epoch: 1, train_mse: 0.5, test_mse: 0.25 }] };
        assert_eq!(c.to_csv_string(), "epoch,train_mse,test_mse\n1,0.5,0.25\n");
    }
}
