use super::cell::{check_shapes, forward_into, SequenceCache};
use super::matrix::Matrix;
use super::params::{all_slices_mut, fingerprint, Gradients, LstmParameters, RegressorHead};
use crate::error::{Error, Result};

/// Mean squared error `(1/n) Σ (actual_j − predicted_j)²`.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "mse: length mismatch ({} vs {})",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::invalid("mse: empty input"));
    }
    Ok(mse_unchecked(actual, predicted))
}

#[inline]
pub(crate) fn mse_unchecked(actual: &[f64], predicted: &[f64]) -> f64 {
    let sum: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    sum / actual.len() as f64
}

/// Scratch vectors for the reverse sweep, reused across examples.
#[derive(Debug, Default)]
pub(crate) struct BackwardScratch {
    dh: Vec<f64>,
    dc: Vec<f64>,
    dh_prev: Vec<f64>,
    dz_f: Vec<f64>,
    dz_i: Vec<f64>,
    dz_g: Vec<f64>,
    dz_o: Vec<f64>,
    dy: Vec<f64>,
}

impl BackwardScratch {
    fn reset(&mut self, h: usize, k: usize) {
        for v in [
            &mut self.dh,
            &mut self.dc,
            &mut self.dh_prev,
            &mut self.dz_f,
            &mut self.dz_i,
            &mut self.dz_g,
            &mut self.dz_o,
        ] {
            v.clear();
            v.resize(h, 0.0);
        }
        self.dy.clear();
        self.dy.resize(k, 0.0);
    }
}

/// Adds ∂mse(target, ŷ)/∂θ into `grads` and returns the loss.
/// Shapes are trusted.
pub(crate) fn backward_accumulate(
    p: &LstmParameters,
    head: &RegressorHead,
    cache: &SequenceCache,
    target: &[f64],
    grads: &mut Gradients,
    s: &mut BackwardScratch,
) -> f64 {
    let h = p.hidden_dim();
    let k = head.outputs();
    s.reset(h, k);

    let yhat = &cache.yhat;
    let loss = mse_unchecked(target, yhat);
    let scale = 2.0 / k as f64;
    for ((d, y), t) in s.dy.iter_mut().zip(yhat).zip(target) {
        *d = scale * (y - t);
    }

    grads.head.w_y.add_outer(&s.dy, &cache.h_last);
    grads.head.b_y.iter_mut().zip(&s.dy).for_each(|(g, d)| *g += d);
    head.w_y.mul_t_vec_acc(&s.dy, &mut s.dh);

    let g = &mut grads.params;
    for step in cache.steps().iter().rev() {
        let (f, i, cand, o) = (step.forget(), step.input(), step.candidate(), step.output());
        let (c_prev, tanh_c) = (step.c_prev(), step.tanh_cell());
        for j in 0..h {
            let d_o = s.dh[j] * tanh_c[j];
            s.dc[j] += s.dh[j] * o[j] * (1.0 - tanh_c[j] * tanh_c[j]);
            let d_f = s.dc[j] * c_prev[j];
            let d_i = s.dc[j] * cand[j];
            let d_g = s.dc[j] * i[j];
            s.dz_f[j] = d_f * f[j] * (1.0 - f[j]);
            s.dz_i[j] = d_i * i[j] * (1.0 - i[j]);
            s.dz_g[j] = d_g * (1.0 - cand[j] * cand[j]);
            s.dz_o[j] = d_o * o[j] * (1.0 - o[j]);
            // Carry to the previous step's cell state.
            s.dc[j] *= f[j];
        }

        let (x, h_prev) = (step.x(), step.h_prev());
        s.dh_prev.fill(0.0);
        for (dz, w, u, b, wu) in [
            (&s.dz_f, &mut g.w_f, &mut g.u_f, &mut g.b_f, &p.u_f),
            (&s.dz_i, &mut g.w_i, &mut g.u_i, &mut g.b_i, &p.u_i),
            (&s.dz_g, &mut g.w_c, &mut g.u_c, &mut g.b_c, &p.u_c),
            (&s.dz_o, &mut g.w_o, &mut g.u_o, &mut g.b_o, &p.u_o),
        ] {
            w.add_outer(dz, x);
            u.add_outer(dz, h_prev);
            b.iter_mut().zip(dz.iter()).for_each(|(bb, d)| *bb += d);
            wu.mul_t_vec_acc(dz, &mut s.dh_prev);
        }
        std::mem::swap(&mut s.dh, &mut s.dh_prev);
    }
    loss
}

/// Gradient of `mse(target, ŷ)` with respect to every weight, by
/// reverse-mode accumulation through all steps held in `cache`.
///
/// The cache must come from [`sequence_forward`](super::sequence_forward)
/// on exactly these weights; a cache from other weights is rejected.
pub fn backward(
    p: &LstmParameters,
    head: &RegressorHead,
    cache: &SequenceCache,
    target: &[f64],
) -> Result<Gradients> {
    if target.len() != head.outputs() || cache.yhat.len() != head.outputs() {
        return Err(Error::invalid(format!(
            "backward: target has {} values, head emits {}",
            target.len(),
            head.outputs()
        )));
    }
    let steps = cache.steps();
    if steps.is_empty()
        || steps[0].x().len() != p.input_dim()
        || steps[0].forget().len() != p.hidden_dim()
    {
        return Err(Error::invalid("backward: cache shape does not match the model"));
    }
    match cache.fingerprint {
        Some(fp) if fp == fingerprint(p, head) => {}
        _ => return Err(Error::invalid("backward: cache is stale (weights changed since forward)")),
    }
    let mut grads = Gradients::zeros_like(p, head);
    let mut scratch = BackwardScratch::default();
    backward_accumulate(p, head, cache, target, &mut grads, &mut scratch);
    Ok(grads)
}

/// Loss of one example.
pub fn loss(p: &LstmParameters, head: &RegressorHead, x: &Matrix, target: &[f64]) -> Result<f64> {
    check_shapes(p, head, x)?;
    let mut cache = SequenceCache::default();
    forward_into(p, head, x, &mut cache);
    mse(target, &cache.yhat)
}

/// Central finite differences, `(loss(θ+ε) − loss(θ−ε)) / 2ε`, for every
/// scalar weight. Test oracle for [`backward`].
pub fn finite_diff_grad(
    p: &LstmParameters,
    head: &RegressorHead,
    x: &Matrix,
    target: &[f64],
    eps: f64,
) -> Result<Gradients> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("finite_diff_grad: eps must be > 0, got {eps}")));
    }
    check_shapes(p, head, x)?;
    if target.len() != head.outputs() {
        return Err(Error::invalid("finite_diff_grad: target length mismatch"));
    }
    let mut grads = Gradients::zeros_like(p, head);
    let (mut pp, mut hh) = (p.clone(), head.clone());
    let mut cache = SequenceCache::default();
    let n_tensors = grads.slices().len();
    for t in 0..n_tensors {
        let len = grads.slices()[t].len();
        for e in 0..len {
            let orig = all_slices_mut(&mut pp, &mut hh)[t][e];
            all_slices_mut(&mut pp, &mut hh)[t][e] = orig + eps;
            forward_into(&pp, &hh, x, &mut cache);
            let plus = mse_unchecked(target, &cache.yhat);
            all_slices_mut(&mut pp, &mut hh)[t][e] = orig - eps;
            forward_into(&pp, &hh, x, &mut cache);
            let minus = mse_unchecked(target, &cache.yhat);
            all_slices_mut(&mut pp, &mut hh)[t][e] = orig;
            grads.slices_mut()[t][e] = (plus - minus) / (2.0 * eps);
        }
    }
    Ok(grads)
}

/// Finite-difference derivative of `mse` with respect to each entry of
/// `predicted`.
pub fn finite_diff_mse(actual: &[f64], predicted: &[f64], eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
    }
    mse(actual, predicted)?;
    let mut work = predicted.to_vec();
    (0..predicted.len())
        .map(|j| {
            let orig = work[j];
            work[j] = orig + eps;
            let plus = mse_unchecked(actual, &work);
            work[j] = orig - eps;
            let minus = mse_unchecked(actual, &work);
            work[j] = orig;
            Ok((plus - minus) / (2.0 * eps))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::cell::sequence_forward;
    use crate::lstm::params::init_parameters;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 2.5);
        let (a, b) = ([1.0, -2.0, 0.5], [0.0, 1.0, 2.0]);
        let alpha = 3.0;
        let scaled = mse(&a.map(|v| v * alpha), &b.map(|v| v * alpha)).unwrap();
        assert!((scaled - alpha * alpha * mse(&a, &b).unwrap()).abs() < 1e-12);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn fd_on_mse_directly() {
        let g = finite_diff_mse(&[0.0], &[1.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6);
        assert!(finite_diff_mse(&[0.0], &[1.0], 0.0).is_err());
    }

    fn instance(seed: u64, d: usize, h: usize, l: usize, k: usize) -> (LstmParameters, RegressorHead, Matrix, Vec<f64>) {
        let (p, head) = init_parameters(seed, d, h, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let x = Matrix::from_fn(l, d, |_, _| rng.gen_range(-1.0..1.0));
        let target = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (p, head, x, target)
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let (p, head, x, _) = instance(3, 3, 4, 5, 2);
        let (yhat, cache) = sequence_forward(&p, &head, &x).unwrap();
        let g = backward(&p, &head, &cache, &yhat).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn matches_finite_differences() {
        let (p, head, x, target) = instance(17, 3, 4, 5, 2);
        let (_, cache) = sequence_forward(&p, &head, &x).unwrap();
        let analytic = backward(&p, &head, &cache, &target).unwrap();
        let numeric = finite_diff_grad(&p, &head, &x, &target, 1e-5).unwrap();
        let err = analytic.max_relative_error(&numeric, 1e-4);
        assert!(err < 1e-4, "max rel err {err}: {:?}", analytic.worst_entry(&numeric, 1e-4));
    }

    #[test]
    fn duplicated_example_doubles_accumulation() {
        let (p, head, x, target) = instance(5, 2, 3, 4, 2);
        let (_, cache) = sequence_forward(&p, &head, &x).unwrap();
        let single = backward(&p, &head, &cache, &target).unwrap();
        let mut acc = Gradients::zeros_like(&p, &head);
        let mut scratch = BackwardScratch::default();
        for _ in 0..2 {
            backward_accumulate(&p, &head, &cache, &target, &mut acc, &mut scratch);
        }
        let mut doubled = single.clone();
        doubled.scale(2.0);
        // Accumulation order differs, so compare to rounding.
        assert!(acc.max_relative_error(&doubled, 1e-12) < 1e-12);
    }

    #[test]
    fn stale_cache_rejected() {
        let (mut p, head, x, target) = instance(5, 2, 3, 4, 2);
        let (_, cache) = sequence_forward(&p, &head, &x).unwrap();
        p.b_i[0] += 0.1;
        assert!(backward(&p, &head, &cache, &target).is_err());
        p.b_i[0] -= 0.1;
        assert!(backward(&p, &head, &cache, &target[..1]).is_err());
        let (p2, head2) = init_parameters(0, 3, 3, 2).unwrap();
        assert!(backward(&p2, &head2, &cache, &target).is_err());
    }

    #[test]
    fn fd_rejects_zero_eps() {
        let (p, head, x, target) = instance(5, 2, 3, 4, 2);
        assert!(finite_diff_grad(&p, &head, &x, &target, 0.0).is_err());
    }
}
