use super::matrix::Matrix;
use super::params::{fingerprint, LstmParameters, RegressorHead};
use crate::error::{Error, Result};

/// Recurrent state `(c, h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState { c: vec![0.0; hidden_dim], h: vec![0.0; hidden_dim] }
    }
}

/// Sign-branched logistic function; never overflows.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Intermediates of one cell step, kept for the backward pass.
///
/// Stored in a single buffer: input, previous hidden and cell state, the
/// four gate activations, the new cell state, and `tanh` of it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    d: usize,
    h: usize,
    buf: Vec<f64>,
}

impl StepCache {
    fn new(d: usize, h: usize) -> Self {
        StepCache { d, h, buf: vec![0.0; d + 8 * h] }
    }

    #[inline]
    fn slot(&self, k: usize) -> &[f64] {
        let start = self.d + (k - 1) * self.h;
        &self.buf[start..start + self.h]
    }

    pub fn x(&self) -> &[f64] {
        &self.buf[..self.d]
    }
    pub fn h_prev(&self) -> &[f64] {
        self.slot(1)
    }
    pub fn c_prev(&self) -> &[f64] {
        self.slot(2)
    }
    pub fn forget(&self) -> &[f64] {
        self.slot(3)
    }
    pub fn input(&self) -> &[f64] {
        self.slot(4)
    }
    pub fn candidate(&self) -> &[f64] {
        self.slot(5)
    }
    pub fn output(&self) -> &[f64] {
        self.slot(6)
    }
    pub fn cell(&self) -> &[f64] {
        self.slot(7)
    }
    pub fn tanh_cell(&self) -> &[f64] {
        self.slot(8)
    }

    /// `h = o ⊙ tanh(c)`
    pub fn hidden(&self) -> Vec<f64> {
        self.output().iter().zip(self.tanh_cell()).map(|(o, t)| o * t).collect()
    }
}

/// Runs one step into `cache`. Dimensions are trusted.
fn step_into(p: &LstmParameters, x: &[f64], h_prev: &[f64], c_prev: &[f64], cache: &mut StepCache) {
    let (d, h) = (cache.d, cache.h);
    let buf = &mut cache.buf;
    buf[..d].copy_from_slice(x);
    buf[d..d + h].copy_from_slice(h_prev);
    buf[d + h..d + 2 * h].copy_from_slice(c_prev);

    let (head, gates) = buf.split_at_mut(d + 2 * h);
    let (x, rest) = head.split_at(d);
    let (h_prev, c_prev) = rest.split_at(h);
    let (f, gates) = gates.split_at_mut(h);
    let (i, gates) = gates.split_at_mut(h);
    let (g, gates) = gates.split_at_mut(h);
    let (o, gates) = gates.split_at_mut(h);
    let (c, tanh_c) = gates.split_at_mut(h);

    let pre = |w: &Matrix, u: &Matrix, b: &[f64], out: &mut [f64]| {
        out.copy_from_slice(b);
        w.mul_vec_acc(x, out);
        u.mul_vec_acc(h_prev, out);
    };
    pre(&p.w_f, &p.u_f, &p.b_f, f);
    pre(&p.w_i, &p.u_i, &p.b_i, i);
    pre(&p.w_c, &p.u_c, &p.b_c, g);
    pre(&p.w_o, &p.u_o, &p.b_o, o);

    for k in 0..h {
        f[k] = sigmoid(f[k]);
        i[k] = sigmoid(i[k]);
        g[k] = g[k].tanh();
        o[k] = sigmoid(o[k]);
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tanh_c[k] = c[k].tanh();
    }
}

/// One LSTM step:
///
/// ```text
/// f  = σ(W_f·x + U_f·h + b_f)
/// i  = σ(W_i·x + U_i·h + b_i)
/// g  = tanh(W_c·x + U_c·h + b_c)
/// c' = f ⊙ c + i ⊙ g
/// o  = σ(W_o·x + U_o·h + b_o)
/// h' = o ⊙ tanh(c')
/// ```
pub fn cell_forward(p: &LstmParameters, x: &[f64], s: &LstmState) -> Result<(LstmState, StepCache)> {
    let (d, h) = (p.input_dim(), p.hidden_dim());
    if x.len() != d || s.c.len() != h || s.h.len() != h {
        return Err(Error::invalid(format!(
            "cell_forward: expected x[{d}], state[{h}], got x[{}], c[{}], h[{}]",
            x.len(),
            s.c.len(),
            s.h.len()
        )));
    }
    let mut cache = StepCache::new(d, h);
    step_into(p, x, &s.h, &s.c, &mut cache);
    let state = LstmState { c: cache.cell().to_vec(), h: cache.hidden() };
    Ok((state, cache))
}

/// Everything the backward pass needs from one sequence evaluation.
#[derive(Debug, Clone, Default)]
pub struct SequenceCache {
    pub(crate) steps: Vec<StepCache>,
    pub(crate) h_last: Vec<f64>,
    pub(crate) yhat: Vec<f64>,
    pub(crate) len: usize,
    /// Weight hash at forward time; `None` for internal training caches.
    pub(crate) fingerprint: Option<u64>,
}

impl SequenceCache {
    pub fn steps(&self) -> &[StepCache] {
        &self.steps[..self.len]
    }

    pub fn prediction(&self) -> &[f64] {
        &self.yhat
    }

    pub fn final_hidden(&self) -> &[f64] {
        &self.h_last
    }
}

/// Forward pass reusing `cache` buffers. Dimensions are trusted.
pub(crate) fn forward_into(p: &LstmParameters, head: &RegressorHead, x: &Matrix, cache: &mut SequenceCache) {
    let (d, h) = (p.input_dim(), p.hidden_dim());
    let len = x.rows();
    if cache.steps.len() < len || cache.steps.first().is_some_and(|s| s.d != d || s.h != h) {
        cache.steps = (0..len).map(|_| StepCache::new(d, h)).collect();
    }
    cache.len = len;
    let zeros = vec![0.0; h];
    let mut h_prev = zeros.clone();
    for t in 0..len {
        let (done, rest) = cache.steps.split_at_mut(t);
        let c_prev = done.last().map(|s| s.cell()).unwrap_or(&zeros);
        step_into(p, x.row(t), &h_prev, c_prev, &mut rest[0]);
        for (hp, (o, tc)) in h_prev.iter_mut().zip(rest[0].output().iter().zip(rest[0].tanh_cell())) {
            *hp = o * tc;
        }
    }
    cache.yhat.clear();
    cache.yhat.extend_from_slice(&head.b_y);
    head.w_y.mul_vec_acc(&h_prev, &mut cache.yhat);
    cache.h_last = h_prev;
    cache.fingerprint = None;
}

pub(crate) fn check_shapes(p: &LstmParameters, head: &RegressorHead, x: &Matrix) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::invalid("empty input sequence"));
    }
    if x.cols() != p.input_dim() {
        return Err(Error::invalid(format!(
            "input has {} features, model expects {}",
            x.cols(),
            p.input_dim()
        )));
    }
    if head.w_y.cols() != p.hidden_dim() {
        return Err(Error::invalid("head does not match hidden size"));
    }
    Ok(())
}

/// Runs the cell over the rows of `x` from a zero state and applies the
/// head to the final hidden state: `ŷ = W_y·h_L + b_y`.
pub fn sequence_forward(
    p: &LstmParameters,
    head: &RegressorHead,
    x: &Matrix,
) -> Result<(Vec<f64>, SequenceCache)> {
    check_shapes(p, head, x)?;
    let mut cache = SequenceCache::default();
    forward_into(p, head, x, &mut cache);
    cache.fingerprint = Some(fingerprint(p, head));
    Ok((cache.yhat.clone(), cache))
}

/// Prediction only.
pub fn predict(p: &LstmParameters, head: &RegressorHead, x: &Matrix) -> Result<Vec<f64>> {
    check_shapes(p, head, x)?;
    let mut cache = SequenceCache::default();
    forward_into(p, head, x, &mut cache);
    Ok(cache.yhat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::params::init_parameters;

    #[test]
    fn zero_model_gates_are_half() {
        let p = LstmParameters::zeros(3, 2);
        let (s, cache) = cell_forward(&p, &[0.0; 3], &LstmState::zeros(2)).unwrap();
        assert_eq!(cache.forget(), &[0.5, 0.5]);
        assert_eq!(cache.input(), &[0.5, 0.5]);
        assert_eq!(cache.output(), &[0.5, 0.5]);
        assert_eq!(s.c, vec![0.0, 0.0]);
        assert_eq!(s.h, vec![0.0, 0.0]);
    }

    #[test]
    fn saturated_gates_preserve_cell() {
        let (mut p, _) = init_parameters(4, 3, 2, 1).unwrap();
        p.b_f = vec![100.0; 2];
        p.b_i = vec![-100.0; 2];
        let s = LstmState { c: vec![0.7, -0.3], h: vec![0.1, 0.2] };
        let (next, _) = cell_forward(&p, &[0.2, -0.5, 0.1], &s).unwrap();
        assert_eq!(next.c, s.c);
    }

    #[test]
    fn matches_straight_line_equations() {
        let (p, _) = init_parameters(21, 3, 2, 1).unwrap();
        let x = [0.3, -1.2, 0.8];
        let s = LstmState { c: vec![0.25, -0.4], h: vec![-0.1, 0.6] };
        let (next, _) = cell_forward(&p, &x, &s).unwrap();

        // Independent evaluation, element by element.
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        for k in 0..2 {
            let lin = |w: &Matrix, u: &Matrix, b: &[f64]| {
                b[k] + (0..3).map(|j| w.get(k, j) * x[j]).sum::<f64>()
                    + (0..2).map(|j| u.get(k, j) * s.h[j]).sum::<f64>()
            };
            let f = sig(lin(&p.w_f, &p.u_f, &p.b_f));
            let i = sig(lin(&p.w_i, &p.u_i, &p.b_i));
            let g = lin(&p.w_c, &p.u_c, &p.b_c).tanh();
            let o = sig(lin(&p.w_o, &p.u_o, &p.b_o));
            let c = f * s.c[k] + i * g;
            let h = o * c.tanh();
            assert!((next.c[k] - c).abs() < 1e-14);
            assert!((next.h[k] - h).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = LstmParameters::zeros(3, 2);
        assert!(cell_forward(&p, &[0.0; 2], &LstmState::zeros(2)).is_err());
        assert!(cell_forward(&p, &[0.0; 3], &LstmState::zeros(3)).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!(sigmoid(-800.0).is_finite());
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn single_row_is_cell_then_head() {
        let (p, head) = init_parameters(5, 2, 3, 2).unwrap();
        let x = Matrix::from_rows(&[[0.5, -0.5]]).unwrap();
        let (y, _) = sequence_forward(&p, &head, &x).unwrap();
        let (s, _) = cell_forward(&p, x.row(0), &LstmState::zeros(3)).unwrap();
        let mut expected = head.b_y.clone();
        head.w_y.mul_vec_acc(&s.h, &mut expected);
        assert_eq!(y, expected);
    }

    #[test]
    fn zero_head_returns_bias() {
        let (p, mut head) = init_parameters(5, 2, 3, 2).unwrap();
        head.w_y = Matrix::zeros(2, 3);
        head.b_y = vec![1.5, -2.0];
        let x = Matrix::from_fn(7, 2, |r, c| (r * 2 + c) as f64 * 0.1);
        assert_eq!(predict(&p, &head, &x).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn row_order_matters() {
        let (p, head) = init_parameters(9, 2, 4, 1).unwrap();
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, -1.0], [0.5, 0.5]]).unwrap();
        let xr = Matrix::from_rows(&[[0.5, 0.5], [0.0, -1.0], [1.0, 0.0]]).unwrap();
        let a = predict(&p, &head, &x).unwrap();
        let b = predict(&p, &head, &xr).unwrap();
        assert!((a[0] - b[0]).abs() > 1e-6, "{a:?} vs {b:?}");
    }

    #[test]
    fn empty_sequence_rejected() {
        let (p, head) = init_parameters(9, 2, 4, 1).unwrap();
        assert!(predict(&p, &head, &Matrix::zeros(0, 2)).is_err());
        assert!(predict(&p, &head, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn cached_activations_in_range() {
        let (p, head) = init_parameters(2, 4, 5, 3).unwrap();
        let x = Matrix::from_fn(8, 4, |r, c| ((r * 7 + c * 3) % 11) as f64 - 5.0);
        let (_, cache) = sequence_forward(&p, &head, &x).unwrap();
        for s in cache.steps() {
            for g in [s.forget(), s.input(), s.output()] {
                assert!(g.iter().all(|v| *v > 0.0 && *v < 1.0));
            }
            assert!(s.candidate().iter().all(|v| *v > -1.0 && *v < 1.0));
            assert!(s.tanh_cell().iter().all(|v| *v > -1.0 && *v < 1.0));
        }
    }
}
