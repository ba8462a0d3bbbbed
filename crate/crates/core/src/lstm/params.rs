use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twox_hash::XxHash64;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Weights of a single-layer LSTM cell.
///
/// `w_*` are `H×d` input weights, `u_*` are `H×H` recurrent weights and
/// `b_*` are length-`H` biases, for the forget (`f`), input (`i`),
/// candidate (`c`) and output (`o`) paths.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParameters {
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub u_f: Matrix,
    pub u_i: Matrix,
    pub u_c: Matrix,
    pub u_o: Matrix,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

pub(crate) const TENSOR_NAMES: [&str; 14] = [
    "W_f", "W_i", "W_c", "W_o", "U_f", "U_i", "U_c", "U_o", "b_f", "b_i", "b_c", "b_o", "W_y", "b_y",
];

impl LstmParameters {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Matrix::zeros(hidden_dim, input_dim);
        let u = || Matrix::zeros(hidden_dim, hidden_dim);
        let b = || vec![0.0; hidden_dim];
        LstmParameters {
            w_f: w(),
            w_i: w(),
            w_c: w(),
            w_o: w(),
            u_f: u(),
            u_i: u(),
            u_c: u(),
            u_o: u(),
            b_f: b(),
            b_i: b(),
            b_c: b(),
            b_o: b(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_f.rows()
    }

    pub fn slices(&self) -> [&[f64]; 12] {
        [
            self.w_f.as_slice(),
            self.w_i.as_slice(),
            self.w_c.as_slice(),
            self.w_o.as_slice(),
            self.u_f.as_slice(),
            self.u_i.as_slice(),
            self.u_c.as_slice(),
            self.u_o.as_slice(),
            &self.b_f,
            &self.b_i,
            &self.b_c,
            &self.b_o,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 12] {
        [
            self.w_f.as_mut_slice(),
            self.w_i.as_mut_slice(),
            self.w_c.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.u_f.as_mut_slice(),
            self.u_i.as_mut_slice(),
            self.u_c.as_mut_slice(),
            self.u_o.as_mut_slice(),
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }

    /// Checks that every tensor agrees with `(d, H)` and is finite.
    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        if d == 0 || h == 0 {
            return Err(Error::invalid("LSTM dimensions must be >= 1"));
        }
        let expect = [h * d, h * d, h * d, h * d, h * h, h * h, h * h, h * h, h, h, h, h];
        for ((name, s), n) in TENSOR_NAMES.iter().zip(self.slices()).zip(expect) {
            if s.len() != n {
                return Err(Error::invalid(format!("{name} has {} entries, expected {n}", s.len())));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("{name} has non-finite entries")));
            }
        }
        let square = [&self.u_f, &self.u_i, &self.u_c, &self.u_o];
        if square.iter().any(|u| u.rows() != h || u.cols() != h) {
            return Err(Error::invalid("recurrent weights must be HxH"));
        }
        Ok(())
    }
}

/// Linear map from the final hidden state to the `K` forecast outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorHead {
    pub w_y: Matrix,
    pub b_y: Vec<f64>,
}

impl RegressorHead {
    pub fn zeros(hidden_dim: usize, outputs: usize) -> Self {
        RegressorHead { w_y: Matrix::zeros(outputs, hidden_dim), b_y: vec![0.0; outputs] }
    }

    pub fn outputs(&self) -> usize {
        self.w_y.rows()
    }

    pub fn slices(&self) -> [&[f64]; 2] {
        [self.w_y.as_slice(), &self.b_y]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 2] {
        [self.w_y.as_mut_slice(), &mut self.b_y]
    }

    pub fn validate(&self, hidden_dim: usize) -> Result<()> {
        if self.w_y.cols() != hidden_dim || self.b_y.len() != self.w_y.rows() || self.outputs() == 0 {
            return Err(Error::invalid("regressor head shape does not match hidden size"));
        }
        if self.slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("regressor head has non-finite entries"));
        }
        Ok(())
    }
}

/// All 14 tensors of a model in a fixed order (LSTM then head).
pub(crate) fn all_slices<'a>(p: &'a LstmParameters, h: &'a RegressorHead) -> Vec<&'a [f64]> {
    p.slices().into_iter().chain(h.slices()).collect()
}

pub(crate) fn all_slices_mut<'a>(
    p: &'a mut LstmParameters,
    h: &'a mut RegressorHead,
) -> Vec<&'a mut [f64]> {
    p.slices_mut().into_iter().chain(h.slices_mut()).collect()
}

/// Content hash of a model's weights, used to detect stale caches.
pub(crate) fn fingerprint(p: &LstmParameters, h: &RegressorHead) -> u64 {
    let mut hasher = XxHash64::with_seed(0);
    for s in all_slices(p, h) {
        for v in s {
            std::hash::Hasher::write_u64(&mut hasher, v.to_bits());
        }
    }
    std::hash::Hasher::finish(&hasher)
}

/// Gradients with the same shapes as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: LstmParameters,
    pub head: RegressorHead,
}

impl Gradients {
    pub fn zeros_like(p: &LstmParameters, h: &RegressorHead) -> Self {
        Gradients {
            params: LstmParameters::zeros(p.input_dim(), p.hidden_dim()),
            head: RegressorHead::zeros(p.hidden_dim(), h.outputs()),
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        all_slices(&self.params, &self.head)
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        all_slices_mut(&mut self.params, &mut self.head)
    }

    pub fn fill_zero(&mut self) {
        for s in self.slices_mut() {
            s.fill(0.0);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Global L2 norm over every entry.
    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise relative error against `other`, with
    /// `|a - b| / max(|a|, |b|, floor)` so near-zero entries are compared
    /// absolutely at the scale of `floor`.
    pub fn max_relative_error(&self, other: &Gradients, floor: f64) -> f64 {
        self.slices()
            .iter()
            .zip(other.slices())
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }

    /// Name and index of the entry with the largest relative error.
    pub fn worst_entry(&self, other: &Gradients, floor: f64) -> Option<(&'static str, usize, f64, f64)> {
        let mut best: Option<(&'static str, usize, f64, f64, f64)> = None;
        for ((name, a), b) in TENSOR_NAMES.iter().zip(self.slices()).zip(other.slices()) {
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                let e = (x - y).abs() / x.abs().max(y.abs()).max(floor);
                if best.is_none_or(|bb| e > bb.4) {
                    best = Some((name, i, *x, *y, e));
                }
            }
        }
        best.map(|(n, i, x, y, _)| (n, i, x, y))
    }
}

/// Seeded initialisation: input, recurrent and head weights uniform in
/// `[-1/√H, 1/√H]`; biases zero except the forget bias, which starts at 1.
pub fn init_parameters(
    seed: u64,
    input_dim: usize,
    hidden_dim: usize,
    outputs: usize,
) -> Result<(LstmParameters, RegressorHead)> {
    if input_dim == 0 || hidden_dim == 0 || outputs == 0 {
        return Err(Error::invalid(format!(
            "dimensions must be >= 1 (d={input_dim}, H={hidden_dim}, K={outputs})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / (hidden_dim as f64).sqrt();
    let mut draw = |rows, cols| Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound));
    let w_f = draw(hidden_dim, input_dim);
    let w_i = draw(hidden_dim, input_dim);
    let w_c = draw(hidden_dim, input_dim);
    let w_o = draw(hidden_dim, input_dim);
    let u_f = draw(hidden_dim, hidden_dim);
    let u_i = draw(hidden_dim, hidden_dim);
    let u_c = draw(hidden_dim, hidden_dim);
    let u_o = draw(hidden_dim, hidden_dim);
    let w_y = draw(outputs, hidden_dim);
    let params = LstmParameters {
        w_f,
        w_i,
        w_c,
        w_o,
        u_f,
        u_i,
        u_c,
        u_o,
        b_f: vec![1.0; hidden_dim],
        b_i: vec![0.0; hidden_dim],
        b_c: vec![0.0; hidden_dim],
        b_o: vec![0.0; hidden_dim],
    };
    let head = RegressorHead { w_y, b_y: vec![0.0; outputs] };
    Ok((params, head))
}
