//! Gated inverse autoregressive flow with a three-layer MADE conditioner.
//!
//! ```text
//! h_z ← ELU(MaskedLinear(z))
//! h   ← h_z + h_context
//! h   ← ELU(MaskedLinear(h))
//! μ   ← MaskedLinear(h),   s ← MaskedLinear(h)
//! z′  ← σ(s) ⊙ z + (1 − σ(s)) ⊙ μ
//! ```
//!
//! Masks follow the natural order 1…D: output `i` never sees inputs `j ≥ i`,
//! so the Jacobian is lower triangular with diagonal `σ(s)`.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::diffcore::{join, Params, Real};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A dense layer whose weight matrix is multiplied by a fixed binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedLinear<T = f64> {
    weight: Matrix<T>,
    bias: Vec<T>,
    /// Unmasked input columns of every output row.
    active: Arc<Vec<Vec<usize>>>,
}

impl<T: Real> MaskedLinear<T> {
    pub fn new(weight: Matrix<T>, bias: Vec<T>, mask: &Matrix<f64>) -> Result<Self> {
        if (mask.rows(), mask.cols()) != (weight.rows(), weight.cols()) {
            return Err(Error::Dimension(format!(
                "mask is {}×{} but weight is {}×{}",
                mask.rows(),
                mask.cols(),
                weight.rows(),
                weight.cols()
            )));
        }
        if bias.len() != weight.rows() {
            return Err(Error::Dimension(format!(
                "bias of length {} for {} outputs",
                bias.len(),
                weight.rows()
            )));
        }
        let active = (0..mask.rows())
            .map(|i| (0..mask.cols()).filter(|&j| mask[(i, j)] != 0.0).collect())
            .collect();
        Ok(MaskedLinear {
            weight,
            bias,
            active: Arc::new(active),
        })
    }

    pub fn weight(&self) -> &Matrix<T> {
        &self.weight
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn mask(&self) -> Matrix<f64> {
        let mut m = Matrix::zeros(self.weight.rows(), self.weight.cols());
        for (i, cols) in self.active.iter().enumerate() {
            for &j in cols {
                m[(i, j)] = 1.0;
            }
        }
        m
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.weight.cols(), "masked layer input width");
        let mut w = Vec::new();
        let mut xs = Vec::new();
        self.active
            .iter()
            .enumerate()
            .map(|(i, cols)| {
                w.clear();
                xs.clear();
                let row = self.weight.row(i);
                for &j in cols {
                    w.push(row[j]);
                    xs.push(x[j]);
                }
                T::dot(&w, &xs) + self.bias[i]
            })
            .collect()
    }
}

impl<T: Real> Params<T> for MaskedLinear<T> {
    type With<U: Real> = MaskedLinear<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        self.weight.visit(&join(prefix, "weight"), f);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> MaskedLinear<U> {
        MaskedLinear {
            weight: self.weight.map(f),
            bias: self.bias.iter().map(|&x| f(x)).collect(),
            active: Arc::clone(&self.active),
        }
    }
}

/// Degrees of the hidden units: cycling through `1..=D−1` (all ones when D = 1).
pub fn hidden_degrees(dim: usize, width: usize) -> Vec<usize> {
    let span = dim.saturating_sub(1).max(1);
    (0..width).map(|k| 1 + k % span).collect()
}

/// The three MADE masks `(input C×D, hidden C×C, output D×C)`.
pub fn made_masks(dim: usize, width: usize) -> (Matrix<f64>, Matrix<f64>, Matrix<f64>) {
    let deg = hidden_degrees(dim, width);
    let mut input = Matrix::zeros(width, dim);
    let mut hidden = Matrix::zeros(width, width);
    let mut output = Matrix::zeros(dim, width);
    for k in 0..width {
        for j in 0..dim {
            if deg[k] >= j + 1 {
                input[(k, j)] = 1.0;
            }
        }
        for l in 0..width {
            if deg[k] >= deg[l] {
                hidden[(k, l)] = 1.0;
            }
        }
    }
    for i in 0..dim {
        for k in 0..width {
            if i + 1 > deg[k] {
                output[(i, k)] = 1.0;
            }
        }
    }
    (input, hidden, output)
}

/// Weights of one gated IAF transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct MadeParams<T = f64> {
    input: MaskedLinear<T>,
    hidden: MaskedLinear<T>,
    mu: MaskedLinear<T>,
    s: MaskedLinear<T>,
}

impl<T: Real> MadeParams<T> {
    pub fn from_layers(
        input: MaskedLinear<T>,
        hidden: MaskedLinear<T>,
        mu: MaskedLinear<T>,
        s: MaskedLinear<T>,
    ) -> Result<Self> {
        let (c, d) = (input.weight.rows(), input.weight.cols());
        let shapes_ok = (hidden.weight.rows(), hidden.weight.cols()) == (c, c)
            && (mu.weight.rows(), mu.weight.cols()) == (d, c)
            && (s.weight.rows(), s.weight.cols()) == (d, c);
        if !shapes_ok {
            return Err(Error::Dimension(
                "MADE layers must be D→C, C→C, C→D, C→D".into(),
            ));
        }
        Ok(MadeParams {
            input,
            hidden,
            mu,
            s,
        })
    }

    /// Builds the standard masks around the given dense weights.
    #[allow(clippy::too_many_arguments)]
    pub fn with_weights(
        dim: usize,
        width: usize,
        w_in: Matrix<T>,
        b_in: Vec<T>,
        w_hidden: Matrix<T>,
        b_hidden: Vec<T>,
        w_mu: Matrix<T>,
        b_mu: Vec<T>,
        w_s: Matrix<T>,
        b_s: Vec<T>,
    ) -> Result<Self> {
        let (m_in, m_hid, m_out) = made_masks(dim, width);
        Self::from_layers(
            MaskedLinear::new(w_in, b_in, &m_in)?,
            MaskedLinear::new(w_hidden, b_hidden, &m_hid)?,
            MaskedLinear::new(w_mu, b_mu, &m_out)?,
            MaskedLinear::new(w_s, b_s, &m_out)?,
        )
    }

    pub fn dim(&self) -> usize {
        self.input.weight.cols()
    }

    pub fn width(&self) -> usize {
        self.input.weight.rows()
    }

    pub fn layers(&self) -> [&MaskedLinear<T>; 4] {
        [&self.input, &self.hidden, &self.mu, &self.s]
    }
}

impl MadeParams<f64> {
    /// Dense weights drawn from `N(0, weight_std²)`, zero biases except the
    /// gate bias on `s`.
    pub fn random(
        dim: usize,
        width: usize,
        weight_std: f64,
        gate_bias: f64,
        rng: &mut crate::Rng,
    ) -> Result<Self> {
        Self::sampled(dim, width, [weight_std; 3], gate_bias, rng)
    }

    /// Fan-in scaled input and hidden layers, `N(0, output_std²)` output
    /// layers, zero biases except the gate bias on `s`.
    pub fn initialized(
        dim: usize,
        width: usize,
        output_std: f64,
        gate_bias: f64,
        rng: &mut crate::Rng,
    ) -> Result<Self> {
        let stds = [
            (1.0 / dim as f64).sqrt(),
            (1.0 / width as f64).sqrt(),
            output_std,
        ];
        Self::sampled(dim, width, stds, gate_bias, rng)
    }

    fn sampled(
        dim: usize,
        width: usize,
        [std_in, std_hidden, std_out]: [f64; 3],
        gate_bias: f64,
        rng: &mut crate::Rng,
    ) -> Result<Self> {
        let mut mat = |r: usize, c: usize, std: f64| -> Result<Matrix<f64>> {
            if !(std > 0.0) {
                return Ok(Matrix::zeros(r, c));
            }
            let normal =
                Normal::new(0.0, std).map_err(|e| Error::Config(format!("weight std: {e}")))?;
            Matrix::from_vec(r, c, (0..r * c).map(|_| normal.sample(rng)).collect())
        };
        let (w_in, w_hid, w_mu, w_s) = (
            mat(width, dim, std_in)?,
            mat(width, width, std_hidden)?,
            mat(dim, width, std_out)?,
            mat(dim, width, std_out)?,
        );
        Self::with_weights(
            dim,
            width,
            w_in,
            vec![0.0; width],
            w_hid,
            vec![0.0; width],
            w_mu,
            vec![0.0; dim],
            w_s,
            vec![gate_bias; dim],
        )
    }

    /// Like [`MadeParams::random`] but with uniform biases too, for tests.
    pub fn random_with_biases(
        dim: usize,
        width: usize,
        scale: f64,
        rng: &mut crate::Rng,
    ) -> Result<Self> {
        let mut p = Self::random(dim, width, scale, 0.0, rng)?;
        for layer in [&mut p.input, &mut p.hidden, &mut p.mu, &mut p.s] {
            for b in layer.bias.iter_mut() {
                *b = rng.random_range(-scale..scale);
            }
        }
        Ok(p)
    }
}

/// The conditioner outputs `(μ, s)` at `z`.
pub fn made_outputs<T: Real>(
    p: &MadeParams<T>,
    z: &[T],
    context: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    if z.len() != p.dim() {
        return Err(Error::Dimension(format!(
            "IAF in dimension {} applied to a vector of length {}",
            p.dim(),
            z.len()
        )));
    }
    if context.len() != p.width() {
        return Err(Error::Dimension(format!(
            "context of length {} for MADE width {}",
            context.len(),
            p.width()
        )));
    }
    let h: Vec<T> = p
        .input
        .forward(z)
        .into_iter()
        .zip(context)
        .map(|(x, &c)| x.elu() + c)
        .collect();
    let h: Vec<T> = p.hidden.forward(&h).into_iter().map(|x| x.elu()).collect();
    Ok((p.mu.forward(&h), p.s.forward(&h)))
}

/// Gated IAF transform and `Σ_i ln σ(s_i)`.
pub fn iaf_forward<T: Real>(p: &MadeParams<T>, z: &[T], context: &[T]) -> Result<(Vec<T>, T)> {
    let (mu, s) = made_outputs(p, z, context)?;
    let mut out = Vec::with_capacity(z.len());
    let mut log_det = T::zero();
    for i in 0..z.len() {
        let gate = s[i].sigmoid();
        if gate.value() == 0.0 {
            return Err(Error::SingularJacobian(0.0));
        }
        out.push(gate * z[i] + (-gate + 1.0) * mu[i]);
        log_det = log_det + s[i].ln_sigmoid();
    }
    Ok((out, log_det))
}

impl<T: Real> Params<T> for MadeParams<T> {
    type With<U: Real> = MadeParams<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        self.input.visit(&join(prefix, "input"), f);
        self.hidden.visit(&join(prefix, "hidden"), f);
        self.mu.visit(&join(prefix, "mu"), f);
        self.s.visit(&join(prefix, "s"), f);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> MadeParams<U> {
        let input = self.input.map(f);
        let hidden = self.hidden.map(f);
        let mu = self.mu.map(f);
        let s = self.s.map(f);
        MadeParams {
            input,
            hidden,
            mu,
            s,
        }
    }
}
