use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffcore::{join, Params, Real};
use crate::error::{Error, Result};
use crate::flows::{stack_forward, FlowStack};

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// `N(μ, diag(σ²))` with `σ = exp(log_sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian<T = f64> {
    mu: Vec<T>,
    log_sigma: Vec<T>,
}

impl<T: Real> DiagGaussian<T> {
    pub fn new(mu: Vec<T>, log_sigma: Vec<T>) -> Result<Self> {
        if mu.len() != log_sigma.len() {
            return Err(Error::Dimension(format!(
                "μ has length {} but log σ has length {}",
                mu.len(),
                log_sigma.len()
            )));
        }
        Ok(DiagGaussian { mu, log_sigma })
    }

    pub fn standard(dim: usize) -> Self {
        DiagGaussian {
            mu: vec![T::zero(); dim],
            log_sigma: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn log_sigma(&self) -> &[T] {
        &self.log_sigma
    }

    /// `z₀ = μ + σ ⊙ ε`.
    pub fn sample(&self, eps: &[f64]) -> Vec<T> {
        assert_eq!(eps.len(), self.dim(), "noise length");
        self.mu
            .iter()
            .zip(&self.log_sigma)
            .zip(eps)
            .map(|((&m, &ls), &e)| m + ls.exp() * e)
            .collect()
    }

    pub fn log_density(&self, z: &[T]) -> T {
        assert_eq!(z.len(), self.dim(), "point length");
        let mut acc = T::constant(-HALF_LN_2PI * self.dim() as f64);
        for i in 0..self.dim() {
            let u = (z[i] - self.mu[i]) * (-self.log_sigma[i]).exp();
            acc = acc - self.log_sigma[i] - u.square() * 0.5;
        }
        acc
    }

    /// `log N(μ + σ ⊙ ε; μ, σ²)`, which only depends on `ε` and `log σ`.
    pub fn log_density_at_noise(&self, eps: &[f64]) -> T {
        let quad: f64 = eps.iter().map(|e| 0.5 * e * e).sum();
        let mut acc = T::constant(-HALF_LN_2PI * self.dim() as f64 - quad);
        for &ls in &self.log_sigma {
            acc = acc - ls;
        }
        acc
    }
}

/// Standard normal noise of length `dim`.
pub fn standard_noise(dim: usize, rng: &mut crate::Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// `z_K` and `log q_K(z_K) = log q₀(z₀) − Σ_k ln |det J_k|` for one noise draw.
pub fn log_q_k<T: Real>(
    base: &DiagGaussian<T>,
    stack: &FlowStack<T>,
    eps: &[f64],
) -> Result<(Vec<T>, T)> {
    if base.dim() != stack.dim() {
        return Err(Error::Dimension(format!(
            "base of dimension {} feeding a stack of dimension {}",
            base.dim(),
            stack.dim()
        )));
    }
    let z0 = base.sample(eps);
    let out = stack_forward(stack, &z0, false)?;
    Ok((out.z, base.log_density_at_noise(eps) - out.sum_log_det))
}

impl<T: Real> Params<T> for DiagGaussian<T> {
    type With<U: Real> = DiagGaussian<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        f(&join(prefix, "mu"), &self.mu);
        f(&join(prefix, "log_sigma"), &self.log_sigma);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> DiagGaussian<U> {
        let mu = self.mu.iter().map(|&x| f(x)).collect();
        let log_sigma = self.log_sigma.iter().map(|&x| f(x)).collect();
        DiagGaussian { mu, log_sigma }
    }
}
