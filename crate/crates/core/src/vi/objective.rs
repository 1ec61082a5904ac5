use serde::{Deserialize, Serialize};

use super::gaussian::{log_q_k, standard_noise, DiagGaussian};
use super::target::LogDensity;
use crate::diffcore::Real;
use crate::error::{Error, Result};
use crate::flows::FlowStack;

/// `min(1, epoch / anneal_epochs)`.
pub fn anneal_beta(epoch: usize, anneal_epochs: usize) -> f64 {
    if anneal_epochs == 0 || epoch >= anneal_epochs {
        1.0
    } else {
        epoch as f64 / anneal_epochs as f64
    }
}

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error,
            samples: n,
        }
    }
}

/// `log q_K(z) − log p(z)` for each noise draw.
pub fn free_energy_terms<T: Real, L: LogDensity>(
    base: &DiagGaussian<T>,
    stack: &FlowStack<T>,
    target: &L,
    noise: &[Vec<f64>],
) -> Result<Vec<T>> {
    if target.dim() != stack.dim() {
        return Err(Error::Dimension(format!(
            "target of dimension {} for a posterior of dimension {}",
            target.dim(),
            stack.dim()
        )));
    }
    noise
        .iter()
        .map(|eps| {
            let (z, log_q) = log_q_k(base, stack, eps)?;
            let log_p = target.log_density(&z);
            if !log_p.value().is_finite() {
                return Err(Error::NonFinite(format!(
                    "target log-density {}",
                    log_p.value()
                )));
            }
            Ok(log_q - log_p)
        })
        .collect()
}

/// `F = E_q[log q_K(z) − log p(z)]` averaged over fixed noise draws.
///
/// For a normalized target this is the reverse KL divergence.
pub fn free_energy<T: Real, L: LogDensity>(
    base: &DiagGaussian<T>,
    stack: &FlowStack<T>,
    target: &L,
    noise: &[Vec<f64>],
) -> Result<T> {
    if noise.is_empty() {
        return Err(Error::InvalidParams(
            "free energy needs at least one sample".into(),
        ));
    }
    let terms = free_energy_terms(base, stack, target, noise)?;
    Ok(T::sum(&terms) * (1.0 / noise.len() as f64))
}

/// Monte-Carlo free energy with its standard error, using fresh noise.
pub fn estimate_free_energy<L: LogDensity>(
    base: &DiagGaussian,
    stack: &FlowStack,
    target: &L,
    samples: usize,
    rng: &mut crate::Rng,
) -> Result<Estimate> {
    let noise: Vec<Vec<f64>> = (0..samples.max(1))
        .map(|_| standard_noise(stack.dim(), rng))
        .collect();
    Ok(Estimate::from_samples(&free_energy_terms(
        base, stack, target, &noise,
    )?))
}

/// `β (log q_K(z|x) − log p(z)) − log p(x|z)` for one draw, with
/// `log p(z)` standard normal.
pub fn annealed_term<T: Real>(log_q: T, z: &[T], log_likelihood: T, beta: f64) -> T {
    (log_q - standard_normal_log_density(z)) * beta - log_likelihood
}

pub fn standard_normal_log_density<T: Real>(z: &[T]) -> T {
    T::dot(z, z) * -0.5 - super::gaussian::HALF_LN_2PI * z.len() as f64
}

/// `ln Σ exp(x_i)` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `−log (1/S) Σ_s exp(log p(x, z_s) − log q_K(z_s))` with `z_s ~ q_K`.
pub fn estimate_nll(
    base: &DiagGaussian,
    stack: &FlowStack,
    log_joint: impl Fn(&[f64]) -> f64,
    samples: usize,
    rng: &mut crate::Rng,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidParams(
            "importance sampling needs S ≥ 1".into(),
        ));
    }
    let mut log_w = Vec::with_capacity(samples);
    for _ in 0..samples {
        let eps = standard_noise(stack.dim(), rng);
        let (z, log_q) = log_q_k(base, stack, &eps)?;
        log_w.push(log_joint(&z) - log_q);
    }
    let lse = log_sum_exp(&log_w);
    if !lse.is_finite() {
        return Err(Error::NonFinite(format!(
            "importance weights have log-sum-exp {lse}"
        )));
    }
    Ok(-(lse - (samples as f64).ln()))
}
