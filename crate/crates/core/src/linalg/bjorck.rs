//! Björck–Bowie orthogonalization: `Q ← Q (I + ½ (I − QᵀQ))`.
//!
//! The iteration is written on [`Real`], so running it on tape variables
//! unrolls exactly the steps taken and gradients flow back to the seed.

use serde::{Deserialize, Serialize};

use super::{Matrix, OrthonormalColumns, ORTHO_TOLERANCE};
use crate::diffcore::Real;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_STEPS: usize = 30;

const POWER_ITERATIONS: usize = 50;
const POWER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BjorckSettings {
    /// Stop once `‖QᵀQ − I‖_F ≤ eps`.
    pub eps: f64,
    pub max_steps: usize,
}

impl Default for BjorckSettings {
    fn default() -> Self {
        BjorckSettings {
            eps: ORTHO_TOLERANCE,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// Largest-magnitude eigenvalue of a symmetric matrix by power iteration.
pub fn symmetric_spectral_norm(s: &Matrix<f64>) -> f64 {
    assert!(s.is_square());
    let n = s.rows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic start with a little asymmetry so it is not orthogonal to
    // structured eigenvectors.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = s.matvec(&v);
        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        let converged = (wn - estimate).abs() <= POWER_TOLERANCE * wn.max(1.0);
        estimate = wn;
        v = w.into_iter().map(|x| x / wn).collect();
        if converged {
            break;
        }
    }
    estimate
}

/// `‖QᵀQ − I‖₂`.
pub fn gram_deviation_norm(q: &Matrix<f64>) -> f64 {
    let g = q.gram();
    symmetric_spectral_norm(&g.sub(&Matrix::identity(g.rows())))
}

/// Drives the columns of `q0` to orthonormality.
///
/// Requires `‖Q₀ᵀQ₀ − I‖₂ < 1`; returns a convergence error carrying the last
/// residual when `max_steps` is not enough.
pub fn bjorck_orthogonalize<T: Real>(
    q0: &Matrix<T>,
    settings: BjorckSettings,
) -> Result<OrthonormalColumns<T>> {
    if q0.cols() > q0.rows() {
        return Err(Error::Dimension(format!(
            "cannot orthonormalize {} columns in dimension {}",
            q0.cols(),
            q0.rows()
        )));
    }
    let spectral = gram_deviation_norm(&q0.values());
    if !(spectral < 1.0) {
        return Err(Error::SpectralNorm(spectral));
    }
    let m = q0.cols();
    let eye = Matrix::<T>::identity(m);
    let mut q = q0.clone();
    let mut residuals = vec![q.orthonormality_residual()];
    let mut steps = 0;
    while residuals[steps] > settings.eps {
        if steps == settings.max_steps {
            return Err(Error::Convergence {
                steps,
                residual: residuals[steps],
            });
        }
        let correction = eye.add(&eye.sub(&q.gram()).scale(T::constant(0.5)));
        q = q.matmul(&correction);
        steps += 1;
        residuals.push(q.orthonormality_residual());
    }
    Ok(OrthonormalColumns::from_iteration(q, steps, residuals))
}

/// Orthogonalizes every matrix of a stack with identical thresholds.
pub fn bjorck_orthogonalize_batch<T: Real>(
    seeds: &[Matrix<T>],
    settings: BjorckSettings,
) -> Result<Vec<OrthonormalColumns<T>>> {
    seeds
        .iter()
        .map(|q0| bjorck_orthogonalize(q0, settings))
        .collect()
}
