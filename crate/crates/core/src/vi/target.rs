use serde::{Deserialize, Serialize};

use super::gaussian::HALF_LN_2PI;
use crate::diffcore::Real;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// An (unnormalized) log-density on `R^D`.
pub trait LogDensity {
    fn dim(&self) -> usize;

    fn log_density<T: Real>(&self, z: &[T]) -> T;

    /// `log ∫ exp(log_density)`, when known.
    fn log_normalizer(&self) -> Option<f64> {
        None
    }
}

/// `N(mean, Σ)`, normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    mean: Vec<f64>,
    precision: Matrix,
    log_det_cov: f64,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, covariance: &Matrix) -> Result<Self> {
        let d = mean.len();
        if covariance.rows() != d || covariance.cols() != d {
            return Err(Error::Dimension(format!(
                "covariance is {}×{} for a mean of length {d}",
                covariance.rows(),
                covariance.cols()
            )));
        }
        let l = cholesky(covariance)?;
        let log_det_cov = 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
        // Σ⁻¹ column by column from L Lᵀ x = e_j.
        let mut precision = Matrix::zeros(d, d);
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            let x = cholesky_solve(&l, &e);
            for i in 0..d {
                precision[(i, j)] = x[i];
            }
        }
        Ok(GaussianTarget {
            mean,
            precision,
            log_det_cov,
        })
    }

    pub fn standard(dim: usize) -> Self {
        GaussianTarget {
            mean: vec![0.0; dim],
            precision: Matrix::identity(dim),
            log_det_cov: 0.0,
        }
    }

    /// Zero-mean, unit-variance pair with correlation `rho`.
    pub fn correlated(rho: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::Config(format!(
                "correlation {rho} must lie in (−1, 1)"
            )));
        }
        Self::new(
            vec![0.0; 2],
            &Matrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]),
        )
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn precision(&self) -> &Matrix {
        &self.precision
    }
}

impl LogDensity for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density<T: Real>(&self, z: &[T]) -> T {
        let d = self.dim();
        assert_eq!(z.len(), d, "point length");
        let diff: Vec<T> = z.iter().zip(&self.mean).map(|(&x, &m)| x - m).collect();
        let mut quad = T::zero();
        for i in 0..d {
            let row: Vec<T> = self
                .precision
                .row(i)
                .iter()
                .map(|&p| T::constant(p))
                .collect();
            quad = quad + diff[i] * T::dot(&row, &diff);
        }
        quad * -0.5 - (HALF_LN_2PI * d as f64 + 0.5 * self.log_det_cov)
    }

    fn log_normalizer(&self) -> Option<f64> {
        Some(0.0)
    }
}

fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let d = a[(i, i)] - s;
                if !(d > 0.0) {
                    return Err(Error::InvalidParams(
                        "covariance is not positive definite".into(),
                    ));
                }
                l[(i, i)] = d.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * x[k]).sum();
        x[i] = (y[i] - s) / l[(i, i)];
    }
    x
}

/// Serializable description of a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    StandardNormal {
        dim: usize,
    },
    Correlated {
        rho: f64,
    },
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
}

impl TargetSpec {
    pub fn build(&self) -> Result<GaussianTarget> {
        match self {
            TargetSpec::StandardNormal { dim } => Ok(GaussianTarget::standard(*dim)),
            TargetSpec::Correlated { rho } => GaussianTarget::correlated(*rho),
            TargetSpec::Gaussian { mean, covariance } => {
                if covariance.iter().any(|r| r.len() != mean.len()) {
                    return Err(Error::Config("covariance rows must match the mean".into()));
                }
                GaussianTarget::new(mean.clone(), &Matrix::from_rows(covariance))
            }
        }
    }
}
