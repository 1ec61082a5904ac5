//! Finite-difference oracles. They only ever call the forward map, so they
//! stay independent of every analytic derivative in the crate.

use crate::linalg::{dense_det, Matrix};

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Central-difference Jacobian `J[i][j] = ∂f_i/∂z_j`.
pub fn numerical_jacobian<F>(f: F, z: &[f64], step: f64) -> Matrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = z.len();
    let m = f(z).len();
    let mut jac = Matrix::zeros(m, n);
    let mut probe = z.to_vec();
    for j in 0..n {
        probe[j] = z[j] + step;
        let plus = f(&probe);
        probe[j] = z[j] - step;
        let minus = f(&probe);
        probe[j] = z[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    jac
}

/// `ln |det J|` of the central-difference Jacobian.
pub fn numerical_log_abs_det<F>(f: F, z: &[f64], step: f64) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let jac = numerical_jacobian(f, z, step);
    dense_det(&jac)
        .expect("jacobian of a map R^D -> R^D is square")
        .abs()
        .ln()
}
