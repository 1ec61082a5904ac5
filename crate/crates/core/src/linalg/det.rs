use super::Matrix;
use crate::diffcore::Real;
use crate::error::{Error, Result};

/// Largest dimension `dense_det` accepts.
pub const MAX_DET_DIM: usize = 64;

/// Determinant by Gaussian elimination with partial pivoting.
///
/// Pivots are chosen on primal values, so the same routine is differentiable
/// when evaluated on tape variables.
pub fn dense_det<T: Real>(m: &Matrix<T>) -> Result<T> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "determinant of a non-square {}×{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if n > MAX_DET_DIM {
        return Err(Error::Dimension(format!(
            "dense_det supports dim ≤ {MAX_DET_DIM}, got {n}"
        )));
    }
    let mut a = m.clone();
    let mut det = T::constant(1.0);
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[(i, k)].value().abs().total_cmp(&a[(j, k)].value().abs()))
            .expect("non-empty range");
        if a[(pivot, k)].value() == 0.0 {
            return Ok(T::zero());
        }
        if pivot != k {
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(pivot, j)];
                a[(pivot, j)] = tmp;
            }
            det = -det;
        }
        let p = a[(k, k)];
        det = det * p;
        for i in k + 1..n {
            let factor = a[(i, k)] / p;
            if factor.value() == 0.0 {
                continue;
            }
            for j in k + 1..n {
                a[(i, j)] = a[(i, j)] - factor * a[(k, j)];
            }
        }
    }
    Ok(det)
}

/// Both sides of Sylvester's determinant identity,
/// `(det(I_D + AB), det(I_M + BA))`, each by [`dense_det`].
pub fn sylvester_identity_check(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<(f64, f64)> {
    if a.cols() != b.rows() || b.cols() != a.rows() {
        return Err(Error::Dimension(format!(
            "A is {}×{} but B is {}×{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let lhs = dense_det(&Matrix::identity(a.rows()).add(&a.matmul(b)))?;
    let rhs = dense_det(&Matrix::identity(b.rows()).add(&b.matmul(a)))?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Laplace expansion along the first row; exponential, only for tiny oracles.
    fn cofactor_det(m: &Matrix<f64>) -> f64 {
        let n = m.rows();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor: Vec<Vec<f64>> = (1..n)
                    .map(|i| (0..n).filter(|&c| c != j).map(|c| m[(i, c)]).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * cofactor_det(&Matrix::from_rows(&minor))
            })
            .sum()
    }

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(dense_det(&Matrix::<f64>::identity(3)).unwrap(), 1.0);
        assert_eq!(dense_det(&Matrix::diag(&[2.0, 3.0])).unwrap(), 6.0);
    }

    #[test]
    fn random_matrix_matches_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = Matrix::from_vec(4, 4, data).unwrap();
        let oracle = cofactor_det(&m);
        let det = dense_det(&m).unwrap();
        assert!(
            (det - oracle).abs() < 1e-13 * oracle.abs().max(1.0),
            "{det} vs {oracle}"
        );
    }

    #[test]
    fn triangular_det_is_diagonal_product() {
        let m = Matrix::from_rows(&[
            vec![2.0, 7.0, -1.0],
            vec![0.0, -0.5, 3.0],
            vec![0.0, 0.0, 4.0],
        ]);
        let det = dense_det(&m).unwrap();
        assert!((det + 4.0).abs() < 1e-12 * 4.0);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(dense_det(&m).unwrap(), -1.0);
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(matches!(
            dense_det(&Matrix::<f64>::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn sylvester_identity_examples() {
        let (l, r) = sylvester_identity_check(&Matrix::zeros(3, 2), &Matrix::zeros(2, 3)).unwrap();
        assert_eq!((l, r), (1.0, 1.0));

        // Rank one: det(I + u wᵀ) = 1 + wᵀu.
        let u = Matrix::from_rows(&[vec![0.3], vec![-1.2], vec![0.7]]);
        let w = Matrix::from_rows(&[vec![1.5, 0.4, -2.0]]);
        let (l, r) = sylvester_identity_check(&u, &w).unwrap();
        let lemma = 1.0 + 0.3 * 1.5 - 1.2 * 0.4 - 0.7 * 2.0;
        assert!((r - lemma).abs() < 1e-14);
        assert!((l - lemma).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rand_m = |r, c| {
            Matrix::from_vec(
                r,
                c,
                (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap()
        };
        let a = rand_m(5, 2);
        let b = rand_m(2, 5);
        let (l, r) = sylvester_identity_check(&a, &b).unwrap();
        assert!((l - r).abs() < 1e-10);

        assert!(sylvester_identity_check(&a, &rand_m(3, 5)).is_err());
    }
}
