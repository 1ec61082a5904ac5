use super::Matrix;
use crate::diffcore::{Params, Real};
use crate::error::{Error, Result};

/// Default bound on `‖QᵀQ − I‖_F` for [`OrthonormalColumns`].
pub const ORTHO_TOLERANCE: f64 = 1e-6;

/// Square matrix whose entries strictly below the diagonal are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperTriangular<T = f64> {
    m: Matrix<T>,
}

impl<T: Real> UpperTriangular<T> {
    /// Validates that `m` is square and upper triangular.
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "upper triangular matrix must be square, got {}×{}",
                m.rows(),
                m.cols()
            )));
        }
        for i in 0..m.rows() {
            for j in 0..i {
                if m[(i, j)].value() != 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "entry ({i},{j}) below the diagonal is {}",
                        m[(i, j)].value()
                    )));
                }
            }
        }
        Ok(UpperTriangular { m })
    }

    /// Keeps the upper triangle of a square matrix and zeroes the rest.
    pub fn from_upper(m: &Matrix<T>) -> Self {
        assert!(m.is_square(), "from_upper needs a square matrix");
        let mut out = m.clone();
        for i in 0..m.rows() {
            for j in 0..i {
                out[(i, j)] = T::zero();
            }
        }
        UpperTriangular { m: out }
    }

    pub fn zeros(dim: usize) -> Self {
        UpperTriangular {
            m: Matrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[(i, j)]
    }

    #[inline]
    pub fn diag(&self, i: usize) -> T {
        self.m[(i, i)]
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.diag(i)).collect()
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.m
    }

    /// `R x`, touching only the upper triangle.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| T::dot(&self.m.row(i)[i..], &x[i..]))
            .collect()
    }

    /// `self · rhs`, again upper triangular.
    pub fn mul(&self, rhs: &UpperTriangular<T>) -> UpperTriangular<T> {
        UpperTriangular::from_upper(&self.m.matmul(&rhs.m))
    }

    /// Solves `R x = y` by back substitution.
    pub fn solve(&self, y: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        assert_eq!(y.len(), n);
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let d = self.diag(i);
            if d.value() == 0.0 {
                return Err(Error::NonInvertible(format!("zero diagonal entry {i}")));
            }
            let tail = T::dot(&self.m.row(i)[i + 1..], &x[i + 1..]);
            x[i] = (y[i] - tail) / d;
        }
        Ok(x)
    }

    /// Largest magnitude strictly above the diagonal.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max(self.m[(i, j)].value().abs());
            }
        }
        worst
    }
}

impl<T: Real> Params<T> for UpperTriangular<T> {
    type With<U: Real> = UpperTriangular<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        self.m.visit(prefix, f);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> UpperTriangular<U> {
        UpperTriangular { m: self.m.map(f) }
    }
}

/// A D×M matrix with orthonormal columns (to within a tolerance).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalColumns<T = f64> {
    q: Matrix<T>,
    /// Björck steps that produced this matrix, 0 when constructed directly.
    steps: usize,
    /// `‖QᵀQ − I‖_F` before each step and after the last one.
    residuals: Vec<f64>,
}

impl<T: Real> OrthonormalColumns<T> {
    /// Accepts `q` if `‖QᵀQ − I‖_F ≤ tol` and `cols ≤ rows`.
    pub fn new(q: Matrix<T>, tol: f64) -> Result<Self> {
        if q.cols() > q.rows() {
            return Err(Error::Dimension(format!(
                "cannot have {} orthonormal columns in dimension {}",
                q.cols(),
                q.rows()
            )));
        }
        let residual = q.orthonormality_residual();
        if residual > tol {
            return Err(Error::InvalidParams(format!(
                "columns are not orthonormal: ‖QᵀQ − I‖_F = {residual:e} > {tol:e}"
            )));
        }
        Ok(OrthonormalColumns {
            q,
            steps: 0,
            residuals: vec![residual],
        })
    }

    pub(crate) fn from_iteration(q: Matrix<T>, steps: usize, residuals: Vec<f64>) -> Self {
        OrthonormalColumns {
            q,
            steps,
            residuals,
        }
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.q
    }

    pub fn ambient_dim(&self) -> usize {
        self.q.rows()
    }

    pub fn num_cols(&self) -> usize {
        self.q.cols()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn residual_history(&self) -> &[f64] {
        &self.residuals
    }

    pub fn residual(&self) -> f64 {
        *self.residuals.last().expect("at least one residual")
    }
}

impl<T: Real> Params<T> for OrthonormalColumns<T> {
    type With<U: Real> = OrthonormalColumns<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        self.q.visit(prefix, f);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> OrthonormalColumns<U> {
        OrthonormalColumns {
            q: self.q.map(f),
            steps: self.steps,
            residuals: self.residuals.clone(),
        }
    }
}
