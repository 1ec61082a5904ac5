use super::{Matrix, OrthonormalColumns};
use crate::diffcore::{join, Params, Real};
use crate::error::{Error, Result};

/// An ordered product of Householder reflections `H_k(z) = z − 2 v_k v_kᵀ z / ‖v_k‖²`.
///
/// Applying the chain means applying `H_1`, then `H_2`, and so on; the implied
/// matrix is `P = H_n ⋯ H_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholderChain<T = f64> {
    dim: usize,
    vectors: Vec<Vec<T>>,
}

impl<T: Real> HouseholderChain<T> {
    pub fn new(dim: usize, vectors: Vec<Vec<T>>) -> Result<Self> {
        for (k, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Dimension(format!(
                    "reflection {k} has length {} in dimension {dim}",
                    v.len()
                )));
            }
            let sq: f64 = v.iter().map(|x| x.value().powi(2)).sum();
            if !(sq > 0.0) {
                return Err(Error::ZeroReflection(k));
            }
        }
        Ok(HouseholderChain { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }

    fn reflect(v: &[T], z: &mut [T]) {
        let coef = T::dot(v, z) * 2.0 / T::dot(v, v);
        for (zi, &vi) in z.iter_mut().zip(v) {
            *zi = *zi - coef * vi;
        }
    }

    /// `P z` in O(n·D).
    pub fn apply(&self, z: &[T]) -> Vec<T> {
        assert_eq!(z.len(), self.dim, "householder_apply dimension mismatch");
        let mut out = z.to_vec();
        for v in &self.vectors {
            Self::reflect(v, &mut out);
        }
        out
    }

    /// `Pᵀ z`: the reflections in reverse order (each one is symmetric).
    pub fn apply_transpose(&self, z: &[T]) -> Vec<T> {
        assert_eq!(z.len(), self.dim, "householder_apply dimension mismatch");
        let mut out = z.to_vec();
        for v in self.vectors.iter().rev() {
            Self::reflect(v, &mut out);
        }
        out
    }

    /// The explicit D×D product. Only meant for tests and Jacobian oracles.
    pub fn materialize(&self) -> OrthonormalColumns<T> {
        let mut p = Matrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            let mut e = vec![T::zero(); self.dim];
            e[j] = T::constant(1.0);
            let col = self.apply(&e);
            for (i, c) in col.into_iter().enumerate() {
                p[(i, j)] = c;
            }
        }
        let residual = p.orthonormality_residual();
        OrthonormalColumns::from_iteration(p, 0, vec![residual])
    }
}

/// Checked [`HouseholderChain::apply`].
pub fn householder_apply<T: Real>(chain: &HouseholderChain<T>, z: &[T]) -> Result<Vec<T>> {
    if z.len() != chain.dim() {
        return Err(Error::Dimension(format!(
            "vector of length {} for a chain in dimension {}",
            z.len(),
            chain.dim()
        )));
    }
    Ok(chain.apply(z))
}

pub fn householder_materialize<T: Real>(chain: &HouseholderChain<T>) -> OrthonormalColumns<T> {
    chain.materialize()
}

impl<T: Real> Params<T> for HouseholderChain<T> {
    type With<U: Real> = HouseholderChain<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        for (k, v) in self.vectors.iter().enumerate() {
            f(&join(prefix, &format!("v{k}")), v);
        }
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> HouseholderChain<U> {
        HouseholderChain {
            dim: self.dim,
            vectors: self
                .vectors
                .iter()
                .map(|v| v.iter().map(|&x| f(x)).collect())
                .collect(),
        }
    }
}
