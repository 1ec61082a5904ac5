//! Sylvester flows `z′ = z + Q R h(R̃ Qᵀ z + b)` with an orthogonal factor `Q`
//! and upper-triangular `R`, `R̃`.

use serde::{Deserialize, Serialize};

use super::activation::{log_abs_factor, Activation};
use crate::diffcore::{join, Params, Real};
use crate::error::{Error, Result};
use crate::linalg::{HouseholderChain, Matrix, OrthonormalColumns, UpperTriangular};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PermutationOrder {
    Identity,
    Reverse,
}

impl PermutationOrder {
    /// The tag of the k-th triangular flow (0-based): identity first, then alternating.
    pub fn for_flow(k: usize) -> Self {
        if k % 2 == 0 {
            PermutationOrder::Identity
        } else {
            PermutationOrder::Reverse
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SylvesterVariant {
    /// Björck-orthogonalized D×M columns.
    Orthogonal,
    /// Product of Householder reflections, M = D.
    Householder,
    /// Fixed identity or reversal permutation, M = D.
    Triangular,
}

/// How `Q` is represented and applied.
#[derive(Debug, Clone, PartialEq)]
pub enum OrthogonalFactor<T = f64> {
    Columns(OrthonormalColumns<T>),
    Householder(HouseholderChain<T>),
    Permutation { dim: usize, order: PermutationOrder },
}

impl<T: Real> OrthogonalFactor<T> {
    pub fn variant(&self) -> SylvesterVariant {
        match self {
            OrthogonalFactor::Columns(_) => SylvesterVariant::Orthogonal,
            OrthogonalFactor::Householder(_) => SylvesterVariant::Householder,
            OrthogonalFactor::Permutation { .. } => SylvesterVariant::Triangular,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            OrthogonalFactor::Columns(q) => q.ambient_dim(),
            OrthogonalFactor::Householder(h) => h.dim(),
            OrthogonalFactor::Permutation { dim, .. } => *dim,
        }
    }

    pub fn num_cols(&self) -> usize {
        match self {
            OrthogonalFactor::Columns(q) => q.num_cols(),
            _ => self.ambient_dim(),
        }
    }

    /// `Q y` for `y ∈ R^M`.
    pub fn apply(&self, y: &[T]) -> Vec<T> {
        match self {
            OrthogonalFactor::Columns(q) => q.matrix().matvec(y),
            OrthogonalFactor::Householder(h) => h.apply(y),
            OrthogonalFactor::Permutation { order, .. } => permute(*order, y),
        }
    }

    /// `Qᵀ z` for `z ∈ R^D`.
    pub fn apply_transpose(&self, z: &[T]) -> Vec<T> {
        match self {
            OrthogonalFactor::Columns(q) => q.matrix().tr_matvec(z),
            OrthogonalFactor::Householder(h) => h.apply_transpose(z),
            OrthogonalFactor::Permutation { order, .. } => permute(*order, z),
        }
    }

    /// The explicit D×M matrix.
    pub fn to_matrix(&self) -> Matrix<T> {
        let (d, m) = (self.ambient_dim(), self.num_cols());
        let mut out = Matrix::zeros(d, m);
        for j in 0..m {
            let mut e = vec![T::zero(); m];
            e[j] = T::constant(1.0);
            for (i, v) in self.apply(&e).into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

fn permute<T: Real>(order: PermutationOrder, x: &[T]) -> Vec<T> {
    match order {
        PermutationOrder::Identity => x.to_vec(),
        PermutationOrder::Reverse => x.iter().rev().copied().collect(),
    }
}

/// Parameters of one Sylvester transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct SylvesterParams<T = f64> {
    q: OrthogonalFactor<T>,
    r: UpperTriangular<T>,
    r_tilde: UpperTriangular<T>,
    bias: Vec<T>,
}

impl<T: Real> SylvesterParams<T> {
    /// Validates shapes and the invertibility condition `r_ii r̃_ii > −1/‖h′‖_∞`.
    pub fn new(
        q: OrthogonalFactor<T>,
        r: UpperTriangular<T>,
        r_tilde: UpperTriangular<T>,
        bias: Vec<T>,
        act: Activation,
    ) -> Result<Self> {
        let (d, m) = (q.ambient_dim(), q.num_cols());
        if m > d {
            return Err(Error::Dimension(format!(
                "bottleneck M = {m} exceeds D = {d}"
            )));
        }
        if q.variant() != SylvesterVariant::Orthogonal && m != d {
            return Err(Error::Dimension(format!(
                "{:?} Sylvester flows need M = D, got M = {m}, D = {d}",
                q.variant()
            )));
        }
        if r.dim() != m || r_tilde.dim() != m || bias.len() != m {
            return Err(Error::Dimension(format!(
                "R is {0}×{0}, R̃ is {1}×{1} and b has length {2}; expected M = {m}",
                r.dim(),
                r_tilde.dim(),
                bias.len()
            )));
        }
        let bound = -1.0 / act.derivative_bound();
        for i in 0..m {
            let prod = r.diag(i).value() * r_tilde.diag(i).value();
            if !(prod > bound) {
                return Err(Error::InvalidParams(format!(
                    "r_{i}{i}·r̃_{i}{i} = {prod} violates the invertibility bound {bound}"
                )));
            }
        }
        Ok(SylvesterParams {
            q,
            r,
            r_tilde,
            bias,
        })
    }

    /// Builds parameters from unconstrained M×M matrices: the lower triangles
    /// are discarded and the diagonals pass through a slightly shrunk `tanh`,
    /// which keeps every `r_ii r̃_ii` inside `(−1, 1)`.
    pub fn from_raw(
        q: OrthogonalFactor<T>,
        r_raw: &Matrix<T>,
        r_tilde_raw: &Matrix<T>,
        bias: Vec<T>,
        act: Activation,
    ) -> Result<Self> {
        let r = squash_diagonal(r_raw)?;
        let r_tilde = squash_diagonal(r_tilde_raw)?;
        Self::new(q, r, r_tilde, bias, act)
    }

    pub fn q(&self) -> &OrthogonalFactor<T> {
        &self.q
    }

    pub fn r(&self) -> &UpperTriangular<T> {
        &self.r
    }

    pub fn r_tilde(&self) -> &UpperTriangular<T> {
        &self.r_tilde
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn variant(&self) -> SylvesterVariant {
        self.q.variant()
    }

    pub fn dim(&self) -> usize {
        self.q.ambient_dim()
    }

    pub fn bottleneck(&self) -> usize {
        self.q.num_cols()
    }
}

/// `tanh` saturates to exactly ±1 in floating point; the factor keeps
/// `r_ii r̃_ii` strictly above −1.
const DIAGONAL_SCALE: f64 = 1.0 - 1e-7;

fn squash_diagonal<T: Real>(raw: &Matrix<T>) -> Result<UpperTriangular<T>> {
    if !raw.is_square() {
        return Err(Error::Dimension(format!(
            "triangular factor must be square, got {}×{}",
            raw.rows(),
            raw.cols()
        )));
    }
    let mut m = raw.clone();
    for i in 0..m.rows() {
        m[(i, i)] = m[(i, i)].tanh() * DIAGONAL_SCALE;
    }
    Ok(UpperTriangular::from_upper(&m))
}

/// Sylvester transform and `Σ_i ln |1 + h′_i (R̃R)_ii|`.
///
/// The determinant only needs the diagonals of `R` and `R̃`, so it costs O(M).
pub fn sylvester_forward<T: Real>(
    p: &SylvesterParams<T>,
    z: &[T],
    act: Activation,
) -> Result<(Vec<T>, T)> {
    if z.len() != p.dim() {
        return Err(Error::Dimension(format!(
            "Sylvester flow in dimension {} applied to a vector of length {}",
            p.dim(),
            z.len()
        )));
    }
    let v = p.q.apply_transpose(z);
    let mut pre = p.r_tilde.matvec(&v);
    for (x, &b) in pre.iter_mut().zip(&p.bias) {
        *x = *x + b;
    }
    let hidden: Vec<T> = pre.iter().map(|&x| act.apply(x)).collect();
    let shift = p.q.apply(&p.r.matvec(&hidden));
    let out = z.iter().zip(&shift).map(|(&a, &b)| a + b).collect();
    let mut log_det = T::zero();
    for (i, &x) in pre.iter().enumerate() {
        let factor = act.derivative(x) * p.r_tilde.diag(i) * p.r.diag(i) + 1.0;
        log_det = log_det + log_abs_factor(factor)?;
    }
    Ok((out, log_det))
}

impl<T: Real> Params<T> for OrthogonalFactor<T> {
    type With<U: Real> = OrthogonalFactor<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        match self {
            OrthogonalFactor::Columns(q) => q.visit(prefix, f),
            OrthogonalFactor::Householder(h) => h.visit(prefix, f),
            OrthogonalFactor::Permutation { .. } => {}
        }
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> OrthogonalFactor<U> {
        match self {
            OrthogonalFactor::Columns(q) => OrthogonalFactor::Columns(q.map(f)),
            OrthogonalFactor::Householder(h) => OrthogonalFactor::Householder(h.map(f)),
            OrthogonalFactor::Permutation { dim, order } => OrthogonalFactor::Permutation {
                dim: *dim,
                order: *order,
            },
        }
    }
}

impl<T: Real> Params<T> for SylvesterParams<T> {
    type With<U: Real> = SylvesterParams<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        self.q.visit(&join(prefix, "q"), f);
        self.r.visit(&join(prefix, "r"), f);
        self.r_tilde.visit(&join(prefix, "r_tilde"), f);
        f(&join(prefix, "b"), &self.bias);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> SylvesterParams<U> {
        let q = self.q.map(f);
        let r = self.r.map(f);
        let r_tilde = self.r_tilde.map(f);
        let bias = self.bias.iter().map(|&x| f(x)).collect();
        SylvesterParams {
            q,
            r,
            r_tilde,
            bias,
        }
    }
}
