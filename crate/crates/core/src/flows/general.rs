use super::activation::{log_abs_factor, Activation};
use crate::diffcore::{join, Params, Real};
use crate::error::{Error, Result};
use crate::linalg::{dense_det, Matrix};

/// `z′ = z + A h(Bz + b)` with unstructured `A ∈ R^{D×M}`, `B ∈ R^{M×D}`.
///
/// Not invertible in general; it exists as an oracle for the structured
/// Sylvester flows.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralSylvesterParams<T = f64> {
    a: Matrix<T>,
    b_mat: Matrix<T>,
    bias: Vec<T>,
}

impl<T: Real> GeneralSylvesterParams<T> {
    pub fn new(a: Matrix<T>, b_mat: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        let (d, m) = (a.rows(), a.cols());
        if b_mat.rows() != m || b_mat.cols() != d || bias.len() != m {
            return Err(Error::Dimension(format!(
                "A is {d}×{m}, B is {}×{}, b has length {}",
                b_mat.rows(),
                b_mat.cols(),
                bias.len()
            )));
        }
        if m > d {
            return Err(Error::Dimension(format!("M = {m} exceeds D = {d}")));
        }
        Ok(GeneralSylvesterParams { a, b_mat, bias })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b_mat(&self) -> &Matrix<T> {
        &self.b_mat
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }
}

/// Transform and `ln |det(I_M + diag(h′(Bz + b)) B A)|` via an M×M determinant.
pub fn general_sylvester_forward<T: Real>(
    p: &GeneralSylvesterParams<T>,
    z: &[T],
    act: Activation,
) -> Result<(Vec<T>, T)> {
    if z.len() != p.dim() {
        return Err(Error::Dimension(format!(
            "flow in dimension {} applied to a vector of length {}",
            p.dim(),
            z.len()
        )));
    }
    let mut pre = p.b_mat.matvec(z);
    for (x, &b) in pre.iter_mut().zip(&p.bias) {
        *x = *x + b;
    }
    let hidden: Vec<T> = pre.iter().map(|&x| act.apply(x)).collect();
    let shift = p.a.matvec(&hidden);
    let out = z.iter().zip(&shift).map(|(&x, &s)| x + s).collect();

    let ba = p.b_mat.matmul(&p.a);
    let m = ba.rows();
    let mut inner = Matrix::identity(m);
    for i in 0..m {
        let hp = act.derivative(pre[i]);
        for j in 0..m {
            inner[(i, j)] = inner[(i, j)] + hp * ba[(i, j)];
        }
    }
    let det = dense_det(&inner)?;
    Ok((out, log_abs_factor(det)?))
}

impl<T: Real> Params<T> for GeneralSylvesterParams<T> {
    type With<U: Real> = GeneralSylvesterParams<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        self.a.visit(&join(prefix, "a"), f);
        self.b_mat.visit(&join(prefix, "b_mat"), f);
        f(&join(prefix, "b"), &self.bias);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> GeneralSylvesterParams<U> {
        let a = self.a.map(f);
        let b_mat = self.b_mat.map(f);
        let bias = self.bias.iter().map(|&x| f(x)).collect();
        GeneralSylvesterParams { a, b_mat, bias }
    }
}
