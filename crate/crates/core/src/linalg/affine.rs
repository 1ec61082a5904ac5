use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::diffcore::{join, Params, Real};
use crate::error::{Error, Result};

/// `x ↦ W x + b` with `W` stored as `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine<T = f64> {
    weight: Matrix<T>,
    bias: Vec<T>,
}

impl<T: Real> Affine<T> {
    pub fn new(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Dimension(format!(
                "bias of length {} for a {}×{} weight",
                bias.len(),
                weight.rows(),
                weight.cols()
            )));
        }
        Ok(Affine { weight, bias })
    }

    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Affine {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn weight(&self) -> &Matrix<T> {
        &self.weight
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.inputs(), "affine input length");
        (0..self.outputs())
            .map(|i| T::dot(self.weight.row(i), x) + self.bias[i])
            .collect()
    }
}

impl Affine<f64> {
    /// Weights from `N(0, std²)`, zero biases.
    pub fn random(outputs: usize, inputs: usize, std: f64, rng: &mut crate::Rng) -> Self {
        let mut a = Self::zeros(outputs, inputs);
        if std > 0.0 {
            let normal = Normal::new(0.0, std).expect("positive std");
            for i in 0..outputs {
                for j in 0..inputs {
                    a.weight[(i, j)] = normal.sample(rng);
                }
            }
        }
        a
    }
}

impl<T: Real> Params<T> for Affine<T> {
    type With<U: Real> = Affine<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        self.weight.visit(&join(prefix, "weight"), f);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> Affine<U> {
        let weight = self.weight.map(f);
        let bias = self.bias.iter().map(|&x| f(x)).collect();
        Affine { weight, bias }
    }
}
