//! The scalar abstraction every differentiable computation is written against.
//!
//! Numerical code in this crate is generic over [`Real`]. Evaluating it with
//! `f64` gives plain values (and the finite-difference oracles); evaluating it
//! with [`Var`](super::Var) records the computation on a tape so that exact
//! reverse-mode gradients can be read back.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A value that carries no derivative information.
    fn constant(x: f64) -> Self;

    /// The primal value.
    fn value(self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn sigmoid(self) -> Self;
    /// `ln(1 + e^x)`, evaluated without overflow.
    fn softplus(self) -> Self;
    /// ELU with unit scale: `x` for `x > 0`, `e^x − 1` otherwise.
    fn elu(self) -> Self;

    /// `Σ a_i b_i`. Recorded as a single node on a tape.
    fn dot(a: &[Self], b: &[Self]) -> Self;

    /// `Σ x_i`. Recorded as a single node on a tape.
    fn sum(xs: &[Self]) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn square(self) -> Self {
        self * self
    }

    /// `ln σ(x) = −softplus(−x)`.
    fn ln_sigmoid(self) -> Self {
        -(-self).softplus()
    }
}

pub(crate) fn softplus_f64(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Real for f64 {
    #[inline]
    fn constant(x: f64) -> Self {
        x
    }

    #[inline]
    fn value(self) -> f64 {
        self
    }

    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }

    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }

    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid_f64(self)
    }

    #[inline]
    fn softplus(self) -> Self {
        softplus_f64(self)
    }

    #[inline]
    fn elu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            self.exp_m1()
        }
    }

    #[inline]
    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[inline]
    fn sum(xs: &[Self]) -> Self {
        xs.iter().sum()
    }
}
