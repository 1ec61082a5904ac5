use serde::{Deserialize, Serialize};

use crate::diffcore::Real;
use crate::error::{Error, Result};

/// Smallest magnitude accepted inside a `ln |·|` determinant term.
pub const LOG_DET_GUARD: f64 = 1e-12;

/// The residual nonlinearity `h` shared by all flows of a stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
        }
    }

    #[inline]
    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                -(t * t) + 1.0
            }
        }
    }

    /// `‖h′‖_∞`.
    pub fn derivative_bound(self) -> f64 {
        match self {
            Activation::Tanh => 1.0,
        }
    }

    /// `sup |h|`, used to bracket scalar inverses.
    pub fn range_bound(self) -> f64 {
        match self {
            Activation::Tanh => 1.0,
        }
    }
}

/// `ln |x|`, refusing values the guard treats as singular.
pub(crate) fn log_abs_factor<T: Real>(x: T) -> Result<T> {
    let v = x.value();
    if !(v.abs() >= LOG_DET_GUARD) {
        return Err(Error::SingularJacobian(v));
    }
    Ok(x.abs().ln())
}
