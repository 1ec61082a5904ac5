//! Gradient provision for every differentiable operation in the crate.
//!
//! All numerical code is written against [`Real`]. Gradients come from a
//! recording tape ([`Tape`]/[`Var`]); the contract they must honour is
//! agreement with central differences under [`grad_check`].

mod check;
pub mod fd;
mod params;
mod scalar;
mod tape;

pub use check::{
    grad_check, gradients, relative_error, relative_error_with_floor, roundoff_floor, worst_error,
    Gradient, GradientBlock, GradientReport, Objective,
};
pub use params::{join, unflatten, Params};
pub use scalar::Real;
pub use tape::{Tape, Var};
