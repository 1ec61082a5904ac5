use serde::Serialize;

use super::params::Params;
use super::scalar::Real;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// A scalar function of a parameter container, evaluable for any [`Real`].
///
/// Stochastic objectives hold their noise draws so that every evaluation,
/// analytic or finite-difference, sees the same randomness.
pub trait Objective<P: Params<f64>> {
    fn evaluate<T: Real>(&self, params: &P::With<T>) -> Result<T>;
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientBlock {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Gradient {
    pub value: f64,
    pub blocks: Vec<GradientBlock>,
}

impl Gradient {
    pub fn flat(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.values.iter().copied())
            .collect()
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .map(|b| b.values.as_slice())
    }
}

/// Value and exact gradient of `objective` at `params`.
pub fn gradients<P, O>(objective: &O, params: &P) -> Result<Gradient>
where
    P: Params<f64>,
    O: Objective<P>,
{
    let tape = Tape::new();
    let lifted: P::With<Var<'_>> = params.map(&mut |x| tape.var(x));
    let n = tape.len();
    let out = objective.evaluate::<Var<'_>>(&lifted)?;
    if !out.value().is_finite() {
        return Err(Error::NonFinite(format!("objective value {}", out.value())));
    }
    let adj = tape.adjoints(out);
    debug_assert!(adj.len() >= n);
    let mut blocks = Vec::new();
    let mut offset = 0;
    for (name, len) in params.layout() {
        let values = adj[offset..offset + len].to_vec();
        if values.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(name));
        }
        offset += len;
        blocks.push(GradientBlock { name, values });
    }
    Ok(Gradient {
        value: out.value(),
        blocks,
    })
}

/// Analytic vs. central-difference comparison for one parameter block.
#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub block: String,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_relative_error: f64,
    /// Denominator floor used for this objective, see [`roundoff_floor`].
    pub floor: f64,
}

/// Smallest denominator of [`relative_error`].
pub const MIN_FLOOR: f64 = 1e-8;

/// `|a − f| / max(1e−8, |a| + |f|)`.
pub fn relative_error(a: f64, f: f64) -> f64 {
    relative_error_with_floor(a, f, MIN_FLOOR)
}

/// `|a − f| / max(floor, |a| + |f|)`.
pub fn relative_error_with_floor(a: f64, f: f64, floor: f64) -> f64 {
    (a - f).abs() / floor.max(a.abs() + f.abs())
}

/// How far below the objective's rounding level gradients stop being
/// compared relatively.
const ROUNDOFF_MULTIPLE: f64 = 1e6;

/// Denominator floor for an objective of magnitude `|value|`.
///
/// A central difference of step `h` carries a rounding error of about
/// `ε |F| / h`, so entries of that size cannot be resolved relatively; with
/// this floor an entry passes a tolerance `t` when it is either within `t`
/// relatively or within `1e6 · t · ε |F| / h` absolutely.
pub fn roundoff_floor(value: f64, fd_step: f64) -> f64 {
    MIN_FLOOR.max(ROUNDOFF_MULTIPLE * f64::EPSILON * value.abs().max(1.0) / fd_step)
}

/// Compares exact gradients against central differences of step `fd_step`,
/// entry by entry with [`relative_error_with_floor`] and [`roundoff_floor`].
///
/// Never fails: an objective that cannot be evaluated yields reports with an
/// infinite error.
pub fn grad_check<P, O>(objective: &O, params: &P, fd_step: f64) -> Vec<GradientReport>
where
    P: Params<f64>,
    O: Objective<P>,
{
    let layout = params.layout();
    let (analytic, value) = match gradients(objective, params) {
        Ok(g) => (g.flat(), g.value),
        Err(_) => (vec![f64::NAN; params.num_params()], f64::NAN),
    };
    let floor = roundoff_floor(value, fd_step);
    let eval_shifted = |index: usize, delta: f64| -> f64 {
        let mut i = 0;
        let shifted: P::With<f64> = params.map(&mut |x| {
            let v = if i == index { x + delta } else { x };
            i += 1;
            v
        });
        objective.evaluate::<f64>(&shifted).unwrap_or(f64::NAN)
    };
    let mut reports = Vec::with_capacity(layout.len());
    let mut offset = 0;
    for (name, len) in layout {
        let mut numeric = Vec::with_capacity(len);
        let mut worst: f64 = 0.0;
        for k in offset..offset + len {
            let fd = (eval_shifted(k, fd_step) - eval_shifted(k, -fd_step)) / (2.0 * fd_step);
            let err = relative_error_with_floor(analytic[k], fd, floor);
            worst = if err.is_nan() {
                f64::INFINITY
            } else {
                worst.max(err)
            };
            numeric.push(fd);
        }
        reports.push(GradientReport {
            block: name,
            analytic: analytic[offset..offset + len].to_vec(),
            numeric,
            max_relative_error: worst,
            floor,
        });
        offset += len;
    }
    reports
}

/// Largest error across a set of reports.
pub fn worst_error(reports: &[GradientReport]) -> f64 {
    reports
        .iter()
        .map(|r| r.max_relative_error)
        .fold(0.0, f64::max)
}
