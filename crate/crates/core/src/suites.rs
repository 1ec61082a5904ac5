//! Self-checks over seeded random instances, reported as `snf-report/1`.
//!
//! Every check compares a library computation against an oracle that only
//! uses forward passes (central differences, dense determinants) or a
//! structural property, and records the worst discrepancy it saw.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::amortize::{AmortizationConfig, FlowFamily, Hypernetwork};
use crate::diffcore::fd::{numerical_jacobian, numerical_log_abs_det, FD_STEP};
use crate::diffcore::{grad_check, unflatten, worst_error, Objective, Params, Real};
use crate::error::{Error, Result};
use crate::flows::{
    made_outputs, Activation, Flow, GeneralSylvesterParams, MadeParams, OrthogonalFactor,
    PermutationOrder, PlanarParams, SylvesterParams,
};
use crate::inversion::{invert_flow, DEFAULT_TOL};
use crate::linalg::{
    bjorck_orthogonalize, sylvester_identity_check, BjorckSettings, HouseholderChain, Matrix,
};
use crate::vi::{free_energy, standard_noise, GaussianTarget, VaeConfig, VaeModel, VaeObjective};
use crate::{seeded_rng, Rng};

pub const REPORT_SCHEMA: &str = "snf-report/1";

/// Relative disagreement of the two sides of `det(I + AB) = det(I + BA)`.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Absolute disagreement between analytic and finite-difference log-dets.
pub const LOGDET_TOL: f64 = 1e-6;
/// Largest coordinate error of `inverse(forward(z))`.
pub const ROUND_TRIP_TOL: f64 = 1e-8;
/// The inverse must leave the part of `z′` outside `span(Q)` untouched,
/// relative to `max(1, ‖z′‖_∞)`.
pub const PERPENDICULAR_TOL: f64 = 1e-14;
/// Björck residual `‖QᵀQ − I‖_F` after amortization.
pub const ORTHO_TOL: f64 = 1e-6;
pub const ORTHO_MAX_STEPS: usize = 30;
/// Relative gradient error at central-difference step [`GRAD_FD_STEP`].
pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_FD_STEP: f64 = 1e-5;
/// Largest magnitude allowed where an autoregressive Jacobian must vanish.
pub const MADE_TOL: f64 = 1e-7;

/// Gradient checks run Björck to this residual so that a perturbation of the
/// seed never changes the number of steps taken.
const GRAD_BJORCK_EPS: f64 = 1e-12;

const ACT: Activation = Activation::Tanh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Logdet,
    Inverse,
    Ortho,
    Grad,
    Made,
    All,
}

impl Suite {
    const PARTS: [Suite; 5] = [
        Suite::Logdet,
        Suite::Inverse,
        Suite::Ortho,
        Suite::Grad,
        Suite::Made,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Logdet => "logdet",
            Suite::Inverse => "inverse",
            Suite::Ortho => "ortho",
            Suite::Grad => "grad",
            Suite::Made => "made",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::PARTS
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown suite {s:?}; expected logdet, inverse, ortho, grad, made or all"
                ))
            })
    }
}

/// The single transformations exercised by the suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Planar,
    General,
    Orthogonal,
    Householder,
    Triangular,
    Iaf,
}

impl FlowKind {
    pub const ALL: [FlowKind; 6] = [
        FlowKind::Planar,
        FlowKind::General,
        FlowKind::Orthogonal,
        FlowKind::Householder,
        FlowKind::Triangular,
        FlowKind::Iaf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Planar => "planar",
            FlowKind::General => "general",
            FlowKind::Orthogonal => "orthogonal",
            FlowKind::Householder => "householder",
            FlowKind::Triangular => "triangular",
            FlowKind::Iaf => "iaf",
        }
    }

    /// Whether the kind has a constructive inverse.
    pub fn invertible(self) -> bool {
        self != FlowKind::General
    }
}

fn uniform_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches data")
}

fn uniform_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Bottleneck used for orthogonal and general Sylvester instances.
pub fn bottleneck(dim: usize) -> usize {
    dim.div_ceil(2)
}

/// Orthonormal `D×M` columns: Björck applied to `I + Δ` with `‖Δ‖_F ≤ 0.4`.
pub fn random_orthonormal(rng: &mut Rng, d: usize, m: usize, eps: f64) -> Result<Matrix> {
    let delta = uniform_matrix(rng, d, m, 1.0);
    let scale = 0.4 * rng.random_range(0.0..1.0) / delta.frobenius_norm().max(1e-12);
    let seed = Matrix::eye(d, m).add(&delta.scale(scale));
    let q = bjorck_orthogonalize(
        &seed,
        BjorckSettings {
            eps,
            max_steps: ORTHO_MAX_STEPS,
        },
    )?;
    Ok(q.matrix().clone())
}

/// A random, invertible (except for `General`) instance of `kind`.
pub fn random_flow(kind: FlowKind, dim: usize, rng: &mut Rng) -> Result<Flow> {
    let sylvester = |q: OrthogonalFactor, m: usize, rng: &mut Rng| -> Result<Flow> {
        let r = uniform_matrix(rng, m, m, 1.5);
        let rt = uniform_matrix(rng, m, m, 1.5);
        let b = uniform_vec(rng, m, 1.0);
        Ok(Flow::Sylvester(SylvesterParams::from_raw(
            q, &r, &rt, b, ACT,
        )?))
    };
    match kind {
        FlowKind::Planar => {
            let u = uniform_vec(rng, dim, 1.5);
            let w = uniform_vec(rng, dim, 1.5);
            let b = rng.random_range(-1.0..1.0);
            Ok(Flow::Planar(PlanarParams::from_raw(&u, w, b)?))
        }
        FlowKind::General => {
            let m = bottleneck(dim);
            let a = uniform_matrix(rng, dim, m, 0.6);
            let b = uniform_matrix(rng, m, dim, 0.6);
            let bias = uniform_vec(rng, m, 1.0);
            Ok(Flow::GeneralSylvester(GeneralSylvesterParams::new(
                a, b, bias,
            )?))
        }
        FlowKind::Orthogonal => {
            let m = bottleneck(dim);
            let q = random_orthonormal(rng, dim, m, 1e-14)?;
            let q = crate::linalg::OrthonormalColumns::new(q, 1e-12)?;
            sylvester(OrthogonalFactor::Columns(q), m, rng)
        }
        FlowKind::Householder => {
            let vectors = (0..dim).map(|_| uniform_vec(rng, dim, 1.0)).collect();
            let chain = HouseholderChain::new(dim, vectors)?;
            sylvester(OrthogonalFactor::Householder(chain), dim, rng)
        }
        FlowKind::Triangular => {
            let order = if rng.random_bool(0.5) {
                PermutationOrder::Identity
            } else {
                PermutationOrder::Reverse
            };
            sylvester(OrthogonalFactor::Permutation { dim, order }, dim, rng)
        }
        FlowKind::Iaf => {
            let width = 2 * dim + 2;
            let made = MadeParams::initialized(dim, width, 0.3, 1.0, rng)?;
            let context = uniform_vec(rng, width, 0.5);
            Ok(Flow::Iaf { made, context })
        }
    }
}

/// Suite parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub dims: Vec<usize>,
    /// Random instances per dimension and check.
    pub cases: usize,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        SuiteConfig {
            seed,
            dims: vec![2, 3, 5, 8],
            cases: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::Config(
                "suite dimensions must be non-empty and positive".into(),
            ));
        }
        if self.cases == 0 {
            return Err(Error::Config("suites need at least one case".into()));
        }
        Ok(())
    }
}

/// The outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub cases: usize,
    /// Cases that raised an error instead of producing a discrepancy.
    pub errors: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// The discrepancy of every case that produced one, in run order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub suite: Suite,
    pub config: SuiteConfig,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

/// Accumulates discrepancies for one check.
struct Tally {
    suite: Suite,
    name: String,
    tolerance: f64,
    cases: usize,
    errors: usize,
    worst: f64,
    values: Vec<f64>,
}

impl Tally {
    fn new(suite: Suite, name: impl Into<String>, tolerance: f64) -> Self {
        Tally {
            suite,
            name: name.into(),
            tolerance,
            cases: 0,
            errors: 0,
            worst: 0.0,
            values: Vec::new(),
        }
    }

    fn record(&mut self, outcome: Result<f64>) {
        self.cases += 1;
        match outcome {
            Ok(x) if x.is_finite() => {
                self.worst = self.worst.max(x);
                self.values.push(x);
            }
            _ => self.errors += 1,
        }
    }

    fn fail(&mut self) {
        self.record(Err(Error::NonFinite("case failed".into())));
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            passed: self.errors == 0 && self.worst <= self.tolerance,
            suite: self.suite,
            name: self.name,
            cases: self.cases,
            errors: self.errors,
            worst: self.worst,
            tolerance: self.tolerance,
            values: self.values,
        }
    }
}

/// Runs `suite` (every part for [`Suite::All`]).
pub fn run(suite: Suite, cfg: &SuiteConfig) -> Result<Report> {
    cfg.validate()?;
    let parts: Vec<Suite> = match suite {
        Suite::All => Suite::PARTS.to_vec(),
        s => vec![s],
    };
    let mut checks = Vec::new();
    for part in parts {
        checks.extend(match part {
            Suite::Logdet => logdet_checks(cfg),
            Suite::Inverse => inverse_checks(cfg),
            Suite::Ortho => ortho_checks(cfg),
            Suite::Grad => grad_checks(cfg),
            Suite::Made => made_checks(cfg),
            Suite::All => unreachable!("expanded above"),
        });
    }
    Ok(Report {
        schema: REPORT_SCHEMA.into(),
        suite,
        config: cfg.clone(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// A generator private to one check and dimension.
fn stream(cfg: &SuiteConfig, check: u64, dim: usize) -> Rng {
    seeded_rng(cfg.seed ^ (check << 40) ^ (dim as u64) << 20)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn logdet_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut identity = Tally::new(Suite::Logdet, "sylvester_identity", IDENTITY_TOL);
    for &d in &cfg.dims {
        let mut rng = stream(cfg, 1, d);
        for _ in 0..cfg.cases {
            let m = rng.random_range(1..=d + 2);
            let scale = 1.0 / (m as f64).sqrt();
            let a = uniform_matrix(&mut rng, d, m, scale);
            let b = uniform_matrix(&mut rng, m, d, scale);
            identity.record(sylvester_identity_check(&a, &b).map(|(lhs, rhs)| {
                (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
            }));
        }
    }
    out.push(identity.finish());
    for (k, kind) in FlowKind::ALL.into_iter().enumerate() {
        let mut tally = Tally::new(Suite::Logdet, format!("logdet_{}", kind.name()), LOGDET_TOL);
        for &d in &cfg.dims {
            let mut rng = stream(cfg, 10 + k as u64, d);
            for _ in 0..cfg.cases {
                tally.record(random_flow(kind, d, &mut rng).and_then(|flow| {
                    let z = uniform_vec(&mut rng, d, 2.0);
                    let (_, analytic) = flow.forward(&z, ACT)?;
                    let fd = numerical_log_abs_det(
                        |z| {
                            flow.forward(z, ACT)
                                .map(|(x, _)| x)
                                .unwrap_or_else(|_| vec![f64::NAN; z.len()])
                        },
                        &z,
                        FD_STEP,
                    );
                    Ok((analytic - fd).abs())
                }));
            }
        }
        out.push(tally.finish());
    }
    out
}

/// `‖(I − QQᵀ) x‖_∞`.
fn perpendicular_part(q: &OrthogonalFactor, x: &[f64]) -> f64 {
    let parallel = q.apply(&q.apply_transpose(x));
    max_abs_diff(x, &parallel)
}

fn inverse_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut perpendicular = Tally::new(
        Suite::Inverse,
        "orthogonal_perpendicular",
        PERPENDICULAR_TOL,
    );
    for (k, kind) in FlowKind::ALL.into_iter().enumerate() {
        if !kind.invertible() {
            continue;
        }
        let mut tally = Tally::new(
            Suite::Inverse,
            format!("round_trip_{}", kind.name()),
            ROUND_TRIP_TOL,
        );
        for &d in &cfg.dims {
            let mut rng = stream(cfg, 20 + k as u64, d);
            for _ in 0..cfg.cases {
                let flow = random_flow(kind, d, &mut rng);
                let z = uniform_vec(&mut rng, d, 3.0);
                tally.record(flow.and_then(|flow| {
                    let flow = &flow;
                    let (zp, _) = flow.forward(&z, ACT)?;
                    let back = invert_flow(flow, &zp, ACT, DEFAULT_TOL)?;
                    if let Flow::Sylvester(p) = flow {
                        if kind == FlowKind::Orthogonal {
                            // z′ − z lies in span(Q), so z and z′ share their perpendicular part.
                            let diff: Vec<f64> = back.iter().zip(&zp).map(|(a, b)| a - b).collect();
                            let scale = zp.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                            perpendicular.record(Ok(perpendicular_part(p.q(), &diff) / scale));
                        }
                    }
                    Ok(max_abs_diff(&back, &z))
                }));
            }
        }
        out.push(tally.finish());
    }
    out.push(perpendicular.finish());
    out
}

/// Perturbs every parameter of `h` by `N(0, std²)`.
fn jitter(h: &Hypernetwork, std: f64, rng: &mut Rng) -> Hypernetwork {
    let flat: Vec<f64> = h
        .flatten()
        .into_iter()
        .map(|x| {
            let n: f64 = StandardNormal.sample(rng);
            x + std * n
        })
        .collect();
    unflatten(h, &flat)
}

fn ortho_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mut residual = Tally::new(Suite::Ortho, "bjorck_residual", ORTHO_TOL);
    let mut steps = Tally::new(Suite::Ortho, "bjorck_steps", ORTHO_MAX_STEPS as f64);
    let mut monotone = Tally::new(Suite::Ortho, "bjorck_residual_increase", 0.0);
    let mut gram = Tally::new(Suite::Ortho, "bjorck_gram_oracle", ORTHO_TOL);
    for &d in &cfg.dims {
        let mut rng = stream(cfg, 30, d);
        for case in 0..cfg.cases {
            let m = [1, bottleneck(d), d][case % 3];
            let config = AmortizationConfig {
                bottleneck: m,
                ..AmortizationConfig::new(FlowFamily::Orthogonal, 4, d, 2)
            };
            let posterior = Hypernetwork::new(config, &mut rng).and_then(|h| {
                let h = jitter(&h, 1.0, &mut rng);
                let features: Vec<f64> = (0..4)
                    .map(|_| {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        3.0 * n
                    })
                    .collect();
                h.amortize(&features)
            });
            let posterior = match posterior {
                Ok(p) => p,
                Err(_) => {
                    for t in [&mut residual, &mut steps, &mut monotone, &mut gram] {
                        t.fail();
                    }
                    continue;
                }
            };
            for flow in posterior.flows.flows() {
                let Flow::Sylvester(p) = flow else { continue };
                let OrthogonalFactor::Columns(q) = p.q() else {
                    continue;
                };
                residual.record(Ok(q.residual()));
                steps.record(Ok(q.steps() as f64));
                let increase = q
                    .residual_history()
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                monotone.record(Ok(increase.max(0.0)));
                // Recompute the residual from the columns themselves.
                let g = q.matrix().transpose().matmul(q.matrix());
                let dev = g.sub(&Matrix::identity(g.rows())).frobenius_norm();
                gram.record(Ok(dev));
            }
        }
    }
    vec![
        residual.finish(),
        steps.finish(),
        monotone.finish(),
        gram.finish(),
    ]
}

/// `cᵀ f(z) + ln |det J_f(z)|` for one flow at a fixed point.
struct FlowObjective {
    z: Vec<f64>,
    c: Vec<f64>,
}

impl Objective<Flow> for FlowObjective {
    fn evaluate<T: Real>(&self, flow: &Flow<T>) -> Result<T> {
        let z: Vec<T> = self.z.iter().map(|&x| T::constant(x)).collect();
        let c: Vec<T> = self.c.iter().map(|&x| T::constant(x)).collect();
        let (out, log_det) = flow.forward(&z, ACT)?;
        Ok(T::dot(&c, &out) + log_det)
    }
}

/// `Σ c_ij Q_ij` of the Björck-orthogonalized seed.
struct BjorckObjective {
    c: Matrix,
}

impl Objective<Matrix> for BjorckObjective {
    fn evaluate<T: Real>(&self, seed: &Matrix<T>) -> Result<T> {
        let q = bjorck_orthogonalize(
            seed,
            BjorckSettings {
                eps: GRAD_BJORCK_EPS,
                max_steps: ORTHO_MAX_STEPS,
            },
        )?;
        let c: Vec<T> = self.c.data().iter().map(|&x| T::constant(x)).collect();
        Ok(T::dot(&c, q.matrix().data()))
    }
}

/// `cᵀ H_1 ⋯ H_n z`.
struct HouseholderObjective {
    z: Vec<f64>,
    c: Vec<f64>,
}

impl Objective<HouseholderChain> for HouseholderObjective {
    fn evaluate<T: Real>(&self, chain: &HouseholderChain<T>) -> Result<T> {
        let z: Vec<T> = self.z.iter().map(|&x| T::constant(x)).collect();
        let c: Vec<T> = self.c.iter().map(|&x| T::constant(x)).collect();
        Ok(T::dot(&c, &crate::linalg::householder_apply(chain, &z)?))
    }
}

/// Free energy of the amortized posterior for fixed features against a
/// Gaussian target.
struct AmortizedObjective {
    features: Vec<f64>,
    target: GaussianTarget,
    noise: Vec<Vec<f64>>,
}

impl Objective<Hypernetwork> for AmortizedObjective {
    fn evaluate<T: Real>(&self, h: &Hypernetwork<T>) -> Result<T> {
        let x: Vec<T> = self.features.iter().map(|&v| T::constant(v)).collect();
        let post = h.amortize(&x)?;
        free_energy(&post.base, &post.flows, &self.target, &self.noise)
    }
}

fn family_config(family: FlowFamily, e: usize, d: usize, k: usize) -> AmortizationConfig {
    let mut c = AmortizationConfig::new(family, e, d, k);
    c.bottleneck = bottleneck(d);
    c.bjorck.eps = GRAD_BJORCK_EPS;
    c
}

fn random_target(d: usize, rng: &mut Rng) -> Result<GaussianTarget> {
    let a = uniform_vec(rng, d, 1.0);
    let mut cov = Matrix::identity(d);
    for i in 0..d {
        for j in 0..d {
            cov[(i, j)] += 0.5 * a[i] * a[j];
        }
    }
    GaussianTarget::new(uniform_vec(rng, d, 1.0), &cov)
}

fn grad_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let check = |name: String| Tally::new(Suite::Grad, name, GRAD_TOL);

    for (k, kind) in FlowKind::ALL.into_iter().enumerate() {
        let mut tally = check(format!("grad_{}", kind.name()));
        for &d in &cfg.dims {
            let mut rng = stream(cfg, 40 + k as u64, d);
            for _ in 0..cfg.cases {
                tally.record(random_flow(kind, d, &mut rng).map(|flow| {
                    let obj = FlowObjective {
                        z: uniform_vec(&mut rng, d, 2.0),
                        c: uniform_vec(&mut rng, d, 1.0),
                    };
                    worst_error(&grad_check(&obj, &flow, GRAD_FD_STEP))
                }));
            }
        }
        out.push(tally.finish());
    }

    let mut bjorck = check("grad_bjorck".into());
    let mut householder = check("grad_householder_chain".into());
    for &d in &cfg.dims {
        let mut rng = stream(cfg, 50, d);
        for _ in 0..cfg.cases {
            let m = rng.random_range(1..=d);
            let delta = uniform_matrix(&mut rng, d, m, 1.0);
            let scale = 0.4 * rng.random_range(0.0..1.0) / delta.frobenius_norm().max(1e-12);
            let seed = Matrix::eye(d, m).add(&delta.scale(scale));
            let obj = BjorckObjective {
                c: uniform_matrix(&mut rng, d, m, 1.0),
            };
            bjorck.record(Ok(worst_error(&grad_check(&obj, &seed, GRAD_FD_STEP))));

            let vectors = (0..rng.random_range(1..=d))
                .map(|_| uniform_vec(&mut rng, d, 1.0))
                .collect();
            householder.record(HouseholderChain::new(d, vectors).map(|chain| {
                let obj = HouseholderObjective {
                    z: uniform_vec(&mut rng, d, 2.0),
                    c: uniform_vec(&mut rng, d, 1.0),
                };
                worst_error(&grad_check(&obj, &chain, GRAD_FD_STEP))
            }));
        }
    }
    out.push(bjorck.finish());
    out.push(householder.finish());

    // Whole free-energy objectives through the hypernetwork. Fewer cases:
    // each costs two evaluations per parameter.
    let cases = cfg.cases.div_ceil(5);
    for (k, family) in FlowFamily::ALL.into_iter().enumerate() {
        let mut tally = check(format!("grad_free_energy_{}", family.name()));
        for &d in &cfg.dims {
            let mut rng = stream(cfg, 60 + k as u64, d);
            for _ in 0..cases {
                let outcome = (|| {
                    let h = Hypernetwork::new(family_config(family, 3, d, 2), &mut rng)?;
                    let h = jitter(&h, 0.3, &mut rng);
                    let obj = AmortizedObjective {
                        features: uniform_vec(&mut rng, 3, 1.0),
                        target: random_target(d, &mut rng)?,
                        noise: (0..3).map(|_| standard_noise(d, &mut rng)).collect(),
                    };
                    Ok(worst_error(&grad_check(&obj, &h, GRAD_FD_STEP)))
                })();
                tally.record(outcome);
            }
        }
        out.push(tally.finish());
    }

    // The annealed VAE objective end to end, once per family.
    let vae = VaeConfig {
        hidden_units: 4,
        ..VaeConfig::default()
    };
    for (k, family) in FlowFamily::ALL.into_iter().enumerate() {
        let mut tally = check(format!("grad_vae_{}", family.name()));
        let mut rng = stream(cfg, 70 + k as u64, 2);
        let outcome = (|| {
            let model = VaeModel::new(&vae, family_config(family, 4, 2, 2), &mut rng)?;
            let flat: Vec<f64> = model
                .flatten()
                .into_iter()
                .map(|x| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    x + 0.3 * n
                })
                .collect();
            let model = unflatten(&model, &flat);
            let x: Vec<f64> = (0..crate::vi::PIXELS)
                .map(|_| f64::from(rng.random_bool(0.3)))
                .collect();
            let obj = VaeObjective {
                batch: vec![&x],
                noise: vec![vec![standard_noise(2, &mut rng)]],
                beta: 0.7,
            };
            Ok(worst_error(&grad_check(&obj, &model, GRAD_FD_STEP)))
        })();
        tally.record(outcome);
        out.push(tally.finish());
    }
    out
}

fn made_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mut conditioner = Tally::new(Suite::Made, "made_upper_jacobian", MADE_TOL);
    let mut transform = Tally::new(Suite::Made, "iaf_upper_jacobian", MADE_TOL);
    let mut diagonal = Tally::new(Suite::Made, "iaf_diagonal_gate", MADE_TOL);
    for &d in &cfg.dims {
        let mut rng = stream(cfg, 80, d);
        for _ in 0..cfg.cases {
            let width = rng.random_range(d..=3 * d + 2);
            let made = match MadeParams::random_with_biases(d, width, 1.0 / (d as f64).sqrt(), &mut rng) {
                Ok(m) => m,
                Err(e) => {
                    conditioner.record(Err(e));
                    continue;
                }
            };
            let ctx = uniform_vec(&mut rng, width, 1.0);
            let z = uniform_vec(&mut rng, d, 2.0);

            // μ and s stacked: rows 0..D are μ, D..2D are s.
            let outputs = |z: &[f64]| {
                made_outputs(&made, z, &ctx)
                    .map(|(mu, s)| [mu, s].concat())
                    .unwrap_or_else(|_| vec![f64::NAN; 2 * z.len()])
            };
            let jac = numerical_jacobian(outputs, &z, FD_STEP);
            let mut worst: f64 = 0.0;
            for block in 0..2 {
                for i in 0..d {
                    for j in i..d {
                        worst = worst.max(jac[(block * d + i, j)].abs());
                    }
                }
            }
            conditioner.record(Ok(worst));

            let forward = |z: &[f64]| {
                crate::flows::iaf_forward(&made, z, &ctx)
                    .map(|(x, _)| x)
                    .unwrap_or_else(|_| vec![f64::NAN; z.len()])
            };
            let jac = numerical_jacobian(forward, &z, FD_STEP);
            let mut upper: f64 = 0.0;
            for i in 0..d {
                for j in i + 1..d {
                    upper = upper.max(jac[(i, j)].abs());
                }
            }
            transform.record(Ok(upper));
            diagonal.record(made_outputs(&made, &z, &ctx).map(|(_, s)| {
                (0..d)
                    .map(|i| (jac[(i, i)] - 1.0 / (1.0 + (-s[i]).exp())).abs())
                    .fold(0.0, f64::max)
            }));
        }
    }
    vec![conditioner.finish(), transform.finish(), diagonal.finish()]
}
