//! Amortized posteriors: affine heads map an encoder feature vector to the
//! base Gaussian and to every flow parameter, followed by the projections
//! that make the raw outputs valid.
//!
//! IAF is the exception: its MADE weights are shared across inputs and only
//! a context vector depends on the features.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffcore::{join, Params, Real};
use crate::error::{Error, Result};
use crate::flows::{
    Activation, Flow, FlowStack, MadeParams, OrthogonalFactor, PermutationOrder, PlanarParams,
    SylvesterParams,
};
use crate::linalg::{bjorck_orthogonalize, Affine, BjorckSettings, HouseholderChain, Matrix};
use crate::vi::DiagGaussian;

/// Initial standard deviation of every head weight.
pub const INIT_STD: f64 = 0.01;

/// Initial bias of the IAF gate `s`, which starts the gate mostly open.
pub const IAF_GATE_BIAS: f64 = 3.0;

/// Largest Frobenius norm of the perturbation added to `E_{D×M}` before
/// Björck; `2·0.4 + 0.4² < 0.99` bounds `‖Q₀ᵀQ₀ − I‖₂`.
pub const Q_SEED_RADIUS: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowFamily {
    Planar,
    #[serde(alias = "o-snf")]
    Orthogonal,
    #[serde(alias = "h-snf")]
    Householder,
    #[serde(alias = "t-snf")]
    Triangular,
    Iaf,
}

impl FlowFamily {
    pub const ALL: [FlowFamily; 5] = [
        FlowFamily::Planar,
        FlowFamily::Orthogonal,
        FlowFamily::Householder,
        FlowFamily::Triangular,
        FlowFamily::Iaf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FlowFamily::Planar => "planar",
            FlowFamily::Orthogonal => "orthogonal",
            FlowFamily::Householder => "householder",
            FlowFamily::Triangular => "triangular",
            FlowFamily::Iaf => "iaf",
        }
    }
}

impl fmt::Display for FlowFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FlowFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "planar" => FlowFamily::Planar,
            "orthogonal" | "o-snf" => FlowFamily::Orthogonal,
            "householder" | "h-snf" => FlowFamily::Householder,
            "triangular" | "t-snf" => FlowFamily::Triangular,
            "iaf" => FlowFamily::Iaf,
            other => return Err(Error::Config(format!("unknown flow family {other:?}"))),
        })
    }
}

/// Sizes of the amortized posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmortizationConfig {
    pub family: FlowFamily,
    /// E
    pub feature_dim: usize,
    /// D
    pub latent_dim: usize,
    /// K
    pub num_flows: usize,
    /// M, orthogonal family only.
    pub bottleneck: usize,
    /// H, Householder family only.
    pub reflections: usize,
    /// C, IAF only.
    pub made_width: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub bjorck: BjorckSettings,
}

impl AmortizationConfig {
    /// Defaults: `M = D`, `H = D`, `C = 2D`.
    pub fn new(
        family: FlowFamily,
        feature_dim: usize,
        latent_dim: usize,
        num_flows: usize,
    ) -> Self {
        AmortizationConfig {
            family,
            feature_dim,
            latent_dim,
            num_flows,
            bottleneck: latent_dim,
            reflections: latent_dim,
            made_width: 2 * latent_dim,
            activation: Activation::Tanh,
            bjorck: BjorckSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.feature_dim == 0 || self.latent_dim == 0 {
            return bad("feature and latent dimensions must be positive".into());
        }
        match self.family {
            FlowFamily::Orthogonal if self.bottleneck == 0 || self.bottleneck > self.latent_dim => {
                bad(format!(
                    "bottleneck M = {} must lie in 1..={}",
                    self.bottleneck, self.latent_dim
                ))
            }
            FlowFamily::Householder if self.reflections == 0 => {
                bad("at least one Householder reflection is needed".into())
            }
            FlowFamily::Iaf if self.made_width < self.latent_dim => bad(format!(
                "MADE width C = {} is below D = {}",
                self.made_width, self.latent_dim
            )),
            _ => Ok(()),
        }
    }

    /// Columns of `Q` (and size of `R`, `R̃`) for the Sylvester families.
    pub fn sylvester_width(&self) -> usize {
        match self.family {
            FlowFamily::Orthogonal => self.bottleneck,
            _ => self.latent_dim,
        }
    }
}

/// Affine heads of one flow.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowHeads<T = f64> {
    Planar {
        u: Affine<T>,
        w: Affine<T>,
        b: Affine<T>,
    },
    Sylvester {
        /// Raw `Q` seed (D·M outputs) or the H Householder vectors (H·D outputs);
        /// absent for the triangular family.
        q: Option<Affine<T>>,
        r: Affine<T>,
        r_tilde: Affine<T>,
        b: Affine<T>,
    },
}

impl<T: Real> Params<T> for FlowHeads<T> {
    type With<U: Real> = FlowHeads<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        match self {
            FlowHeads::Planar { u, w, b } => {
                u.visit(&join(prefix, "u"), f);
                w.visit(&join(prefix, "w"), f);
                b.visit(&join(prefix, "b"), f);
            }
            FlowHeads::Sylvester { q, r, r_tilde, b } => {
                if let Some(q) = q {
                    q.visit(&join(prefix, "q"), f);
                }
                r.visit(&join(prefix, "r"), f);
                r_tilde.visit(&join(prefix, "r_tilde"), f);
                b.visit(&join(prefix, "b"), f);
            }
        }
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> FlowHeads<U> {
        match self {
            FlowHeads::Planar { u, w, b } => {
                let u = u.map(f);
                let w = w.map(f);
                let b = b.map(f);
                FlowHeads::Planar { u, w, b }
            }
            FlowHeads::Sylvester { q, r, r_tilde, b } => {
                let q = q.as_ref().map(|q| q.map(f));
                let r = r.map(f);
                let r_tilde = r_tilde.map(f);
                let b = b.map(f);
                FlowHeads::Sylvester { q, r, r_tilde, b }
            }
        }
    }
}

/// Maps features to a [`Posterior`].
#[derive(Debug, Clone, PartialEq)]
pub struct Hypernetwork<T = f64> {
    config: AmortizationConfig,
    mu: Affine<T>,
    log_sigma: Affine<T>,
    heads: Vec<FlowHeads<T>>,
    context: Option<Affine<T>>,
    made: Vec<MadeParams<T>>,
}

/// The base Gaussian and flows for one datapoint.
#[derive(Debug, Clone)]
pub struct Posterior<T = f64> {
    pub base: DiagGaussian<T>,
    pub flows: FlowStack<T>,
}

impl Hypernetwork<f64> {
    /// Head weights from `N(0, 0.01²)` and zero biases. MADE layers use
    /// [`MadeParams::initialized`] with the same output scale and gate bias 3.
    pub fn new(config: AmortizationConfig, rng: &mut crate::Rng) -> Result<Self> {
        Self::build(
            config,
            rng,
            |o, i, rng| Affine::random(o, i, INIT_STD, rng),
            |d, c, rng| MadeParams::initialized(d, c, INIT_STD, IAF_GATE_BIAS, rng),
        )
    }

    /// Every weight and bias zero.
    pub fn zeros(config: AmortizationConfig) -> Result<Self> {
        Self::build(
            config,
            &mut crate::seeded_rng(0),
            |o, i, _| Affine::zeros(o, i),
            |d, c, rng| MadeParams::random(d, c, 0.0, 0.0, rng),
        )
    }

    fn build(
        config: AmortizationConfig,
        rng: &mut crate::Rng,
        mut head: impl FnMut(usize, usize, &mut crate::Rng) -> Affine<f64>,
        mut made: impl FnMut(usize, usize, &mut crate::Rng) -> Result<MadeParams<f64>>,
    ) -> Result<Self> {
        config.validate()?;
        let (e, d, k) = (config.feature_dim, config.latent_dim, config.num_flows);
        let mu = head(d, e, rng);
        let log_sigma = head(d, e, rng);
        let mut heads = Vec::new();
        let mut context = None;
        let mut mades = Vec::new();
        match config.family {
            FlowFamily::Planar => {
                for _ in 0..k {
                    heads.push(FlowHeads::Planar {
                        u: head(d, e, rng),
                        w: head(d, e, rng),
                        b: head(1, e, rng),
                    });
                }
            }
            FlowFamily::Orthogonal | FlowFamily::Householder | FlowFamily::Triangular => {
                let m = config.sylvester_width();
                for _ in 0..k {
                    let q = match config.family {
                        FlowFamily::Orthogonal => Some(head(d * m, e, rng)),
                        FlowFamily::Householder => Some(head(config.reflections * d, e, rng)),
                        _ => None,
                    };
                    heads.push(FlowHeads::Sylvester {
                        q,
                        r: head(m * m, e, rng),
                        r_tilde: head(m * m, e, rng),
                        b: head(m, e, rng),
                    });
                }
            }
            FlowFamily::Iaf => {
                let c = config.made_width;
                if k > 0 {
                    context = Some(head(c, e, rng));
                }
                for _ in 0..k {
                    mades.push(made(d, c, rng)?);
                }
            }
        }
        Ok(Hypernetwork {
            config,
            mu,
            log_sigma,
            heads,
            context,
            made: mades,
        })
    }
}

impl<T: Real> Hypernetwork<T> {
    pub fn config(&self) -> &AmortizationConfig {
        &self.config
    }

    pub fn heads(&self) -> &[FlowHeads<T>] {
        &self.heads
    }

    pub fn made(&self) -> &[MadeParams<T>] {
        &self.made
    }

    /// Builds the posterior for one feature vector.
    pub fn amortize(&self, features: &[T]) -> Result<Posterior<T>> {
        let cfg = &self.config;
        if features.len() != cfg.feature_dim {
            return Err(Error::Dimension(format!(
                "hypernetwork expects {} features, got {}",
                cfg.feature_dim,
                features.len()
            )));
        }
        let (d, act) = (cfg.latent_dim, cfg.activation);
        let base = DiagGaussian::new(self.mu.forward(features), self.log_sigma.forward(features))?;
        let mut flows = Vec::with_capacity(cfg.num_flows);
        for (k, heads) in self.heads.iter().enumerate() {
            flows.push(match heads {
                FlowHeads::Planar { u, w, b } => {
                    let mut w = w.forward(features);
                    // Keeps w away from zero at initialization.
                    w[k % d] = w[k % d] + 1.0;
                    Flow::Planar(PlanarParams::from_raw(
                        &u.forward(features),
                        w,
                        b.forward(features)[0],
                    )?)
                }
                FlowHeads::Sylvester { q, r, r_tilde, b } => {
                    let m = cfg.sylvester_width();
                    let factor = match (cfg.family, q) {
                        (FlowFamily::Orthogonal, Some(q)) => {
                            let seed = orthogonal_seed(&q.forward(features), d, m)?;
                            OrthogonalFactor::Columns(bjorck_orthogonalize(&seed, cfg.bjorck)?)
                        }
                        (FlowFamily::Householder, Some(q)) => {
                            let raw = q.forward(features);
                            let vectors = raw
                                .chunks(d)
                                .enumerate()
                                .map(|(h, v)| {
                                    let mut v = v.to_vec();
                                    v[h % d] = v[h % d] + 1.0;
                                    v
                                })
                                .collect();
                            OrthogonalFactor::Householder(HouseholderChain::new(d, vectors)?)
                        }
                        _ => OrthogonalFactor::Permutation {
                            dim: d,
                            order: PermutationOrder::for_flow(k),
                        },
                    };
                    let r = Matrix::from_vec(m, m, r.forward(features))?;
                    let r_tilde = Matrix::from_vec(m, m, r_tilde.forward(features))?;
                    Flow::Sylvester(SylvesterParams::from_raw(
                        factor,
                        &r,
                        &r_tilde,
                        b.forward(features),
                        act,
                    )?)
                }
            });
        }
        if let Some(context) = &self.context {
            let h = context.forward(features);
            for (k, made) in self.made.iter().enumerate() {
                if k > 0 {
                    flows.push(Flow::Reverse { dim: d });
                }
                flows.push(Flow::Iaf {
                    made: made.clone(),
                    context: h.clone(),
                });
            }
        }
        Ok(Posterior {
            base,
            flows: FlowStack::new(d, flows, act)?,
        })
    }

    /// Sizes of the tensors actually held, split into weights and biases.
    pub fn enumerate_parameters(&self) -> ParameterCount {
        let mut count = ParameterCount::default();
        self.visit("", &mut |name, values| {
            let n = values.len() as u64;
            let base = name.starts_with("base_");
            let weight = name.ends_with(".weight");
            match (base, weight) {
                (true, true) => count.base_weights += n,
                (true, false) => count.base_biases += n,
                (false, true) => count.flow_weights += n,
                (false, false) => count.flow_biases += n,
            }
        });
        count
    }
}

/// `E_{D×M} + raw · min(1, r/‖raw‖_F)`, which keeps Björck's precondition.
fn orthogonal_seed<T: Real>(raw: &[T], d: usize, m: usize) -> Result<Matrix<T>> {
    let norm = raw
        .iter()
        .map(|x| x.value() * x.value())
        .sum::<f64>()
        .sqrt();
    let delta = Matrix::from_vec(d, m, raw.to_vec())?;
    let delta = if norm > Q_SEED_RADIUS {
        let n = T::dot(raw, raw).sqrt();
        delta.map_entries(|x| x * Q_SEED_RADIUS / n)
    } else {
        delta
    };
    Ok(Matrix::eye(d, m).add(&delta))
}

impl<T: Real> Params<T> for Hypernetwork<T> {
    type With<U: Real> = Hypernetwork<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        self.mu.visit(&join(prefix, "base_mu"), f);
        self.log_sigma.visit(&join(prefix, "base_log_sigma"), f);
        for (k, h) in self.heads.iter().enumerate() {
            h.visit(&join(prefix, &format!("flow{k}")), f);
        }
        if let Some(c) = &self.context {
            c.visit(&join(prefix, "context"), f);
        }
        for (k, m) in self.made.iter().enumerate() {
            m.visit(&join(prefix, &format!("made{k}")), f);
        }
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> Hypernetwork<U> {
        let mu = self.mu.map(f);
        let log_sigma = self.log_sigma.map(f);
        let heads = self.heads.iter().map(|h| h.map(f)).collect();
        let context = self.context.as_ref().map(|c| c.map(f));
        let made = self.made.iter().map(|m| m.map(f)).collect();
        Hypernetwork {
            config: self.config,
            mu,
            log_sigma,
            heads,
            context,
            made,
        }
    }
}

/// Parameter totals; only `flow_weights` is covered by the closed forms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterCount {
    pub flow_weights: u64,
    pub flow_biases: u64,
    pub base_weights: u64,
    pub base_biases: u64,
}

/// Closed-form counts for a configuration.
///
/// Flow weights: planar `2EDK + EK`, IAF `EC + K(C² + 3CD)`, orthogonal
/// `KE(MD + 2M² + M)`, Householder `KE(HD + 2D² + D)`, triangular `KE(2D² + D)`.
pub fn count_parameters(c: &AmortizationConfig) -> ParameterCount {
    let (e, d, k) = (
        c.feature_dim as u64,
        c.latent_dim as u64,
        c.num_flows as u64,
    );
    let (m, h, cw) = (
        c.bottleneck as u64,
        c.reflections as u64,
        c.made_width as u64,
    );
    let (flow_weights, flow_biases) = match c.family {
        FlowFamily::Planar => (2 * e * d * k + e * k, k * (2 * d + 1)),
        FlowFamily::Iaf => {
            let context = if k > 0 { e * cw } else { 0 };
            let context_bias = if k > 0 { cw } else { 0 };
            (
                context + k * (cw * cw + 3 * cw * d),
                context_bias + k * (2 * cw + 2 * d),
            )
        }
        FlowFamily::Orthogonal => (k * e * (m * d + 2 * m * m + m), k * (m * d + 2 * m * m + m)),
        FlowFamily::Householder => (k * e * (h * d + 2 * d * d + d), k * (h * d + 2 * d * d + d)),
        FlowFamily::Triangular => (k * e * (2 * d * d + d), k * (2 * d * d + d)),
    };
    ParameterCount {
        flow_weights,
        flow_biases,
        base_weights: 2 * e * d,
        base_biases: 2 * d,
    }
}
