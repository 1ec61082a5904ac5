//! A tiny variational autoencoder on synthetic 8×8 bar images.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::{TraceRow, TrainingConfig, DATA_STREAM, EVAL_STREAM, NLL_STREAM};
use super::fit::diverged;
use super::gaussian::{log_q_k, standard_noise};
use super::objective::{
    anneal_beta, annealed_term, estimate_nll, standard_normal_log_density, Estimate,
};
use super::optim::Adam;
use crate::amortize::{AmortizationConfig, Hypernetwork};
use crate::diffcore::{gradients, join, unflatten, Objective, Params, Real};
use crate::error::{Error, Result};
use crate::linalg::Affine;
use crate::seeded_rng;

pub const SIDE: usize = 8;
pub const PIXELS: usize = SIDE * SIDE;

const ON: f64 = 0.9;
const OFF: f64 = 0.05;

/// Pixel-on probabilities of bar images; binary samples are redrawn on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct BarsDataset {
    probs: Vec<Vec<f64>>,
}

impl BarsDataset {
    /// Each image picks an orientation and switches on every bar with
    /// probability ¼ (at least one).
    pub fn generate(n: usize, rng: &mut crate::Rng) -> Self {
        let probs = (0..n)
            .map(|_| {
                let horizontal = rng.random_bool(0.5);
                let mut bars: Vec<bool> = (0..SIDE).map(|_| rng.random_bool(0.25)).collect();
                if !bars.iter().any(|&b| b) {
                    bars[rng.random_range(0..SIDE)] = true;
                }
                (0..PIXELS)
                    .map(|p| {
                        let (row, col) = (p / SIDE, p % SIDE);
                        let bar = if horizontal { row } else { col };
                        if bars[bar] {
                            ON
                        } else {
                            OFF
                        }
                    })
                    .collect()
            })
            .collect();
        BarsDataset { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// One Bernoulli draw per pixel.
    pub fn binarize(&self, rng: &mut crate::Rng) -> Vec<Vec<f64>> {
        self.probs
            .iter()
            .map(|img| {
                img.iter()
                    .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }
}

/// `(W x + b) ⊙ σ(V x + c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedDense<T = f64> {
    linear: Affine<T>,
    gate: Affine<T>,
}

impl<T: Real> GatedDense<T> {
    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let a = self.linear.forward(x);
        let g = self.gate.forward(x);
        a.into_iter().zip(g).map(|(a, g)| a * g.sigmoid()).collect()
    }
}

impl GatedDense<f64> {
    fn random(outputs: usize, inputs: usize, rng: &mut crate::Rng) -> Self {
        let std = (1.0 / inputs as f64).sqrt();
        GatedDense {
            linear: Affine::random(outputs, inputs, std, rng),
            gate: Affine::random(outputs, inputs, std, rng),
        }
    }
}

impl<T: Real> Params<T> for GatedDense<T> {
    type With<U: Real> = GatedDense<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        self.linear.visit(&join(prefix, "linear"), f);
        self.gate.visit(&join(prefix, "gate"), f);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> GatedDense<U> {
        let linear = self.linear.map(f);
        let gate = self.gate.map(f);
        GatedDense { linear, gate }
    }
}

/// Sizes of the networks around the amortized posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeConfig {
    #[serde(default = "default_hidden_units")]
    pub hidden_units: usize,
    #[serde(default = "default_train_size")]
    pub train_size: usize,
    #[serde(default = "default_validation_size")]
    pub validation_size: usize,
    /// Draws per validation image in each −ELBO evaluation.
    #[serde(default = "default_elbo_samples")]
    pub elbo_samples: usize,
}

fn default_hidden_units() -> usize {
    32
}

fn default_train_size() -> usize {
    512
}

fn default_validation_size() -> usize {
    128
}

fn default_elbo_samples() -> usize {
    10
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            hidden_units: default_hidden_units(),
            train_size: default_train_size(),
            validation_size: default_validation_size(),
            elbo_samples: default_elbo_samples(),
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 || self.train_size == 0 || self.validation_size == 0 {
            return Err(Error::Config(
                "VAE sizes and dataset must be nonempty".into(),
            ));
        }
        if self.elbo_samples == 0 {
            return Err(Error::Config("elbo_samples must be positive".into()));
        }
        Ok(())
    }
}

/// Encoder, hypernetwork and Bernoulli decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel<T = f64> {
    encoder: [GatedDense<T>; 2],
    hyper: Hypernetwork<T>,
    decoder_hidden: GatedDense<T>,
    decoder_out: Affine<T>,
}

impl VaeModel<f64> {
    pub fn new(
        vae: &VaeConfig,
        amortization: AmortizationConfig,
        rng: &mut crate::Rng,
    ) -> Result<Self> {
        vae.validate()?;
        let (h, e, d) = (
            vae.hidden_units,
            amortization.feature_dim,
            amortization.latent_dim,
        );
        let encoder = [
            GatedDense::random(h, PIXELS, rng),
            GatedDense::random(e, h, rng),
        ];
        let decoder_hidden = GatedDense::random(h, d, rng);
        let decoder_out = Affine::random(PIXELS, h, (1.0 / h as f64).sqrt(), rng);
        // Drawn last so that paired runs share the encoder and decoder.
        let hyper = Hypernetwork::new(amortization, rng)?;
        Ok(VaeModel {
            encoder,
            hyper,
            decoder_hidden,
            decoder_out,
        })
    }
}

impl<T: Real> VaeModel<T> {
    pub fn hypernetwork(&self) -> &Hypernetwork<T> {
        &self.hyper
    }

    pub fn features(&self, x: &[T]) -> Vec<T> {
        let h = self.encoder[0].forward(x);
        self.encoder[1].forward(&h)
    }

    pub fn logits(&self, z: &[T]) -> Vec<T> {
        self.decoder_out.forward(&self.decoder_hidden.forward(z))
    }

    /// `log p(x|z)` under independent Bernoulli pixels.
    pub fn log_likelihood(&self, x: &[f64], z: &[T]) -> T {
        let logits = self.logits(z);
        let xs: Vec<T> = x.iter().map(|&v| T::constant(v)).collect();
        let softplus: Vec<T> = logits.iter().map(|l| l.softplus()).collect();
        T::dot(&xs, &logits) - T::sum(&softplus)
    }

    /// Mean of `β(log q − log p(z)) − log p(x|z)` over the given draws.
    pub fn free_energy(&self, x: &[f64], noise: &[Vec<f64>], beta: f64) -> Result<T> {
        let xs: Vec<T> = x.iter().map(|&v| T::constant(v)).collect();
        let post = self.hyper.amortize(&self.features(&xs))?;
        let mut terms = Vec::with_capacity(noise.len());
        for eps in noise {
            let (z, log_q) = log_q_k(&post.base, &post.flows, eps)?;
            terms.push(annealed_term(log_q, &z, self.log_likelihood(x, &z), beta));
        }
        Ok(T::sum(&terms) * (1.0 / noise.len() as f64))
    }
}

impl VaeModel<f64> {
    /// Importance-sampled `−log p(x)`.
    pub fn nll(&self, x: &[f64], samples: usize, rng: &mut crate::Rng) -> Result<f64> {
        let post = self.hyper.amortize(&self.features(x))?;
        estimate_nll(
            &post.base,
            &post.flows,
            |z| self.log_likelihood(x, z) + standard_normal_log_density(z),
            samples,
            rng,
        )
    }

    /// `−ELBO` draws over a dataset at fixed noise (`noise[i]` belongs to `data[i]`).
    pub fn neg_elbo(&self, data: &[Vec<f64>], noise: &[Vec<Vec<f64>>]) -> Result<Estimate> {
        let mut draws = Vec::new();
        for (x, eps) in data.iter().zip(noise) {
            for e in eps {
                draws.push(self.free_energy(x, std::slice::from_ref(e), 1.0)?);
            }
        }
        Ok(Estimate::from_samples(&draws))
    }
}

impl<T: Real> Params<T> for VaeModel<T> {
    type With<U: Real> = VaeModel<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        self.encoder[0].visit(&join(prefix, "encoder0"), f);
        self.encoder[1].visit(&join(prefix, "encoder1"), f);
        self.hyper.visit(&join(prefix, "hyper"), f);
        self.decoder_hidden
            .visit(&join(prefix, "decoder_hidden"), f);
        self.decoder_out.visit(&join(prefix, "decoder_out"), f);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> VaeModel<U> {
        let e0 = self.encoder[0].map(f);
        let e1 = self.encoder[1].map(f);
        let hyper = self.hyper.map(f);
        let decoder_hidden = self.decoder_hidden.map(f);
        let decoder_out = self.decoder_out.map(f);
        VaeModel {
            encoder: [e0, e1],
            hyper,
            decoder_hidden,
            decoder_out,
        }
    }
}

/// Mean annealed free energy over a minibatch at fixed noise.
pub struct VaeObjective<'a> {
    pub batch: Vec<&'a [f64]>,
    /// One set of draws per batch element.
    pub noise: Vec<Vec<Vec<f64>>>,
    pub beta: f64,
}

impl Objective<VaeModel> for VaeObjective<'_> {
    fn evaluate<T: Real>(&self, model: &VaeModel<T>) -> Result<T> {
        let mut terms = Vec::with_capacity(self.batch.len());
        for (x, eps) in self.batch.iter().zip(&self.noise) {
            terms.push(model.free_energy(x, eps, self.beta)?);
        }
        Ok(T::sum(&terms) * (1.0 / self.batch.len() as f64))
    }
}

/// Data and fixed validation noise derived from the training seed.
#[derive(Debug, Clone)]
pub struct VaeData {
    pub train: BarsDataset,
    pub validation: Vec<Vec<f64>>,
    pub validation_noise: Vec<Vec<Vec<f64>>>,
}

impl VaeData {
    pub fn new(vae: &VaeConfig, latent_dim: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed ^ DATA_STREAM);
        let train = BarsDataset::generate(vae.train_size, &mut rng);
        let validation = BarsDataset::generate(vae.validation_size, &mut rng).binarize(&mut rng);
        let mut rng = seeded_rng(seed ^ EVAL_STREAM);
        let validation_noise = (0..vae.validation_size)
            .map(|_| {
                (0..vae.elbo_samples)
                    .map(|_| standard_noise(latent_dim, &mut rng))
                    .collect()
            })
            .collect();
        VaeData {
            train,
            validation,
            validation_noise,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VaeResult {
    pub trace: Vec<TraceRow>,
    pub neg_elbo: Estimate,
    /// Importance-sampled NLL averaged over the validation images.
    pub nll: Estimate,
    pub model: VaeModel,
}

/// Trains encoder, hypernetwork, flows and decoder jointly with KL annealing.
pub fn train_toy_vae(
    cfg: &TrainingConfig,
    vae: &VaeConfig,
    amortization: AmortizationConfig,
) -> Result<VaeResult> {
    cfg.validate()?;
    vae.validate()?;
    let data = VaeData::new(vae, amortization.latent_dim, cfg.seed);
    let mut rng = seeded_rng(cfg.seed);
    let mut model = VaeModel::new(vae, amortization, &mut rng)?;
    let mut flat = model.flatten();
    let mut adam = Adam::new(cfg.learning_rate, flat.len());
    let d = amortization.latent_dim;

    let start = Instant::now();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 0..cfg.epochs {
        let beta = anneal_beta(epoch, cfg.anneal_epochs);
        let images = data.train.binarize(&mut rng);
        order.shuffle(&mut rng);
        let (mut total, mut batches) = (0.0, 0);
        for chunk in order.chunks(cfg.batch_size) {
            let objective = VaeObjective {
                batch: chunk.iter().map(|&i| images[i].as_slice()).collect(),
                noise: chunk
                    .iter()
                    .map(|_| vec![standard_noise(d, &mut rng)])
                    .collect(),
                beta,
            };
            let g = gradients(&objective, &model)
                .map_err(|e| diverged(epoch, e.to_string(), &trace))?;
            adam.step(&mut flat, &g.flat());
            model = unflatten(&model, &flat);
            total += g.value;
            batches += 1;
        }
        let val = model
            .neg_elbo(&data.validation, &data.validation_noise)
            .map_err(|e| diverged(epoch, e.to_string(), &trace))?;
        trace.push(TraceRow {
            epoch,
            beta,
            train_f: total / batches as f64,
            val_f: val.mean,
            wallclock: start.elapsed().as_secs_f64(),
        });
        if !val.mean.is_finite() {
            return Err(diverged(
                epoch,
                format!("validation −ELBO {}", val.mean),
                &trace,
            ));
        }
    }

    let neg_elbo = model.neg_elbo(&data.validation, &data.validation_noise)?;
    let nll = validation_nll(&model, &data, cfg.importance_samples, cfg.seed)?;
    Ok(VaeResult {
        trace,
        neg_elbo,
        nll,
        model,
    })
}

/// Importance-sampled NLL of every validation image, summarized.
pub fn validation_nll(
    model: &VaeModel,
    data: &VaeData,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let mut rng = seeded_rng(seed ^ NLL_STREAM);
    let per_image = data
        .validation
        .iter()
        .map(|x| model.nll(x, samples, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_samples(&per_image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amortize::FlowFamily;

    #[test]
    fn bars_are_axis_aligned() {
        let ds = BarsDataset::generate(50, &mut seeded_rng(1));
        for img in ds.probs() {
            let on: Vec<usize> = (0..PIXELS).filter(|&p| img[p] == ON).collect();
            assert!(!on.is_empty());
            let rows_full = (0..SIDE).all(|r| {
                let cnt = (0..SIDE).filter(|&c| img[r * SIDE + c] == ON).count();
                cnt == 0 || cnt == SIDE
            });
            let cols_full = (0..SIDE).all(|c| {
                let cnt = (0..SIDE).filter(|&r| img[r * SIDE + c] == ON).count();
                cnt == 0 || cnt == SIDE
            });
            assert!(rows_full || cols_full);
        }
    }

    #[test]
    fn beta_zero_leaves_only_reconstruction() {
        let amort = AmortizationConfig::new(FlowFamily::Triangular, 4, 2, 1);
        let model = VaeModel::new(&VaeConfig::default(), amort, &mut seeded_rng(2)).unwrap();
        let x =
            BarsDataset::generate(1, &mut seeded_rng(3)).binarize(&mut seeded_rng(4))[0].clone();
        let eps = vec![vec![0.3, -0.2]];
        let f = model.free_energy(&x, &eps, 0.0).unwrap();
        let post = model.hyper.amortize(&model.features(&x)).unwrap();
        let (z, _) = log_q_k(&post.base, &post.flows, &eps[0]).unwrap();
        assert!((f + model.log_likelihood(&x, &z)).abs() < 1e-12);
    }

    #[test]
    fn short_run_is_deterministic_and_bounds_are_ordered() {
        let mut cfg = TrainingConfig::new(2, 5);
        cfg.importance_samples = 200;
        let vae = VaeConfig {
            train_size: 64,
            validation_size: 16,
            ..VaeConfig::default()
        };
        let amort = AmortizationConfig::new(FlowFamily::Planar, 8, 2, 2);
        let a = train_toy_vae(&cfg, &vae, amort).unwrap();
        let b = train_toy_vae(&cfg, &vae, amort).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.trace.len(), 2);
        assert_eq!(a.trace[0].beta, 0.0);
        assert!(a.nll.mean <= a.neg_elbo.mean + 2.0 * a.neg_elbo.std_error);
    }
}
