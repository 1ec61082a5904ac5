use std::time::Instant;

use super::config::{TraceRow, TrainingConfig, EVAL_STREAM, FINAL_STREAM};
use super::gaussian::standard_noise;
use super::objective::{free_energy, free_energy_terms, Estimate};
use super::optim::Adam;
use super::target::LogDensity;
use crate::amortize::{AmortizationConfig, Hypernetwork, Posterior};
use crate::diffcore::{gradients, unflatten, Objective, Params, Real};
use crate::error::{Error, Result};
use crate::seeded_rng;


/// Free energy of the posterior produced from the constant feature `[1]`,
/// at fixed noise.
pub struct TargetObjective<'a, L> {
    pub target: &'a L,
    pub noise: Vec<Vec<f64>>,
}

impl<L: LogDensity> Objective<Hypernetwork> for TargetObjective<'_, L> {
    fn evaluate<T: Real>(&self, h: &Hypernetwork<T>) -> Result<T> {
        let post = h.amortize(&[T::constant(1.0)])?;
        free_energy(&post.base, &post.flows, self.target, &self.noise)
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub trace: Vec<TraceRow>,
    /// Free energy on fresh draws after the last epoch.
    pub final_f: Estimate,
    pub model: Hypernetwork,
}

impl FitResult {
    pub fn posterior(&self) -> Result<Posterior> {
        self.model.amortize(&[1.0])
    }
}

/// Fits a posterior to `target` by minimizing the free energy with Adam.
///
/// Without data there is nothing to amortize over, so the hypernetwork sees
/// the single feature `1` and `amortization.feature_dim` is forced to 1.
pub fn fit_target<L: LogDensity>(
    cfg: &TrainingConfig,
    target: &L,
    amortization: AmortizationConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let amortization = AmortizationConfig {
        feature_dim: 1,
        ..amortization
    };
    if amortization.latent_dim != target.dim() {
        return Err(Error::Config(format!(
            "latent dimension {} does not match the target dimension {}",
            amortization.latent_dim,
            target.dim()
        )));
    }
    let d = target.dim();
    let mut rng = seeded_rng(cfg.seed);
    let mut model = Hypernetwork::new(amortization, &mut rng)?;
    let mut flat = model.flatten();
    let mut adam = Adam::new(cfg.learning_rate, flat.len());
    let draw = |n: usize, rng: &mut crate::Rng| -> Vec<Vec<f64>> {
        (0..n).map(|_| standard_noise(d, rng)).collect()
    };
    let eval_noise = draw(cfg.eval_samples, &mut seeded_rng(cfg.seed ^ EVAL_STREAM));

    let start = Instant::now();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut train = 0.0;
        for _ in 0..cfg.steps_per_epoch {
            let objective = TargetObjective {
                target,
                noise: draw(cfg.batch_size, &mut rng),
            };
            let g = gradients(&objective, &model)
                .map_err(|e| diverged(epoch, e.to_string(), &trace))?;
            adam.step(&mut flat, &g.flat());
            model = unflatten(&model, &flat);
            train += g.value;
        }
        let val = evaluate(&model, target, &eval_noise)
            .map_err(|e| diverged(epoch, e.to_string(), &trace))?;
        trace.push(TraceRow {
            epoch,
            beta: 1.0,
            train_f: train / cfg.steps_per_epoch as f64,
            val_f: val.mean,
            wallclock: start.elapsed().as_secs_f64(),
        });
        if !val.mean.is_finite() {
            return Err(diverged(epoch, format!("free energy {}", val.mean), &trace));
        }
    }
    let final_noise = draw(cfg.eval_samples, &mut seeded_rng(cfg.seed ^ FINAL_STREAM));
    let final_f = evaluate(&model, target, &final_noise)?;
    Ok(FitResult {
        trace,
        final_f,
        model,
    })
}

fn evaluate<L: LogDensity>(
    model: &Hypernetwork,
    target: &L,
    noise: &[Vec<f64>],
) -> Result<Estimate> {
    let post = model.amortize(&[1.0])?;
    let terms = free_energy_terms(&post.base, &post.flows, target, noise)?;
    Ok(Estimate::from_samples(&terms))
}

pub(crate) fn diverged(epoch: usize, reason: String, trace: &[TraceRow]) -> Error {
    Error::Divergence {
        epoch,
        reason,
        trace: trace.to_vec(),
    }
}
