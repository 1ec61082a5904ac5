//! Variational inference: base Gaussian, flow log-densities, free energy,
//! importance-sampled likelihoods and two small trainers.

mod config;
mod fit;
mod gaussian;
mod objective;
mod optim;
mod target;
mod vae;

pub use config::{
    TraceRow, TrainingConfig, DATA_STREAM, EVAL_STREAM, FINAL_STREAM, NLL_STREAM,
};
pub use fit::{fit_target, FitResult, TargetObjective};
pub use gaussian::{log_q_k, standard_noise, DiagGaussian, HALF_LN_2PI};
pub use objective::{
    anneal_beta, annealed_term, estimate_free_energy, estimate_nll, free_energy, free_energy_terms,
    log_sum_exp, standard_normal_log_density, Estimate,
};
pub use optim::Adam;
pub use target::{GaussianTarget, LogDensity, TargetSpec};
pub use vae::{
    train_toy_vae, validation_nll, BarsDataset, GatedDense, VaeConfig, VaeData, VaeModel,
    VaeObjective, VaeResult, PIXELS,
};
