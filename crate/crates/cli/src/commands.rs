use std::path::Path;

use serde::Serialize;
use snf_core::amortize::{count_parameters, FlowFamily, Hypernetwork};
use snf_core::schema::{Checkpoint, ParamsFile};
use snf_core::suites::{self, Suite, SuiteConfig};
use snf_core::vi::{self, Estimate};

use crate::config::ExperimentConfig;
use crate::output::{prepare, refuse_existing, to_json, write_json, write_trace};
use crate::{CliError, EXIT_DIVERGENCE};

pub fn check(
    suite: Suite,
    seed: u64,
    dims: Vec<usize>,
    cases: usize,
    out: Option<&Path>,
    force: bool,
) -> Result<(), CliError> {
    if let Some(path) = out {
        refuse_existing(path, force)?;
    }
    let report = suites::run(suite, &SuiteConfig { seed, dims, cases }).map_err(CliError::from_core)?;
    match out {
        Some(path) => write_json(path, &report)?,
        None => print!("{}", to_json(&report)),
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::property(format!("failed checks: {}", failed.join(", "))))
    }
}

/// Writes the partial trace of a diverged run before reporting it.
fn handle_divergence(e: snf_core::Error, trace_path: &Path) -> CliError {
    if let snf_core::Error::Divergence { trace, .. } = &e {
        if let Err(w) = write_trace(trace_path, trace) {
            return CliError {
                code: EXIT_DIVERGENCE,
                message: format!("{e} (and {})", w.message),
            };
        }
    }
    CliError::from_core(e)
}

#[derive(Serialize)]
struct FitSummary {
    #[serde(rename = "final_F")]
    final_f: f64,
    standard_error: f64,
    samples: usize,
    epochs: usize,
}

pub fn fit_target(config: &Path, out: &Path, seed: Option<u64>, force: bool) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if cfg.vae.is_some() {
        return Err(CliError::config("the vae section is only used by train-vae"));
    }
    if cfg.e.is_some_and(|e| e != 1) {
        return Err(CliError::config("fit-target always uses a single constant feature; drop E"));
    }
    let target = cfg
        .target
        .as_ref()
        .ok_or_else(|| CliError::config("fit-target needs a target"))?
        .build()
        .map_err(CliError::from_core)?;
    let training = cfg.training()?;
    let amortization = cfg.amortization(1)?;
    let paths = prepare(out, &["trace.csv", "params.json", "checkpoint.json"], force)?;

    let result = vi::fit_target(&training, &target, amortization)
        .map_err(|e| handle_divergence(e, &paths[0]))?;
    write_trace(&paths[0], &result.trace)?;
    let posterior = result.posterior().map_err(CliError::from_core)?;
    let params = ParamsFile::from_posterior(cfg.variant, &posterior).map_err(CliError::from_core)?;
    write_json(&paths[1], &params)?;
    write_json(&paths[2], &Checkpoint::from_hypernetwork(&result.model))?;
    print!(
        "{}",
        to_json(&FitSummary {
            final_f: result.final_f.mean,
            standard_error: result.final_f.std_error,
            samples: result.final_f.samples,
            epochs: result.trace.len(),
        })
    );
    Ok(())
}

#[derive(Serialize)]
struct NllReport {
    #[serde(rename = "S")]
    importance_samples: usize,
    estimate: f64,
    standard_error: f64,
    images: usize,
    neg_elbo: f64,
    neg_elbo_standard_error: f64,
}

impl NllReport {
    fn new(s: usize, nll: &Estimate, neg_elbo: &Estimate) -> Self {
        NllReport {
            importance_samples: s,
            estimate: nll.mean,
            standard_error: nll.std_error,
            images: nll.samples,
            neg_elbo: neg_elbo.mean,
            neg_elbo_standard_error: neg_elbo.std_error,
        }
    }
}

pub fn train_vae(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    importance_samples: Option<usize>,
    force: bool,
) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = importance_samples {
        cfg.importance_samples = Some(s);
    }
    if cfg.target.is_some() {
        return Err(CliError::config("the target section is only used by fit-target"));
    }
    let training = cfg.training()?;
    let amortization = cfg.amortization(cfg.feature_dim()?)?;
    let vae = cfg.vae.unwrap_or_default();
    vae.validate().map_err(CliError::from_core)?;
    let paths = prepare(out, &["trace.csv", "checkpoint.json", "nll.json"], force)?;

    let result = vi::train_toy_vae(&training, &vae, amortization)
        .map_err(|e| handle_divergence(e, &paths[0]))?;
    write_trace(&paths[0], &result.trace)?;
    write_json(&paths[1], &Checkpoint::from_vae(&result.model, vae))?;
    let report = NllReport::new(training.importance_samples, &result.nll, &result.neg_elbo);
    write_json(&paths[2], &report)?;
    print!("{}", to_json(&report));
    Ok(())
}

pub fn params(config: &Path) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let e = cfg.feature_dim()?;
    println!(
        "{:<12} {:>14} {:>14} {:>6} {:>12} {:>12}",
        "variant", "formula", "enumerated", "match", "flow_biases", "base"
    );
    let mut mismatches = Vec::new();
    for family in FlowFamily::ALL {
        let variant = ExperimentConfig {
            variant: family,
            ..cfg.clone()
        };
        let amortization = match variant.amortization(e) {
            Ok(a) => a,
            Err(err) => {
                println!("{:<12} skipped: {}", family.name(), err.message);
                continue;
            }
        };
        let formula = count_parameters(&amortization);
        let enumerated = Hypernetwork::zeros(amortization)
            .map_err(CliError::from_core)?
            .enumerate_parameters();
        let ok = formula.flow_weights == enumerated.flow_weights;
        if !ok {
            mismatches.push(family.name());
        }
        println!(
            "{:<12} {:>14} {:>14} {:>6} {:>12} {:>12}",
            family.name(),
            formula.flow_weights,
            enumerated.flow_weights,
            if ok { "yes" } else { "NO" },
            enumerated.flow_biases,
            enumerated.base_weights + enumerated.base_biases,
        );
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(CliError::property(format!(
            "formula and enumeration disagree for {}",
            mismatches.join(", ")
        )))
    }
}
