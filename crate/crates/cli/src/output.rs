//! Output files: overwrite protection, CSV traces and JSON documents.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use snf_core::vi::TraceRow;

use crate::CliError;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::config(format!("cannot write {}: {e}", path.display()))
}

/// Creates `dir` and returns the paths of `files` inside it, refusing to
/// replace any of them unless `force` is set.
pub fn prepare(dir: &Path, files: &[&str], force: bool) -> Result<Vec<PathBuf>, CliError> {
    let paths: Vec<PathBuf> = files.iter().map(|f| dir.join(f)).collect();
    if !force {
        if let Some(existing) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::config(format!(
                "{} already exists; pass --force to overwrite",
                existing.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    Ok(paths)
}

pub fn refuse_existing(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::config(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct CsvRow {
    epoch: usize,
    beta: f64,
    #[serde(rename = "train_F")]
    train_f: f64,
    #[serde(rename = "val_F")]
    val_f: f64,
    wallclock: f64,
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for r in trace {
        w.serialize(CsvRow {
            epoch: r.epoch,
            beta: r.beta,
            train_f: r.train_f,
            val_f: r.val_f,
            wallclock: r.wallclock,
        })
        .map_err(|e| io_error(path, e))?;
    }
    if trace.is_empty() {
        w.write_record(["epoch", "beta", "train_F", "val_F", "wallclock"])
            .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, to_json(value)).map_err(|e| io_error(path, e))
}
