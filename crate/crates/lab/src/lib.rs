//! Experiment runner for the `quasiloc` library: configuration, dispatch,
//! report records with a content-addressed cache, CSV/JSON/SVG output, and
//! the acceptance suite.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod report;
pub mod suite;

use std::path::Path;

pub use config::{Experiment, ExperimentConfig};
pub use error::{LabError, LabResult};
pub use report::{Cache, ReportRecord};

use report::{atomic_write, sha256_hex, Artifact};

/// Hex SHA-256 of the canonical config.
pub fn config_hash(cfg: &ExperimentConfig) -> LabResult<String> {
    Ok(sha256_hex(cfg.canonical_json()?.as_bytes()))
}

fn write_outputs(dir: &Path, record: &ReportRecord, artifacts: &[Artifact]) -> LabResult<()> {
    for (name, bytes) in artifacts {
        atomic_write(&dir.join(name), bytes)?;
    }
    atomic_write(&dir.join("record.json"), record.to_json().as_bytes())
}

/// Runs the configured experiment, writing its artifacts and `record.json`
/// to the output directory. With a cache, a stored run under the same config
/// hash is restored instead of recomputed.
pub fn run(cfg: &ExperimentConfig, cache: Option<&Cache>) -> LabResult<ReportRecord> {
    let exp = cfg.experiment.ok_or_else(|| LabError::Usage("no experiment named in the config".into()))?;
    cfg.validate()?;
    let hash = config_hash(cfg)?;
    if let Some((record, artifacts)) = cache.and_then(|c| c.load_run(&hash)) {
        write_outputs(&cfg.output_dir, &record, &artifacts)?;
        return Ok(record);
    }
    let outcome = experiments::dispatch(exp, cfg, cache)?;
    let mut artifacts = outcome.artifacts;
    for (name, bytes) in &artifacts {
        atomic_write(&cfg.output_dir.join(name), bytes)?;
    }
    for (csv_name, kind) in &outcome.plots {
        let svg = plot::emit_plot(&cfg.output_dir.join(csv_name), *kind)?;
        let bytes = std::fs::read(&svg).map_err(|e| LabError::io(&svg, e))?;
        let name = svg.file_name().expect("svg name").to_string_lossy().into_owned();
        artifacts.push((name, bytes));
    }
    let record = ReportRecord {
        experiment_id: format!("{}-{}", exp.name(), &hash[..12]),
        timestamp: report::timestamp(),
        config_hash: hash,
        passed: outcome.passed,
        results: outcome.results,
        notes: outcome.notes,
        artifacts: artifacts.iter().map(|a| a.0.clone()).collect(),
    };
    write_outputs(&cfg.output_dir, &record, &artifacts)?;
    if let Some(c) = cache {
        c.store_run(&record, &artifacts)?;
    }
    Ok(record)
}
