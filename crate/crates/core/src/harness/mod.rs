//! Experiment driver: configured studies writing `report.json`, `meta.json`,
//! CSV tables and SVG charts.

pub mod config;
pub mod plot;
pub mod presets;
pub mod report;
pub mod studies;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub use config::{Resolved, StudyConfig, StudyKind};
pub use report::{Comparison, MetricTable, Provenance, StudyReport, Verdict};
pub use studies::{run_study, StudyOutput};

use crate::error::Result;

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A finished study: the report plus the files to write next to it.
#[derive(Debug, Clone)]
pub struct StudyRun {
    pub report: StudyReport,
    pub files: Vec<(String, Vec<u8>)>,
    pub elapsed_seconds: f64,
}

/// Applies overrides, resolves defaults and runs the study.
pub fn execute(config: &StudyConfig, overrides: &Overrides) -> Result<StudyRun> {
    let mut config = config.clone();
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    let resolved = config.resolve()?;
    let started = Instant::now();
    let output = run_study(&resolved)?;
    let json = serde_json::to_string(&config)?;
    let report = StudyReport {
        schema: report::SCHEMA,
        study: resolved.study.name().to_string(),
        provenance: Provenance::new(&json, resolved.seed),
        metrics: output.metrics,
        values: output.values,
        verdicts: output.verdicts,
    };
    Ok(StudyRun {
        report,
        files: output.files,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Serialize)]
struct Meta<'a> {
    study: &'a str,
    started_unix_seconds: u64,
    elapsed_seconds: f64,
    threads: usize,
    config_sha256: &'a str,
}

/// Output directory: the override, else the config's `output`, else `out/<study>`.
pub fn output_dir(config: &StudyConfig, overrides: &Overrides) -> PathBuf {
    overrides
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| Path::new("out").join(config.study.name()))
}

/// Writes `report.json`, `meta.json` and the study's files into `dir`.
pub fn write_outputs(run: &StudyRun, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), run.report.to_json())?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
        .saturating_sub(run.elapsed_seconds as u64);
    let meta = Meta {
        study: &run.report.study,
        started_unix_seconds: started,
        elapsed_seconds: run.elapsed_seconds,
        threads: rayon::current_num_threads(),
        config_sha256: &run.report.provenance.config_sha256,
    };
    std::fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    for (name, bytes) in &run.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}
