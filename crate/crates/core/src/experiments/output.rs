use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::observables::ObservablesReport;
use super::operating_chars::OperatingCharsReport;
use super::phase_transition::PhaseTransitionReport;
use crate::error::Result;

pub enum Report {
    Observables(ObservablesReport),
    PhaseTransition(PhaseTransitionReport),
    OperatingChars(OperatingCharsReport),
}

/// Written next to the CSV files. `created_unix` is the only field that
/// differs between identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub created_unix: u64,
    pub package: String,
    pub version: String,
    pub parallel_feature: bool,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the report's CSV files and `<experiment>_manifest.json` into
/// `cfg.output`, creating the directory. Returns the paths written.
pub fn write_report(cfg: &ExperimentConfig, report: &Report, wall_time: Duration) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&cfg.output)?;
    let name = cfg.experiment.name();
    let file = |suffix: &str| cfg.output.join(format!("{name}{suffix}.csv"));
    let mut paths = Vec::new();
    match report {
        Report::Observables(r) => {
            paths.push(file(""));
            write_csv(&paths[0], &r.curves)?;
            paths.push(file("_instances"));
            write_csv(&paths[1], &r.per_instance)?;
        }
        Report::PhaseTransition(r) => {
            paths.push(file(""));
            write_csv(&paths[0], &r.cells)?;
            paths.push(file("_summary"));
            write_csv(&paths[1], &r.summary)?;
            paths.push(file("_instances"));
            write_csv(&paths[2], &r.per_instance)?;
        }
        Report::OperatingChars(r) => {
            paths.push(file(""));
            write_csv(&paths[0], &r.rows)?;
        }
    }
    let manifest = Manifest {
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        parallel_feature: cfg!(feature = "parallel"),
        wall_time_seconds: wall_time.as_secs_f64(),
        files: paths
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        config: cfg.clone(),
    };
    let mpath = cfg.output.join(format!("{name}_manifest.json"));
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
    paths.push(mpath);
    Ok(paths)
}
