//! Report and grid writers. Reports are deterministic for a fixed seed and
//! flag set except for the single `timestamp` key.

use std::path::Path;

use opinfer::benchmarks::GridData;
use opinfer::error::{Error, Result};
use opinfer::gapgene::{Gene, GeneFit};
use serde::Serialize;

fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_json(dir: &Path, value: serde_json::Value) -> Result<()> {
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::Numerical(format!("report serialization: {e}")))?;
    std::fs::write(&path, text + "\n")?;
    Ok(())
}

/// Serializes the report, adding the run's restart count and the timestamp
/// (the one key allowed to differ between identical runs).
pub fn write_report<T: Serialize>(dir: &Path, report: &T, restarts: usize) -> Result<()> {
    let mut value = serde_json::to_value(report)
        .map_err(|e| Error::Numerical(format!("report serialization: {e}")))?;
    let map = value
        .as_object_mut()
        .expect("reports serialize to JSON objects");
    map.insert("restarts".into(), restarts.into());
    map.insert("timestamp".into(), unix_timestamp().into());
    write_json(dir, value)
}

pub fn write_grid(dir: &Path, grid: &GridData) -> Result<()> {
    let mut file = std::fs::File::create(dir.join("grid.csv"))?;
    grid.write_csv(&mut file)
}

#[derive(Serialize)]
struct GapgeneDoc {
    gene: String,
    lambda: f64,
    diff: f64,
    nlml: f64,
    n_u: usize,
    n_f: usize,
    dropped_f_points: usize,
    kernel_variance: f64,
    kernel_weights: Vec<f64>,
    noise_u: f64,
    noise_f: f64,
}

pub fn write_gapgene_report(dir: &Path, gene: Gene, fit: &GeneFit) -> Result<()> {
    let params = fit.model.params();
    let doc = GapgeneDoc {
        gene: gene.to_string(),
        lambda: fit.lambda,
        diff: fit.diffusion,
        nlml: fit.model.nlml(),
        n_u: fit.model.data().n_u(),
        n_f: fit.model.data().n_f(),
        dropped_f_points: fit.dropped_f_points,
        kernel_variance: params.kernel.variance(),
        kernel_weights: params.kernel.weights().to_vec(),
        noise_u: params.noise_u,
        noise_f: params.noise_f,
    };
    let mut value = serde_json::to_value(&doc)
        .map_err(|e| Error::Numerical(format!("report serialization: {e}")))?;
    value
        .as_object_mut()
        .unwrap()
        .insert("timestamp".into(), unix_timestamp().into());
    write_json(dir, value)
}
