//! JSON run configuration for `opinfer fit`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use opinfer::benchmarks::GridData;
use opinfer::dataset::JointDataset;
use opinfer::dsl::parse_operator;
use opinfer::error::{Error, Result};
use opinfer::gp::Target;
use opinfer::train::{fit, NoiseMode, Transform};

use crate::{train_config, Cli};

/// Run configuration: operator text, dimension names, data location, and
/// optional trainer/grid settings. CLI flags take precedence for seed,
/// restarts, iteration cap and tolerance.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub operator: String,
    pub dims: Vec<String>,
    pub data: PathBuf,
    #[serde(default)]
    pub transforms: BTreeMap<String, Transform>,
    #[serde(default)]
    pub noise_u: Option<NoiseMode>,
    #[serde(default)]
    pub noise_f: Option<NoiseMode>,
    #[serde(default)]
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points_per_dim: usize,
    /// Per-dimension evaluation bounds; defaults to the data bounding box.
    #[serde(default)]
    pub bounds: Option<Vec<(f64, f64)>>,
}

/// Deterministic JSON document for a user fit.
#[derive(Debug, serde::Serialize)]
pub struct FitDoc {
    pub operator: String,
    pub dims: Vec<String>,
    pub n_u: usize,
    pub n_f: usize,
    #[serde(flatten)]
    pub learned: BTreeMap<String, f64>,
    pub kernel_variance: f64,
    pub kernel_weights: Vec<f64>,
    pub noise_u: f64,
    pub noise_f: f64,
    pub nlml: f64,
}

pub struct FitRun {
    pub report: FitDoc,
    pub grid: GridData,
    pub restarts: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::DataFormat {
            row: None,
            message: format!("run configuration: {e}"),
        })
    }

    pub fn run(&self, cli: &Cli) -> Result<FitRun> {
        if self.dims.is_empty() {
            return Err(Error::InvalidArgument(
                "config must declare at least one dimension".into(),
            ));
        }
        let expr = parse_operator(&self.operator, &self.dims)?;
        let data_path = resolve(&cli_config_dir(cli), &self.data);
        let text = std::fs::read_to_string(&data_path).map_err(|e| {
            Error::InvalidArgument(format!("cannot read data file {}: {e}", data_path.display()))
        })?;
        let data = JointDataset::from_points_csv(&text, &self.dims)?;
        if data.dim() != self.dims.len() {
            return Err(Error::InvalidArgument(format!(
                "data has dimension {}, config declares {}",
                data.dim(),
                self.dims.len()
            )));
        }

        let mut cfg = train_config(cli);
        cfg.transforms = self.transforms.clone();
        if let Some(noise) = self.noise_u {
            cfg.noise_u = noise;
        }
        if let Some(noise) = self.noise_f {
            cfg.noise_f = noise;
        }
        if let Some(fd_step) = self.fd_step {
            cfg.fd_step = fd_step;
        }
        cfg.validate()?;

        let (model, _) = fit(&data, &expr, &cfg)?;
        let points = self.grid_points(&data)?;
        let post_u = model.posterior(&points, Target::U)?;
        let post_f = model.posterior(&points, Target::F)?;

        let params = model.params();
        Ok(FitRun {
            report: FitDoc {
                operator: self.operator.clone(),
                dims: self.dims.clone(),
                n_u: data.n_u(),
                n_f: data.n_f(),
                learned: params.operator.as_map().clone(),
                kernel_variance: params.kernel.variance(),
                kernel_weights: params.kernel.weights().to_vec(),
                noise_u: params.noise_u,
                noise_f: params.noise_f,
                nlml: model.nlml(),
            },
            grid: GridData {
                dim_names: self.dims.clone(),
                points,
                mean_u: post_u.mean,
                std_u: post_u.std,
                mean_f: post_f.mean,
                std_f: post_f.std,
                truth_u: None,
                truth_f: None,
            },
            restarts: cfg.restarts,
        })
    }

    fn grid_points(&self, data: &JointDataset) -> Result<Vec<Vec<f64>>> {
        let d = data.dim();
        let per_dim = match &self.grid {
            Some(spec) => spec.points_per_dim,
            None => match d {
                1 => 200,
                2 => 100,
                _ => {
                    return Err(Error::InvalidArgument(
                        "declare a grid spec for more than two dimensions".into(),
                    ))
                }
            },
        };
        if per_dim < 2 {
            return Err(Error::InvalidArgument(
                "grid needs at least two points per dimension".into(),
            ));
        }
        let total = per_dim.checked_pow(d as u32).unwrap_or(usize::MAX);
        if total > 1_000_000 {
            return Err(Error::InvalidArgument(format!(
                "evaluation grid of {total} points is too large"
            )));
        }
        let bounds = match self.grid.as_ref().and_then(|g| g.bounds.clone()) {
            Some(bounds) => {
                if bounds.len() != d {
                    return Err(Error::InvalidArgument(format!(
                        "grid bounds cover {} dimensions, data has {d}",
                        bounds.len()
                    )));
                }
                bounds
            }
            None => data.coordinate_ranges(),
        };
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|(lo, hi)| {
                (0..per_dim)
                    .map(|i| lo + (hi - lo) * i as f64 / (per_dim - 1) as f64)
                    .collect()
            })
            .collect();
        let mut points = Vec::with_capacity(total);
        let mut index = vec![0usize; d];
        loop {
            points.push((0..d).map(|k| axes[k][index[k]]).collect());
            let mut k = d;
            loop {
                if k == 0 {
                    return Ok(points);
                }
                k -= 1;
                index[k] += 1;
                if index[k] < per_dim {
                    break;
                }
                index[k] = 0;
            }
        }
    }
}

fn cli_config_dir(cli: &Cli) -> PathBuf {
    match &cli.command {
        crate::Command::Fit(args) => args
            .config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
        _ => PathBuf::from("."),
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
