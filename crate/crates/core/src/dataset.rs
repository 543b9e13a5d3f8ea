//! Joint observation sets for the left- and right-hand-side functions.

use crate::error::{Error, Result};

/// Observations `{X_u, y_u}` of `u` and `{X_f, y_f}` of `f = L u`, sharing
/// one input dimension `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDataset {
    dim: usize,
    x_u: Vec<Vec<f64>>,
    y_u: Vec<f64>,
    x_f: Vec<Vec<f64>>,
    y_f: Vec<f64>,
}

impl JointDataset {
    pub fn new(
        x_u: Vec<Vec<f64>>,
        y_u: Vec<f64>,
        x_f: Vec<Vec<f64>>,
        y_f: Vec<f64>,
    ) -> Result<Self> {
        if x_u.len() != y_u.len() || x_f.len() != y_f.len() {
            return Err(Error::InvalidArgument(format!(
                "point/value counts disagree: {} vs {} for u, {} vs {} for f",
                x_u.len(),
                y_u.len(),
                x_f.len(),
                y_f.len()
            )));
        }
        if x_u.is_empty() && x_f.is_empty() {
            return Err(Error::InvalidArgument(
                "dataset needs at least one observation".into(),
            ));
        }
        let dim = x_u.first().or_else(|| x_f.first()).unwrap().len();
        if dim == 0 {
            return Err(Error::InvalidArgument("points must have D >= 1".into()));
        }
        for (label, points) in [("u", &x_u), ("f", &x_f)] {
            for p in points.iter() {
                if p.len() != dim {
                    return Err(Error::InvalidArgument(format!(
                        "inconsistent dimension in X_{label}: expected {dim}, got {}",
                        p.len()
                    )));
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite coordinate in X_{label}"
                    )));
                }
            }
        }
        if y_u.iter().chain(&y_f).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite observation value".into()));
        }
        Ok(Self {
            dim,
            x_u,
            y_u,
            x_f,
            y_f,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_u(&self) -> usize {
        self.x_u.len()
    }

    pub fn n_f(&self) -> usize {
        self.x_f.len()
    }

    pub fn n_total(&self) -> usize {
        self.n_u() + self.n_f()
    }

    pub fn x_u(&self) -> &[Vec<f64>] {
        &self.x_u
    }

    pub fn y_u(&self) -> &[f64] {
        &self.y_u
    }

    pub fn x_f(&self) -> &[Vec<f64>] {
        &self.x_f
    }

    pub fn y_f(&self) -> &[f64] {
        &self.y_f
    }

    /// Stacked observation vector `[y_u; y_f]`.
    pub fn y_joint(&self) -> Vec<f64> {
        self.y_u.iter().chain(&self.y_f).copied().collect()
    }

    /// Per-dimension value range over all observation points.
    pub fn coordinate_ranges(&self) -> Vec<(f64, f64)> {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for p in self.x_u.iter().chain(&self.x_f) {
            for (d, v) in p.iter().enumerate() {
                ranges[d].0 = ranges[d].0.min(*v);
                ranges[d].1 = ranges[d].1.max(*v);
            }
        }
        ranges
    }

    /// Parses the generic observation format: header `kind,<dim names...>,value`
    /// with `kind` either `u` or `f`. Row numbers in errors are 1-based and
    /// count the header line.
    pub fn from_points_csv(text: &str, dim_names: &[String]) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::DataFormat {
            row: None,
            message: "empty file".into(),
        })?;
        let expected_header = {
            let mut cols = vec!["kind".to_string()];
            cols.extend(dim_names.iter().cloned());
            cols.push("value".to_string());
            cols.join(",")
        };
        if header.trim() != expected_header {
            return Err(Error::DataFormat {
                row: Some(1),
                message: format!("expected header `{expected_header}`, found `{}`", header.trim()),
            });
        }
        let mut x_u = Vec::new();
        let mut y_u = Vec::new();
        let mut x_f = Vec::new();
        let mut y_f = Vec::new();
        for (idx, line) in lines {
            let row = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim_names.len() + 2 {
                return Err(Error::DataFormat {
                    row: Some(row),
                    message: format!(
                        "expected {} fields, found {}",
                        dim_names.len() + 2,
                        fields.len()
                    ),
                });
            }
            let parse_f64 = |field: &str, what: &str| -> Result<f64> {
                field.parse::<f64>().map_err(|_| Error::DataFormat {
                    row: Some(row),
                    message: format!("cannot parse {what} `{field}` as a number"),
                })
            };
            let point: Vec<f64> = fields[1..fields.len() - 1]
                .iter()
                .zip(dim_names)
                .map(|(f, name)| parse_f64(f, name))
                .collect::<Result<_>>()?;
            let value = parse_f64(fields[fields.len() - 1], "value")?;
            match fields[0] {
                "u" => {
                    x_u.push(point);
                    y_u.push(value);
                }
                "f" => {
                    x_f.push(point);
                    y_f.push(value);
                }
                other => {
                    return Err(Error::DataFormat {
                        row: Some(row),
                        message: format!("kind must be `u` or `f`, found `{other}`"),
                    })
                }
            }
        }
        if x_u.is_empty() && x_f.is_empty() {
            return Err(Error::NoUsableData("no observation rows in file".into()));
        }
        Self::new(x_u, y_u, x_f, y_f)
    }
}
