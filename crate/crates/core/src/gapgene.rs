//! Drosophila gap-gene reaction-diffusion model: the production/forcing
//! construction from expression records, a forward simulator for synthetic
//! validation, and per-gene inference of decay and diffusion rates.
//!
//! The modeled dynamics for gap protein `a` are
//!
//! ```text
//! du^a/dt + lambda^a u^a - D^a d2u^a/dx2 = f^a(t,x) = zeta(t) P^a(t,x)
//! P^a(t,x) = R^a g(sum_b T^{ab} u^b(t,x) + h^a)
//! ```
//!
//! over `x` in percent embryo length (35 to 92) and `t` in minutes (0 to
//! 68), with concentrations on the 0-255 fluorescence scale.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::dataset::JointDataset;
use crate::dsl::parse_operator;
use crate::error::{Error, Result};
use crate::gp::FittedModel;
use crate::train::{fit, FitReport, TrainConfig, Transform};

/// Spatial domain in percent embryo length.
pub const X_MIN: f64 = 35.0;
pub const X_MAX: f64 = 92.0;
/// Temporal domain in minutes after the start of cleavage cycle 13.
pub const T_MIN: f64 = 0.0;
pub const T_MAX: f64 = 68.0;
/// Relative concentration scale.
pub const VALUE_MAX: f64 = 255.0;

/// The four gap genes whose dynamics are modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Gene {
    Hb,
    Kr,
    Gt,
    Kni,
}

pub const GENES: [Gene; 4] = [Gene::Hb, Gene::Kr, Gene::Gt, Gene::Kni];

/// The seven regulator proteins entering the production term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Regulator {
    Bcd,
    Cad,
    Hb,
    Kr,
    Gt,
    Kni,
    Tll,
}

pub const REGULATORS: [Regulator; 7] = [
    Regulator::Bcd,
    Regulator::Cad,
    Regulator::Hb,
    Regulator::Kr,
    Regulator::Gt,
    Regulator::Kni,
    Regulator::Tll,
];

impl Gene {
    fn index(self) -> usize {
        match self {
            Gene::Hb => 0,
            Gene::Kr => 1,
            Gene::Gt => 2,
            Gene::Kni => 3,
        }
    }

    pub fn as_regulator(self) -> Regulator {
        match self {
            Gene::Hb => Regulator::Hb,
            Gene::Kr => Regulator::Kr,
            Gene::Gt => Regulator::Gt,
            Gene::Kni => Regulator::Kni,
        }
    }
}

impl Regulator {
    fn index(self) -> usize {
        REGULATORS.iter().position(|r| *r == self).unwrap()
    }
}

impl std::fmt::Display for Gene {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Gene::Hb => "Hb",
            Gene::Kr => "Kr",
            Gene::Gt => "Gt",
            Gene::Kni => "Kni",
        })
    }
}

impl std::str::FromStr for Gene {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Hb" => Ok(Gene::Hb),
            "Kr" => Ok(Gene::Kr),
            "Gt" => Ok(Gene::Gt),
            "Kni" => Ok(Gene::Kni),
            other => Err(Error::InvalidArgument(format!(
                "unknown gene `{other}` (expected Hb, Kr, Gt or Kni)"
            ))),
        }
    }
}

impl std::fmt::Display for Regulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regulator::Bcd => "Bcd",
            Regulator::Cad => "Cad",
            Regulator::Hb => "Hb",
            Regulator::Kr => "Kr",
            Regulator::Gt => "Gt",
            Regulator::Kni => "Kni",
            Regulator::Tll => "Tll",
        })
    }
}

impl std::str::FromStr for Regulator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        REGULATORS
            .iter()
            .find(|r| r.to_string() == s)
            .copied()
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown gene `{s}` (expected one of Bcd, Cad, Hb, Kr, Gt, Kni, Tll)"
                ))
            })
    }
}

/// Production parameters of one gap gene: maximum rate, regulatory weights
/// in [`REGULATORS`] order, and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneRow {
    pub max_rate: f64,
    pub weights: [f64; 7],
    pub bias: f64,
}

/// Production parameters for all four gap genes; defaults carry the
/// reference values (exogenously given, not inferred).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneTable {
    rows: [GeneRow; 4],
}

impl Default for GeneTable {
    fn default() -> Self {
        GeneTable {
            rows: [
                GeneRow {
                    max_rate: 32.03,
                    weights: [0.1114, -0.0054, 0.0293, -0.0124, 0.0553, -0.3903, 0.0144],
                    bias: -3.5,
                },
                GeneRow {
                    max_rate: 16.70,
                    weights: [0.1173, 0.0215, -0.0498, 0.0755, -0.0141, -0.0666, -1.2036],
                    bias: -3.5,
                },
                GeneRow {
                    max_rate: 25.15,
                    weights: [0.0738, 0.0180, -0.0008, -0.0758, 0.0157, 0.0056, -0.0031],
                    bias: -3.5,
                },
                GeneRow {
                    max_rate: 16.12,
                    weights: [0.2146, 0.0210, -0.1891, -0.0458, -0.1458, 0.0887, -0.3028],
                    bias: -3.5,
                },
            ],
        }
    }
}

#[derive(Deserialize)]
struct GeneTableFile {
    #[serde(rename = "R")]
    max_rate: BTreeMap<String, f64>,
    #[serde(rename = "T")]
    weights: BTreeMap<String, BTreeMap<String, f64>>,
    h: BTreeMap<String, f64>,
}

impl GeneTable {
    pub fn row(&self, gene: Gene) -> &GeneRow {
        &self.rows[gene.index()]
    }

    pub fn weight(&self, gene: Gene, regulator: Regulator) -> f64 {
        self.rows[gene.index()].weights[regulator.index()]
    }

    /// Loads an override table from JSON with keys `R`, `T` (nested by gene
    /// then regulator name) and `h`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GeneTableFile = serde_json::from_str(text).map_err(|e| Error::DataFormat {
            row: None,
            message: format!("gene table JSON: {e}"),
        })?;
        let mut table = GeneTable::default();
        for gene in GENES {
            let name = gene.to_string();
            let get = |map: &BTreeMap<String, f64>, what: &str| -> Result<f64> {
                map.get(&name).copied().ok_or_else(|| Error::DataFormat {
                    row: None,
                    message: format!("gene table JSON: missing {what} entry for {name}"),
                })
            };
            let rates = get(&file.max_rate, "R")?;
            let bias = get(&file.h, "h")?;
            let row_weights = file.weights.get(&name).ok_or_else(|| Error::DataFormat {
                row: None,
                message: format!("gene table JSON: missing T row for {name}"),
            })?;
            let mut weights = [0.0; 7];
            for regulator in REGULATORS {
                weights[regulator.index()] = row_weights
                    .get(&regulator.to_string())
                    .copied()
                    .ok_or_else(|| Error::DataFormat {
                        row: None,
                        message: format!(
                            "gene table JSON: missing T[{name}][{regulator}] entry"
                        ),
                    })?;
            }
            table.rows[gene.index()] = GeneRow {
                max_rate: rates,
                weights,
                bias,
            };
        }
        Ok(table)
    }
}

/// Mitosis factor: transcription runs at half rate while nuclei double,
/// shuts down during division, then resumes fully.
pub fn zeta(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be nonnegative, got {t}"
        )));
    }
    Ok(if t < 16.0 {
        0.5
    } else if t < 21.0 {
        0.0
    } else {
        1.0
    })
}

/// Saturating regulation response `g(u) = (u / sqrt(u^2 + 1) + 1) / 2`,
/// strictly increasing from 0 to 1 with `g(0) = 1/2`.
pub fn sigmoid_g(u: f64) -> f64 {
    0.5 * (u / (u * u + 1.0).sqrt() + 1.0)
}

/// Production rate `R^a g(sum_b T^{ab} conc_b + h^a)`; requires all seven
/// regulator concentrations.
pub fn production(
    gene: Gene,
    conc: &BTreeMap<Regulator, f64>,
    table: &GeneTable,
) -> Result<f64> {
    let mut values = [0.0; 7];
    for regulator in REGULATORS {
        values[regulator.index()] = *conc.get(&regulator).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "missing concentration for regulator {regulator}"
            ))
        })?;
    }
    Ok(production_from_values(gene, &values, table))
}

/// Production from concentrations in [`REGULATORS`] order; the simulator's
/// hot loop and [`production`] share this exact arithmetic.
pub fn production_from_values(gene: Gene, values: &[f64; 7], table: &GeneTable) -> f64 {
    let row = table.row(gene);
    let mut arg = row.bias;
    for i in 0..7 {
        arg += row.weights[i] * values[i];
    }
    row.max_rate * sigmoid_g(arg)
}

/// One observation: relative concentration of one gene at one point in
/// space-time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionRecord {
    pub t: f64,
    pub x: f64,
    pub gene: Regulator,
    pub value: f64,
}

impl ExpressionRecord {
    pub fn new(t: f64, x: f64, gene: Regulator, value: f64) -> Result<Self> {
        if !(T_MIN..=T_MAX).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside [{T_MIN}, {T_MAX}] minutes"
            )));
        }
        if !(X_MIN..=X_MAX).contains(&x) {
            return Err(Error::InvalidArgument(format!(
                "position {x} outside [{X_MIN}, {X_MAX}] percent embryo length"
            )));
        }
        if !(0.0..=VALUE_MAX).contains(&value) {
            return Err(Error::InvalidArgument(format!(
                "concentration {value} outside [0, {VALUE_MAX}]"
            )));
        }
        Ok(Self { t, x, gene, value })
    }
}

/// Parses the ingestion format: header `t_min,x_percent_el,gene,value`,
/// rows in any order.
pub fn records_from_csv(text: &str) -> Result<Vec<ExpressionRecord>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::DataFormat {
        row: None,
        message: "empty file".into(),
    })?;
    if header.trim() != "t_min,x_percent_el,gene,value" {
        return Err(Error::DataFormat {
            row: Some(1),
            message: format!(
                "expected header `t_min,x_percent_el,gene,value`, found `{}`",
                header.trim()
            ),
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::DataFormat {
                row: Some(row),
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let num = |field: &str, what: &str| -> Result<f64> {
            field.parse::<f64>().map_err(|_| Error::DataFormat {
                row: Some(row),
                message: format!("cannot parse {what} `{field}` as a number"),
            })
        };
        let t = num(fields[0], "t_min")?;
        let x = num(fields[1], "x_percent_el")?;
        let gene: Regulator = fields[2].parse().map_err(|e: Error| Error::DataFormat {
            row: Some(row),
            message: e.to_string(),
        })?;
        let value = num(fields[3], "value")?;
        let record = ExpressionRecord::new(t, x, gene, value).map_err(|e| Error::DataFormat {
            row: Some(row),
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn records_to_csv(records: &[ExpressionRecord], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "t_min,x_percent_el,gene,value")?;
    for r in records {
        writeln!(out, "{},{},{},{}", r.t, r.x, r.gene, r.value)?;
    }
    Ok(())
}

/// Training data built from expression records for one target gene.
#[derive(Debug, Clone)]
pub struct FData {
    pub dataset: JointDataset,
    /// Space-time points that could not contribute a forcing observation
    /// because at least one regulator was missing there.
    pub dropped_f_points: usize,
}

/// Assembles `{X_u, y_u}` from the target gene's observations and
/// `{X_f, y_f} = zeta(t) P^a(t, x)` at the points where all seven regulators
/// are recorded.
pub fn build_f_data(
    records: &[ExpressionRecord],
    gene: Gene,
    table: &GeneTable,
) -> Result<FData> {
    // Key by exact coordinates; domain values are nonnegative so the bit
    // patterns order like the numbers.
    let mut by_point: BTreeMap<(u64, u64), BTreeMap<Regulator, f64>> = BTreeMap::new();
    for r in records {
        let key = (r.t.to_bits(), r.x.to_bits());
        let entry = by_point.entry(key).or_default();
        if let Some(previous) = entry.insert(r.gene, r.value) {
            if previous != r.value {
                return Err(Error::DataFormat {
                    row: None,
                    message: format!(
                        "conflicting values for {} at t={}, x={}: {} vs {}",
                        r.gene, r.t, r.x, previous, r.value
                    ),
                });
            }
        }
    }

    let target = gene.as_regulator();
    let mut x_u = Vec::new();
    let mut y_u = Vec::new();
    let mut x_f = Vec::new();
    let mut y_f = Vec::new();
    let mut dropped = 0usize;
    for ((t_bits, x_bits), conc) in &by_point {
        let t = f64::from_bits(*t_bits);
        let x = f64::from_bits(*x_bits);
        if let Some(value) = conc.get(&target) {
            x_u.push(vec![t, x]);
            y_u.push(*value);
        }
        if conc.len() == REGULATORS.len() {
            x_f.push(vec![t, x]);
            y_f.push(zeta(t)? * production(gene, conc, table)?);
        } else {
            dropped += 1;
        }
    }
    if x_f.is_empty() {
        return Err(Error::NoUsableData(format!(
            "no usable f points: none of the {} space-time points carries all seven regulators",
            by_point.len()
        )));
    }
    Ok(FData {
        dataset: JointDataset::new(x_u, y_u, x_f, y_f)?,
        dropped_f_points: dropped,
    })
}

/// Regulator concentrations supplied to the forward simulator as data; the
/// target gene's own concentration comes from the simulated state instead.
pub trait RegulatorField {
    fn value(&self, regulator: Regulator, t: f64, x: f64) -> f64;
}

/// Simulation grid: fixed domain, caller-chosen resolution.
#[derive(Debug, Clone, Copy)]
pub struct SimGrid {
    pub dx: f64,
    pub dt: f64,
}

impl Default for SimGrid {
    fn default() -> Self {
        Self { dx: 0.5, dt: 0.01 }
    }
}

/// Forward solution sampled at requested times.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub x_nodes: Vec<f64>,
    pub times: Vec<f64>,
    /// `u[k][i]` is the concentration at `times[k]`, `x_nodes[i]`.
    pub u: Vec<Vec<f64>>,
    /// Forcing `zeta(t) P^a(t, x)` at the same sample points.
    pub forcing: Vec<Vec<f64>>,
}

/// Integrates the reaction-diffusion equation with explicit finite
/// differences and zero-flux boundaries, landing exactly on every requested
/// sample time and on the mitosis breakpoints.
pub fn simulate_forward(
    gene: Gene,
    lambda: f64,
    diffusion: f64,
    table: &GeneTable,
    regulators: &dyn RegulatorField,
    grid: &SimGrid,
    initial: &dyn Fn(f64) -> f64,
    sample_times: &[f64],
) -> Result<SimOutput> {
    if !(lambda >= 0.0 && diffusion >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "decay {lambda} and diffusion {diffusion} must be nonnegative"
        )));
    }
    if !(grid.dx > 0.0 && grid.dt > 0.0) {
        return Err(Error::InvalidArgument(
            "grid steps must be positive".into(),
        ));
    }
    let span = X_MAX - X_MIN;
    let n_nodes = (span / grid.dx).round() as usize + 1;
    if ((n_nodes - 1) as f64 * grid.dx - span).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "dx = {} does not divide the domain width {span}",
            grid.dx
        )));
    }
    if diffusion > 0.0 {
        let dt_max = 0.4 * grid.dx * grid.dx / diffusion;
        if grid.dt > dt_max {
            return Err(Error::InvalidArgument(format!(
                "explicit scheme is unstable: dt = {} exceeds 0.4 dx^2 / D = {dt_max:.6}",
                grid.dt
            )));
        }
    }
    let mut times: Vec<f64> = sample_times.to_vec();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    if times.is_empty() {
        return Err(Error::InvalidArgument("no sample times requested".into()));
    }
    if times[0] < T_MIN || *times.last().unwrap() > T_MAX {
        return Err(Error::InvalidArgument(format!(
            "sample times must lie in [{T_MIN}, {T_MAX}]"
        )));
    }

    let x_nodes: Vec<f64> = (0..n_nodes).map(|i| X_MIN + i as f64 * grid.dx).collect();
    let mut state: Vec<f64> = x_nodes.iter().map(|x| initial(*x)).collect();
    let target = gene.as_regulator();

    let forcing_at = |t: f64, state: &[f64]| -> Result<Vec<f64>> {
        let z = zeta(t)?;
        let mut out = Vec::with_capacity(state.len());
        for (i, x) in x_nodes.iter().enumerate() {
            let mut values = [0.0; 7];
            for regulator in REGULATORS {
                values[regulator.index()] = if regulator == target {
                    state[i]
                } else {
                    regulators.value(regulator, t, *x)
                };
            }
            out.push(z * production_from_values(gene, &values, table));
        }
        Ok(out)
    };

    // Integration always starts at t = 0; segment boundaries are the sample
    // times plus the discontinuities of zeta, so steps land on them exactly.
    let t_end = *times.last().unwrap();
    let mut breaks = vec![T_MIN];
    breaks.extend(times.iter().copied());
    for b in [16.0, 21.0] {
        if b < t_end {
            breaks.push(b);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();

    let mut sampled_u = Vec::with_capacity(times.len());
    let mut sampled_f = Vec::with_capacity(times.len());
    if times.contains(&T_MIN) {
        sampled_u.push(state.clone());
        sampled_f.push(forcing_at(T_MIN, &state)?);
    }
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);
    for window in breaks.windows(2) {
        let (t0, t1) = (window[0], window[1]);
        let steps = ((t1 - t0) / grid.dt).ceil().max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        for s in 0..steps {
            let t_now = t0 + s as f64 * h;
            let forcing = forcing_at(t_now, &state)?;
            let mut next = vec![0.0; n_nodes];
            for i in 0..n_nodes {
                let laplacian = if i == 0 {
                    2.0 * (state[1] - state[0])
                } else if i == n_nodes - 1 {
                    2.0 * (state[n_nodes - 2] - state[n_nodes - 1])
                } else {
                    state[i - 1] - 2.0 * state[i] + state[i + 1]
                } * inv_dx2;
                next[i] = state[i]
                    + h * (-lambda * state[i] + diffusion * laplacian + forcing[i]);
            }
            state = next;
        }
        if times.contains(&t1) {
            sampled_u.push(state.clone());
            sampled_f.push(forcing_at(t1, &state)?);
        }
    }

    Ok(SimOutput {
        x_nodes,
        times,
        u: sampled_u,
        forcing: sampled_f,
    })
}

/// Smooth synthetic regulator profiles for simulator-based validation:
/// an anterior activator gradient plus localized repressor bumps, ramped up
/// over time. Amplitudes stay far below the saturation scale.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticRegulators;

impl SyntheticRegulators {
    fn ramp(t: f64) -> f64 {
        0.5 * (1.0 + ((t - 20.0) / 12.0).tanh())
    }

    fn bump(x: f64, center: f64, width: f64) -> f64 {
        (-((x - center) / width).powi(2)).exp()
    }
}

impl RegulatorField for SyntheticRegulators {
    fn value(&self, regulator: Regulator, t: f64, x: f64) -> f64 {
        let s = Self::ramp(t);
        match regulator {
            Regulator::Bcd => 180.0 * Self::bump(x, 38.0, 12.0),
            Regulator::Cad => 150.0 * s / (1.0 + (-(x - 60.0) / 7.0).exp()),
            Regulator::Hb => 200.0 * s * Self::bump(x, 47.0, 6.0),
            Regulator::Kr => 190.0 * s * Self::bump(x, 59.0, 5.0),
            Regulator::Gt => 160.0 * s * Self::bump(x, 77.0, 5.0),
            Regulator::Kni => 60.0 * s * Self::bump(x, 68.0, 6.0),
            Regulator::Tll => 180.0 * s * Self::bump(x, 89.0, 3.5),
        }
    }
}

/// Initial profile used for synthetic data.
pub fn synthetic_initial(x: f64) -> f64 {
    120.0 * (-((x - 64.0) / 5.0).powi(2)).exp()
}

/// Generates a synthetic record set: simulates the target gene forward with
/// the given rates and emits records for all seven genes at `n_points`
/// seeded random space-time sample points.
pub fn synth_records(
    gene: Gene,
    lambda: f64,
    diffusion: f64,
    table: &GeneTable,
    n_points: usize,
    seed: u64,
) -> Result<Vec<ExpressionRecord>> {
    if n_points == 0 {
        return Err(Error::InvalidArgument("n_points must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = SimGrid::default();
    let n_nodes = ((X_MAX - X_MIN) / grid.dx).round() as usize + 1;
    // Observations come as spatial profiles at discrete time classes, the
    // way expression data is collected; classes avoid the mitosis shutdown
    // window where the forcing jumps. Positions sit on grid nodes so records
    // carry exact simulator values.
    const TIME_CLASSES: [f64; 10] = [2.0, 7.0, 12.0, 25.0, 31.0, 38.0, 45.0, 52.0, 59.0, 66.0];
    let n_classes = (n_points / 15).clamp(2, TIME_CLASSES.len());
    let per_class = n_points.div_ceil(n_classes);
    let mut class_pool: Vec<f64> = TIME_CLASSES.to_vec();
    let mut samples: Vec<(f64, usize)> = Vec::with_capacity(n_points);
    for _ in 0..n_classes {
        let t = class_pool.remove(rng.random_range(0..class_pool.len()));
        let stride = (n_nodes - 1) as f64 / per_class as f64;
        let offset = rng.random_range(0.0..stride);
        for j in 0..per_class {
            if samples.len() < n_points {
                let node = ((offset + j as f64 * stride).round() as usize).min(n_nodes - 1);
                samples.push((t, node));
            }
        }
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    samples.dedup();
    let times: Vec<f64> = samples.iter().map(|(t, _)| *t).collect();

    let regulators = SyntheticRegulators;
    let sim = simulate_forward(
        gene,
        lambda,
        diffusion,
        table,
        &regulators,
        &grid,
        &synthetic_initial,
        &times,
    )?;

    let target = gene.as_regulator();
    let mut records = Vec::with_capacity(samples.len() * 7);
    for (t, node) in &samples {
        let k = sim
            .times
            .iter()
            .position(|st| st == t)
            .expect("sample times are the simulation output times");
        let x = sim.x_nodes[*node];
        for regulator in REGULATORS {
            let value = if regulator == target {
                sim.u[k][*node]
            } else {
                regulators.value(regulator, *t, x)
            };
            records.push(ExpressionRecord::new(*t, x, regulator, value)?);
        }
    }
    Ok(records)
}

/// Result of per-gene rate inference.
#[derive(Debug)]
pub struct GeneFit {
    pub lambda: f64,
    pub diffusion: f64,
    pub dropped_f_points: usize,
    pub model: FittedModel,
    pub report: FitReport,
}

/// Infers the decay and diffusion rates of one gap gene from expression
/// records, in raw units (per minute, percent-embryo-length squared per
/// minute).
pub fn fit_gene(
    records: &[ExpressionRecord],
    gene: Gene,
    table: &GeneTable,
    cfg: &TrainConfig,
) -> Result<GeneFit> {
    let f_data = build_f_data(records, gene, table)?;
    let dims = vec!["t".to_string(), "x".to_string()];
    let expr = parse_operator("d/dt + lambda*u - diff*d2/dx2", &dims)
        .expect("gap-gene operator is grammar-valid");
    let mut cfg = cfg.clone();
    cfg.transforms.insert("lambda".into(), Transform::Log);
    cfg.transforms.insert("diff".into(), Transform::Log);
    let (model, report) = fit(&f_data.dataset, &expr, &cfg)?;
    let lambda = model.params().operator.get("lambda").unwrap();
    let diffusion = model.params().operator.get("diff").unwrap();
    Ok(GeneFit {
        lambda,
        diffusion,
        dropped_f_points: f_data.dropped_f_points,
        model,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_piecewise_values() {
        assert_eq!(zeta(10.0).unwrap(), 0.5);
        assert_eq!(zeta(18.0).unwrap(), 0.0);
        assert_eq!(zeta(33.0).unwrap(), 1.0);
        assert_eq!(zeta(0.0).unwrap(), 0.5);
        assert_eq!(zeta(16.0).unwrap(), 0.0);
        assert_eq!(zeta(21.0).unwrap(), 1.0);
        assert!(zeta(-0.1).is_err());
    }

    #[test]
    fn sigmoid_values_and_symmetry() {
        assert_eq!(sigmoid_g(0.0), 0.5);
        assert!((sigmoid_g(1.0) - 0.5 * (1.0 / 2.0f64.sqrt() + 1.0)).abs() < 1e-15);
        assert!((sigmoid_g(1.0) - 0.853553).abs() < 1e-6);
        for u in [0.5, 1.0, 3.0] {
            assert!((sigmoid_g(u) + sigmoid_g(-u) - 1.0).abs() < 1e-15);
        }
        assert!(sigmoid_g(50.0) < 1.0);
        assert!(sigmoid_g(-50.0) > 0.0);
    }

    #[test]
    fn production_examples() {
        let table = GeneTable::default();
        let zero: BTreeMap<Regulator, f64> = REGULATORS.iter().map(|r| (*r, 0.0)).collect();
        for gene in GENES {
            let p = production(gene, &zero, &table).unwrap();
            let expect = table.row(gene).max_rate * sigmoid_g(-3.5);
            assert!((p - expect).abs() < 1e-12);
            assert!(p > 0.0 && p < table.row(gene).max_rate);
        }

        let mut conc = zero.clone();
        conc.insert(Regulator::Bcd, 100.0);
        let p = production(Gene::Hb, &conc, &table).unwrap();
        let expect = 32.03 * sigmoid_g(0.1114 * 100.0 - 3.5);
        assert!((p - expect).abs() < 1e-12);

        // monotone in an activator
        let mut more = conc.clone();
        more.insert(Regulator::Bcd, 150.0);
        assert!(production(Gene::Hb, &more, &table).unwrap() > p);

        // missing regulator
        let mut missing = zero.clone();
        missing.remove(&Regulator::Tll);
        assert!(production(Gene::Hb, &missing, &table).is_err());
    }

    #[test]
    fn record_validation() {
        assert!(ExpressionRecord::new(0.0, 35.0, Regulator::Hb, 0.0).is_ok());
        assert!(ExpressionRecord::new(68.0, 92.0, Regulator::Tll, 255.0).is_ok());
        assert!(ExpressionRecord::new(-1.0, 50.0, Regulator::Hb, 10.0).is_err());
        assert!(ExpressionRecord::new(70.0, 50.0, Regulator::Hb, 10.0).is_err());
        assert!(ExpressionRecord::new(10.0, 30.0, Regulator::Hb, 10.0).is_err());
        assert!(ExpressionRecord::new(10.0, 50.0, Regulator::Hb, 300.0).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let records = vec![
            ExpressionRecord::new(10.0, 40.5, Regulator::Bcd, 120.25).unwrap(),
            ExpressionRecord::new(33.0, 60.0, Regulator::Kni, 9.125).unwrap(),
        ];
        let mut buffer = Vec::new();
        records_to_csv(&records, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let back = records_from_csv(&text).unwrap();
        assert_eq!(records, back);

        let err = records_from_csv("t_min,x_percent_el,gene,value\n5,40,Xx,1\n").unwrap_err();
        assert!(matches!(err, Error::DataFormat { row: Some(2), .. }), "{err:?}");

        let err = records_from_csv("wrong\n").unwrap_err();
        assert!(matches!(err, Error::DataFormat { row: Some(1), .. }));
    }

    #[test]
    fn build_f_data_single_complete_point() {
        let table = GeneTable::default();
        let records: Vec<ExpressionRecord> = REGULATORS
            .iter()
            .map(|r| ExpressionRecord::new(30.0, 50.0, *r, 10.0).unwrap())
            .collect();
        let f = build_f_data(&records, Gene::Kr, &table).unwrap();
        assert_eq!(f.dataset.n_f(), 1);
        assert_eq!(f.dataset.n_u(), 1);
        assert_eq!(f.dropped_f_points, 0);

        let conc: BTreeMap<Regulator, f64> = REGULATORS.iter().map(|r| (*r, 10.0)).collect();
        let expect = zeta(30.0).unwrap() * production(Gene::Kr, &conc, &table).unwrap();
        assert_eq!(f.dataset.y_f()[0], expect);
    }

    #[test]
    fn build_f_data_mitosis_window_forces_zero() {
        let table = GeneTable::default();
        let records: Vec<ExpressionRecord> = REGULATORS
            .iter()
            .map(|r| ExpressionRecord::new(18.0, 50.0, *r, 150.0).unwrap())
            .collect();
        let f = build_f_data(&records, Gene::Hb, &table).unwrap();
        assert_eq!(f.dataset.y_f()[0], 0.0);
    }

    #[test]
    fn build_f_data_reports_dropped_points_and_is_order_invariant() {
        let table = GeneTable::default();
        let mut records: Vec<ExpressionRecord> = REGULATORS
            .iter()
            .map(|r| ExpressionRecord::new(30.0, 50.0, *r, 10.0).unwrap())
            .collect();
        // A second point carrying only the target gene: usable for u, not f.
        records.push(ExpressionRecord::new(40.0, 60.0, Regulator::Hb, 22.0).unwrap());
        let f = build_f_data(&records, Gene::Hb, &table).unwrap();
        assert_eq!(f.dataset.n_u(), 2);
        assert_eq!(f.dataset.n_f(), 1);
        assert_eq!(f.dropped_f_points, 1);

        let mut reversed = records.clone();
        reversed.reverse();
        let g = build_f_data(&reversed, Gene::Hb, &table).unwrap();
        assert_eq!(f.dataset, g.dataset);
    }

    #[test]
    fn build_f_data_without_complete_points_errors() {
        let table = GeneTable::default();
        let records = vec![ExpressionRecord::new(30.0, 50.0, Regulator::Hb, 10.0).unwrap()];
        let err = build_f_data(&records, Gene::Hb, &table).unwrap_err();
        assert!(matches!(err, Error::NoUsableData(_)));
        assert!(err.to_string().contains("no usable f points"));
    }

    #[test]
    fn simulator_rejects_unstable_step() {
        let table = GeneTable::default();
        let grid = SimGrid { dx: 0.5, dt: 1.0 };
        let err = simulate_forward(
            Gene::Kni,
            0.1,
            0.4,
            &table,
            &SyntheticRegulators,
            &grid,
            &|_| 0.0,
            &[0.0, 10.0],
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("0.4 dx^2 / D"), "{text}");
    }

    #[test]
    fn simulator_pure_decay_matches_exponential() {
        let table = GeneTable::default();
        // Production is suppressed by a huge negative bias.
        let mut dead = table.clone();
        for gene in GENES {
            dead.rows[gene.index()].bias = -1e9;
        }
        let lambda = 0.2;
        let grid = SimGrid { dx: 0.5, dt: 2e-4 };
        let sim = simulate_forward(
            Gene::Kni,
            lambda,
            0.0,
            &dead,
            &SyntheticRegulators,
            &grid,
            &|_| 100.0,
            &[0.0, 5.0, 20.0],
        )
        .unwrap();
        for (k, t) in sim.times.iter().enumerate() {
            let expect = 100.0 * (-lambda * t).exp();
            for v in &sim.u[k] {
                assert!(
                    ((v - expect) / expect).abs() < 1e-4,
                    "t={t}: {v} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn simulator_conserves_mass_without_decay() {
        let table = GeneTable::default();
        let mut dead = table.clone();
        for gene in GENES {
            dead.rows[gene.index()].bias = -1e9;
        }
        let grid = SimGrid { dx: 0.5, dt: 0.05 };
        let initial = |x: f64| 50.0 * (-((x - 60.0) / 5.0).powi(2)).exp();
        let sim = simulate_forward(
            Gene::Kni,
            0.0,
            0.4,
            &dead,
            &SyntheticRegulators,
            &grid,
            &initial,
            &[0.0, 30.0, 68.0],
        )
        .unwrap();
        // Trapezoid mass: the reflected-ghost boundary conserves it exactly.
        let mass = |u: &[f64]| -> f64 {
            let inner: f64 = u[1..u.len() - 1].iter().sum();
            (inner + 0.5 * (u[0] + u[u.len() - 1])) * grid.dx
        };
        let m0 = mass(&sim.u[0]);
        for k in 1..sim.times.len() {
            let m = mass(&sim.u[k]);
            assert!(((m - m0) / m0).abs() < 1e-6, "mass {m} vs {m0}");
        }
    }

    #[test]
    fn simulator_grid_refinement_converges() {
        // Forward Euler is first order in time, so the step must sit well
        // below the stability bound for halving to move the profile < 1e-3.
        let table = GeneTable::default();
        let coarse = simulate_forward(
            Gene::Kni,
            0.1,
            0.4,
            &table,
            &SyntheticRegulators,
            &SimGrid { dx: 0.25, dt: 0.002 },
            &synthetic_initial,
            &[68.0],
        )
        .unwrap();
        let fine = simulate_forward(
            Gene::Kni,
            0.1,
            0.4,
            &table,
            &SyntheticRegulators,
            &SimGrid { dx: 0.125, dt: 0.001 },
            &synthetic_initial,
            &[68.0],
        )
        .unwrap();
        let coarse_u = &coarse.u[0];
        let fine_on_coarse: Vec<f64> = (0..coarse_u.len()).map(|i| fine.u[0][2 * i]).collect();
        let norm: f64 = coarse_u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff: f64 = coarse_u
            .iter()
            .zip(&fine_on_coarse)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff / norm <= 1e-3, "refinement changed profile by {}", diff / norm);
    }

    #[test]
    fn synth_records_match_simulator_forcing() {
        let table = GeneTable::default();
        let records = synth_records(Gene::Kni, 0.1, 0.4, &table, 40, 11).unwrap();
        let f = build_f_data(&records, Gene::Kni, &table).unwrap();
        assert!(f.dataset.n_f() > 0);
        assert_eq!(f.dropped_f_points, 0);

        // Recompute the forcing through the simulator at the same samples.
        let times: Vec<f64> = f.dataset.x_f().iter().map(|p| p[0]).collect();
        let sim = simulate_forward(
            Gene::Kni,
            0.1,
            0.4,
            &table,
            &SyntheticRegulators,
            &SimGrid::default(),
            &synthetic_initial,
            &times,
        )
        .unwrap();
        for (point, y) in f.dataset.x_f().iter().zip(f.dataset.y_f()) {
            let k = sim.times.iter().position(|t| *t == point[0]).unwrap();
            let i = sim
                .x_nodes
                .iter()
                .position(|x| (x - point[1]).abs() < 1e-12)
                .unwrap();
            assert!(
                (sim.forcing[k][i] - y).abs() < 1e-10,
                "forcing mismatch at {point:?}: {} vs {y}",
                sim.forcing[k][i]
            );
        }
    }

    #[test]
    fn gene_table_default_matches_reference_values() {
        let table = GeneTable::default();
        // All 36 numbers, row by row.
        let expect: [(Gene, f64, [f64; 7], f64); 4] = [
            (
                Gene::Hb,
                32.03,
                [0.1114, -0.0054, 0.0293, -0.0124, 0.0553, -0.3903, 0.0144],
                -3.5,
            ),
            (
                Gene::Kr,
                16.70,
                [0.1173, 0.0215, -0.0498, 0.0755, -0.0141, -0.0666, -1.2036],
                -3.5,
            ),
            (
                Gene::Gt,
                25.15,
                [0.0738, 0.0180, -0.0008, -0.0758, 0.0157, 0.0056, -0.0031],
                -3.5,
            ),
            (
                Gene::Kni,
                16.12,
                [0.2146, 0.0210, -0.1891, -0.0458, -0.1458, 0.0887, -0.3028],
                -3.5,
            ),
        ];
        for (gene, rate, weights, bias) in expect {
            let row = table.row(gene);
            assert_eq!(row.max_rate, rate, "{gene} max rate");
            assert_eq!(row.weights, weights, "{gene} weights");
            assert_eq!(row.bias, bias, "{gene} bias");
        }
    }

    #[test]
    fn gene_table_json_override() {
        let table = GeneTable::default();
        let mut json = String::from("{\"R\":{");
        json.push_str("\"Hb\":1.0,\"Kr\":2.0,\"Gt\":3.0,\"Kni\":4.0},\"T\":{");
        for (i, gene) in GENES.iter().enumerate() {
            if i > 0 {
                json.push(',');
            }
            json.push_str(&format!("\"{gene}\":{{"));
            for (j, regulator) in REGULATORS.iter().enumerate() {
                if j > 0 {
                    json.push(',');
                }
                json.push_str(&format!("\"{regulator}\":0.5"));
            }
            json.push('}');
        }
        json.push_str("},\"h\":{\"Hb\":-1.0,\"Kr\":-1.0,\"Gt\":-1.0,\"Kni\":-1.0}}");
        let parsed = GeneTable::from_json_str(&json).unwrap();
        assert_eq!(parsed.row(Gene::Kr).max_rate, 2.0);
        assert_eq!(parsed.row(Gene::Gt).weights, [0.5; 7]);
        assert_ne!(parsed, table);

        assert!(GeneTable::from_json_str("{\"R\":{}}").is_err());
    }
}
