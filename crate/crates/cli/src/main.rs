//! Command-line front end: run the built-in benchmarks, fit user data with a
//! DSL-specified operator, and run the gap-gene workflows. Reports are JSON,
//! posterior grids are CSV.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use opinfer::benchmarks::{run_benchmark, BenchmarkName, BenchmarkSpec};
use opinfer::error::Error;
use opinfer::gapgene::{
    fit_gene, records_from_csv, records_to_csv, synth_records, Gene, GeneTable,
};
use opinfer::train::TrainConfig;

use config::RunConfig;
use output::{write_gapgene_report, write_grid, write_report};

#[derive(Parser)]
#[command(
    name = "opinfer",
    about = "Learn linear-operator parameters from observations of u and f = L u",
    version
)]
struct Cli {
    /// Master seed for data generation and optimizer restarts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of optimizer restarts.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Maximum L-BFGS iterations per restart.
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,
    /// Gradient infinity-norm convergence threshold.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory for report.json and grid.csv.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in benchmark and write report.json + grid.csv.
    Bench(BenchArgs),
    /// Fit a dataset described by a JSON config file.
    Fit(FitArgs),
    /// Gap-gene workflows: synthetic data generation and rate inference.
    Gapgene {
        #[command(subcommand)]
        command: GapgeneCommand,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// One of: integro, heat, fractional.
    name: String,
    /// Use the noisy variant (integro only).
    #[arg(long)]
    noisy: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Path to a JSON run configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum GapgeneCommand {
    /// Write a simulator-generated expression CSV.
    Synth(SynthArgs),
    /// Infer decay and diffusion rates for one gene from an expression CSV.
    Fit(GapgeneFitArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Decay rate per minute.
    #[arg(long)]
    lambda: f64,
    /// Diffusion rate in percent-embryo-length^2 per minute.
    #[arg(long)]
    diff: f64,
    /// Target gene to simulate.
    #[arg(long, default_value = "Kni")]
    gene: String,
    /// Number of space-time observation points.
    #[arg(long, default_value_t = 60)]
    points: usize,
}

#[derive(Args)]
struct GapgeneFitArgs {
    /// Expression CSV (header: t_min,x_percent_el,gene,value).
    #[arg(long)]
    data: PathBuf,
    /// Gene to fit: Hb, Kr, Gt or Kni.
    #[arg(long)]
    gene: String,
    /// Optional JSON override for the production-parameter table.
    #[arg(long)]
    table: Option<PathBuf>,
}

/// Exit codes: 0 success, 1 usage/configuration/data-format errors,
/// 2 training or other runtime failures.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_)
        | Error::Capability(_)
        | Error::Configuration(_)
        | Error::Parse { .. }
        | Error::DataFormat { .. }
        | Error::Io(_) => 1,
        Error::Numerical(_)
        | Error::Training { .. }
        | Error::NoUsableData(_)
        | Error::DataGeneration(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/version on stdout with success; anything else
            // is a usage error.
            let is_help = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn train_config(cli: &Cli) -> TrainConfig {
    let mut cfg = TrainConfig {
        seed: cli.seed,
        ..Default::default()
    };
    if let Some(restarts) = cli.restarts {
        cfg.restarts = restarts;
    }
    if let Some(max_iter) = cli.max_iter {
        cfg.max_iters = max_iter;
    }
    if let Some(tol) = cli.tol {
        cfg.grad_tol = tol;
    }
    cfg
}

fn run(cli: Cli) -> Result<(), Error> {
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Bench(args) => {
            let name = BenchmarkName::from_str(&args.name)?;
            let spec = BenchmarkSpec::named(name, args.noisy, cli.seed)?;
            let cfg = train_config(&cli);
            cfg.validate()?;
            let run = run_benchmark(&spec, &cfg)?;
            write_report(&cli.out, &run.report, cfg.restarts)?;
            write_grid(&cli.out, &run.grid)?;
            eprintln!(
                "{name}: learned {:?} in {:.2?} ({} restarts)",
                run.report.learned, run.fit.wall_time, cfg.restarts
            );
            Ok(())
        }
        Command::Fit(args) => {
            let text = std::fs::read_to_string(&args.config)?;
            let config = RunConfig::from_json(&text)?;
            let result = config.run(&cli)?;
            write_report(&cli.out, &result.report, result.restarts)?;
            write_grid(&cli.out, &result.grid)?;
            eprintln!("fit: learned {:?}", result.report.learned);
            Ok(())
        }
        Command::Gapgene { command } => match command {
            GapgeneCommand::Synth(args) => {
                let gene = Gene::from_str(&args.gene)?;
                let table = GeneTable::default();
                let records = synth_records(
                    gene,
                    args.lambda,
                    args.diff,
                    &table,
                    args.points,
                    cli.seed,
                )?;
                let path = cli.out.join("expression.csv");
                let mut file = std::fs::File::create(&path)?;
                records_to_csv(&records, &mut file)?;
                eprintln!("wrote {} records to {}", records.len(), path.display());
                Ok(())
            }
            GapgeneCommand::Fit(args) => {
                let gene = Gene::from_str(&args.gene)?;
                let table = match &args.table {
                    Some(path) => GeneTable::from_json_str(&std::fs::read_to_string(path)?)?,
                    None => GeneTable::default(),
                };
                let text = std::fs::read_to_string(&args.data)?;
                let records = records_from_csv(&text)?;
                let cfg = train_config(&cli);
                cfg.validate()?;
                let fit = fit_gene(&records, gene, &table, &cfg)?;
                write_gapgene_report(&cli.out, gene, &fit)?;
                eprintln!(
                    "{gene}: lambda = {:.4}, D = {:.4} ({} f points dropped)",
                    fit.lambda, fit.diffusion, fit.dropped_f_points
                );
                Ok(())
            }
        },
    }
}
