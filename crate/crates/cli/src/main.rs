mod check;
mod io;
mod metric;
mod solve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dtoda::frobenius::{self, Chart, Form};
use dtoda::hydro::{self, Grid, SweepOptions};
use dtoda::Error;

#[derive(Debug)]
pub enum Failure {
    /// Bad input: exit 2.
    Config(String),
    /// Numerical failure or failed assertion: exit 1.
    Check(String),
}

impl Failure {
    pub fn from_lib(e: Error) -> Self {
        match e {
            Error::InvalidParameters(_) | Error::SingularJacobian(_) => Failure::Config(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "dtoda", version, about = "Dispersionless Toda reductions: checks, hodograph solves and metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the identity suites on a model and write a JSON report.
    Check {
        #[arg(long)]
        model: PathBuf,
        /// Override every default tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 1e-5)]
        fd_step: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Series truncation window for the Case II asymptotic checks.
        #[arg(long, default_value_t = 8)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the hodograph relations over a grid.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        hodograph: PathBuf,
        /// e.g. "s=1.5:2.5:0.1,t1=1"
        #[arg(long)]
        grid: String,
        /// Newton tolerance (scaled residual).
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        format: Option<Format>,
        #[arg(long)]
        serial: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metric matrices in a chart.
    Metric {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        chart: ChartArg,
        /// Defaults to the flat form for the flat chart, round otherwise.
        #[arg(long, value_enum)]
        form: Option<FormArg>,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChartArg {
    Flat,
    Lambda,
    Natural,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Round,
    Angle,
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Failure::Config(format!("--{name} must be positive, got {v}")))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check {
            model,
            tol,
            fd_step,
            trials,
            seed,
            window,
            out,
        } => {
            if let Some(t) = tol {
                positive("tol", t)?;
            }
            positive("fd-step", fd_step)?;
            if trials < 1 {
                return Err(Failure::Config("--trials must be at least 1".into()));
            }
            if window < 4 {
                return Err(Failure::Config("--window must be at least 4".into()));
            }
            let pot = io::load_model(&model)?;
            let cfg = check::CheckConfig {
                tol,
                fd_step,
                trials,
                seed,
                window,
            };
            let report = check::run_check(&pot, &cfg);
            io::write_out(out.as_deref(), &io::to_json(&report))?;
            if report.passed {
                Ok(())
            } else {
                let failed: Vec<_> = report
                    .checks
                    .iter()
                    .filter(|l| l.status == check::Status::Fail)
                    .map(|l| l.identity.as_str())
                    .collect();
                Err(Failure::Check(format!("failed: {}", failed.join(", "))))
            }
        }
        Command::Solve {
            model,
            hodograph,
            grid,
            tol,
            format,
            serial,
            out,
        } => {
            positive("tol", tol)?;
            let pot = io::load_model(&model)?;
            let data = io::load_hodograph(&hodograph)?;
            let grid: Grid = grid
                .parse()
                .map_err(|e: Error| Failure::Config(format!("--grid: {e}")))?;
            let mut opts = SweepOptions::default();
            opts.solve.tol = tol;
            opts.parallel = !serial;
            let field = hydro::hodograph_sweep(&pot, &grid, &data, &opts).map_err(Failure::from_lib)?;
            let text = match format.unwrap_or_else(|| guess_format(out.as_deref())) {
                Format::Csv => solve::to_csv(&field),
                Format::Json => solve::to_json(&field),
            };
            io::write_out(out.as_deref(), &text)
        }
        Command::Metric {
            model,
            chart,
            form,
            samples,
            seed,
            out,
        } => {
            let pot = io::load_model(&model)?;
            let chart = match chart {
                ChartArg::Flat => Chart::Flat,
                ChartArg::Lambda => Chart::Lambda,
                ChartArg::Natural => Chart::Natural,
            };
            let form = match form {
                Some(FormArg::Round) => Form::Round,
                Some(FormArg::Angle) => Form::Angle,
                None if chart == Chart::Flat => {
                    let kind = frobenius::flat_coordinates(&pot).map_err(Failure::from_lib)?.kind;
                    frobenius::flat_form(kind)
                }
                None => Form::Round,
            };
            let report = metric::run_metric(&pot, chart, form, samples, seed)?;
            io::write_out(out.as_deref(), &io::to_json(&report))
        }
    }
}

fn guess_format(out: Option<&Path>) -> Format {
    match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
