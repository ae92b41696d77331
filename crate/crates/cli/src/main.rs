use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pairlink::optimize::DEFAULT_LOG10_BRACKET;
use pairlink::Objective;
use pairlink_cli::commands;
use pairlink_cli::config::{parse_objective, ScenarioConfig};
use pairlink_cli::figures::{self, FigureName, FigureOptions};
use pairlink_cli::verify::{self, VerifyOptions};
use pairlink_cli::CliError;

/// Shared information of photon-pair links with threshold detectors.
#[derive(Debug, Parser)]
#[command(name = "pairlink", version)]
struct Cli {
    /// Scenario file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Emit a CSV header and row instead of the text report.
    #[arg(long, global = true)]
    csv: bool,
    /// Seed for the Monte-Carlo and random-distribution checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a scenario file.
    Eval,
    /// Write the data behind one figure as CSV.
    Figure {
        #[arg(value_enum)]
        name: FigureName,
        /// Smallest mean pair number in the sweep.
        #[arg(long)]
        lambda_min: Option<f64>,
        /// Largest mean pair number in the sweep.
        #[arg(long)]
        lambda_max: Option<f64>,
        /// Number of log-spaced sweep points (default 200).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Find the brightness that maximizes the scenario objective.
    Optimize {
        /// H, Ig or Id; overrides the scenario file.
        #[arg(long, value_parser = objective_arg)]
        objective: Option<Objective>,
        /// Lower end of the search bracket in mean pairs (default 1e-12).
        #[arg(long)]
        bracket_low: Option<f64>,
        /// Upper end of the search bracket in mean pairs (default 1e2).
        #[arg(long)]
        bracket_high: Option<f64>,
    },
    /// Check closed forms against the truncated-sum, series and Monte-Carlo oracles.
    Verify {
        /// Comma-separated mean pair numbers for the grid checks.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        /// Comma-separated efficiencies for the grid checks.
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        /// Comma-separated dark-count probabilities for the grid checks.
        #[arg(long, value_delimiter = ',')]
        qs: Option<Vec<f64>>,
        /// Monte-Carlo trials per cell.
        #[arg(long, default_value_t = verify::DEFAULT_TRIALS)]
        trials: u64,
        /// Multiplier applied to every tolerance.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
}

fn objective_arg(s: &str) -> Result<Objective, String> {
    parse_objective(s).ok_or_else(|| format!("expected H, Ig or Id, got {s:?}"))
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Usage("this command needs --config <path>".into()))?;
    Ok(ScenarioConfig::load(path)?)
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| CliError::Write {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let output = cli.output.as_deref();
    match cli.command {
        Command::Eval => {
            let result = commands::eval(&load_config(cli.config.as_deref())?)?;
            let text = if cli.csv {
                result.render_csv()
            } else {
                result.render_text()
            };
            emit(&text, output)
        }
        Command::Figure {
            name,
            lambda_min,
            lambda_max,
            points,
        } => {
            let options = FigureOptions {
                lambda_min,
                lambda_max,
                points,
            };
            emit(&figures::render(name, options)?, output)
        }
        Command::Optimize {
            objective,
            bracket_low,
            bracket_high,
        } => {
            let config = load_config(cli.config.as_deref())?;
            let bracket = (bracket_low.is_some() || bracket_high.is_some()).then(|| {
                (
                    bracket_low.map_or(DEFAULT_LOG10_BRACKET.0, f64::log10),
                    bracket_high.map_or(DEFAULT_LOG10_BRACKET.1, f64::log10),
                )
            });
            let result = commands::optimize(&config, objective, bracket)?;
            emit(&commands::render_optimization(&result, cli.csv), output)
        }
        Command::Verify {
            lambdas,
            etas,
            qs,
            trials,
            tolerance_scale,
        } => {
            let options = VerifyOptions {
                lambdas,
                etas,
                qs,
                trials,
                seed: cli.seed.unwrap_or(verify::DEFAULT_SEED),
                tolerance_scale,
            };
            let report = verify::run(&options)?;
            emit(&report.text, output)?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::VerificationFailed)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pairlink: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
