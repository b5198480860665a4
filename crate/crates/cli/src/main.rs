mod commands;
mod config;
mod plot;
mod report;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Guess, StationaryOptions};
use crate::config::Overrides;
use crate::report::{ErrorReport, RunReport, EXIT_CONFIG};

#[derive(Debug, Parser)]
#[command(name = "harmflow", version, about = "Prescribed harmonic-mean-curvature flow of convex hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a config, test the conditions on F and the initial data.
    Check {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the flow and write diagnostics, snapshots and the final field.
    Flow {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Run even when the initial data is not admissible.
        #[arg(long = "allow_inadmissible", alias = "allow-inadmissible")]
        allow_inadmissible: bool,
    },
    /// Solve the stationary equation by Newton's method.
    Stationary {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// A radius, `auto`, or a field file. Defaults to `initial`.
        #[arg(long)]
        guess: Option<String>,
        #[arg(long = "residual_tol", alias = "residual-tol")]
        residual_tol: Option<f64>,
        #[arg(long = "max_iterations", alias = "max-iterations")]
        max_iterations: Option<usize>,
    },
    /// Write plot data and SVG charts from a diagnostics file.
    Plot {
        diagnostics: PathBuf,
        /// Output directory; defaults to `plots/` next to the diagnostics.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the flow once per value of one key, concurrently.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        key: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn emit(report: &RunReport) -> ExitCode {
    println!("{}", report.to_json());
    ExitCode::from(report.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Check { config, overrides } => {
            let report = commands::check(&config, &overrides);
            commands::print_check_summary(&report);
            emit(&report)
        }
        Command::Flow { config, overrides, allow_inadmissible } => {
            let report = commands::flow(&config, &overrides, allow_inadmissible);
            commands::print_flow_summary(&report);
            emit(&report)
        }
        Command::Stationary { config, overrides, guess, residual_tol, max_iterations } => {
            let opts = StationaryOptions {
                guess: guess.map_or(Guess::FromConfig, Guess::Given),
                residual_tol,
                max_iterations,
            };
            let report = commands::stationary(&config, &overrides, &opts);
            commands::print_stationary_summary(&report);
            emit(&report)
        }
        Command::Plot { diagnostics, out } => {
            let out = out.unwrap_or_else(|| diagnostics.parent().unwrap_or(std::path::Path::new(".")).join("plots"));
            let mut report = RunReport::new("plot");
            match plot::plot(&diagnostics, &out) {
                Ok(files) => {
                    eprintln!("wrote {} files to {}", files.len(), out.display());
                    report.artifacts = files;
                }
                Err(e) => {
                    report = report.fail(EXIT_CONFIG, "malformed_input", ErrorReport::new("plot", format!("{e:#}")));
                    commands::print_error(&report);
                }
            }
            emit(&report)
        }
        Command::Sweep { config, key, values, jobs, overrides } => {
            let (root, runs) = match sweep::plan(&config, &overrides, &key, &values) {
                Ok(p) => p,
                Err(e) => {
                    let report = RunReport::new("sweep").config_error(&e);
                    commands::print_error(&report);
                    return emit(&report);
                }
            };
            let summary = sweep::run(&config, &key, &values, &runs, jobs);
            for r in &summary.runs {
                eprintln!("{key} = {}: exit {} ({})", r.value, r.exit_code, r.status);
            }
            let json = serde_json::to_string_pretty(&summary).expect("sweep summary serializes");
            if std::fs::create_dir_all(&root).is_ok() {
                let _ = std::fs::write(root.join("sweep.json"), json.clone() + "\n");
            }
            println!("{json}");
            ExitCode::from(summary.exit_code)
        }
    }
}
