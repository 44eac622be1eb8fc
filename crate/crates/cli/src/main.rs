use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lcl_cli::{run, sweep, Parameter, RunManifest};

/// Numerical checks of weighted geometric-mean (Levin-Cochran-Lee) and
/// two-weight Hardy inequalities on homogeneous groups.
#[derive(Parser)]
#[command(name = "lcl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify every case and test function.
    Run(Common),
    /// Repeat each case over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        parameter: Parameter,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true, required = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Case files (JSON).
    #[arg(long, num_args = 0..)]
    cases: Vec<PathBuf>,
    /// Global seed for Monte Carlo streams; LCL_SEED takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "lcl-out")]
    out: PathBuf,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl Common {
    fn manifest(self) -> Result<RunManifest, String> {
        let seed = match std::env::var("LCL_SEED") {
            Ok(s) => s.trim().parse().map_err(|_| format!("LCL_SEED must be a non-negative integer, got `{s}`"))?,
            Err(_) => self.seed,
        };
        Ok(RunManifest {
            cases: self.cases,
            seed,
            out: self.out,
            rel_tol: self.rel_tol,
            mc_samples: self.mc_samples,
            jobs: self.jobs,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => c.manifest().and_then(|m| run(&m).map_err(|e| e.to_string())),
        Command::Sweep {
            common,
            parameter,
            values,
        } => common
            .manifest()
            .and_then(|m| sweep(&m, parameter, &values).map_err(|e| e.to_string())),
    };
    match result {
        Ok(report) => {
            for r in report.rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("error: {} ({}): {}", r.case_id, r.test_function, r.error.as_deref().unwrap_or(""));
            }
            let t = &report.totals;
            eprintln!("{} rows: {} passed, {} failed, {} errors", t.rows, t.passed, t.failed, t.errors);
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
