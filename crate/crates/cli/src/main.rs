use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parabolic_cli::{builtin, run_scenario, run_suite, Overrides, RunOptions, RunSummary, Scenario};

#[derive(Parser)]
#[command(
    name = "parabolic",
    version,
    about = "Solve and certify nonlocal parabolic scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify and solve one scenario file.
    Solve {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Solve every `*.toml` scenario in a directory.
    Suite {
        dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the certificates of one scenario without solving.
    Certify {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write the built-in scenario files into a directory.
    ExportBuiltins { dir: PathBuf },
}

#[derive(Args)]
struct Common {
    /// Solve even when a certificate fails; outputs are marked UNCERTIFIED.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Base output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the number of cells on every axis.
    #[arg(long)]
    grid: Option<usize>,
}

impl Common {
    fn options(&self, certify_only: bool) -> RunOptions {
        RunOptions {
            force: self.force,
            certify_only,
            out: self.out.clone(),
            overrides: Overrides {
                seed: self.seed,
                dt: self.dt,
                grid: self.grid,
            },
        }
    }
}

fn report(summary: &RunSummary) {
    print!("{}", summary.to_text());
    println!("outputs: {}", summary.out_dir.display());
    println!("wall_time: {:.3} s", summary.wall_time.as_secs_f64());
}

fn single(path: &Path, opts: RunOptions) -> i32 {
    let outcome = Scenario::from_path(path)
        .and_then(|s| s.with_overrides(&opts.overrides))
        .and_then(|s| run_scenario(&s, &opts));
    match outcome {
        Ok(summary) => {
            report(&summary);
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { scenario, common } => single(&scenario, common.options(false)),
        Command::Certify { scenario, common } => single(&scenario, common.options(true)),
        Command::Suite { dir, common } => match run_suite(&dir, &common.options(false)) {
            Ok(suite) => {
                print!("{}", suite.table());
                for row in &suite.rows {
                    if let Ok(s) = &row.outcome {
                        println!("{}: {:.3} s", s.name, s.wall_time.as_secs_f64());
                    }
                }
                suite.exit_code()
            }
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
        Command::ExportBuiltins { dir } => match builtin::export(&dir) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
