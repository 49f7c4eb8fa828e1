use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dftns_cli::{output_dir_for, resolve_options, run, run_sweep, CliError, Preset, RunOptions, RunStatus};

/// Exit code of a run that stopped on repeated non-finite values.
const EXIT_ABORTED: u8 = 3;

#[derive(Parser)]
#[command(name = "dftns", version, about = "Denoising Fisher training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set max_iter=500`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Run once per seed into `<out>/seed-<seed>` instead of a single run.
        #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
        seeds: Vec<u64>,
        /// Concurrent runs for `--seeds`.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_record());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let Command::Run {
        config,
        overrides,
        preset,
        seed,
        out,
        seeds,
        jobs,
    } = Cli::parse().command;
    let opts = RunOptions {
        config: Some(config),
        preset,
        overrides,
        seed,
        out,
    };
    let resolved = match resolve_options(&opts) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let dir = output_dir_for(&resolved, opts.config.as_deref());

    let results = if seeds.is_empty() {
        vec![run(&resolved, &dir)]
    } else {
        run_sweep(&resolved, &seeds, &dir, jobs)
    };
    let mut code = ExitCode::SUCCESS;
    for result in results {
        match result {
            Ok(report) => {
                println!(
                    "{}",
                    serde_json::json!({
                        "status": report.status,
                        "output_dir": report.output_dir,
                        "summary": report.summary,
                    })
                );
                if report.status == RunStatus::Aborted {
                    code = ExitCode::from(EXIT_ABORTED);
                }
            }
            Err(e) => code = fail(&e),
        }
    }
    code
}
