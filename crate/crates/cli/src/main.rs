//! `mfcomm`: configuration-driven experiments with CSV and JSON reports.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! numerical or precondition failures.

mod commands;
mod config;
mod error;
mod output;

use clap::Parser;
use commands::{Command, Run};
use config::Config;
use error::{CliError, CliResult};
use mfcomm::rng::Seeds;
use output::{Output, Summary};
use serde_json::json;
use std::path::PathBuf;
use std::time::Instant;

/// Overrides the output directory of the config file; `--out` wins over it.
const OUT_ENV: &str = "MFCOMM_OUT";

#[derive(Debug, Parser)]
#[command(name = "mfcomm", version, about = "Modulated energy and commutator experiments")]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    command: Command,

    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Master seed; overrides `output.seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for internal parallelism.
    #[arg(long)]
    threads: Option<usize>,

    /// Comma-separated report formats: csv, json.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
}

fn execute(cli: &Cli, out_dir: &mut Option<PathBuf>) -> CliResult<()> {
    let start = Instant::now();
    let mut cfg = Config::load(&cli.config)?;

    let configured = PathBuf::from(cfg.str_or("output", "dir", "mfcomm-out")?);
    let dir = match (&cli.out, std::env::var_os(OUT_ENV)) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => configured,
    };
    cfg.note("output", "dir", json!(dir.display().to_string()));
    let formats = match &cli.format {
        Some(f) => f.clone(),
        None => cfg.str_list_or("output", "formats", &["csv", "json"])?,
    };
    cfg.note("output", "formats", json!(formats));
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg.u64_opt("output", "seed")?.unwrap_or(0),
    };
    cfg.note("output", "seed", json!(seed));
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot start {n} threads: {e}")))?;
    }

    let out = Output::new(dir.clone(), &formats)?;
    *out_dir = Some(dir);
    let mut run = Run { cfg, seeds: Seeds::new(seed), out, summary: Summary::default() };
    commands::dispatch(cli.command, &mut run)?;

    for w in &run.summary.warnings {
        eprintln!("warning: {w}");
    }
    if run.out.json {
        let summary = json!({
            "command": cli.command.name(),
            "versions": { "mfcomm": mfcomm::VERSION, "mfcomm-cli": env!("CARGO_PKG_VERSION") },
            "config_path": run.cfg.path().display().to_string(),
            "config": run.cfg.echo(),
            "seed": seed,
            "threads": cli.threads.unwrap_or_else(rayon::current_num_threads),
            "wall_clock_seconds": start.elapsed().as_secs_f64(),
            "fitted_constants": run.summary.fitted,
            "results": run.summary.results,
            "warnings": run.summary.warnings,
            "files": run.out.files,
        });
        run.out.write_json("summary.json", &summary)?;
    }
    println!("{}: wrote {} to {}", cli.command.name(), run.out.files.join(", "), run.out.dir.display());
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let mut out_dir = None;
    let code = match execute(&cli, &mut out_dir) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            if code == 2 {
                let record = e.record();
                eprintln!("{record}");
                if let Some(dir) = out_dir.filter(|d| d.is_dir()) {
                    let text = serde_json::to_string_pretty(&record).expect("JSON values serialize");
                    let _ = std::fs::write(dir.join("error.json"), text + "\n");
                }
            }
            code
        }
    };
    std::process::exit(code);
}
