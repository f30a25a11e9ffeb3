//! Command-line front end: `spinecho <quantum-echo|classical-echo|fig2|validate>`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{render_report, Options, Summary};
use config::{CliError, CliResult, ConfigMap};

#[derive(Debug, Parser)]
#[command(name = "spinecho", version, about = "Entropy and magnetization of classical and quantum spin echoes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named parameter set (`fig1` for quantum-echo, `fig2` for fig2).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Validate the configuration and exit without writing.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Print a machine-readable summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Also write SVG plots next to the CSV files.
    #[arg(long, global = true)]
    pub svg: bool,
    /// Override one configuration key, e.g. `--set tau=50`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, global = true, hide = true, default_value_t = 1.0)]
    pub tolerance_scale: f64,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Quantum echo over field cells; writes quantum_echo.csv.
    QuantumEcho,
    /// Classical dipole ensemble; writes classical_echo.csv.
    ClassicalEcho,
    /// Total entropy produced vs echo amplitude; writes entropy_vs_decay.csv.
    Fig2,
    /// Runs the oracle suite.
    Validate,
}

fn load_config(cli: &Cli) -> CliResult<ConfigMap> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            ConfigMap::parse(&text)?
        }
        None => ConfigMap::default(),
    };
    for o in &cli.overrides {
        let (k, v) = ConfigMap::parse_override(o)?;
        cfg.set(&k, v);
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed.to_string());
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> CliResult<Summary> {
    let cfg = load_config(cli)?;
    let opts = Options {
        out: cli.out.clone(),
        preset: cli.preset.clone(),
        dry_run: cli.dry_run,
        svg: cli.svg,
        tolerance_scale: cli.tolerance_scale,
    };
    match cli.command {
        Command::QuantumEcho => commands::quantum_echo(&cfg, &opts),
        Command::ClassicalEcho => commands::classical_echo(&cfg, &opts),
        Command::Fig2 => commands::fig2(&cfg, &opts),
        Command::Validate => commands::validate(&cfg, &opts),
    }
}

fn print_summary(summary: &Summary, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(summary).expect("summary serializes"));
        return;
    }
    if let Some(report) = &summary.report {
        print!("{}", render_report(report));
    }
    let verb = if summary.dry_run { "would write" } else { "wrote" };
    for f in &summary.files {
        println!("{verb} {}", f.display());
    }
    if summary.dry_run {
        println!("configuration ok");
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print_summary(&summary, cli.json);
            match summary.report.as_ref().filter(|r| !r.all_passed()) {
                Some(r) => {
                    let failed: Vec<&str> = r.failures().map(|c| c.name.as_str()).collect();
                    let e = CliError::ValidationFailed(failed.join(", "));
                    eprintln!("error: {e}");
                    e.exit_code()
                }
                None => 0,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
