//! `cellwlan`: cell-level throughput and delay analysis of multi-cell
//! 802.11 WLANs.
//!
//! Exit status is 0 on success, 1 when the configuration (or, for
//! `validate`, the deployment) is invalid, and 2 when a solver or simulator
//! fails.

mod config;
mod output;
mod presets;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{AnalysisConfig, OutputFormat};
use output::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("analysis failed: {0}")]
    Failure(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Failure(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cellwlan", version, about = "Cell-level analysis of multi-cell 802.11 WLANs")]
struct Cli {
    /// Analysis configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for bundle.json, config.toml and CSV tables. Without it,
    /// results go to standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Saturated throughput: per-cell β, γ, x and throughputs, plus the state table.
    Saturation,
    /// AP throughput under long-lived TCP downloads.
    TcpLong,
    /// Flow-transfer delays under short TCP downloads (simulation and analysis).
    TcpShort,
    /// Unblocked fractions in the limit of infinite access intensity.
    InfiniteRho,
    /// Access intensities and unblocked fractions over a list of payloads.
    Sweep,
    /// Checks that every pair of cells is either fully dependent or independent.
    Validate,
    /// Lists built-in deployments.
    Presets {
        /// Print the named preset as an explicit deployment configuration.
        #[arg(long)]
        export: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, CliError> {
    if let Verb::Presets { export } = &cli.verb {
        return presets_verb(cli, export.as_deref());
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("--config is required for this command".into()))?;
    let mut cfg = AnalysisConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let (bundle, code) = match cli.verb {
        Verb::Saturation => (run::saturation(&cfg)?, 0),
        Verb::TcpLong => (run::tcp_long(&cfg)?, 0),
        Verb::TcpShort => (run::tcp_short(&cfg)?, 0),
        Verb::InfiniteRho => (run::infinite_rho(&cfg)?, 0),
        Verb::Sweep => (run::sweep(&cfg)?, 0),
        Verb::Validate => {
            let (b, ok) = run::validate(&cfg)?;
            (b, if ok { 0 } else { 1 })
        }
        Verb::Presets { .. } => unreachable!("handled above"),
    };
    let out_cfg = cfg.output.clone().unwrap_or(config::OutputSection {
        dir: None,
        format: None,
    });
    let format = cli.format.or(out_cfg.format).unwrap_or(OutputFormat::Csv);
    let dir = cli.out.clone().or(out_cfg.dir.map(PathBuf::from));
    for w in &bundle.warnings {
        eprintln!("warning: {w}");
    }
    match dir {
        Some(d) => bundle.write_dir(&d, format)?,
        None => print!("{}", bundle.render(format)),
    }
    Ok(code)
}

fn presets_verb(cli: &Cli, export: Option<&str>) -> Result<u8, CliError> {
    if let Some(name) = export {
        let section = presets::explicit_section(name).ok_or_else(|| {
            CliError::Validation(format!(
                "unknown preset \"{name}\" ({})",
                presets::NAMES.join(", ")
            ))
        })?;
        #[derive(serde::Serialize)]
        struct Wrapper {
            deployment: config::DeploymentSection,
        }
        print!(
            "{}",
            toml::to_string(&Wrapper {
                deployment: section
            })
            .expect("deployment serializes")
        );
        return Ok(0);
    }
    let mut t = Table::new("presets", &["name", "cells", "edges", "description"]);
    for name in presets::NAMES {
        let dep = presets::deployment(name).expect("listed preset exists");
        let g = cellwlan::topology::build_contention_graph(&dep).expect("preset is valid");
        let edges: Vec<String> = g
            .edges()
            .iter()
            .map(|(a, b)| format!("{}-{}", a + 1, b + 1))
            .collect();
        t.push(vec![
            name.into(),
            dep.cells.len().into(),
            Value::Text(edges.join(" ")),
            presets::describe(name).unwrap_or_default().into(),
        ]);
    }
    match cli.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => print!("{}", t.to_csv()),
        OutputFormat::Doc => println!(
            "{}",
            serde_json::to_string_pretty(&t).expect("table serializes")
        ),
    }
    Ok(0)
}
