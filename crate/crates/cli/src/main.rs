use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use emodist_cli::{parse_stages, run_pipeline, PipelineConfig, RunOptions, Stage};

#[derive(Parser)]
#[command(name = "emodist", version, about = "Compare model emotion distributions with human annotator distributions")]
struct Cli {
    /// Pipeline config file.
    #[arg(long, global = true, default_value = "emodist.toml")]
    config: PathBuf,
    /// Override the root seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load corpora and draw the stratified core sets.
    Ingest,
    /// Collect model responses into the response stores.
    Sample {
        /// Endpoint for every `http` model, overriding the config.
        #[arg(long)]
        base_url: Option<String>,
    },
    /// Build per-text human and model distributions.
    Dists,
    /// Divergence, entropy and per-category metrics.
    Evaluate,
    /// Lexical transparency scores and their predictivity.
    Transparency,
    /// Cross-validated post-hoc calibration.
    Calibrate,
    /// Significance tests and bootstrap intervals.
    Stats,
    /// Markdown summary of all results.
    Report,
    /// Run several stages in order.
    Run {
        /// Comma-separated stage names, or `all`.
        #[arg(long, default_value = "all")]
        stages: String,
        #[arg(long)]
        base_url: Option<String>,
    },
    /// Write a synthetic corpus and config for an offline run.
    DemoData {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (stages, base_url) = match cli.command {
        Command::DemoData { out } => {
            let path = emodist_cli::demo::write_demo(&out, cli.seed.unwrap_or(20240611))
                .with_context(|| format!("writing demo data to {}", out.display()))?;
            println!("{}", path.display());
            return Ok(());
        }
        Command::Run { stages, base_url } => (parse_stages(&stages)?, base_url),
        Command::Sample { base_url } => (BTreeSet::from([Stage::Sample]), base_url),
        Command::Ingest => (BTreeSet::from([Stage::Ingest]), None),
        Command::Dists => (BTreeSet::from([Stage::Dists]), None),
        Command::Evaluate => (BTreeSet::from([Stage::Evaluate]), None),
        Command::Transparency => (BTreeSet::from([Stage::Transparency]), None),
        Command::Calibrate => (BTreeSet::from([Stage::Calibrate]), None),
        Command::Stats => (BTreeSet::from([Stage::Stats]), None),
        Command::Report => (BTreeSet::from([Stage::Report]), None),
    };
    if stages.is_empty() {
        log::info!("no stages selected; nothing to do");
        return Ok(());
    }
    let mut config = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    run_pipeline(&config, &stages, &RunOptions { base_url })?;
    Ok(())
}
