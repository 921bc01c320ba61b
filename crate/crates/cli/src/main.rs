//! `shiftbench`: build corrupted audio benchmarks, score predictions and run
//! the toy adaptation experiments.

mod bench;
mod exit;
mod files;
mod toy;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "shiftbench", version, about = "Audio corruption benchmarks and test-time adaptation")]
pub struct Cli {
    /// Directory that relative input paths resolve against.
    #[arg(long, global = true, env = "SHIFTBENCH_DATA_ROOT")]
    pub data_root: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index a noise library laid out as ROOT/<type>/*.wav.
    ScanNoise(bench::ScanNoiseArgs),
    /// Split a dataset manifest into train and test manifests.
    Split(bench::SplitArgs),
    /// List the corruption criteria for one or more datasets.
    Criteria(bench::CriteriaArgs),
    /// Materialize a corrupted benchmark for one criterion.
    Build(bench::BuildArgs),
    /// Score a predictions file against a benchmark.
    Eval(bench::EvalArgs),
    /// Check severity grids and noise pools for consistency.
    ValidateConfig(bench::ValidateArgs),
    /// Mean silhouette score of an embeddings file.
    Silhouette(bench::SilhouetteArgs),
    /// Toy dataset, source training and adaptation experiments.
    #[command(subcommand)]
    Toy(toy::ToyCommand),
}

/// Resolves input paths against the data root.
#[derive(Debug, Clone, Default)]
pub struct Ctx {
    pub data_root: Option<PathBuf>,
}

impl Ctx {
    pub fn input(&self, p: &Path) -> PathBuf {
        match &self.data_root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let ctx = Ctx {
        data_root: cli.data_root,
    };
    let result = match cli.command {
        Command::ScanNoise(a) => bench::scan_noise(&ctx, a),
        Command::Split(a) => bench::split(&ctx, a),
        Command::Criteria(a) => bench::criteria(a),
        Command::Build(a) => bench::build(&ctx, a),
        Command::Eval(a) => bench::eval(&ctx, a),
        Command::ValidateConfig(a) => bench::validate(&ctx, a),
        Command::Silhouette(a) => bench::silhouette(&ctx, a),
        Command::Toy(c) => toy::run(&ctx, c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(exit::classify(&e))
        }
    }
}

/// Joins the cause chain, skipping causes already quoted by their parent.
fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}
