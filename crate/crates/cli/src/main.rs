use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use teco_core::flow::FlowParams;

mod eval;
mod tools;

/// Temporal-coherence metrics, ping-pong sequences, loss checks and
/// preference-score fitting for video generation outputs.
#[derive(Debug, Parser)]
#[command(name = "teco", version)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "TECO_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate generated frames against a reference sequence.
    Eval(eval::EvalArgs),
    /// Estimate dense flow between two frames and write a .flo file.
    Flow(tools::FlowArgs),
    /// Write the ping-pong sequence (and optionally triplets) of a frame directory.
    Pp(tools::PpArgs),
    /// Evaluate generator loss terms on frame directories.
    Losses(tools::LossArgs),
    /// Fit Bradley-Terry scores to pairwise votes.
    Bt(tools::BtArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Vsr,
    Uvt,
}

#[derive(Debug, Clone, Args)]
pub struct FlowOpts {
    #[arg(long, default_value_t = 0.5)]
    pub pyr_scale: f64,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 15)]
    pub winsize: usize,
    #[arg(long, default_value_t = 3)]
    pub iterations: usize,
    #[arg(long, default_value_t = 5)]
    pub poly_n: usize,
    #[arg(long, default_value_t = 1.2)]
    pub poly_sigma: f64,
}

impl FlowOpts {
    pub fn params(&self) -> Result<FlowParams> {
        let p = FlowParams {
            pyramid_scale: self.pyr_scale,
            levels: self.levels,
            window: self.winsize,
            iterations: self.iterations,
            poly_n: self.poly_n,
            poly_sigma: self.poly_sigma,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Parses `"a,b"` into a pair of counts.
pub fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let Some((a, b)) = s.split_once(',') else {
        bail!("expected two comma-separated counts, got {s:?}");
    };
    Ok((a.trim().parse().with_context(|| format!("bad count in {s:?}"))?, b.trim().parse().with_context(|| format!("bad count in {s:?}"))?))
}

pub fn write_json(path: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Outcome of a command that ran to completion.
pub enum Status {
    Ok,
    AssertionFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    let result = pool.install(|| match cli.command {
        Command::Eval(a) => eval::run(a),
        Command::Flow(a) => tools::flow(a),
        Command::Pp(a) => tools::pp(a),
        Command::Losses(a) => tools::losses(a),
        Command::Bt(a) => tools::bt(a),
    });
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::AssertionFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
