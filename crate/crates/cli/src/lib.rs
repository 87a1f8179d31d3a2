//! Command-line driver: reads a TOML run configuration and writes JSON,
//! CSV and text results.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "nlpe", version, about = "Principal spectrum points of time-periodic nonlocal dispersal systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomised probes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, global = true, env = "NLPE_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Principal spectrum point by both routes, with the eigenfunction.
    Spectrum,
    /// Existence verdict and premise checks.
    Criteria,
    /// Lambda under doubling resolution and time steps.
    Convergence {
        /// Overrides `command.levels`.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Pointwise periodic eigenvalues and `h` at every node.
    FloquetMap,
}

/// Runs one command; returns the line printed on success.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("`--threads` must be positive"));
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::config("`--config` is required"))?;
    let cfg = RunConfig::load(path)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    match &cli.command {
        Command::Spectrum => {
            let s = commands::spectrum(&cfg, &out, cli.seed)?;
            Ok(format!(
                "lambda_principal = {:.12} (max h = {:.12}, route difference {})",
                s.lambda_principal,
                s.max_h,
                s.route_difference.map_or("-".into(), |d| format!("{d:.3e}"))
            ))
        }
        Command::Criteria => {
            let r = commands::criteria(&cfg, &out)?;
            Ok(r.to_text())
        }
        Command::Convergence { levels } => {
            let c = commands::convergence(&cfg, &out, levels.unwrap_or(cfg.command.levels))?;
            let mut s = String::new();
            for r in &c.rows {
                s.push_str(&format!(
                    "{:?} level {} n = {} steps = {} lambda = {:.12} order = {}\n",
                    r.kind,
                    r.level,
                    r.resolution,
                    r.time_steps,
                    r.lambda,
                    r.order.map_or("-".into(), |o| format!("{o:.2}"))
                ));
            }
            let opt = |v: Option<f64>| v.map_or("-".into(), |o| format!("{o:.2}"));
            s.push_str(&format!("fitted order: space {} time {}", opt(c.space_order), opt(c.time_order)));
            Ok(s)
        }
        Command::FloquetMap => {
            let f = commands::floquet_map(&cfg, &out)?;
            Ok(format!("h in [{:.12}, {:.12}]", f.min_h, f.max_h))
        }
    }
}
