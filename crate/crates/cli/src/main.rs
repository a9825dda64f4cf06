//! `crossings`: enumerate closed geodesics, count their crossings and cusp
//! excursions, and report the equidistribution statistics over a sweep of
//! length cutoffs.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error, 3 missing
//! input artifact, 4 numerical instability. Failures print one line
//! `error kind=<kind> code=<code> message=<json string>` on stderr.

// `!(x >= 0.0)` is how range guards reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::{parse_cutoffs, Cutoffs, Overrides, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "crossings",
    version,
    about = "Intersection statistics of closed geodesics on hyperbolic surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: GlobalOpts,
}

#[derive(Args)]
struct GlobalOpts {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// punctured_torus or genus2_octagon.
    #[arg(long, global = true)]
    surface: Option<String>,
    /// Comma-separated length cutoffs, e.g. 6,8,9,10.
    #[arg(long = "T", value_name = "LIST", global = true, value_parser = parse_cutoffs)]
    t: Option<Cutoffs>,
    #[arg(long, global = true)]
    cells: Option<usize>,
    #[arg(long, global = true)]
    core_eps: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Count powers of primitive geodesics (`--include-powers=false` to exclude).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    include_powers: Option<bool>,
    /// Recompute outputs that already exist.
    #[arg(long, global = true)]
    force: bool,
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Enumerate closed geodesics for every cutoff into the cache.
    Enumerate,
    /// Count crossings and compute per-cutoff statistics.
    Intersect,
    /// Tabulate cusp excursions by winding.
    Excursions,
    /// Check the Liouville measure identities.
    LiouvilleCheck,
    /// Assemble the convergence report from the per-cutoff summaries.
    Report,
    /// Run every stage in order.
    All,
}

fn run(cli: Cli) -> CliResult<()> {
    let o = cli.opts;
    let cfg = RunConfig::load(
        o.config.as_deref(),
        Overrides {
            surface: o.surface,
            t: o.t.map(|c| c.0),
            cells: o.cells,
            core_eps: o.core_eps,
            seed: o.seed,
            cache_dir: o.cache_dir,
            out_dir: o.out_dir,
            include_powers: o.include_powers,
            sequential: o.sequential,
        },
    )?;
    let ctx = Context::new(cfg, o.force)?;
    match cli.command {
        Command::Enumerate => commands::enumerate(&ctx),
        Command::Intersect => commands::intersect(&ctx),
        Command::Excursions => commands::excursions(&ctx),
        Command::LiouvilleCheck => commands::liouville(&ctx),
        Command::Report => commands::report(&ctx),
        Command::All => commands::all(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().lines().next().unwrap_or("invalid arguments").to_string());
            eprintln!("{}", e.render());
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}
