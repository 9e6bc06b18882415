//! `hsp`: simulate, retrieve and characterize single-photon holograms from a JSON config.

mod artifacts;
mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::commands::{CountInputs, RetrievalInput};
use crate::config::{PipelineConfig, Resolved};
use crate::error::{CliError, CliResult};

const DEFAULT_OUT: &str = "hsp_out";

#[derive(Parser)]
#[command(
    name = "hsp",
    version,
    about = "Two-photon hologram simulation and phase retrieval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to the config's `output_dir`, then `hsp_out`.
    #[arg(long, env = "HSP_OUT_DIR")]
    out: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Validate the config and print the resolved parameters without computing.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate counts, ground truth and the exact hologram.
    Simulate(Common),
    /// Retrieve the phase from simulated or recorded counts.
    Retrieve {
        #[command(flatten)]
        common: Common,
        /// Directory holding the count files (default: the output directory).
        #[arg(long)]
        counts: Option<PathBuf>,
        /// Use the exact hologram and true amplitudes instead of counts.
        #[arg(long)]
        noiseless: bool,
    },
    /// Poisson Monte-Carlo uncertainty of the retrieved phase.
    Uncertainty {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Simulate, retrieve and run the Monte-Carlo in one go.
    Pipeline(Common),
}

struct Setup {
    resolved: Resolved,
    out: PathBuf,
}

fn setup(common: &Common) -> CliResult<Setup> {
    let mut cfg: PipelineConfig = config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let base_dir = common.config.parent().unwrap_or(Path::new("."));
    let resolved = cfg.resolve(base_dir)?;
    Ok(Setup { resolved, out })
}

#[derive(Serialize)]
struct DryRun<'a> {
    command: &'a str,
    output_dir: &'a Path,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts_dir: Option<&'a Path>,
    config: &'a PipelineConfig,
    grid_dx: f64,
    retrieval: &'a hsp_core::RetrievalConfig,
    mc: &'a hsp_core::McConfig,
}

fn dry_run(command: &str, s: &Setup, counts: Option<&Path>) -> CliResult<()> {
    let doc = DryRun {
        command,
        output_dir: &s.out,
        counts_dir: counts,
        config: &s.resolved.config,
        grid_dx: s.resolved.grid.dx(),
        retrieval: &s.resolved.retrieval,
        mc: &s.resolved.mc,
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))?;
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn report_retrieval(r: &hsp_core::RetrievalResult) {
    println!(
        "visibility {:.4}, objective {:.6e} (stage 1 {:.6e}), {} iterations",
        r.visibility_est, r.objective, r.stage1_objective, r.iterations
    );
    match r.radius {
        Some(f) => println!("|R| = {:.3} +/- {:.3} mm", f.radius.abs(), f.stderr),
        None => println!("no radius: phase has no measurable curvature"),
    }
}

fn report_mc(s: &hsp_core::McSummary) {
    println!(
        "{} trials ({} failed), max central phase std {:.4} rad, visibility {:.4} +/- {:.4}",
        s.n_trials,
        s.n_failed,
        s.max_central_std().unwrap_or(f64::NAN),
        s.visibility_mean,
        s.visibility_std
    );
    if let (Some(m), Some(sd)) = (s.radius_mean, s.radius_std) {
        println!("|R| over trials = {m:.3} +/- {sd:.3} mm");
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(common) => {
            let s = setup(&common)?;
            if common.dry_run {
                return dry_run("simulate", &s, None);
            }
            let (out, data) = commands::simulate(&s.resolved)?;
            out.write(
                &s.out,
                "simulate",
                s.resolved.config.seed,
                &s.resolved.config,
            )?;
            println!(
                "simulated {} pairs, {} + {} marginal events into {}",
                data.hologram.n_pairs,
                data.marginal_u.n_events,
                data.marginal_r.n_events,
                s.out.display()
            );
        }
        Command::Retrieve {
            common,
            counts,
            noiseless,
        } => {
            let s = setup(&common)?;
            let dir = counts.unwrap_or_else(|| s.out.clone());
            if common.dry_run {
                return dry_run("retrieve", &s, Some(&dir));
            }
            let grid = s.resolved.grid;
            let (out, result) = if noiseless {
                let exact = commands::read_exact(&dir, &grid)?;
                commands::retrieve(&s.resolved, RetrievalInput::Exact(&exact))?
            } else {
                let data = commands::read_counts(&dir, &grid)?;
                commands::retrieve(&s.resolved, RetrievalInput::Counts(&data))?
            };
            out.write(
                &s.out,
                "retrieve",
                s.resolved.config.seed,
                &s.resolved.config,
            )?;
            report_retrieval(&result);
        }
        Command::Uncertainty { common, counts } => {
            let s = setup(&common)?;
            let dir = counts.unwrap_or_else(|| s.out.clone());
            if common.dry_run {
                return dry_run("uncertainty", &s, Some(&dir));
            }
            let data = commands::read_counts(&dir, &s.resolved.grid)?;
            let (out, summary) = commands::uncertainty(&s.resolved, &data, None)?;
            out.write(
                &s.out,
                "uncertainty",
                s.resolved.config.seed,
                &s.resolved.config,
            )?;
            report_mc(&summary);
        }
        Command::Pipeline(common) => {
            let s = setup(&common)?;
            if common.dry_run {
                return dry_run("pipeline", &s, None);
            }
            let (mut out, data): (_, CountInputs) = commands::simulate(&s.resolved)?;
            let (ret_out, result) = commands::retrieve(&s.resolved, RetrievalInput::Counts(&data))?;
            let (mc_out, summary) =
                commands::uncertainty(&s.resolved, &data, Some(result.clone()))?;
            out.extend(ret_out);
            out.extend(mc_out);
            out.write(
                &s.out,
                "pipeline",
                s.resolved.config.seed,
                &s.resolved.config,
            )?;
            report_retrieval(&result);
            report_mc(&summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hsp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
