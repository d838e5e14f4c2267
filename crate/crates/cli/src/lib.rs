//! Command layer of the `vld` binary: dataset generation, batch runs,
//! ablations and reports.

pub mod config;
pub mod dataset;
pub mod gen;
pub mod runner;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{resolve, GenConfig, RunConfig};
use runner::Study;

#[derive(Parser, Debug)]
#[command(name = "vld", version, about = "Window-level drone delivery simulator")]
pub struct Cli {
    /// JSON settings file; flags override it, it overrides VLD_* variables.
    #[arg(long, global = true, env = "VLD_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate worlds and tasks.
    Gen(GenFlags),
    /// Run every task of a dataset and report metrics.
    Run(RunFlags),
    /// Run a dataset under each variant of a study.
    Ablate {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, value_enum)]
        study: Study,
        /// Comma-separated root seeds; defaults to the run seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Recompute metrics from trace files.
    Report {
        /// Trace files or directories searched for *.jsonl.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Dataset to re-derive every outcome against.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Serialize)]
struct GenFlags {
    /// Dataset directory to write.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// Root seed; the same seed gives the same dataset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Number of tasks.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tasks: Option<usize>,
    /// Target floor for every task.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    floor: Option<u32>,
    /// Only target buildings with at least this many floors.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    min_building_floors: Option<u32>,
    /// easy, moderate or hard for every task.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    difficulty: Option<String>,
    /// Buildings per world.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    buildings: Option<usize>,
    /// Fewest floors per building.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    floors_min: Option<u32>,
    /// Most floors per building.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    floors_max: Option<u32>,
    /// Tasks drawn from each world.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tasks_per_world: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct RunFlags {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<PathBuf>,
    /// Directory for traces and the report.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    /// oracle or remote.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    backend: Option<String>,
    /// exact, calibrated, or a noise profile JSON file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<String>,
    /// Remote endpoint URL (else VLD_REMOTE_URL).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    endpoint: Option<String>,
    /// Remote bearer token (else VLD_REMOTE_TOKEN).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    token: Option<String>,
    /// Model name sent to the remote endpoint.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    /// Per-request timeout for the remote backend.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    timeout_secs: Option<u64>,
    /// ours, random or default.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    viewpoint: Option<String>,
    /// backend or center-only.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    choice: Option<String>,
    /// ours or direct-count.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    floorloc: Option<String>,
    /// Actions allowed per episode.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    step_budget: Option<u32>,
    /// Minimum mean-depth gap for a split, meters.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    /// Far-side depth limit of a split, meters.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d_max: Option<f64>,
    /// Longest single translation, meters.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    l_max: Option<f64>,
    /// Depth slices per view.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    slices: Option<usize>,
    /// Clearance kept from buildings, meters.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    safety_radius: Option<f64>,
    /// Delivery distance from the window, meters.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    standoff: Option<f64>,
    /// Stop within this distance of the delivery point to succeed, meters.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    success_radius: Option<f64>,
    /// Root seed for the episode and noise streams.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    jobs: Option<usize>,
}

/// Parses `args` (program name first) and runs the command, returning what
/// the binary prints on success.
pub fn run_args<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    execute(Cli::try_parse_from(args)?)
}

pub fn execute(cli: Cli) -> Result<String> {
    let config = cli.config.as_deref();
    Ok(match cli.command {
        Command::Gen(flags) => gen::gen(&resolve::<GenConfig, _>(config, &flags)?)?,
        Command::Run(flags) => runner::run(&resolve::<RunConfig, _>(config, &flags)?)?.table(),
        Command::Ablate { run, study, seeds } => {
            let cfg: RunConfig = resolve(config, &run)?;
            let seeds = if seeds.is_empty() { vec![cfg.seed] } else { seeds };
            runner::ablate(&cfg, study, &seeds)?.table()
        }
        Command::Report { traces, data, out } => {
            let file = runner::report_traces(&traces, data.as_deref())?;
            if let Some(out) = out {
                dataset::write_atomic(&out, &(serde_json::to_string_pretty(&file)? + "\n"))?;
            }
            file.table()
        }
    })
}
