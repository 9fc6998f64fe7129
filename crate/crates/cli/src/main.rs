// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `goalplace` command-line tool.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "goalplace", version, about = "Density targets, empirical Bayes adaptation and inflation-driven placement")]
struct Cli {
    /// Worker threads; results do not depend on this
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log level: error, warn, info, debug or trace (RUST_LOG overrides)
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bin and cell densities of a placement
    Density(DensityArgs),
    /// Tool density targets from a post-route reference
    Targets(TargetsArgs),
    /// Adapt targets toward a prior ensemble of placements
    Shrink(ShrinkArgs),
    /// Inflate cells from targets or pin counts; optional range-error report
    Inflate(InflateArgs),
    /// Global placement in uniform or inflated mode
    Place(PlaceArgs),
    /// Hierarchical Leiden clustering with density/timing statistics
    Cluster(ClusterArgs),
    /// Full loop: tool targets, prior ensemble, shrinkage, final runs
    Run(RunArgs),
    /// Monte Carlo risk of MLE, James-Stein and Bayes estimators
    Risk(RiskArgs),
    /// Write a synthetic design
    Synth(SynthArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct DensityArgs {
    /// Netlist (.jsonl, or .aux for the Bookshelf-style format)
    #[arg(long)]
    pub netlist: PathBuf,
    #[arg(long)]
    pub placement: PathBuf,
    /// Bin edge in row heights
    #[arg(long, default_value_t = 10.0)]
    pub bin_scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TargetsArgs {
    /// Placement netlist
    #[arg(long)]
    pub place: PathBuf,
    /// Post-route netlist
    #[arg(long)]
    pub postroute: PathBuf,
    /// Post-route placement
    #[arg(long)]
    pub postroute_place: PathBuf,
    /// Post-synthesis size table
    #[arg(long)]
    pub sizes: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub bin_scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkKind {
    Js,
    Jsd,
    Hetero,
}

#[derive(Args, Debug, Serialize)]
pub struct ShrinkArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    /// Tool targets to adapt
    #[arg(long)]
    pub targets: PathBuf,
    /// Placements forming the prior ensemble (at least 2)
    #[arg(long, num_args = 2.., required = true)]
    pub placements: Vec<PathBuf>,
    /// Slack report; defaults to slacks stored in the netlist
    #[arg(long)]
    pub slacks: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ShrinkKind::Js)]
    pub mode: ShrinkKind,
    /// Observation noise: `auto` (std of the targets) or a number
    #[arg(long, default_value = "auto")]
    pub sigma0: String,
    /// Slack quantiles for the timing clip
    #[arg(long, default_value_t = 4)]
    pub quantiles: usize,
    /// Significance level of the per-cell normality check
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pub bin_scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct InflateArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    /// Targets; inflation factor 1/t
    #[arg(long, conflicts_with = "pin_alpha")]
    pub targets: Option<PathBuf>,
    /// Uniform sites-per-pin inflation instead of targets
    #[arg(long)]
    pub pin_alpha: Option<f64>,
    #[arg(long, default_value_t = 8.0)]
    pub r_max: f64,
    /// Placement for the range-error and correlation report (needs --targets)
    #[arg(long, requires = "targets")]
    pub placement: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub bin_scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Uniform,
    Inflated,
}

#[derive(Args, Debug, Serialize)]
pub struct PlaceArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    /// Positions of fixed cells (required when the netlist has any)
    #[arg(long)]
    pub placement: Option<PathBuf>,
    /// Targets for inflated mode
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Uniform)]
    pub mode: ModeArg,
    /// Target density (forced to 1 in inflated mode)
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Placer bin edge in row heights; automatic when omitted
    #[arg(long)]
    pub bin_scale: Option<f64>,
    #[arg(long, default_value_t = 0.07)]
    pub overflow_stop: f64,
    #[arg(long, default_value_t = 8.0)]
    pub r_max: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    /// Placements for densities (the first one is used for DBI)
    #[arg(long, num_args = 1.., required = true)]
    pub placements: Vec<PathBuf>,
    #[arg(long)]
    pub slacks: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub resolution: f64,
    #[arg(long, default_value_t = 1000)]
    pub min: usize,
    #[arg(long, default_value_t = 50000)]
    pub max: usize,
    /// Nets with more cells are not expanded
    #[arg(long, default_value_t = 64)]
    pub net_cap: usize,
    #[arg(long, default_value_t = 10.0)]
    pub bin_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct RunArgs {
    #[arg(long)]
    pub place: PathBuf,
    #[arg(long)]
    pub postroute: PathBuf,
    #[arg(long)]
    pub postroute_place: PathBuf,
    #[arg(long)]
    pub sizes: PathBuf,
    #[arg(long)]
    pub slacks: Option<PathBuf>,
    /// Fixed-cell positions of the placement netlist; taken from the
    /// post-route placement by name when omitted
    #[arg(long)]
    pub fixed: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub n1: usize,
    #[arg(long, default_value_t = 64)]
    pub n2: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub bin_scale: f64,
    #[arg(long, default_value_t = 50)]
    pub top_k: usize,
    #[arg(long, default_value_t = 4)]
    pub quantiles: usize,
    /// Concurrent placer runs
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct RiskArgs {
    #[arg(long = "N", default_value_t = 1000)]
    pub n: usize,
    #[arg(long = "A", default_value_t = 0.04)]
    pub a: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma0: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    TwoRegion,
    Mesh,
    Planted,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    /// Movable cells (per module for `planted`)
    #[arg(long, default_value_t = 2000)]
    pub cells: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Relative target noise of the two-region golden placement
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Mesh utilization
    #[arg(long, default_value_t = 0.7)]
    pub utilization: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .parse_env("RUST_LOG")
        .format_timestamp(None)
        .init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Density(a) => commands::density(a),
        Command::Targets(a) => commands::targets(a),
        Command::Shrink(a) => commands::shrink(a),
        Command::Inflate(a) => commands::inflate(a),
        Command::Place(a) => commands::place(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Run(a) => commands::run(a),
        Command::Risk(a) => commands::risk(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
