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

//! Multi-run exploration: Hellinger objective, target shifting, Pareto fronts
//! and the tool-target / prior / shrinkage / final-run loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{achieved_density, tool_target};
use crate::ebayes::{
    build_prior, james_stein, js_timing_clip, slack_to_budget, PriorEnsemble, ShrinkageResult, Sigma0, TARGET_FLOOR,
};
use crate::error::{Error, Result};
use crate::inflation::{range_error, target_correlation};
use crate::netlist::{Netlist, Placement, SizeTable};
use crate::placer::{place_with_targets, PlacerConfig, PlacerMode};

pub const HIST_BINS: usize = 100;
pub const MAX_SHIFT: f64 = 0.2;

/// Counts of `values` in `bins` equal-width bins over `[0, 1]`; values outside
/// the interval land in the end bins.
pub fn density_histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &v in values {
        let k = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        h[k] += 1.0;
    }
    h
}

/// `(1/sqrt 2) ||sqrt p - sqrt q||_2` after normalizing both histograms.
pub fn hellinger(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!("histograms have {} and {} bins", p.len(), q.len())));
    }
    if p.iter().chain(q).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("histogram entries must be finite and non-negative"));
    }
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if !(sp > 0.0 && sq > 0.0) {
        return Err(Error::invalid("empty histogram"));
    }
    let d: f64 = p.iter().zip(q).map(|(a, b)| ((a / sp).sqrt() - (b / sq).sqrt()).powi(2)).sum();
    Ok((0.5 * d).sqrt().min(1.0))
}

/// `clamp(t + delta, 1e-3, 1)`.
pub fn shift_targets(targets: &[f64], delta: f64) -> Result<Vec<f64>> {
    if !(delta.abs() <= MAX_SHIFT) {
        return Err(Error::invalid(format!("density shift {delta} outside [-{MAX_SHIFT}, {MAX_SHIFT}]")));
    }
    Ok(targets.iter().map(|t| (t + delta).clamp(TARGET_FLOOR, 1.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub hpwl: f64,
    pub hellinger: f64,
    pub max_overflow: f64,
    pub total_overflow: f64,
    pub range_error: f64,
    pub cell_pearson: Option<f64>,
}

impl RunMetrics {
    /// Minimized axes: HPWL, Hellinger, total overflow.
    pub fn axes(&self) -> [f64; 3] {
        [self.hpwl, self.hellinger, self.total_overflow]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    Tool,
    Js,
    Jsd,
}

impl TargetMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetMode::Tool => "tool",
            TargetMode::Js => "js",
            TargetMode::Jsd => "jsd",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub id: usize,
    pub mode: TargetMode,
    pub delta: f64,
    pub config: PlacerConfig,
    pub metrics: RunMetrics,
    pub converged: bool,
    /// Where the placement was written, if it was.
    pub placement_path: Option<String>,
    #[serde(skip)]
    pub placement: Placement,
    /// Achieved densities of the movable standard cells.
    #[serde(skip)]
    pub achieved: Vec<f64>,
}

/// `a` dominates `b`: no worse on every axis, better on one.
pub fn dominates(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Indices of the non-dominated points, ordered by the first axis (stable).
pub fn pareto_indices(points: &[[f64; 3]]) -> Vec<usize> {
    let mut front: Vec<usize> = (0..points.len())
        .filter(|&i| !points.iter().any(|p| dominates(p, &points[i])))
        .collect();
    front.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    front
}

/// Non-dominated runs under minimization of (HPWL, Hellinger, total overflow).
pub fn pareto(records: &[RunRecord]) -> Vec<usize> {
    let pts: Vec<[f64; 3]> = records.iter().map(|r| r.metrics.axes()).collect();
    pareto_indices(&pts)
}

/// Uniform sampling ranges for the per-run parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerRanges {
    pub delta: (f64, f64),
    pub gamma_base: (f64, f64),
    /// log10 range of the initial density weight ratio.
    pub log10_init_lambda: (f64, f64),
    pub lambda_growth: (f64, f64),
}

impl Default for SamplerRanges {
    fn default() -> Self {
        SamplerRanges {
            delta: (-MAX_SHIFT, MAX_SHIFT),
            gamma_base: (0.3, 1.0),
            log10_init_lambda: (-4.0, -2.0),
            lambda_growth: (1.03, 1.08),
        }
    }
}

fn sample(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreConfig {
    pub n_phase1: usize,
    pub n_phase2: usize,
    pub seed: u64,
    /// Density grid for targets and evaluation, in row heights.
    pub eval_bin_scale: f64,
    /// Pareto runs feeding the prior ensemble.
    pub top_k: usize,
    /// Number of slack quantiles for the timing clip.
    pub quantiles: usize,
    /// `None` estimates sigma0 from the tool targets.
    pub sigma0: Option<f64>,
    pub placer: PlacerConfig,
    pub ranges: SamplerRanges,
    /// Concurrent placer runs; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            n_phase1: 64,
            n_phase2: 64,
            seed: 0,
            eval_bin_scale: 10.0,
            top_k: 50,
            quantiles: 4,
            sigma0: None,
            placer: PlacerConfig { mode: PlacerMode::Inflated, ..Default::default() },
            ranges: SamplerRanges::default(),
            workers: None,
        }
    }
}

/// Inputs of a full run: the placement netlist (slacks on its cells), its
/// fixed-cell placement, and the post-route reference.
#[derive(Debug, Clone, Copy)]
pub struct ExploreInputs<'a> {
    pub netlist: &'a Netlist,
    pub fixed: &'a Placement,
    pub postroute: &'a Netlist,
    pub postroute_positions: &'a Placement,
    pub sizes: &'a SizeTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode: TargetMode,
    pub runs: usize,
    pub front_size: usize,
    pub mean_hellinger: f64,
    pub mean_hpwl: f64,
    pub mean_range_error: f64,
    pub mean_cell_pearson: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ModeResult {
    pub mode: TargetMode,
    /// Full-netlist targets before any shift.
    pub targets: Vec<f64>,
    pub runs: Vec<RunRecord>,
    pub front: Vec<usize>,
    pub summary: ModeSummary,
}

#[derive(Debug, Clone)]
pub struct GoalplaceResult {
    pub tool_targets: Vec<f64>,
    pub movable: Vec<usize>,
    pub phase1: Vec<RunRecord>,
    pub phase1_front: Vec<usize>,
    pub prior: PriorEnsemble,
    pub js: ShrinkageResult,
    pub jsd: ShrinkageResult,
    pub modes: Vec<ModeResult>,
}

impl GoalplaceResult {
    pub fn mode(&self, mode: TargetMode) -> &ModeResult {
        self.modes.iter().find(|m| m.mode == mode).expect("every mode is run")
    }

    /// One row per target mode.
    pub fn comparison_csv(&self) -> String {
        let mut s = String::from("mode,runs,front_size,mean_hellinger,mean_hpwl,mean_range_error,mean_cell_pearson\n");
        for m in &self.modes {
            let x = &m.summary;
            let corr = x.mean_cell_pearson.map_or(String::new(), |c| c.to_string());
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                x.mode.as_str(),
                x.runs,
                x.front_size,
                x.mean_hellinger,
                x.mean_hpwl,
                x.mean_range_error,
                corr
            ));
        }
        s
    }
}

/// Front rows as CSV.
pub fn front_csv(records: &[RunRecord], front: &[usize]) -> String {
    let mut s = String::from(
        "id,mode,delta,gamma_base,init_lambda,lambda_growth,seed,hpwl,hellinger,max_overflow,total_overflow,range_error,cell_pearson,converged\n",
    );
    for &i in front {
        let r = &records[i];
        let m = &r.metrics;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.id,
            r.mode.as_str(),
            r.delta,
            r.config.gamma_base,
            r.config.init_lambda,
            r.config.lambda_growth,
            r.config.seed,
            m.hpwl,
            m.hellinger,
            m.max_overflow,
            m.total_overflow,
            m.range_error,
            m.cell_pearson.map_or(String::new(), |c| c.to_string()),
            r.converged
        ));
    }
    s
}

/// Seeds and parameters for run `k` of `phase`; the same `(phase, k)` gives
/// the same sample whatever the mode.
fn run_params(cfg: &ExploreConfig, phase: u64, k: usize) -> (f64, PlacerConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream((phase << 32) | k as u64);
    let r = &cfg.ranges;
    let delta = sample(&mut rng, r.delta).clamp(-MAX_SHIFT, MAX_SHIFT);
    let mut pc = cfg.placer.clone();
    pc.mode = PlacerMode::Inflated;
    pc.gamma_base = sample(&mut rng, r.gamma_base);
    pc.init_lambda = 10f64.powf(sample(&mut rng, r.log10_init_lambda));
    pc.lambda_growth = sample(&mut rng, r.lambda_growth);
    pc.seed = rng.random();
    (delta, pc)
}

/// One inflated placement with its metrics.
pub fn evaluate_run(
    inputs: &ExploreInputs,
    targets: &[f64],
    delta: f64,
    config: &PlacerConfig,
    eval_bin_scale: f64,
    movable: &[usize],
) -> Result<(RunMetrics, bool, Placement, Vec<f64>)> {
    let shifted = shift_targets(targets, delta)?;
    let out = place_with_targets(inputs.netlist, Some(&shifted), config, inputs.fixed)?;
    let (grid, rho) = achieved_density(inputs.netlist, &out.placement, eval_bin_scale)?;
    let achieved: Vec<f64> = movable.iter().map(|&i| rho.values[i]).collect();
    let t: Vec<f64> = movable.iter().map(|&i| shifted[i]).collect();
    let h = hellinger(&density_histogram(&achieved, HIST_BINS), &density_histogram(&t, HIST_BINS))?;
    let re = range_error(&shifted, &grid, &out.placement, inputs.netlist)?;
    let corr = target_correlation(&t, &achieved, None)?;
    let ovf = out.final_overflow();
    let metrics = RunMetrics {
        hpwl: inputs.netlist.hpwl(&out.placement),
        hellinger: h,
        max_overflow: ovf.max_overflow,
        total_overflow: ovf.total_overflow,
        range_error: re.total_error,
        cell_pearson: corr.cell_pearson,
    };
    Ok((metrics, out.converged, out.placement, achieved))
}

fn run_batch(
    inputs: &ExploreInputs,
    cfg: &ExploreConfig,
    targets: &[f64],
    mode: TargetMode,
    phase: u64,
    n: usize,
    movable: &[usize],
) -> Result<Vec<RunRecord>> {
    let job = || -> Result<Vec<RunRecord>> {
        (0..n)
            .into_par_iter()
            .map(|k| {
                let (delta, pc) = run_params(cfg, phase, k);
                let (metrics, converged, placement, achieved) =
                    evaluate_run(inputs, targets, delta, &pc, cfg.eval_bin_scale, movable)?;
                log::info!("{} run {k}: hpwl {:.4e} hellinger {:.4}", mode.as_str(), metrics.hpwl, metrics.hellinger);
                Ok(RunRecord {
                    id: k,
                    mode,
                    delta,
                    config: pc,
                    metrics,
                    converged,
                    placement_path: None,
                    placement,
                    achieved,
                })
            })
            .collect()
    };
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn summarize(mode: TargetMode, runs: &[RunRecord], front: &[usize]) -> ModeSummary {
    let mean = |f: &dyn Fn(&RunRecord) -> f64| front.iter().map(|&i| f(&runs[i])).sum::<f64>() / front.len() as f64;
    let corrs: Vec<f64> = front.iter().filter_map(|&i| runs[i].metrics.cell_pearson).collect();
    ModeSummary {
        mode,
        runs: runs.len(),
        front_size: front.len(),
        mean_hellinger: mean(&|r| r.metrics.hellinger),
        mean_hpwl: mean(&|r| r.metrics.hpwl),
        mean_range_error: mean(&|r| r.metrics.range_error),
        mean_cell_pearson: (!corrs.is_empty()).then(|| corrs.iter().sum::<f64>() / corrs.len() as f64),
    }
}

/// Tool targets, a prior ensemble from the best exploratory runs, James-Stein
/// and timing-clipped James-Stein targets, and final runs for every target
/// mode. Final runs share their sampled parameters across modes.
pub fn run_goalplace(inputs: &ExploreInputs, cfg: &ExploreConfig) -> Result<GoalplaceResult> {
    if cfg.n_phase1 == 0 || cfg.n_phase2 == 0 {
        return Err(Error::invalid("run counts must be positive"));
    }
    cfg.placer.validate()?;
    let nl = inputs.netlist;
    let tool = tool_target(nl, inputs.postroute, inputs.postroute_positions, inputs.sizes, cfg.eval_bin_scale)?;
    let z_full = tool.targets.values;
    let movable = nl.movable_std_ids();
    if movable.len() < 3 {
        return Err(Error::invalid("need at least 3 movable standard cells"));
    }

    let phase1 = run_batch(inputs, cfg, &z_full, TargetMode::Tool, 1, cfg.n_phase1, &movable)?;
    let phase1_front = pareto(&phase1);
    let k = cfg.top_k.min(phase1_front.len());
    if k < 2 {
        return Err(Error::numerical(format!("prior ensemble too small ({} Pareto runs)", phase1_front.len())));
    }
    let prior = build_prior(&phase1_front[..k].iter().map(|&i| phase1[i].achieved.clone()).collect::<Vec<_>>())?;

    let z: Vec<f64> = movable.iter().map(|&i| z_full[i]).collect();
    let sigma0 = cfg.sigma0.map_or(Sigma0::Auto, Sigma0::Fixed);
    let js = james_stein(&z, &prior, sigma0)?;
    let slacks: Vec<Option<f64>> = nl.slacks();
    let clip = slack_to_budget(&movable.iter().map(|&i| slacks[i]).collect::<Vec<_>>(), cfg.quantiles)?;
    let jsd = js_timing_clip(&js, &z, &prior, &clip)?;

    let expand = |est: &[f64]| {
        let mut t = z_full.clone();
        for (&i, v) in movable.iter().zip(est) {
            t[i] = *v;
        }
        t
    };
    let mut modes = Vec::new();
    for (mode, targets) in [
        (TargetMode::Tool, z_full.clone()),
        (TargetMode::Js, expand(&js.estimates)),
        (TargetMode::Jsd, expand(&jsd.estimates)),
    ] {
        let runs = run_batch(inputs, cfg, &targets, mode, 2, cfg.n_phase2, &movable)?;
        let front = pareto(&runs);
        let summary = summarize(mode, &runs, &front);
        modes.push(ModeResult { mode, targets, runs, front, summary });
    }
    Ok(GoalplaceResult { tool_targets: z_full, movable, phase1, phase1_front, prior, js, jsd, modes })
}
