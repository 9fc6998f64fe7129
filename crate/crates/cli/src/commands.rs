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

//! Subcommand implementations.

use std::path::Path;

use goalplace::clustering::{cluster_netlist, cluster_stats, dbi_placement, ClusterConfig};
use goalplace::density::achieved_density;
use goalplace::ebayes::{
    build_prior, hetero_shrink, james_stein, js_timing_clip, normality_check, risk_report, slack_to_budget,
    ShrinkageResult, Sigma0, MIN_RUNS,
};
use goalplace::explore::{run_goalplace, front_csv, ExploreConfig, ExploreInputs, TargetMode};
use goalplace::inflation::{
    apply_inflation, factors_from_targets, pin_inflation, range_error, target_correlation, InflationVector,
};
use goalplace::netlist::{
    parse_netlist, read_placement, read_size_table, read_slacks, write_netlist, write_placement, write_size_table,
    write_slacks, NetlistFormat,
};
use goalplace::netlist::{load_targets_for, serialize_targets, Provenance, TargetVector};
use goalplace::netlist::{Netlist, Placement};
use goalplace::placer::{convergence_csv, place_with_targets, PlacerConfig, PlacerMode};
use goalplace::synth::{mesh, planted_modules, two_region, TwoRegionParams};
use goalplace::{Error, Result};
use serde_json::json;

use crate::output::{with_session, Session};
use crate::{
    ClusterArgs, DensityArgs, InflateArgs, ModeArg, PlaceArgs, RiskArgs, RunArgs, ShrinkArgs, ShrinkKind, SynthArgs,
    SynthKind, TargetsArgs,
};

fn load_netlist(s: &mut Session, path: &Path) -> Result<Netlist> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("aux") => NetlistFormat::BookshelfLike,
        _ => NetlistFormat::Jsonl,
    };
    parse_netlist(s.input(path), format)
}

fn load_placement(s: &mut Session, path: &Path, netlist: &Netlist) -> Result<Placement> {
    read_placement(s.input(path), netlist)
}

fn apply_slacks(s: &mut Session, netlist: &mut Netlist, path: Option<&Path>) -> Result<()> {
    if let Some(p) = path {
        netlist.set_slacks(&read_slacks(s.input(p))?);
    }
    Ok(())
}

fn cell_jsonl<'a>(names: impl Iterator<Item = &'a str>, key: &str, values: &[f64]) -> String {
    let mut out = String::new();
    for (name, v) in names.zip(values) {
        out.push_str(&json!({ "cell": name, key: v }).to_string());
        out.push('\n');
    }
    out
}

pub fn density(a: &DensityArgs) -> Result<()> {
    with_session("density", a, &a.out, |s| {
        let nl = load_netlist(s, &a.netlist)?;
        let pl = load_placement(s, &a.placement, &nl)?;
        let (grid, cells) = achieved_density(&nl, &pl, a.bin_scale)?;
        s.write("bins.csv", grid.to_csv())?;
        s.write("cells.jsonl", cell_jsonl(nl.cells.iter().map(|c| c.name.as_str()), "rho", &cells.values))?;
        s.write("map.pgm", grid.to_pgm())?;
        let g = grid.geometry;
        println!("{} x {} bins, max density {:.4}", g.nx, g.ny, grid.rho_all().iter().copied().fold(0.0, f64::max));
        Ok(())
    })
}

pub fn targets(a: &TargetsArgs) -> Result<()> {
    with_session("targets", a, &a.out, |s| {
        let place = load_netlist(s, &a.place)?;
        let post = load_netlist(s, &a.postroute)?;
        let post_pl = load_placement(s, &a.postroute_place, &post)?;
        let sizes = read_size_table(s.input(&a.sizes))?;
        let tool = goalplace::density::tool_target(&place, &post, &post_pl, &sizes, a.bin_scale)?;
        serialize_targets(&tool.targets, s.output("targets.jsonl"))?;
        s.write_json("match.json", &tool.report)?;
        s.write("map.pgm", tool.grid.to_pgm())?;
        println!(
            "{} matched, {} buffers removed, {} zeroed, {} place-only",
            tool.report.matched.len(),
            tool.report.removed_buffers,
            tool.report.zeroed.len(),
            tool.report.place_only.len()
        );
        Ok(())
    })
}

fn parse_sigma0(text: &str) -> Result<Sigma0> {
    if text == "auto" {
        return Ok(Sigma0::Auto);
    }
    text.parse::<f64>()
        .map(Sigma0::Fixed)
        .map_err(|_| Error::invalid(format!("sigma0 must be `auto` or a number, got `{text}`")))
}

fn expand(full: &[f64], ids: &[usize], est: &[f64]) -> Vec<f64> {
    let mut out = full.to_vec();
    for (&i, &v) in ids.iter().zip(est) {
        out[i] = v;
    }
    out
}

pub fn shrink(a: &ShrinkArgs) -> Result<()> {
    with_session("shrink", a, &a.out, |s| {
        let sigma0 = parse_sigma0(&a.sigma0)?;
        let mut nl = load_netlist(s, &a.netlist)?;
        apply_slacks(s, &mut nl, a.slacks.as_deref())?;
        let z_full = load_targets_for(s.input(&a.targets), &nl)?;
        let ids = nl.movable_std_ids();
        let mut densities = Vec::new();
        for p in &a.placements {
            let pl = load_placement(s, p, &nl)?;
            let (_, cells) = achieved_density(&nl, &pl, a.bin_scale)?;
            densities.push(ids.iter().map(|&i| cells.values[i]).collect::<Vec<f64>>());
        }
        let prior = build_prior(&densities)?;
        let z: Vec<f64> = ids.iter().map(|&i| z_full.values[i]).collect();
        let (result, extra): (ShrinkageResult, serde_json::Value) = match a.mode {
            ShrinkKind::Js => (james_stein(&z, &prior, sigma0)?, json!({})),
            ShrinkKind::Jsd => {
                let js = james_stein(&z, &prior, sigma0)?;
                let slacks = nl.slacks();
                let clip = slack_to_budget(&ids.iter().map(|&i| slacks[i]).collect::<Vec<_>>(), a.quantiles)?;
                (js_timing_clip(&js, &z, &prior, &clip)?, json!({ "quantiles": a.quantiles }))
            }
            ShrinkKind::Hetero => {
                if sigma0 != Sigma0::Auto {
                    log::warn!("sigma0 is ignored in hetero mode; per-cell spreads come from the prior");
                }
                let (res, cells) = hetero_shrink(&z, &prior)?;
                let worst = cells.iter().map(|c| c.residual).fold(0.0, f64::max);
                let iters = cells.iter().map(|c| c.iterations).max().unwrap_or(0);
                (res, json!({ "max_residual": worst, "max_iterations": iters }))
            }
        };
        let full = expand(&z_full.values, &ids, &result.estimates);
        let tv = TargetVector::for_netlist(&nl, full, result.mode.provenance());
        serialize_targets(&tv, s.output("targets.jsonl"))?;
        let stats = result.stats();
        s.write_json(
            "stats.json",
            &json!({ "stats": stats, "runs": prior.num_runs(), "cells": ids.len(), "details": extra }),
        )?;
        if prior.num_runs() >= MIN_RUNS {
            let report = normality_check(&prior, a.alpha)?;
            println!("normality: {}/{} cells pass at alpha {}", report.passed, report.tested, a.alpha);
            s.write_json("normality.json", &report)?;
        } else {
            log::warn!("normality check skipped: {} runs, need {MIN_RUNS}", prior.num_runs());
        }
        println!("B_hat {:.4}, {} estimates clamped", stats.b_hat, result.clamped_count);
        Ok(())
    })
}

fn factors_jsonl(nl: &Netlist, infl: &InflationVector) -> String {
    cell_jsonl(nl.cells.iter().map(|c| c.name.as_str()), "r", &infl.factors)
}

pub fn inflate(a: &InflateArgs) -> Result<()> {
    with_session("inflate", a, &a.out, |s| {
        let nl = load_netlist(s, &a.netlist)?;
        let targets = match &a.targets {
            Some(p) => Some(load_targets_for(s.input(p), &nl)?),
            None => None,
        };
        let infl = match (&targets, a.pin_alpha) {
            (Some(t), _) => factors_from_targets(&nl, &t.values, a.r_max)?,
            (None, Some(alpha)) => pin_inflation(&nl, alpha)?,
            (None, None) => return Err(Error::invalid("one of --targets or --pin-alpha is required")),
        };
        let inflated = apply_inflation(&nl, &infl)?;
        write_netlist(&inflated.netlist, s.output("inflated.jsonl"))?;
        s.write("factors.jsonl", factors_jsonl(&nl, &infl))?;
        let fixed_area: f64 = nl.cells.iter().filter(|c| !c.movable).map(|c| c.area()).sum();
        let free = nl.floorplan.area() - fixed_area;
        let movable: f64 = inflated.netlist.cells.iter().filter(|c| c.movable).map(|c| c.area()).sum();
        let rmax = infl.factors.iter().copied().fold(1.0, f64::max);
        s.write_json(
            "summary.json",
            &json!({
                "source": infl.source,
                "capped": infl.capped,
                "max_factor": rmax,
                "inflated_movable_area": movable,
                "free_area": free,
                "utilization": movable / free,
            }),
        )?;
        if movable > free {
            log::warn!("inflated cells exceed the free area ({:.3} utilization)", movable / free);
        }
        if let (Some(p), Some(t)) = (&a.placement, &targets) {
            let pl = load_placement(s, p, &nl)?;
            let (grid, cells) = achieved_density(&nl, &pl, a.bin_scale)?;
            let report = range_error(&t.values, &grid, &pl, &nl)?;
            s.write_json("range.json", &report)?;
            s.write("ranges.csv", report.to_csv())?;
            let ids = nl.movable_std_ids();
            let pick = |v: &[f64]| ids.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let corr = target_correlation(&pick(&t.values), &pick(&cells.values), None)?;
            s.write_json("correlation.json", &corr)?;
            println!("range error {:.4} over {} bins", report.total_error, report.violating_bins);
        }
        println!("{} cells, max factor {rmax:.3}, {} capped", nl.len(), infl.capped);
        Ok(())
    })
}

fn fixed_placement(s: &mut Session, nl: &Netlist, path: Option<&Path>) -> Result<Placement> {
    match path {
        Some(p) => load_placement(s, p, nl),
        None => {
            if let Some(c) = nl.cells.iter().find(|c| !c.movable) {
                return Err(Error::invalid(format!(
                    "cell `{}` is fixed; supply its position with --placement",
                    c.name
                )));
            }
            let fp = nl.floorplan;
            let center = (fp.x + 0.5 * fp.width, fp.y + 0.5 * fp.height);
            Ok(Placement::new("initial", vec![center; nl.len()]))
        }
    }
}

pub fn place(a: &PlaceArgs) -> Result<()> {
    with_session("place", a, &a.out, |s| {
        let nl = load_netlist(s, &a.netlist)?;
        let fixed = fixed_placement(s, &nl, a.placement.as_deref())?;
        let targets = match &a.targets {
            Some(p) => Some(load_targets_for(s.input(p), &nl)?),
            None => None,
        };
        let mode = match a.mode {
            ModeArg::Uniform => PlacerMode::Uniform,
            ModeArg::Inflated => PlacerMode::Inflated,
        };
        if mode == PlacerMode::Uniform && targets.is_some() {
            log::warn!("--targets is ignored in uniform mode");
        }
        let cfg = PlacerConfig {
            d_t: a.dt,
            iterations: a.iters,
            seed: a.seed,
            bin_scale: a.bin_scale,
            overflow_stop: a.overflow_stop,
            mode,
            r_max: a.r_max,
            ..Default::default()
        };
        let out = place_with_targets(&nl, targets.as_ref().map(|t| t.values.as_slice()), &cfg, &fixed)?;
        write_placement(&out.placement, &nl, s.output("placement.jsonl"))?;
        s.write("convergence.csv", convergence_csv(&out.log))?;
        let ov = out.final_overflow();
        let hpwl = nl.hpwl(&out.placement);
        s.write_json(
            "summary.json",
            &json!({
                "hpwl": hpwl,
                "iterations": out.log.len(),
                "converged": out.converged,
                "max_overflow": ov.max_overflow,
                "total_overflow": ov.total_overflow,
                "bins": [out.geometry.nx, out.geometry.ny],
                "fillers": out.fillers.len(),
                "inflation": out.inflation.as_ref().map(|i| json!({
                    "capped": i.capped,
                    "excess_scale": i.excess_scale,
                })),
            }),
        )?;
        if !out.converged {
            log::warn!("overflow target not reached in {} iterations", a.iters);
        }
        println!("hpwl {hpwl:.1}, overflow {:.4}, {} iterations", ov.total_overflow, out.log.len());
        Ok(())
    })
}

pub fn cluster(a: &ClusterArgs) -> Result<()> {
    with_session("cluster", a, &a.out, |s| {
        let mut nl = load_netlist(s, &a.netlist)?;
        apply_slacks(s, &mut nl, a.slacks.as_deref())?;
        let mut placements = Vec::new();
        let mut densities = Vec::new();
        for p in &a.placements {
            let pl = load_placement(s, p, &nl)?;
            densities.push(achieved_density(&nl, &pl, a.bin_scale)?.1.values);
            placements.push(pl);
        }
        let cfg = ClusterConfig {
            resolution: a.resolution,
            min_size: a.min,
            max_size: a.max,
            net_cap: a.net_cap,
            seed: a.seed,
        };
        let clustering = cluster_netlist(&nl, &cfg)?;
        let mut clustering = cluster_stats(&clustering, &densities, &nl.slacks())?;
        clustering.dbi = match dbi_placement(&nl, &placements[0], &clustering) {
            Ok(d) => Some(d),
            Err(e) => {
                log::warn!("DBI undefined: {e}");
                None
            }
        };
        let summary = json!({
            "num_clusters": clustering.num_clusters,
            "dbi": clustering.dbi,
            "rho_dt": clustering.rho_dt,
            "rho_dt_timcrit": clustering.rho_dt_timcrit,
            "sigma_cluster_dens": clustering.sigma_cluster_dens,
            "clusters": clustering.clusters,
        });
        s.write_json("clusters.json", &summary)?;
        let mut out = String::new();
        for (c, k) in nl.cells.iter().zip(&clustering.assignment) {
            out.push_str(&json!({ "cell": c.name, "cluster": k }).to_string());
            out.push('\n');
        }
        s.write("assignment.jsonl", out)?;
        println!("{} clusters, DBI {:?}", clustering.num_clusters, clustering.dbi);
        Ok(())
    })
}

/// Fixed-cell positions taken from the post-route placement by name; movable
/// cells start at the floorplan center.
fn fixed_from_postroute(place: &Netlist, post: &Netlist, post_pl: &Placement) -> Result<Placement> {
    let fp = place.floorplan;
    let center = (fp.x + 0.5 * fp.width, fp.y + 0.5 * fp.height);
    let positions = place
        .cells
        .iter()
        .map(|c| match post.cell_id(&c.name) {
            Some(j) => Ok(post_pl.positions[j]),
            None if c.movable => Ok(center),
            None => Err(Error::MissingCell(c.name.clone())),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Placement::new("fixed", positions))
}

pub fn run(a: &RunArgs) -> Result<()> {
    with_session("run", a, &a.out, |s| {
        let mut place = load_netlist(s, &a.place)?;
        apply_slacks(s, &mut place, a.slacks.as_deref())?;
        let post = load_netlist(s, &a.postroute)?;
        let post_pl = load_placement(s, &a.postroute_place, &post)?;
        let sizes = read_size_table(s.input(&a.sizes))?;
        let fixed = match &a.fixed {
            Some(p) => load_placement(s, p, &place)?,
            None => fixed_from_postroute(&place, &post, &post_pl)?,
        };
        let cfg = ExploreConfig {
            n_phase1: a.n1,
            n_phase2: a.n2,
            seed: a.seed,
            eval_bin_scale: a.bin_scale,
            top_k: a.top_k,
            quantiles: a.quantiles,
            workers: a.workers,
            ..Default::default()
        };
        let inputs = ExploreInputs {
            netlist: &place,
            fixed: &fixed,
            postroute: &post,
            postroute_positions: &post_pl,
            sizes: &sizes,
        };
        let r = run_goalplace(&inputs, &cfg)?;
        s.write("phase1_front.csv", front_csv(&r.phase1, &r.phase1_front))?;
        s.write("comparison.csv", r.comparison_csv())?;
        s.write_json("js_stats.json", &r.js.stats())?;
        s.write_json("jsd_stats.json", &r.jsd.stats())?;
        for m in &r.modes {
            let name = m.mode.as_str();
            s.write(&format!("front_{name}.csv"), front_csv(&m.runs, &m.front))?;
            let prov = match m.mode {
                TargetMode::Tool => Provenance::Tool,
                TargetMode::Js => Provenance::Js,
                TargetMode::Jsd => Provenance::Jsd,
            };
            let tv = TargetVector::for_netlist(&place, m.targets.clone(), prov);
            serialize_targets(&tv, s.output(&format!("targets_{name}.jsonl")))?;
            if let Some(&best) = m.front.first() {
                let run = &m.runs[best];
                write_placement(&run.placement, &place, s.output(&format!("placement_{name}.jsonl")))?;
                let (grid, _) = achieved_density(&place, &run.placement, a.bin_scale)?;
                s.write(&format!("map_{name}.pgm"), grid.to_pgm())?;
            }
        }
        println!("B_hat {:.4}; phase-1 front {} of {}", r.js.stats().b_hat, r.phase1_front.len(), r.phase1.len());
        print!("{}", r.comparison_csv());
        Ok(())
    })
}

pub fn risk(a: &RiskArgs) -> Result<()> {
    with_session("risk", a, &a.out, |s| {
        let report = risk_report(a.trials, a.n, a.a, a.sigma0, a.seed)?;
        s.write_json("risk.json", &report)?;
        println!(
            "R_JS/R_Bayes {:.4} (expected {:.4}), R_JS/R_MLE {:.4}",
            report.ratio_js_bayes, report.expected_ratio, report.ratio_js_mle
        );
        Ok(())
    })
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    with_session("synth", a, &a.out, |s| {
        match a.kind {
            SynthKind::TwoRegion => {
                let d = two_region(&TwoRegionParams { cells: a.cells, seed: a.seed, noise: a.noise, ..Default::default() })?;
                write_netlist(&d.netlist, s.output("netlist.jsonl"))?;
                write_placement(&d.fixed, &d.netlist, s.output("fixed.jsonl"))?;
                write_netlist(&d.postroute, s.output("postroute.jsonl"))?;
                write_placement(&d.postroute_positions, &d.postroute, s.output("postroute_place.jsonl"))?;
                write_size_table(&d.sizes, s.output("sizes.jsonl"))?;
                write_slacks(&d.netlist, &s.output("slacks.jsonl"))?;
            }
            SynthKind::Mesh => {
                let (nl, pl) = mesh(a.cells, a.utilization, a.seed)?;
                write_netlist(&nl, s.output("netlist.jsonl"))?;
                write_placement(&pl, &nl, s.output("fixed.jsonl"))?;
            }
            SynthKind::Planted => {
                let (nl, truth) = planted_modules(a.cells, 6, a.seed)?;
                write_netlist(&nl, s.output("netlist.jsonl"))?;
                s.write("truth.jsonl", {
                    let mut out = String::new();
                    for (c, k) in nl.cells.iter().zip(&truth) {
                        out.push_str(&json!({ "cell": c.name, "module": k }).to_string());
                        out.push('\n');
                    }
                    out
                })?;
            }
        }
        Ok(())
    })
}
