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

//! Places the two-region synthetic in uniform and inflated mode and prints
//! range error, target correlation and group densities.

use std::time::Instant;

use goalplace::density::achieved_density;
use goalplace::inflation::{range_error, target_correlation};
use goalplace::placer::{place_with_targets, PlacerConfig, PlacerMode};
use goalplace::stats::spearman;
use goalplace::synth::{two_region, TwoRegionParams};

fn main() -> goalplace::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cells: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let bin_scale: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(4.0);
    let pbin: Option<f64> = args.get(4).and_then(|s| s.parse().ok());
    let stop: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.07);
    let d = two_region(&TwoRegionParams { cells, seed, ..Default::default() })?;
    let movable: Vec<usize> = d.netlist.movable_std_ids();
    let mut errors = Vec::new();
    for mode in [PlacerMode::Uniform, PlacerMode::Inflated] {
        let cfg = PlacerConfig { mode, seed, bin_scale: pbin, overflow_stop: stop, ..Default::default() };
        let start = Instant::now();
        let out = place_with_targets(&d.netlist, Some(&d.region_targets), &cfg, &d.fixed)?;
        let secs = start.elapsed().as_secs_f64();
        let (grid, rho) = achieved_density(&d.netlist, &out.placement, bin_scale)?;
        let re = range_error(&d.region_targets, &grid, &out.placement, &d.netlist)?;
        let t: Vec<f64> = movable.iter().map(|&i| d.region_targets[i]).collect();
        let a: Vec<f64> = movable.iter().map(|&i| rho.values[i]).collect();
        let corr = target_correlation(&t, &a, None)?;
        let mean = |g: usize| {
            let v: Vec<f64> = movable.iter().filter(|&&i| d.group[i] == g).map(|&i| rho.values[i]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let last = out.log.last().expect("at least one iteration");
        println!(
            "{mode:?}: iters {} converged {} ovf {:.4} hpwl {:.1} time {secs:.2}s | RE {:.3} ({} bins) pearson {:?} spearman {:?} left {:.3} right {:.3}",
            out.log.len(),
            out.converged,
            last.total_overflow,
            last.hpwl,
            re.total_error,
            re.violating_bins,
            corr.cell_pearson,
            spearman(&t, &a),
            mean(0),
            mean(1)
        );
        errors.push(re.total_error);
    }
    println!("range-error ratio {:.3}", errors[1] / errors[0]);
    Ok(())
}
