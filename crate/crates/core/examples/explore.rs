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

//! Runs the full target-adaptation loop on a noisy two-region synthetic and
//! prints the per-mode comparison table.

use std::time::Instant;

use goalplace::explore::{run_goalplace, ExploreConfig, ExploreInputs};
use goalplace::synth::{two_region, TwoRegionParams};

fn main() -> goalplace::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let seed = arg(1, 1.0) as u64;
    let n1 = arg(2, 16.0) as usize;
    let n2 = arg(3, 8.0) as usize;
    let noise = arg(4, 0.2);
    let d = two_region(&TwoRegionParams { seed, noise, ..Default::default() })?;
    let cfg = ExploreConfig { n_phase1: n1, n_phase2: n2, seed, eval_bin_scale: 4.0, ..Default::default() };
    let inputs = ExploreInputs {
        netlist: &d.netlist,
        fixed: &d.fixed,
        postroute: &d.postroute,
        postroute_positions: &d.postroute_positions,
        sizes: &d.sizes,
    };
    let start = Instant::now();
    let r = run_goalplace(&inputs, &cfg)?;
    println!("phase-1 front {} of {} runs; B = {:?}", r.phase1_front.len(), r.phase1.len(), r.js.stats().b_hat);
    print!("{}", r.comparison_csv());
    println!("{:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
