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

use goalplace::explore::{run_goalplace, ExploreConfig, ExploreInputs, TargetMode};
use goalplace::synth::{two_region, TwoRegionParams};

#[test]
fn run_goalplace_is_reproducible_across_worker_counts() {
    let d = two_region(&TwoRegionParams { cells: 600, seed: 2, noise: 0.2, ..Default::default() }).unwrap();
    let inputs = ExploreInputs {
        netlist: &d.netlist,
        fixed: &d.fixed,
        postroute: &d.postroute,
        postroute_positions: &d.postroute_positions,
        sizes: &d.sizes,
    };
    let run = |workers| {
        let cfg = ExploreConfig { n_phase1: 4, n_phase2: 2, seed: 3, eval_bin_scale: 4.0, workers, ..Default::default() };
        run_goalplace(&inputs, &cfg).unwrap()
    };
    let (a, b) = (run(Some(1)), run(Some(3)));
    assert_eq!(a.comparison_csv(), b.comparison_csv());
    assert_eq!(a.js.estimates, b.js.estimates);
    assert_eq!(a.jsd.estimates, b.jsd.estimates);
    for mode in [TargetMode::Tool, TargetMode::Js, TargetMode::Jsd] {
        let (x, y) = (a.mode(mode), b.mode(mode));
        assert_eq!(x.front, y.front);
        assert!(x.runs.iter().zip(&y.runs).all(|(p, q)| p.placement == q.placement));
        assert!(!x.front.is_empty() && x.front.iter().all(|&i| i < x.runs.len()));
    }
}
