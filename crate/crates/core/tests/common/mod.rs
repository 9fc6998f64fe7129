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

//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use goalplace::clustering::{modularity, WeightedGraph};
use goalplace::density::GridGeometry;
use goalplace::netlist::{Floorplan, Rect};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Overlap of every rectangle with every bin by direct interval arithmetic.
pub fn raster_oracle(g: &GridGeometry, rects: &[Rect]) -> Vec<f64> {
    let fp = g.floorplan;
    let mut occ = vec![0.0; g.num_bins()];
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let bx0 = fp.x + ix as f64 * g.bin_w;
            let by0 = fp.y + iy as f64 * g.bin_h;
            let bx1 = (bx0 + g.bin_w).min(fp.x + fp.width);
            let by1 = (by0 + g.bin_h).min(fp.y + fp.height);
            for r in rects {
                let ox = (r.x + r.w).min(bx1) - r.x.max(bx0);
                let oy = (r.y + r.h).min(by1) - r.y.max(by0);
                if ox > 0.0 && oy > 0.0 {
                    occ[iy * g.nx + ix] += ox * oy;
                }
            }
        }
    }
    occ
}

pub fn clipped_area(fp: &Floorplan, r: &Rect) -> f64 {
    let ox = (r.x + r.w).min(fp.x + fp.width) - r.x.max(fp.x);
    let oy = (r.y + r.h).min(fp.y + fp.height) - r.y.max(fp.y);
    ox.max(0.0) * oy.max(0.0)
}

/// Best modularity over all set partitions (restricted growth strings).
pub fn brute_force_optimum(g: &WeightedGraph, gamma: f64) -> f64 {
    let n = g.num_nodes();
    let mut rgs = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max(modularity(g, &rgs, gamma));
        let mut i = n;
        loop {
            if i <= 1 {
                return best;
            }
            i -= 1;
            let max_prefix = *rgs[..i].iter().max().unwrap();
            if rgs[i] <= max_prefix {
                rgs[i] += 1;
                for x in rgs[i + 1..].iter_mut() {
                    *x = 0;
                }
                break;
            }
        }
    }
}

pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> WeightedGraph {
    let mut e = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                e.push((u, v, rng.random_range(0.1..1.0)));
            }
        }
    }
    WeightedGraph::from_edges((0..n).collect(), e)
}

/// Random graphs of 4 to 10 nodes plus two cliques joined by an edge, a ring,
/// a star and a single edge.
pub fn small_test_graphs(seed: u64) -> Vec<WeightedGraph> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::new();
    for i in 0..60 {
        let n = 4 + i % 7;
        let p = [0.25, 0.4, 0.6][i % 3];
        graphs.push(random_graph(n, p, &mut rng));
    }
    let mut e = Vec::new();
    for base in [0, 5] {
        for u in 0..5 {
            for v in u + 1..5 {
                e.push((base + u, base + v, 1.0));
            }
        }
    }
    e.push((4, 5, 1.0));
    graphs.push(WeightedGraph::from_edges((0..10).collect(), e));
    graphs.push(WeightedGraph::from_edges((0..10).collect(), (0..10).map(|i| (i, (i + 1) % 10, 1.0))));
    graphs.push(WeightedGraph::from_edges((0..8).collect(), (1..8).map(|i| (0, i, 1.0))));
    graphs.push(WeightedGraph::from_edges(vec![0, 1], vec![(0, 1, 1.0)]));
    graphs
}
