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

//! Density, shrinkage, Hellinger and Pareto properties checked against
//! independent oracles.

use goalplace::density::{build_grid, cell_density, netlist_rects, DensityGrid, GridGeometry};
use goalplace::ebayes::{build_prior, james_stein, js_timing_clip, Sigma0, TimingClipSpec};
use goalplace::explore::{density_histogram, hellinger, pareto_indices, HIST_BINS};
use goalplace::netlist::{Floorplan, Rect};
use goalplace::synth::random_placed;
use proptest::prelude::*;

mod common;
use common::{clipped_area, raster_oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn rasterizer_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let fp = Floorplan::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 23.7, 17.3);
        let g = GridGeometry::new(fp, rng.random_range(0.7..4.0), rng.random_range(0.7..4.0)).unwrap();
        let rects: Vec<Rect> = (0..60)
            .map(|_| {
                Rect::new(
                    fp.x + rng.random_range(-2.0..fp.width),
                    fp.y + rng.random_range(-2.0..fp.height),
                    rng.random_range(0.05..5.0),
                    rng.random_range(0.05..5.0),
                )
            })
            .collect();
        let grid = DensityGrid::build(g, &rects);
        let want = raster_oracle(&g, &rects);
        for (a, b) in grid.occupied.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn area_is_conserved_on_random_instances() {
    for seed in 0..5 {
        let (nl, pl) = random_placed(1000, seed).unwrap();
        for scale in [1.0, 3.0, 10.0] {
            let grid = build_grid(&nl, &pl, None, scale).unwrap();
            let lhs: f64 = (0..grid.num_bins()).map(|b| grid.rho(b) * grid.bin_area[b]).sum();
            let rhs: f64 = netlist_rects(&nl, &pl, None).iter().map(|r| clipped_area(&nl.floorplan, r)).sum();
            assert!((lhs - rhs).abs() <= 1e-9 * rhs, "seed {seed} scale {scale}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn cell_density_is_a_convex_combination() {
    for seed in 0..3 {
        let (nl, pl) = random_placed(1000, seed).unwrap();
        let grid = build_grid(&nl, &pl, None, 2.0).unwrap();
        let rho = grid.rho_all();
        let cells = cell_density(&grid, &nl, &pl, None).unwrap();
        for (i, r) in netlist_rects(&nl, &pl, None).iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            grid.geometry.for_each_overlap(r, |b, _| {
                lo = lo.min(rho[b]);
                hi = hi.max(rho[b]);
            });
            let v = cells.values[i];
            if hi == f64::NEG_INFINITY {
                assert_eq!(v, 0.0);
                continue;
            }
            let inside = clipped_area(&nl.floorplan, r) >= r.area() * (1.0 - 1e-12);
            assert!(v <= hi + 1e-12, "cell {i}: {v} > {hi}");
            if inside {
                assert!(v >= lo - 1e-12, "cell {i}: {v} < {lo}");
            }
        }
    }
}

#[test]
fn timing_clip_bound_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0usize;
    for _ in 0..100_000 {
        let n = rng.random_range(3..12);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let prior = build_prior(&[a, b]).unwrap();
        let sigma = if rng.random_bool(0.5) { Sigma0::Auto } else { Sigma0::Fixed(rng.random_range(0.01..0.5)) };
        let Ok(js) = james_stein(&z, &prior, sigma) else { continue };
        let budgets: Vec<f64> = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
        let clip = TimingClipSpec { budgets: budgets.clone(), quantile_count: 4 };
        let jsd = js_timing_clip(&js, &z, &prior, &clip).unwrap();
        let s0 = js.sigma0;
        for i in 0..n {
            let (v, j) = (jsd.raw[i], js.raw[i]);
            assert!((v - z[i]).abs() <= budgets[i] * s0 * (1.0 + 1e-12), "bound at {i}");
            let (lo, hi) = if j < z[i] { (j, z[i]) } else { (z[i], j) };
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "between at {i}");
        }
        checked += 1;
    }
    assert!(checked > 99_000, "{checked}");
}

#[test]
fn hellinger_two_bin_closed_form() {
    let h = hellinger(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
    assert!((h - (1.0 - 1.0 / 2f64.sqrt()).sqrt()).abs() < 1e-12);
}

/// `i` is on the front unless some other point is at least as good everywhere
/// and not identical.
fn front_oracle(points: &[[f64; 3]]) -> Vec<usize> {
    let mut out = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for q in points {
            let no_worse = (0..3).all(|k| q[k] <= p[k]);
            if no_worse && q != p {
                continue 'outer;
            }
        }
        out.push(i);
    }
    out
}

#[test]
fn pareto_matches_quadratic_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..20 {
        let pts: Vec<[f64; 3]> = (0..200)
            .map(|_| {
                // coarse values create ties
                let q = |r: &mut ChaCha8Rng| if round % 2 == 0 { r.random_range(0..8) as f64 } else { r.random::<f64>() };
                [q(&mut rng), q(&mut rng), q(&mut rng)]
            })
            .collect();
        let mut got = pareto_indices(&pts);
        assert!(got.windows(2).all(|w| pts[w[0]][0] <= pts[w[1]][0]));
        got.sort();
        assert_eq!(got, front_oracle(&pts));
    }
}

proptest! {
    #[test]
    fn hellinger_symmetric_and_bounded(
        a in prop::collection::vec(0.0f64..1.0, 1..300),
        b in prop::collection::vec(0.0f64..1.0, 1..300),
    ) {
        let (p, q) = (density_histogram(&a, HIST_BINS), density_histogram(&b, HIST_BINS));
        let h1 = hellinger(&p, &q).unwrap();
        let h2 = hellinger(&q, &p).unwrap();
        prop_assert!((h1 - h2).abs() <= 1e-15);
        prop_assert!((0.0..=1.0).contains(&h1));
        prop_assert_eq!(hellinger(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn hellinger_disjoint_support_is_one(k in 1usize..50, m in 1usize..20) {
        let a = vec![0.005; k];
        let b = vec![0.995; m];
        let h = hellinger(&density_histogram(&a, HIST_BINS), &density_histogram(&b, HIST_BINS)).unwrap();
        prop_assert_eq!(h, 1.0);
    }

    #[test]
    fn pareto_front_is_idempotent(pts in prop::collection::vec((0u8..6, 0u8..6, 0u8..6), 1..60)) {
        let pts: Vec<[f64; 3]> = pts.into_iter().map(|(a, b, c)| [a as f64, b as f64, c as f64]).collect();
        let front = pareto_indices(&pts);
        prop_assert!(!front.is_empty());
        let sub: Vec<[f64; 3]> = front.iter().map(|&i| pts[i]).collect();
        let again = pareto_indices(&sub);
        prop_assert_eq!(again.len(), sub.len());
    }
}
