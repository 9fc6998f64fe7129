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

//! Target-driven cell inflation and target-range diagnostics.

use std::fmt::Write as _;

use serde::Serialize;

use crate::density::{DensityGrid, GridGeometry};
use crate::error::{Error, Result};
use crate::netlist::{Netlist, Placement};
use crate::stats;

pub const DEFAULT_R_MAX: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InflationSource {
    Target,
    PinUniform,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InflationVector {
    /// `r_i >= 1` per cell; macros, fixed cells and fillers keep 1.
    pub factors: Vec<f64>,
    pub source: InflationSource,
    /// Cells whose factor hit the cap.
    pub capped: usize,
    /// Common scale applied to `r_i - 1` to fit the free area (1 if untouched).
    pub excess_scale: f64,
}

impl InflationVector {
    pub fn identity(n: usize) -> Self {
        InflationVector {
            factors: vec![1.0; n],
            source: InflationSource::None,
            capped: 0,
            excess_scale: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// `r_i = 1 / t_i` for movable standard cells, floored at 1 and capped at `r_max`.
pub fn factors_from_targets(
    netlist: &Netlist,
    targets: &[f64],
    r_max: f64,
) -> Result<InflationVector> {
    if targets.len() != netlist.len() {
        return Err(Error::invalid(format!(
            "{} targets for {} cells",
            targets.len(),
            netlist.len()
        )));
    }
    if !(r_max >= 1.0) {
        return Err(Error::invalid("r_max must be at least 1"));
    }
    let mut factors = vec![1.0; netlist.len()];
    let mut capped = 0;
    for cell in netlist.cells.iter().filter(|c| c.is_movable_std()) {
        let t = targets[cell.id];
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!(
                "cell `{}` has non-positive target {t}",
                cell.name
            )));
        }
        let r = (1.0 / t).max(1.0);
        factors[cell.id] = if r > r_max {
            capped += 1;
            r_max
        } else {
            r
        };
    }
    if capped > 0 {
        log::warn!("{capped} inflation factors capped at {r_max}");
    }
    Ok(InflationVector {
        factors,
        source: InflationSource::Target,
        capped,
        excess_scale: 1.0,
    })
}

/// Fraction of the free area the inflated movable cells may occupy.
pub const INFLATION_CAPACITY: f64 = 0.95;

/// Shrinks every `r_i - 1` by one common factor so the inflated movable area
/// fits `capacity` times the area not taken by fixed cells. Factors that
/// already fit are returned unchanged.
pub fn fit_to_capacity(netlist: &Netlist, infl: &InflationVector, capacity: f64) -> Result<InflationVector> {
    if infl.len() != netlist.len() {
        return Err(Error::invalid("inflation vector does not cover the netlist"));
    }
    let fixed: f64 = netlist.cells.iter().filter(|c| !c.movable).map(|c| c.area()).sum();
    let room = capacity * (netlist.floorplan.area() - fixed);
    let base: f64 = netlist.cells.iter().filter(|c| c.movable).map(|c| c.area()).sum();
    let extra: f64 = netlist.cells.iter().filter(|c| c.movable).map(|c| c.area() * (infl.factors[c.id] - 1.0)).sum();
    if base + extra <= room {
        return Ok(infl.clone());
    }
    if base >= room {
        return Err(Error::invalid(format!(
            "movable area {base:.4} leaves no room for inflation (capacity {room:.4})"
        )));
    }
    let s = (room - base) / extra;
    log::warn!("inflated area {:.4} exceeds capacity {room:.4}; excess inflation scaled by {s:.4}", base + extra);
    let mut out = infl.clone();
    for f in &mut out.factors {
        *f = 1.0 + s * (*f - 1.0);
    }
    out.excess_scale = infl.excess_scale * s;
    Ok(out)
}

/// An inflated netlist together with what is needed to restore the original.
#[derive(Debug, Clone)]
pub struct InflatedNetlist {
    pub netlist: Netlist,
    original_widths: Vec<f64>,
    original_pin_x: Vec<Vec<f64>>,
}

impl InflatedNetlist {
    /// Restores the original widths and pin offsets bit-exactly.
    pub fn deflate(&self) -> Netlist {
        let mut out = self.netlist.clone();
        for (cell, (w, pins)) in out
            .cells
            .iter_mut()
            .zip(self.original_widths.iter().zip(&self.original_pin_x))
        {
            cell.width = *w;
            for (p, x) in cell.pin_offsets.iter_mut().zip(pins) {
                p.0 = *x;
            }
        }
        out
    }
}

/// Scales widths and pin x-offsets by `r_i`; heights and pin y-offsets are kept.
pub fn apply_inflation(netlist: &Netlist, infl: &InflationVector) -> Result<InflatedNetlist> {
    if infl.len() != netlist.len() {
        return Err(Error::invalid("inflation vector does not cover the netlist"));
    }
    let mut out = netlist.clone();
    for (cell, &r) in out.cells.iter_mut().zip(&infl.factors) {
        if r != 1.0 {
            cell.width *= r;
            for p in &mut cell.pin_offsets {
                p.0 *= r;
            }
        }
    }
    Ok(InflatedNetlist {
        netlist: out,
        original_widths: netlist.cells.iter().map(|c| c.width).collect(),
        original_pin_x: netlist
            .cells
            .iter()
            .map(|c| c.pin_offsets.iter().map(|p| p.0).collect())
            .collect(),
    })
}

/// `ceil` that ignores floating-point noise just above an integer.
fn ceil_tol(x: f64) -> f64 {
    (x - 1e-9).ceil()
}

/// Pin-count baseline: every cell gets at least `alpha` sites per pin per row.
pub fn pin_inflation(netlist: &Netlist, alpha: f64) -> Result<InflationVector> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    let site = netlist.site_width;
    let mut factors = vec![1.0; netlist.len()];
    for cell in netlist.cells.iter().filter(|c| c.is_movable_std()) {
        let sites = ceil_tol(cell.width / site).max(1.0);
        let rows = ceil_tol(cell.height / netlist.row_height).max(1.0);
        let pins = cell.pin_offsets.len() as f64;
        let extra = ceil_tol(alpha * pins / rows - sites).max(0.0);
        factors[cell.id] = (sites + extra) * site / cell.width;
    }
    Ok(InflationVector {
        factors,
        source: InflationSource::PinUniform,
        capped: 0,
        excess_scale: 1.0,
    })
}

/// Bounds on the uninflated bin density of a bin exactly filled by inflated
/// cells and fillers: `(d_t - filler_fraction) / max r <= rho <= (d_t - filler_fraction) / min r`.
pub fn effective_density_bounds(d_t: f64, filler_fraction: f64, factors: &[f64]) -> (f64, f64) {
    let rmax = factors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rmin = factors.iter().copied().fold(f64::INFINITY, f64::min);
    let free = d_t - filler_fraction;
    (free / rmax, free / rmin)
}

#[derive(Debug, Clone, Serialize)]
pub struct RangeErrorReport {
    #[serde(skip)]
    pub geometry: GridGeometry,
    /// `max t - min t` over the cells whose center lies in the bin.
    #[serde(skip)]
    pub per_bin_range: Vec<f64>,
    /// Whether the bin's average target is at or below its effective density.
    #[serde(skip)]
    pub violating: Vec<bool>,
    pub total_error: f64,
    pub violating_bins: usize,
    /// Counts of per-bin ranges over occupied bins, ten equal bins over `[0, 1]`.
    pub histogram_of_ranges: Vec<usize>,
}

impl RangeErrorReport {
    /// Per-bin ranges, bottom row first.
    pub fn to_csv(&self) -> String {
        let g = self.geometry;
        let mut out = String::new();
        for iy in 0..g.ny {
            let row: Vec<String> = (0..g.nx)
                .map(|ix| format!("{}", self.per_bin_range[g.index(ix, iy)]))
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Total range error over bins whose average target does not exceed the
/// effective (uninflated) bin density.
///
/// `grid` must be built from the placement with uninflated sizes; cells are
/// assigned to the bin containing their center. Only movable standard cells
/// take part.
pub fn range_error(
    targets: &[f64],
    grid: &DensityGrid,
    placement: &Placement,
    netlist: &Netlist,
) -> Result<RangeErrorReport> {
    if targets.len() != netlist.len() || placement.len() != netlist.len() {
        return Err(Error::invalid("targets, placement and netlist sizes differ"));
    }
    let g = grid.geometry;
    let nb = g.num_bins();
    let mut tmin = vec![f64::INFINITY; nb];
    let mut tmax = vec![f64::NEG_INFINITY; nb];
    let mut tsum = vec![0.0; nb];
    let mut count = vec![0usize; nb];
    for cell in netlist.cells.iter().filter(|c| c.is_movable_std()) {
        let (x, y) = placement.positions[cell.id];
        let (ix, iy) = g.bin_of(x + 0.5 * cell.width, y + 0.5 * cell.height);
        let b = g.index(ix, iy);
        let t = targets[cell.id];
        tmin[b] = tmin[b].min(t);
        tmax[b] = tmax[b].max(t);
        tsum[b] += t;
        count[b] += 1;
    }
    let mut per_bin_range = vec![0.0; nb];
    let mut violating = vec![false; nb];
    let mut histogram_of_ranges = vec![0usize; 10];
    let mut total_error = 0.0;
    let mut violating_bins = 0;
    for b in 0..nb {
        if count[b] == 0 {
            continue;
        }
        let range = tmax[b] - tmin[b];
        per_bin_range[b] = range;
        let slot = ((range * 10.0).floor() as usize).min(9);
        histogram_of_ranges[slot] += 1;
        if tsum[b] / count[b] as f64 <= grid.rho(b) {
            violating[b] = true;
            violating_bins += 1;
            total_error += range;
        }
    }
    Ok(RangeErrorReport {
        geometry: g,
        per_bin_range,
        violating,
        total_error,
        violating_bins,
        histogram_of_ranges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationReport {
    /// `None` when either side is constant.
    pub cell_pearson: Option<f64>,
    pub cluster_pearson: Option<f64>,
}

/// Pearson correlation of targets against achieved densities, per cell and
/// optionally per cluster (cluster means).
pub fn target_correlation(
    targets: &[f64],
    achieved: &[f64],
    clusters: Option<&[usize]>,
) -> Result<CorrelationReport> {
    if targets.len() != achieved.len() {
        return Err(Error::invalid("targets and achieved densities differ in length"));
    }
    let cluster_pearson = match clusters {
        None => None,
        Some(assign) => {
            if assign.len() != targets.len() {
                return Err(Error::invalid("cluster assignment differs in length"));
            }
            let k = assign.iter().max().map_or(0, |m| m + 1);
            let mut st = vec![0.0; k];
            let mut sa = vec![0.0; k];
            let mut n = vec![0usize; k];
            for ((&c, t), a) in assign.iter().zip(targets).zip(achieved) {
                st[c] += t;
                sa[c] += a;
                n[c] += 1;
            }
            let (mt, ma): (Vec<f64>, Vec<f64>) = (0..k)
                .filter(|&c| n[c] > 0)
                .map(|c| (st[c] / n[c] as f64, sa[c] / n[c] as f64))
                .unzip();
            stats::pearson(&mt, &ma)
        }
    };
    Ok(CorrelationReport {
        cell_pearson: stats::pearson(targets, achieved),
        cluster_pearson,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{Cell, CellKind, Floorplan, Rect};
    use proptest::prelude::*;

    fn netlist(widths: &[f64]) -> Netlist {
        let cells = widths
            .iter()
            .enumerate()
            .map(|(i, &w)| Cell {
                id: i,
                name: format!("c{i}"),
                width: w,
                height: 1.0,
                kind: CellKind::StdCell,
                movable: true,
                pin_offsets: vec![(w / 2.0, 0.5), (w, 0.25)],
                slack: None,
            })
            .collect();
        Netlist::new(Floorplan::new(0.0, 0.0, 100.0, 100.0), 0.5, 1.0, cells, vec![]).unwrap()
    }

    #[test]
    fn capacity_fit_scales_excess() {
        // floorplan 100x100, two cells of area 2000 each
        let nl = netlist(&[2000.0, 2000.0]);
        let infl = factors_from_targets(&nl, &[0.5, 0.25], DEFAULT_R_MAX).unwrap();
        let fit = fit_to_capacity(&nl, &infl, 0.95).unwrap();
        // 4000 + s (2000 + 6000) = 9500
        let s = 5500.0 / 8000.0;
        assert!((fit.excess_scale - s).abs() < 1e-15);
        assert!((fit.factors[0] - (1.0 + s)).abs() < 1e-15);
        assert!((fit.factors[1] - (1.0 + 3.0 * s)).abs() < 1e-15);
        let area: f64 = nl.cells.iter().map(|c| c.area() * fit.factors[c.id]).sum();
        assert!((area - 9500.0).abs() < 1e-9);
        // already fitting: untouched
        let small = factors_from_targets(&nl, &[1.0, 0.9], DEFAULT_R_MAX).unwrap();
        assert_eq!(fit_to_capacity(&nl, &small, 0.95).unwrap(), small);
        assert!(fit_to_capacity(&netlist(&[9800.0]), &InflationVector::identity(1), 0.95).is_err());
    }

    #[test]
    fn factor_values() {
        let nl = netlist(&[1.0, 1.0, 1.0]);
        let v = factors_from_targets(&nl, &[1.0, 0.5, 0.01], DEFAULT_R_MAX).unwrap();
        assert_eq!(v.factors, vec![1.0, 2.0, 8.0]);
        assert_eq!(v.capped, 1);
        assert!(factors_from_targets(&nl, &[1.0, 0.0, 0.5], 8.0)
            .unwrap_err()
            .to_string()
            .contains("c1"));
    }

    #[test]
    fn macros_are_not_inflated() {
        let mut nl = netlist(&[1.0, 4.0]);
        nl.cells[1].kind = CellKind::Macro;
        nl.cells[1].movable = false;
        let v = factors_from_targets(&nl, &[0.5, 0.5], 8.0).unwrap();
        assert_eq!(v.factors, vec![2.0, 1.0]);
    }

    #[test]
    fn inflation_scales_width_and_pin_x() {
        let mut nl = netlist(&[2.0]);
        nl.cells[0].pin_offsets = vec![(1.0, 0.5)];
        let inf = apply_inflation(
            &nl,
            &InflationVector {
                factors: vec![3.0],
                source: InflationSource::Target,
                capped: 0,
                excess_scale: 1.0,
            },
        )
        .unwrap();
        assert_eq!(inf.netlist.cells[0].width, 6.0);
        assert_eq!(inf.netlist.cells[0].pin_offsets, vec![(3.0, 0.5)]);
        assert_eq!(nl.cells[0].width, 2.0);
        let same = apply_inflation(&nl, &InflationVector::identity(1)).unwrap();
        assert_eq!(same.netlist, nl);
    }

    #[test]
    fn inflate_deflate_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let widths: Vec<f64> = (0..1000).map(|_| rng.random_range(0.1..5.0)).collect();
        let nl = netlist(&widths);
        let t: Vec<f64> = (0..1000).map(|_| rng.random_range(0.05..1.0)).collect();
        let v = factors_from_targets(&nl, &t, 100.0).unwrap();
        for (r, t) in v.factors.iter().zip(&t) {
            assert!((r * t - 1.0).abs() <= 1e-15);
        }
        let inf = apply_inflation(&nl, &v).unwrap();
        assert_eq!(inf.deflate(), nl);
    }

    #[test]
    fn pin_inflation_formula() {
        // 4 sites wide, 8 pins, 1 row
        let mut nl = netlist(&[2.0]);
        nl.cells[0].pin_offsets = vec![(0.0, 0.0); 8];
        let v = pin_inflation(&nl, 1.0).unwrap();
        assert_eq!(v.factors[0] * 2.0, 8.0 * 0.5);
        let v0 = pin_inflation(&netlist(&[1.2]), 0.0).unwrap();
        assert!((v0.factors[0] * 1.2 - 1.5).abs() < 1e-12);
        assert!(pin_inflation(&nl, -1.0).is_err());
    }

    #[test]
    fn pin_inflation_monotone_in_alpha() {
        let nl = netlist(&[0.5, 1.0, 1.5, 3.0, 0.7]);
        let mut prev = pin_inflation(&nl, 0.0).unwrap().factors;
        for k in 0..8 {
            let alpha = 0.25 * 2f64.powi(k);
            let cur = pin_inflation(&nl, alpha).unwrap().factors;
            assert!(cur.iter().zip(&prev).all(|(c, p)| c >= p));
            prev = cur;
        }
    }

    fn one_bin_setup(targets: &[f64], fill: f64) -> (Netlist, Placement, DensityGrid) {
        let nl = netlist(&vec![1.0; targets.len()]);
        let pl = Placement::new("t", (0..targets.len()).map(|i| (i as f64, 0.0)).collect());
        let g = GridGeometry::new(nl.floorplan, 10.0, 10.0).unwrap();
        let mut grid = DensityGrid::empty(g);
        grid.occupied[0] = fill * 100.0;
        (nl, pl, grid)
    }

    #[test]
    fn constant_targets_have_no_range_error() {
        let (nl, pl, grid) = one_bin_setup(&[0.5; 4], 1.0);
        let rep = range_error(&[0.5; 4], &grid, &pl, &nl).unwrap();
        assert_eq!(rep.total_error, 0.0);
    }

    #[test]
    fn violating_bin_contributes_its_range() {
        let (nl, pl, grid) = one_bin_setup(&[0.3, 0.7], 0.5);
        let rep = range_error(&[0.3, 0.7], &grid, &pl, &nl).unwrap();
        assert!((rep.total_error - 0.4).abs() < 1e-15);
        assert_eq!(rep.violating_bins, 1);
    }

    #[test]
    fn met_bin_is_excluded() {
        let (nl, pl, grid) = one_bin_setup(&[0.4, 0.8], 0.4);
        let rep = range_error(&[0.4, 0.8], &grid, &pl, &nl).unwrap();
        assert_eq!(rep.total_error, 0.0);
        assert_eq!(rep.violating_bins, 0);
        assert!((rep.per_bin_range[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn bounds_hold_on_full_bins() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let k = rng.random_range(1..20);
            let areas: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
            let r: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..5.0)).collect();
            let inflated: f64 = areas.iter().zip(&r).map(|(a, r)| a * r).sum();
            let filler = rng.random_range(0.0..10.0);
            // bin sized so inflated cells + fillers fill it exactly (d_t = 1)
            let bin_area = inflated + filler;
            let rho = areas.iter().sum::<f64>() / bin_area;
            let (lo, hi) = effective_density_bounds(1.0, filler / bin_area, &r);
            assert!(lo <= rho + 1e-12 && rho <= hi + 1e-12);
        }
    }

    #[test]
    fn correlation_cases() {
        let t = [0.2, 0.4, 0.9, 0.5];
        let r = target_correlation(&t, &t, Some(&[0, 0, 1, 1])).unwrap();
        assert!((r.cell_pearson.unwrap() - 1.0).abs() < 1e-15);
        assert!((r.cluster_pearson.unwrap() - 1.0).abs() < 1e-15);
        let r = target_correlation(&t, &[0.5; 4], None).unwrap();
        assert_eq!(r.cell_pearson, None);
    }

    #[test]
    fn noisy_linear_relation_matches_closed_form() {
        use rand::{Rng, SeedableRng};
        use rand_distr::StandardNormal;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let n = 20_000;
        let (slope, sx, noise) = (0.8, 0.2, 0.1);
        let t: Vec<f64> = (0..n).map(|_| 0.5 + sx * rng.sample::<f64, _>(StandardNormal)).collect();
        let a: Vec<f64> = t.iter().map(|t| slope * t + noise * rng.sample::<f64, _>(StandardNormal)).collect();
        let expected = slope * sx / ((slope * sx).powi(2) + noise * noise).sqrt();
        let r = target_correlation(&t, &a, None).unwrap().cell_pearson.unwrap();
        assert!((r - expected).abs() < 0.01, "{r} vs {expected}");
    }

    proptest! {
        #[test]
        fn inflated_area_never_shrinks(t in prop::collection::vec(0.01f64..1.0, 1..50)) {
            let nl = netlist(&vec![1.5; t.len()]);
            let v = factors_from_targets(&nl, &t, DEFAULT_R_MAX).unwrap();
            let inflated: f64 = nl.cells.iter().map(|c| c.area() * v.factors[c.id]).sum();
            let base: f64 = nl.cells.iter().map(|c| c.area()).sum();
            prop_assert!(inflated >= base);
        }

        #[test]
        fn tightening_targets_never_widens_ranges(
            t in prop::collection::vec(0.05f64..1.0, 2..30),
            shrink in 0.0f64..1.0,
        ) {
            let nl = netlist(&vec![1.0; t.len()]);
            let pl = Placement::new("t", (0..t.len()).map(|i| (3.0 * (i % 5) as f64, 0.0)).collect());
            let grid = DensityGrid::build(GridGeometry::new(nl.floorplan, 10.0, 10.0).unwrap(),
                &nl.rects(&pl));
            let before = range_error(&t, &grid, &pl, &nl).unwrap();
            let m = stats::mean(&t);
            let t2: Vec<f64> = t.iter().map(|v| m + shrink * (v - m)).collect();
            let after = range_error(&t2, &grid, &pl, &nl).unwrap();
            for (a, b) in after.per_bin_range.iter().zip(&before.per_bin_range) {
                prop_assert!(*a <= *b + 1e-12);
            }
            let _ = Rect::new(0.0, 0.0, 1.0, 1.0);
        }
    }
}
