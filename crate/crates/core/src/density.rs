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

//! Bin and cell densities.
//!
//! `rho_b = sum_i OA(i, b) / A_b` and `rho_i = sum_b rho_b * OA(i, b) / a_i`, with
//! `OA` the exact rectangle intersection area. Boundary bins are clipped to the
//! floorplan and `A_b` is the clipped area.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::netlist::{
    match_netlists, CellKind, Floorplan, MatchReport, Netlist, Placement, Provenance, Rect,
    SizeTable, TargetVector,
};

/// Default bin edge in row heights.
pub const DEFAULT_BIN_SCALE: f64 = 10.0;

const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub floorplan: Floorplan,
    pub bin_w: f64,
    pub bin_h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridGeometry {
    pub fn new(floorplan: Floorplan, bin_w: f64, bin_h: f64) -> Result<Self> {
        if !(floorplan.area() > 0.0) {
            return Err(Error::invalid("zero-area floorplan"));
        }
        if !(bin_w > 0.0 && bin_h > 0.0) {
            return Err(Error::invalid("bin dimensions must be positive"));
        }
        let count = |len: f64, bin: f64| ((len / bin) - 1e-9).ceil().max(1.0) as usize;
        Ok(GridGeometry {
            floorplan,
            bin_w,
            bin_h,
            nx: count(floorplan.width, bin_w),
            ny: count(floorplan.height, bin_h),
        })
    }

    /// Square bins of `bin_scale` row heights.
    pub fn for_netlist(netlist: &Netlist, bin_scale: f64) -> Result<Self> {
        if !(bin_scale > 0.0) {
            return Err(Error::invalid("bin scale must be positive"));
        }
        let edge = bin_scale * netlist.row_height;
        GridGeometry::new(netlist.floorplan, edge, edge)
    }

    pub fn num_bins(&self) -> usize {
        self.nx * self.ny
    }

    /// Row-major index, `ix` fastest.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn bin_rect(&self, ix: usize, iy: usize) -> Rect {
        let fp = self.floorplan;
        let x0 = fp.x + ix as f64 * self.bin_w;
        let y0 = fp.y + iy as f64 * self.bin_h;
        let x1 = (x0 + self.bin_w).min(fp.x_max());
        let y1 = (y0 + self.bin_h).min(fp.y_max());
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Bin containing point `(x, y)`, clamped to the grid.
    pub fn bin_of(&self, x: f64, y: f64) -> (usize, usize) {
        let fx = ((x - self.floorplan.x) / self.bin_w).floor();
        let fy = ((y - self.floorplan.y) / self.bin_h).floor();
        (
            (fx.max(0.0) as usize).min(self.nx - 1),
            (fy.max(0.0) as usize).min(self.ny - 1),
        )
    }

    /// Calls `f(bin, overlap_area)` for each bin the rectangle overlaps.
    pub fn for_each_overlap(&self, r: &Rect, mut f: impl FnMut(usize, f64)) {
        let fp = self.floorplan;
        let x0 = r.x.max(fp.x);
        let x1 = (r.x + r.w).min(fp.x_max());
        let y0 = r.y.max(fp.y);
        let y1 = (r.y + r.h).min(fp.y_max());
        if !(x1 > x0 && y1 > y0) {
            return;
        }
        let ix0 = (((x0 - fp.x) / self.bin_w).floor() as usize).min(self.nx - 1);
        let ix1 = (((x1 - fp.x) / self.bin_w).ceil() as usize).clamp(ix0 + 1, self.nx);
        let iy0 = (((y0 - fp.y) / self.bin_h).floor() as usize).min(self.ny - 1);
        let iy1 = (((y1 - fp.y) / self.bin_h).ceil() as usize).clamp(iy0 + 1, self.ny);
        for iy in iy0..iy1 {
            let by0 = fp.y + iy as f64 * self.bin_h;
            let by1 = if iy + 1 == self.ny { fp.y_max() } else { by0 + self.bin_h };
            let oy = y1.min(by1) - y0.max(by0);
            if oy <= 0.0 {
                continue;
            }
            for ix in ix0..ix1 {
                let bx0 = fp.x + ix as f64 * self.bin_w;
                let bx1 = if ix + 1 == self.nx { fp.x_max() } else { bx0 + self.bin_w };
                let ox = x1.min(bx1) - x0.max(bx0);
                if ox > 0.0 {
                    f(self.index(ix, iy), ox * oy);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub geometry: GridGeometry,
    /// Accumulated overlap area per bin.
    pub occupied: Vec<f64>,
    /// Bin area, clipped at the floorplan boundary.
    pub bin_area: Vec<f64>,
}

impl DensityGrid {
    pub fn empty(geometry: GridGeometry) -> Self {
        let mut bin_area = Vec::with_capacity(geometry.num_bins());
        for iy in 0..geometry.ny {
            for ix in 0..geometry.nx {
                bin_area.push(geometry.bin_rect(ix, iy).area());
            }
        }
        DensityGrid {
            occupied: vec![0.0; geometry.num_bins()],
            bin_area,
            geometry,
        }
    }

    /// Accumulates the rectangles in fixed-size chunks merged in order, so the
    /// result does not depend on the thread count.
    pub fn build(geometry: GridGeometry, rects: &[Rect]) -> Self {
        let mut grid = DensityGrid::empty(geometry);
        let partials: Vec<Vec<f64>> = rects
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut occ = vec![0.0; geometry.num_bins()];
                for r in chunk {
                    geometry.for_each_overlap(r, |b, a| occ[b] += a);
                }
                occ
            })
            .collect();
        for part in partials {
            for (o, p) in grid.occupied.iter_mut().zip(part) {
                *o += p;
            }
        }
        grid
    }

    pub fn add_rect(&mut self, r: &Rect) {
        let occ = &mut self.occupied;
        self.geometry.for_each_overlap(r, |b, a| occ[b] += a);
    }

    pub fn num_bins(&self) -> usize {
        self.occupied.len()
    }

    pub fn rho(&self, bin: usize) -> f64 {
        self.occupied[bin] / self.bin_area[bin]
    }

    pub fn rho_all(&self) -> Vec<f64> {
        (0..self.num_bins()).map(|b| self.rho(b)).collect()
    }

    pub fn total_occupied(&self) -> f64 {
        self.occupied.iter().sum()
    }

    /// Density of every cell rectangle against this grid.
    pub fn cell_density(&self, rects: &[Rect]) -> Result<CellDensityVector> {
        let rho = self.rho_all();
        let values = rects
            .par_iter()
            .map(|r| {
                let a = r.area();
                if !(a > 0.0) {
                    return Err(Error::numerical("cell with zero area in density evaluation"));
                }
                let mut acc = 0.0;
                self.geometry.for_each_overlap(r, |b, oa| acc += rho[b] * oa);
                Ok(acc / a)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CellDensityVector {
            values,
            geometry: self.geometry,
        })
    }

    /// `ny` lines of `nx` comma-separated densities, bottom row first.
    pub fn to_csv(&self) -> String {
        let g = self.geometry;
        let mut out = String::new();
        for iy in 0..g.ny {
            let row: Vec<String> = (0..g.nx)
                .map(|ix| format!("{}", self.rho(g.index(ix, iy))))
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Plain (ASCII) PGM, densities clamped to `[0, 1]` and scaled to 255, top row first.
    pub fn to_pgm(&self) -> String {
        let g = self.geometry;
        let mut out = format!("P2\n{} {}\n255\n", g.nx, g.ny);
        for iy in (0..g.ny).rev() {
            let row: Vec<String> = (0..g.nx)
                .map(|ix| {
                    let v = self.rho(g.index(ix, iy)).clamp(0.0, 1.0);
                    format!("{}", (v * 255.0).round() as u8)
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDensityVector {
    pub values: Vec<f64>,
    pub geometry: GridGeometry,
}

/// Rectangles for the density of a netlist at a placement. Fillers get an empty
/// rectangle so ids stay aligned but they contribute nothing.
pub fn netlist_rects(
    netlist: &Netlist,
    placement: &Placement,
    sizes: Option<&[(f64, f64)]>,
) -> Vec<Rect> {
    netlist
        .cells
        .iter()
        .map(|c| {
            let (x, y) = placement.positions[c.id];
            let (w, h) = sizes.map_or((c.width, c.height), |s| s[c.id]);
            if c.kind == CellKind::Filler {
                Rect::new(x, y, 0.0, 0.0)
            } else {
                Rect::new(x, y, w, h)
            }
        })
        .collect()
}

pub fn build_grid(
    netlist: &Netlist,
    placement: &Placement,
    sizes: Option<&[(f64, f64)]>,
    bin_scale: f64,
) -> Result<DensityGrid> {
    if placement.len() != netlist.len() {
        return Err(Error::invalid("placement does not cover the netlist"));
    }
    let geometry = GridGeometry::for_netlist(netlist, bin_scale)?;
    Ok(DensityGrid::build(geometry, &netlist_rects(netlist, placement, sizes)))
}

/// Cell densities; fillers get 0.
pub fn cell_density(
    grid: &DensityGrid,
    netlist: &Netlist,
    placement: &Placement,
    sizes: Option<&[(f64, f64)]>,
) -> Result<CellDensityVector> {
    let rects: Vec<Rect> = netlist_rects(netlist, placement, sizes)
        .into_iter()
        .map(|r| if r.area() > 0.0 { r } else { Rect::new(r.x, r.y, 1.0, 1.0) })
        .collect();
    let mut out = grid.cell_density(&rects)?;
    for c in netlist.cells.iter().filter(|c| c.kind == CellKind::Filler) {
        out.values[c.id] = 0.0;
    }
    Ok(out)
}

/// Grid plus cell densities in one call.
pub fn achieved_density(
    netlist: &Netlist,
    placement: &Placement,
    bin_scale: f64,
) -> Result<(DensityGrid, CellDensityVector)> {
    let grid = build_grid(netlist, placement, None, bin_scale)?;
    let cells = cell_density(&grid, netlist, placement, None)?;
    Ok((grid, cells))
}

#[derive(Debug, Clone)]
pub struct ToolTarget {
    pub targets: TargetVector,
    pub report: MatchReport,
    pub grid: DensityGrid,
}

/// Tool targets `z` for every place-netlist cell, measured on the matched
/// post-route geometry. Place-only cells receive the mean matched target.
pub fn tool_target(
    place: &Netlist,
    postroute: &Netlist,
    postroute_positions: &Placement,
    postsynth_sizes: &SizeTable,
    bin_scale: f64,
) -> Result<ToolTarget> {
    let (geom, report) = match_netlists(place, postroute, postroute_positions, postsynth_sizes)?;
    let geometry = GridGeometry::for_netlist(postroute, bin_scale)?;
    let grid = DensityGrid::build(geometry, &geom.rects);
    let rho = grid.cell_density(&geom.rects)?.values;

    let mut values = vec![f64::NAN; place.len()];
    let mut sum = 0.0;
    let mut count = 0usize;
    for (pid, slot) in geom.place_index.iter().enumerate() {
        if let Some(g) = slot {
            values[pid] = rho[*g];
            sum += rho[*g];
            count += 1;
        }
    }
    let mean = sum / count as f64;
    for v in values.iter_mut().filter(|v| v.is_nan()) {
        *v = mean;
    }
    Ok(ToolTarget {
        targets: TargetVector::for_netlist(place, values, Provenance::Tool),
        report,
        grid,
    })
}
