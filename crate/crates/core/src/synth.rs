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

//! Synthetic designs for tests, demos and the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::netlist::{Cell, CellKind, Floorplan, Net, Netlist, PinRef, Placement, SizeTable};
use crate::Result;

const SITE: f64 = 0.2;
const ROW: f64 = 1.0;
/// Two-region pads are small so golden rows may run underneath them.
const PAD: f64 = 0.2;
const BOUNDARY: usize = 6;

fn std_cell(name: String, sites: u32, pins: usize, rng: &mut ChaCha8Rng) -> Cell {
    let w = sites as f64 * SITE;
    Cell {
        id: 0,
        name,
        width: w,
        height: ROW,
        kind: CellKind::StdCell,
        movable: true,
        pin_offsets: (0..pins)
            .map(|_| (rng.random_range(0.0..=w), rng.random_range(0.2..=0.8)))
            .collect(),
        slack: None,
    }
}

fn pad(name: String) -> Cell {
    sized_pad(name, ROW)
}

fn sized_pad(name: String, size: f64) -> Cell {
    Cell {
        id: 0,
        name,
        width: size,
        height: size,
        kind: CellKind::Macro,
        movable: false,
        pin_offsets: vec![(0.5 * size, 0.5 * size)],
        slack: None,
    }
}

/// Builder that hands out one pin per connection on each cell.
struct NetBuilder {
    nets: Vec<Net>,
    used: Vec<usize>,
}

impl NetBuilder {
    fn new(cells: usize) -> Self {
        NetBuilder { nets: Vec::new(), used: vec![0; cells] }
    }

    fn add(&mut self, cells: &[usize]) {
        let pins = cells
            .iter()
            .map(|&c| {
                let p = self.used[c];
                self.used[c] += 1;
                PinRef { cell: c, pin: p }
            })
            .collect();
        self.nets.push(Net { id: self.nets.len(), pins });
    }

    /// Resizes pin lists to the number of connections handed out.
    fn finish(self, cells: &mut [Cell], rng: &mut ChaCha8Rng) -> Vec<Net> {
        for (c, &n) in cells.iter_mut().zip(&self.used) {
            let n = n.max(1);
            if c.pin_offsets.len() != n {
                let (w, h) = (c.width, c.height);
                c.pin_offsets = (0..n)
                    .map(|_| {
                        if c.kind == CellKind::Macro {
                            (0.5 * w, 0.5 * h)
                        } else {
                            (rng.random_range(0.0..=w), rng.random_range(0.2 * h..=0.8 * h))
                        }
                    })
                    .collect();
            }
        }
        self.nets
    }
}

#[derive(Debug, Clone)]
pub struct TwoRegionParams {
    /// Movable standard cells, split evenly between the regions.
    pub cells: usize,
    pub seed: u64,
    pub t_left: f64,
    pub t_right: f64,
    /// Relative amplitude of smooth density variation in the golden placement.
    pub noise: f64,
    pub buffers: usize,
    /// Post-route-only cells inserted in the left region.
    pub extra: usize,
    /// Floorplan area over the total inflated cell area.
    pub whitespace: f64,
    /// Probability of each vertical mesh link in the right group.
    pub right_vertical: f64,
    /// Probability of extra links between cells near the group boundary.
    pub crossing: f64,
}

impl Default for TwoRegionParams {
    fn default() -> Self {
        TwoRegionParams {
            cells: 2000,
            seed: 1,
            t_left: 0.4,
            t_right: 0.9,
            noise: 0.0,
            buffers: 0,
            extra: 0,
            whitespace: 1.1,
            right_vertical: 0.3,
            crossing: 0.3,
        }
    }
}

/// A placement netlist with a golden post-route reference.
#[derive(Debug, Clone)]
pub struct SynthDesign {
    pub netlist: Netlist,
    /// Pads at their fixed positions, movable cells at their golden positions.
    pub fixed: Placement,
    pub postroute: Netlist,
    pub postroute_positions: Placement,
    pub sizes: SizeTable,
    /// Region target of every placement cell (1 for pads).
    pub region_targets: Vec<f64>,
    /// 0 for the left group, 1 for the right group, 2 for pads.
    pub group: Vec<usize>,
}

/// Smooth random field with unit-scale amplitude.
struct Field {
    terms: Vec<(f64, f64, f64, f64)>,
}

impl Field {
    fn new(rng: &mut ChaCha8Rng, scale: f64) -> Self {
        let terms = (0..6)
            .map(|_| {
                (
                    rng.random_range(0.5..2.0) / scale,
                    rng.random_range(0.5..2.0) / scale,
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Field { terms }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let s: f64 = self.terms.iter().map(|(a, b, p, q)| (a * x + p).sin() * (b * y + q).sin()).sum();
        s * (2.0 / self.terms.len() as f64).sqrt() * 2.0
    }
}

/// Two groups of cells. The left group is tightly meshed and placed sparsely
/// (`t_left`) in the golden layout; the right group is loosely meshed, pulled
/// toward pads on the right, top and bottom, and placed densely (`t_right`).
pub fn two_region(params: &TwoRegionParams) -> Result<SynthDesign> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n_left = params.cells / 2;
    let widths: Vec<u32> = (0..params.cells).map(|_| rng.random_range(2..=6)).collect();
    let area = |r: std::ops::Range<usize>| -> f64 { widths[r].iter().map(|&s| s as f64 * SITE * ROW).sum() };
    let (a_left, a_right) = (area(0..n_left), area(n_left..params.cells));
    let inflated = a_left / params.t_left + a_right / params.t_right;
    let base_side = (params.whitespace * inflated).sqrt().ceil();
    let field = Field::new(&mut rng, base_side / 6.0);

    // Golden rows: each group fills its own vertical strip at its target density.
    let mut cells = Vec::new();
    let mut golden = Vec::new();
    let mut lattice: Vec<Vec<Vec<usize>>> = vec![Vec::new(), Vec::new()];
    let ranges = [0..n_left, n_left..params.cells];
    let targets = [params.t_left, params.t_right];
    let group_area = [a_left, a_right];
    let local_t = |g: usize, x: f64, y: f64| (targets[g] * (1.0 + params.noise * field.at(x, y))).clamp(0.1, 0.92);
    // Top row reached by group `g` laid out in [x0, x1] from the first row.
    let top_row = |g: usize, x0: f64, x1: f64| {
        let (mut x, mut y) = (x0, 0.0);
        let mut started = false;
        for i in ranges[g].clone() {
            let w = widths[i] as f64 * SITE;
            let pitch = w / local_t(g, x, y);
            if x + pitch > x1 + 1e-9 && started {
                x = x0;
                y += ROW;
            }
            started = true;
            x += pitch;
        }
        y
    };
    // Each strip is widened until its noisy rows fit below the top edge; the
    // floorplan grows if they do not.
    let mut side = base_side;
    let strips = loop {
        let mut x0 = 0.0;
        let mut strips = [(0.0, 0.0); 2];
        for g in 0..2 {
            let mut width = 1.04 * group_area[g] / targets[g] / side;
            while top_row(g, x0, x0 + width) > side - ROW {
                width *= 1.02;
            }
            strips[g] = (x0, x0 + width);
            x0 += width;
        }
        if x0 <= side {
            break strips;
        }
        side += 1.0;
    };
    let fp = Floorplan::new(0.0, 0.0, side, side);
    let mut group = Vec::new();
    for g in 0..2 {
        let (x0, x1) = strips[g];
        let (mut x, mut y) = (x0, 0.0);
        let mut row = Vec::new();
        for (k, i) in ranges[g].clone().enumerate() {
            let w = widths[i] as f64 * SITE;
            let t = local_t(g, x, y);
            let pitch = w / t;
            if x + pitch > x1 + 1e-9 && !row.is_empty() {
                lattice[g].push(std::mem::take(&mut row));
                x = x0;
                y += ROW;
            }
            let name = if g == 0 {
                format!("left/m{}/u{k}", k / 100)
            } else {
                format!("right/m{}/u{k}", k / 100)
            };
            let id = cells.len();
            cells.push(std_cell(name, widths[i], 0, &mut rng));
            golden.push(((x + 0.5 * (pitch - w)).min(fp.x_max() - w), y.min(fp.y_max() - ROW)));
            group.push(g);
            row.push(id);
            x += pitch;
        }
        if !row.is_empty() {
            lattice[g].push(row);
        }
    }

    let mut nb = NetBuilder::new(0);
    let mut nets_spec: Vec<Vec<usize>> = Vec::new();
    // Left: full mesh plus local three-pin nets.
    for g in 0..2 {
        let rows = &lattice[g];
        for (r, row) in rows.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if j + 1 < row.len() {
                    nets_spec.push(vec![c, row[j + 1]]);
                }
                if let Some(next) = rows.get(r + 1) {
                    let k = ((j as f64 + 0.5) / row.len() as f64 * next.len() as f64) as usize;
                    let k = k.min(next.len() - 1);
                    if g == 0 || rng.random_bool(params.right_vertical) {
                        nets_spec.push(vec![c, next[k]]);
                    }
                    if g == 0 && j + 1 < row.len() {
                        nets_spec.push(vec![c, row[j + 1], next[k]]);
                    }
                }
            }
        }
    }
    // Boundary nets joining the two groups.
    for (r, lrow) in lattice[0].iter().enumerate() {
        if let Some(rrow) = lattice[1].get(r) {
            for k in 0..lrow.len().min(rrow.len()).min(BOUNDARY) {
                if k == 0 || rng.random_bool(params.crossing) {
                    let j = rng.random_range(0..rrow.len().min(BOUNDARY));
                    nets_spec.push(vec![lrow[lrow.len() - 1 - k], rrow[j]]);
                }
            }
        }
    }
    // Pads.
    let mut pad_pos = Vec::new();
    let n_pads = 8usize;
    let left_rows = lattice[0].len();
    for p in 0..n_pads {
        let id = cells.len();
        cells.push(sized_pad(format!("pad_l{p}"), PAD));
        let y = side * (0.35 + 0.3 * p as f64 / (n_pads - 1) as f64) - 0.5;
        pad_pos.push((0.0, y.floor()));
        let row = &lattice[0][((y / side) * left_rows as f64) as usize % left_rows];
        nets_spec.push(vec![id, row[0]]);
        group.push(2);
        golden.push(*pad_pos.last().expect("just pushed"));
    }
    let right: Vec<usize> = lattice[1].iter().flatten().copied().collect();
    for p in 0..3 * n_pads {
        let id = cells.len();
        cells.push(sized_pad(format!("pad_r{p}"), PAD));
        let s = p as f64 / (3 * n_pads) as f64;
        let pos = match p % 3 {
            0 => (side - ROW, (s * side).floor().min(side - ROW)),
            1 => ((side * (0.5 + 0.5 * s)).floor().min(side - ROW), 0.0),
            _ => ((side * (0.5 + 0.5 * s)).floor().min(side - ROW), side - ROW),
        };
        pad_pos.push(pos);
        let c = right[rng.random_range(0..right.len())];
        nets_spec.push(vec![id, c]);
        group.push(2);
        golden.push(pos);
    }
    nb.used = vec![0; cells.len()];
    for spec in &nets_spec {
        nb.add(spec);
    }
    let nets = nb.finish(&mut cells, &mut rng);

    let slack_of = |g: usize, rng: &mut ChaCha8Rng| match g {
        0 => Some(rng.random_range(-0.3..0.0)),
        1 => Some(rng.random_range(0.0..0.5)),
        _ => None,
    };
    for (c, &g) in cells.iter_mut().zip(&group) {
        c.slack = slack_of(g, &mut rng);
    }
    let netlist = Netlist::new(fp, SITE, ROW, cells, nets)?;
    let region_targets = group
        .iter()
        .map(|&g| match g {
            0 => params.t_left,
            1 => params.t_right,
            _ => 1.0,
        })
        .collect();

    // Post-route view: same cells at golden positions, some upsized, plus
    // buffers and optimization cells.
    let mut sizes = SizeTable::new();
    let mut pr_cells = netlist.cells.clone();
    for c in pr_cells.iter_mut() {
        if c.kind == CellKind::StdCell && rng.random_bool(0.1) {
            c.width += SITE;
        }
        sizes.insert(c.name.clone(), (c.width, c.height));
    }
    let mut pr_pos = golden.clone();
    let left_ids: Vec<usize> = (0..n_left).collect();
    for b in 0..params.buffers {
        let anchor = rng.random_range(0..params.cells);
        let (x, y) = golden[anchor];
        pr_cells.push(Cell {
            id: 0,
            name: format!("buf_{b}"),
            width: 2.0 * SITE,
            height: ROW,
            kind: CellKind::Buffer,
            movable: true,
            pin_offsets: vec![(0.1, 0.5), (0.3, 0.5)],
            slack: None,
        });
        pr_pos.push((x, (y + ROW).min(side - ROW)));
    }
    for e in 0..params.extra {
        let anchor = left_ids[rng.random_range(0..left_ids.len())];
        let (x, y) = golden[anchor];
        pr_cells.push(Cell {
            id: 0,
            name: format!("left/opt/u{e}"),
            width: 3.0 * SITE,
            height: ROW,
            kind: CellKind::StdCell,
            movable: true,
            pin_offsets: vec![(0.3, 0.5)],
            slack: None,
        });
        pr_pos.push(((x + 0.5).min(side - 0.6), y));
    }
    let postroute = Netlist::new(fp, SITE, ROW, pr_cells, Vec::new())?;
    Ok(SynthDesign {
        netlist,
        fixed: Placement::new("synthetic-golden", golden),
        postroute,
        postroute_positions: Placement::new("synthetic-postroute", pr_pos),
        sizes,
        region_targets,
        group,
    })
}

/// Square mesh of cells with pads spaced evenly on all four sides, at the given
/// utilization.
pub fn mesh(cells: usize, utilization: f64, seed: u64) -> Result<(Netlist, Placement)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = (cells as f64).sqrt().ceil() as usize;
    let mut list = Vec::new();
    let mut area = 0.0;
    for i in 0..cells {
        let sites = rng.random_range(2..=6);
        area += sites as f64 * SITE * ROW;
        list.push(std_cell(format!("mesh/r{}/u{i}", i / k), sites, 0, &mut rng));
    }
    let side = (area / utilization).sqrt().ceil();
    let mut specs = Vec::new();
    for i in 0..cells {
        if (i + 1) % k != 0 && i + 1 < cells {
            specs.push(vec![i, i + 1]);
        }
        if i + k < cells {
            specs.push(vec![i, i + k]);
        }
    }
    let mut pos = vec![(0.0, 0.0); cells];
    let per_side = 4usize.max(k / 4);
    for s in 0..4 {
        for p in 0..per_side {
            let f = (p as f64 + 0.5) / per_side as f64;
            let id = list.len();
            list.push(pad(format!("pad_{s}_{p}")));
            let along = (f * side).floor().min(side - ROW);
            let (xy, lattice) = match s {
                0 => ((0.0, along), ((f * k as f64) as usize).min(k - 1) * k),
                1 => ((side - ROW, along), ((f * k as f64) as usize).min(k - 1) * k + k - 1),
                2 => ((along, 0.0), ((f * k as f64) as usize).min(k - 1)),
                _ => ((along, side - ROW), (k - 1) * k + ((f * k as f64) as usize).min(k - 1)),
            };
            pos.push(xy);
            specs.push(vec![id, lattice.min(cells - 1)]);
        }
    }
    let mut nb = NetBuilder::new(list.len());
    for s in &specs {
        nb.add(s);
    }
    let nets = nb.finish(&mut list, &mut rng);
    let nl = Netlist::new(Floorplan::new(0.0, 0.0, side, side), SITE, ROW, list, nets)?;
    Ok((nl, Placement::new("mesh-fixed", pos)))
}

/// Two modules `top/a/*` and `top/b/*` with dense internal and sparse
/// crossing connectivity. Returns the netlist and the planted module labels.
pub fn planted_modules(per_module: usize, inter_nets: usize, seed: u64) -> Result<(Netlist, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::new();
    let mut truth = Vec::new();
    for (m, tag) in ["a", "b"].iter().enumerate() {
        for i in 0..per_module {
            cells.push(std_cell(format!("top/{tag}/u{i}"), 3, 0, &mut rng));
            truth.push(m);
        }
    }
    let mut nb = NetBuilder::new(cells.len());
    for m in 0..2 {
        let base = m * per_module;
        for i in 0..per_module {
            for _ in 0..6 {
                let deg = rng.random_range(2..=4);
                let mut pins = vec![base + i];
                while pins.len() < deg {
                    let j = base + rng.random_range(0..per_module);
                    if !pins.contains(&j) {
                        pins.push(j);
                    }
                }
                nb.add(&pins);
            }
        }
    }
    for _ in 0..inter_nets {
        let a = rng.random_range(0..per_module);
        let b = per_module + rng.random_range(0..per_module);
        nb.add(&[a, b]);
    }
    let nets = nb.finish(&mut cells, &mut rng);
    let side = ((cells.len() as f64 * 0.6) / 0.5).sqrt().ceil();
    Ok((Netlist::new(Floorplan::new(0.0, 0.0, side, side), SITE, ROW, cells, nets)?, truth))
}

/// Random cells scattered over a floorplan, some partly outside it, plus a few
/// fixed macros and random nets.
pub fn random_placed(cells: usize, seed: u64) -> Result<(Netlist, Placement)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = ((cells as f64) * 1.2).sqrt().ceil() + 4.0;
    let fp = Floorplan::new(-2.0, 3.0, side, side * 0.8);
    let mut list = Vec::new();
    let mut pos = Vec::new();
    let spread = Normal::new(0.0, 1.0).expect("unit normal");
    for i in 0..cells {
        let c = if i % 97 == 5 {
            let mut m = pad(format!("macro{i}"));
            m.width = rng.random_range(2.0..6.0);
            m.height = rng.random_range(2.0..6.0);
            m.pin_offsets = vec![(0.5 * m.width, 0.5 * m.height)];
            m
        } else {
            std_cell(format!("g{}/u{i}", i % 7), rng.random_range(1..=8), 0, &mut rng)
        };
        let x = fp.x - 1.0 + rng.random_range(0.0..fp.width + 1.0) + 0.1 * spread.sample(&mut rng);
        let y = fp.y - 0.5 + rng.random_range(0.0..fp.height + 0.5);
        pos.push((x, y));
        list.push(c);
    }
    let mut nb = NetBuilder::new(list.len());
    for _ in 0..cells {
        let deg = rng.random_range(2..=5).min(cells);
        let mut pins: Vec<usize> = Vec::new();
        while pins.len() < deg {
            let j = rng.random_range(0..cells);
            if !pins.contains(&j) {
                pins.push(j);
            }
        }
        nb.add(&pins);
    }
    let nets = nb.finish(&mut list, &mut rng);
    Ok((Netlist::new(fp, SITE, ROW, list, nets)?, Placement::new("random", pos)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{achieved_density, tool_target};

    #[test]
    fn two_region_golden_matches_targets() {
        let d = two_region(&TwoRegionParams { cells: 800, ..Default::default() }).unwrap();
        d.fixed.check_bounds(&d.netlist, 1e-9).unwrap();
        let (_, rho) = achieved_density(&d.netlist, &d.fixed, 4.0).unwrap();
        let mean = |g: usize| {
            let v: Vec<f64> = (0..d.netlist.len()).filter(|&i| d.group[i] == g).map(|i| rho.values[i]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!((mean(0) - 0.4).abs() < 0.08, "{}", mean(0));
        assert!((mean(1) - 0.9).abs() < 0.12, "{}", mean(1));
    }

    #[test]
    fn two_region_matches_post_route() {
        let p = TwoRegionParams { cells: 400, buffers: 30, extra: 20, noise: 0.2, ..Default::default() };
        let d = two_region(&p).unwrap();
        let t = tool_target(&d.netlist, &d.postroute, &d.postroute_positions, &d.sizes, 4.0).unwrap();
        assert_eq!(t.report.removed_buffers, 30);
        assert_eq!(t.report.zeroed.len(), 20);
        assert!(t.report.place_only.is_empty());
    }

    #[test]
    fn noisy_golden_rows_fit() {
        for (cells, seed) in [(1000, 1), (2000, 1), (2000, 3)] {
            let d = two_region(&TwoRegionParams { cells, seed, noise: 0.2, ..Default::default() }).unwrap();
            let t = tool_target(&d.netlist, &d.postroute, &d.postroute_positions, &d.sizes, 4.0).unwrap();
            let worst = d
                .netlist
                .movable_std_ids()
                .into_iter()
                .map(|i| t.targets.values[i])
                .fold(0.0, f64::max);
            assert!(worst <= 1.1, "{cells}/{seed}: {worst}");
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = mesh(100, 0.7, 3).unwrap();
        let b = mesh(100, 0.7, 3).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        a.1.check_bounds(&a.0, 1e-9).unwrap();
        let (nl, truth) = planted_modules(40, 5, 1).unwrap();
        assert_eq!(truth.len(), nl.len());
        let (nl, pl) = random_placed(300, 2).unwrap();
        assert_eq!(nl.len(), pl.len());
    }
}
