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

//! Analytic global placer.
//!
//! Minimizes weighted-average wirelength plus `lambda` times an electrostatic
//! density penalty with Nesterov's method. Fillers absorb the whitespace
//! implied by the global target density `d_t`; cell inflation reshapes the
//! local density without changing the objective.

pub mod poisson;
pub mod wirelength;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{DensityGrid, GridGeometry};
use crate::inflation::{
    apply_inflation, factors_from_targets, fit_to_capacity, InflationVector, DEFAULT_R_MAX, INFLATION_CAPACITY,
};
use crate::netlist::{Cell, CellKind, Netlist, Placement, Rect};
use crate::{Error, Result};

pub use poisson::PoissonSolver;
pub use wirelength::PinModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacerMode {
    Uniform,
    Inflated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensitySolver {
    /// Poisson potential from a cosine-transform solve.
    Spectral,
    /// Gradient of the local bin overflow, no global solve.
    LocalOverflow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacerConfig {
    pub d_t: f64,
    pub iterations: usize,
    /// Never stop on overflow before this many iterations.
    pub min_iterations: usize,
    /// Largest first move, in bins.
    pub initial_step: f64,
    /// `lambda_0 = init_lambda * |grad W|_1 / |grad D|_1`.
    pub init_lambda: f64,
    pub lambda_growth: f64,
    /// Iterations before `lambda` starts growing.
    pub warmup: usize,
    /// Wirelength smoothing `gamma = gamma_base * bin * 10^(20/9 tau - 11/9)`.
    pub gamma_base: f64,
    pub overflow_stop: f64,
    pub seed: u64,
    /// Bin edge in row heights; `None` picks a whole number of rows holding about
    /// four objects per bin.
    pub bin_scale: Option<f64>,
    pub mode: PlacerMode,
    pub solver: DensitySolver,
    /// Filler width in sites; `None` matches the mean movable cell width.
    pub filler_sites: Option<usize>,
    pub movable_macros: bool,
    pub r_max: f64,
}

impl Default for PlacerConfig {
    fn default() -> Self {
        PlacerConfig {
            d_t: 1.0,
            iterations: 1000,
            min_iterations: 20,
            initial_step: 0.1,
            init_lambda: 1e-3,
            lambda_growth: 1.05,
            warmup: 10,
            gamma_base: 0.5,
            overflow_stop: 0.07,
            seed: 0,
            bin_scale: None,
            mode: PlacerMode::Uniform,
            solver: DensitySolver::Spectral,
            filler_sites: None,
            movable_macros: false,
            r_max: DEFAULT_R_MAX,
        }
    }
}

impl PlacerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_t > 0.0 && self.d_t <= 1.0) {
            return Err(Error::invalid(format!("d_t must lie in (0, 1], got {}", self.d_t)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if !(self.lambda_growth >= 1.0) {
            return Err(Error::invalid("lambda growth must be at least 1"));
        }
        if !(self.gamma_base > 0.0 && self.initial_step > 0.0 && self.init_lambda >= 0.0) {
            return Err(Error::invalid("gamma, step and lambda must be positive"));
        }
        if matches!(self.bin_scale, Some(s) if !(s > 0.0)) {
            return Err(Error::invalid("bin scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overflow {
    pub max_overflow: f64,
    pub total_overflow: f64,
}

/// Per-bin excess `max(rho_b - d_t, 0)`. The total is the excess area as a
/// fraction of `movable_area`. Bins with no capacity count toward the total only.
pub fn overflow(grid: &DensityGrid, d_t: f64, movable_area: f64) -> Overflow {
    let mut max = 0.0f64;
    let mut excess = 0.0;
    for (occ, area) in grid.occupied.iter().zip(&grid.bin_area) {
        let e = (occ - d_t * area).max(0.0);
        excess += e;
        if *area > 0.0 {
            max = max.max(e / area);
        }
    }
    Overflow {
        max_overflow: max,
        total_overflow: if movable_area > 0.0 { excess / movable_area } else { 0.0 },
    }
}

fn default_filler_sites(netlist: &Netlist, movable: &[bool]) -> usize {
    let (mut sum, mut n) = (0.0, 0usize);
    for c in netlist.cells.iter().filter(|c| movable[c.id] && c.kind.is_standard()) {
        sum += c.width;
        n += 1;
    }
    if n == 0 {
        return 1;
    }
    ((sum / n as f64) / netlist.site_width).round().max(1.0) as usize
}

fn filler_plan(
    netlist: &Netlist,
    movable: &[bool],
    d_t: f64,
    filler_sites: Option<usize>,
) -> Result<(usize, f64, f64)> {
    let fixed_area: f64 = netlist.cells.iter().filter(|c| !movable[c.id]).map(Cell::area).sum();
    let free = netlist.floorplan.area() - fixed_area;
    let mov: f64 = netlist.cells.iter().filter(|c| movable[c.id]).map(Cell::area).sum();
    if !(free > 0.0) || mov > free * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "inflation exceeds capacity: movable area {mov:.4} vs free area {free:.4}"
        )));
    }
    let k = filler_sites.unwrap_or_else(|| default_filler_sites(netlist, movable)).max(1);
    let fw = k as f64 * netlist.site_width;
    let budget = d_t * free - mov;
    if budget < 0.0 {
        log::warn!("movable area {mov:.4} exceeds d_t * free area {:.4}; no fillers", d_t * free);
        return Ok((0, fw, netlist.row_height));
    }
    let count = (budget / (fw * netlist.row_height) + 1e-9).floor() as usize;
    Ok((count, fw, netlist.row_height))
}

fn with_fillers(netlist: &Netlist, count: usize, fw: f64, fh: f64) -> Result<Netlist> {
    let mut cells = netlist.cells.clone();
    for k in 0..count {
        cells.push(Cell {
            id: 0,
            name: format!("__filler_{k}"),
            width: fw,
            height: fh,
            kind: CellKind::Filler,
            movable: true,
            pin_offsets: Vec::new(),
            slack: None,
        });
    }
    Netlist::new(netlist.floorplan, netlist.site_width, netlist.row_height, cells, netlist.nets.clone())
}

/// Appends pin-less movable fillers of `k` sites by one row so that movable plus
/// filler area approaches `d_t` times the area not taken by fixed cells.
pub fn insert_fillers(netlist: &Netlist, d_t: f64, filler_sites: Option<usize>) -> Result<Netlist> {
    if !(d_t > 0.0 && d_t <= 1.0) {
        return Err(Error::invalid(format!("d_t must lie in (0, 1], got {d_t}")));
    }
    let movable: Vec<bool> = netlist.cells.iter().map(|c| c.movable).collect();
    let (count, fw, fh) = filler_plan(netlist, &movable, d_t, filler_sites)?;
    with_fillers(netlist, count, fw, fh)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub hpwl: f64,
    pub max_overflow: f64,
    pub total_overflow: f64,
    pub lambda: f64,
}

pub fn convergence_csv(log: &[IterationRecord]) -> String {
    let mut s = String::from("iteration,hpwl,max_overflow,total_overflow,lambda\n");
    for r in log {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration, r.hpwl, r.max_overflow, r.total_overflow, r.lambda
        ));
    }
    s
}

/// Final optimizer state. Positions are centers of all cells followed by fillers.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacerState {
    pub cx: Vec<f64>,
    pub cy: Vec<f64>,
    pub lambda: f64,
    pub overflow_history: Vec<f64>,
    pub hpwl_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PlaceOutcome {
    /// Lower-left corners of the input netlist's cells.
    pub placement: Placement,
    pub fillers: Vec<Rect>,
    pub log: Vec<IterationRecord>,
    pub converged: bool,
    pub state: PlacerState,
    pub geometry: GridGeometry,
    pub inflation: Option<InflationVector>,
}

impl PlaceOutcome {
    pub fn final_overflow(&self) -> Overflow {
        self.log.last().map_or(
            Overflow { max_overflow: 0.0, total_overflow: 0.0 },
            |r| Overflow { max_overflow: r.max_overflow, total_overflow: r.total_overflow },
        )
    }
}

const CHUNK: usize = 512;
const MAX_BACKTRACK: usize = 10;
const OBJECTS_PER_BIN: f64 = 4.0;
const MAX_BINS: usize = 1024;
const SMOOTH: f64 = 1.0;

struct Problem<'a> {
    nl: &'a Netlist,
    geom: GridGeometry,
    solver: PoissonSolver,
    solver_kind: DensitySolver,
    pins: PinModel,
    movable: Vec<bool>,
    is_filler: Vec<bool>,
    /// Movable object ids (cells then fillers).
    objs: Vec<usize>,
    precond_pins: Vec<f64>,
    area: Vec<f64>,
    /// Smoothing footprint of each movable object.
    sw: Vec<f64>,
    sh: Vec<f64>,
    fixed_occ: Vec<f64>,
    bin_area: Vec<f64>,
    capacity: Vec<f64>,
    real_movable_area: f64,
}

impl<'a> Problem<'a> {
    fn density_occ(&self, cx: &[f64], cy: &[f64]) -> Vec<f64> {
        let nb = self.geom.num_bins();
        let parts: Vec<Vec<f64>> = self
            .objs
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut occ = vec![0.0; nb];
                for &i in chunk {
                    let (w, h) = (self.sw[i], self.sh[i]);
                    let scale = self.area[i] / (w * h);
                    let r = Rect::new(cx[i] - 0.5 * w, cy[i] - 0.5 * h, w, h);
                    self.geom.for_each_overlap(&r, |b, a| occ[b] += a * scale);
                }
                occ
            })
            .collect();
        let mut occ = self.fixed_occ.clone();
        for p in parts {
            for (o, v) in occ.iter_mut().zip(p) {
                *o += v;
            }
        }
        occ
    }

    /// Overflow of real movable cells at their true size against free capacity.
    fn overflow_at(&self, cx: &[f64], cy: &[f64], d_t: f64) -> Overflow {
        let nb = self.geom.num_bins();
        let parts: Vec<Vec<f64>> = self
            .objs
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut occ = vec![0.0; nb];
                for &i in chunk.iter().filter(|&&i| !self.is_filler[i]) {
                    let c = &self.nl.cells[i];
                    let r = Rect::new(cx[i] - 0.5 * c.width, cy[i] - 0.5 * c.height, c.width, c.height);
                    self.geom.for_each_overlap(&r, |b, a| occ[b] += a);
                }
                occ
            })
            .collect();
        let mut occ = vec![0.0; nb];
        for p in parts {
            for (o, v) in occ.iter_mut().zip(p) {
                *o += v;
            }
        }
        // excess over the free capacity, reported per full bin area
        let mut max = 0.0f64;
        let mut excess = 0.0;
        for ((o, cap), area) in occ.iter().zip(&self.capacity).zip(&self.bin_area) {
            let e = (o - d_t * cap).max(0.0);
            excess += e;
            max = max.max(e / area);
        }
        Overflow { max_overflow: max, total_overflow: excess / self.real_movable_area }
    }

    /// Density gradient per object and the L1 norm over movable objects.
    fn density_grad(&self, cx: &[f64], cy: &[f64], d_t: f64) -> (Vec<f64>, Vec<f64>) {
        let occ = self.density_occ(cx, cy);
        let rho: Vec<f64> = occ.iter().zip(&self.bin_area).map(|(o, a)| o / a).collect();
        let psi = match self.solver_kind {
            DensitySolver::Spectral => self.solver.solve(&rho),
            DensitySolver::LocalOverflow => rho.iter().map(|r| (r - d_t).max(0.0)).collect(),
        };
        let (fx, fy) = self.solver.gradient(&psi);
        let n = self.nl.len();
        let per: Vec<(f64, f64)> = self
            .objs
            .par_iter()
            .map(|&i| {
                let (w, h) = (self.sw[i], self.sh[i]);
                let r = Rect::new(cx[i] - 0.5 * w, cy[i] - 0.5 * h, w, h);
                let (mut gx, mut gy) = (0.0, 0.0);
                self.geom.for_each_overlap(&r, |b, a| {
                    gx += a * fx[b];
                    gy += a * fy[b];
                });
                let s = self.area[i] / (w * h);
                (gx * s, gy * s)
            })
            .collect();
        let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
        for (&i, (x, y)) in self.objs.iter().zip(per) {
            gx[i] = x;
            gy[i] = y;
        }
        (gx, gy)
    }

    fn project(&self, cx: &mut [f64], cy: &mut [f64]) {
        let fp = self.nl.floorplan;
        for &i in &self.objs {
            let c = &self.nl.cells[i];
            cx[i] = clamp_center(cx[i], fp.x, fp.x_max(), c.width);
            cy[i] = clamp_center(cy[i], fp.y, fp.y_max(), c.height);
        }
    }
}

fn clamp_center(v: f64, lo: f64, hi: f64, size: f64) -> f64 {
    let (a, b) = (lo + 0.5 * size, hi - 0.5 * size);
    if a > b {
        0.5 * (lo + hi)
    } else {
        v.clamp(a, b)
    }
}

fn l1(gx: &[f64], gy: &[f64], objs: &[usize]) -> f64 {
    objs.iter().map(|&i| gx[i].abs() + gy[i].abs()).sum()
}

fn gamma_for(base: f64, bin: f64, tau: f64) -> f64 {
    base * bin * 10f64.powf(20.0 / 9.0 * tau.min(1.0) - 11.0 / 9.0)
}

/// Places `netlist` as given (sizes are taken literally, so an inflated
/// netlist is placed inflated). Cells that are not movable, and macros unless
/// `movable_macros` is set, keep their positions from `fixed`.
pub fn place(netlist: &Netlist, config: &PlacerConfig, fixed: &Placement) -> Result<PlaceOutcome> {
    config.validate()?;
    if fixed.len() != netlist.len() {
        return Err(Error::invalid(format!(
            "fixed placement has {} positions for {} cells",
            fixed.len(),
            netlist.len()
        )));
    }
    let is_mov = |c: &Cell| c.movable && (c.kind != CellKind::Macro || config.movable_macros);
    let movable_in: Vec<bool> = netlist.cells.iter().map(is_mov).collect();
    if !movable_in.iter().any(|&m| m) {
        return Err(Error::invalid("netlist has no movable cells"));
    }
    let (fcount, fw, fh) = filler_plan(netlist, &movable_in, config.d_t, config.filler_sites)?;
    let nl = with_fillers(netlist, fcount, fw, fh)?;
    let n0 = netlist.len();
    let n = nl.len();
    let mut movable = movable_in.clone();
    movable.resize(n, true);
    let is_filler: Vec<bool> = (0..n).map(|i| i >= n0).collect();
    let objs: Vec<usize> = (0..n).filter(|&i| movable[i]).collect();

    let fp = nl.floorplan;
    let scale = match config.bin_scale {
        Some(s) => s,
        // whole rows, about four objects per bin
        None => ((OBJECTS_PER_BIN * fp.area() / objs.len() as f64).sqrt() / nl.row_height).round().max(1.0),
    };
    let geom = GridGeometry::for_netlist(&nl, scale)?;
    if geom.nx > MAX_BINS || geom.ny > MAX_BINS {
        return Err(Error::invalid(format!("placer grid {}x{} is too fine", geom.nx, geom.ny)));
    }
    let solver = PoissonSolver::new(geom.nx, geom.ny, geom.bin_w, geom.bin_h);
    let bin_area: Vec<f64> = (0..geom.ny)
        .flat_map(|iy| (0..geom.nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| geom.bin_rect(ix, iy).area())
        .collect();
    let mut fixed_occ = vec![0.0; geom.num_bins()];
    let mut cx = vec![0.0; n];
    let mut cy = vec![0.0; n];
    for c in nl.cells.iter().filter(|c| !movable[c.id]) {
        let (x, y) = fixed.positions[c.id];
        cx[c.id] = x + 0.5 * c.width;
        cy[c.id] = y + 0.5 * c.height;
        geom.for_each_overlap(&Rect::new(x, y, c.width, c.height), |b, a| fixed_occ[b] += a);
    }
    let capacity: Vec<f64> = bin_area.iter().zip(&fixed_occ).map(|(a, f)| (a - f).max(0.0)).collect();
    let pins = PinModel::new(&nl);
    let counts = pins.pin_counts();
    let area: Vec<f64> = nl.cells.iter().map(Cell::area).collect();
    let sw: Vec<f64> = nl.cells.iter().map(|c| c.width.max(SMOOTH * geom.bin_w)).collect();
    let sh: Vec<f64> = nl.cells.iter().map(|c| c.height.max(SMOOTH * geom.bin_h)).collect();
    let real_movable_area: f64 = objs.iter().filter(|&&i| !is_filler[i]).map(|&i| area[i]).sum();
    let prob = Problem {
        nl: &nl,
        geom,
        solver,
        solver_kind: config.solver,
        precond_pins: counts.iter().map(|&c| c as f64).collect(),
        pins,
        movable,
        is_filler,
        objs,
        area,
        sw,
        sh,
        fixed_occ,
        bin_area,
        capacity,
        real_movable_area,
    };

    // Cells start clustered at the center, fillers scattered.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let jitter = Normal::new(0.0, 0.02 * fp.width.min(fp.height)).expect("valid sigma");
    let ux = Uniform::new(fp.x, fp.x_max()).expect("valid range");
    let uy = Uniform::new(fp.y, fp.y_max()).expect("valid range");
    let (mx, my) = (fp.x + 0.5 * fp.width, fp.y + 0.5 * fp.height);
    for &i in &prob.objs {
        if prob.is_filler[i] {
            cx[i] = ux.sample(&mut rng);
            cy[i] = uy.sample(&mut rng);
        } else {
            cx[i] = mx + jitter.sample(&mut rng);
            cy[i] = my + jitter.sample(&mut rng);
        }
    }
    prob.project(&mut cx, &mut cy);

    let bin = 0.5 * (geom.bin_w + geom.bin_h);
    let mut tau = prob.overflow_at(&cx, &cy, config.d_t).total_overflow;
    let mut gamma = gamma_for(config.gamma_base, bin, tau);

    let raw_grad = |cx: &[f64], cy: &[f64], gamma: f64| {
        let (_, wx, wy) = prob.pins.wa(cx, cy, gamma);
        let (dx, dy) = prob.density_grad(cx, cy, config.d_t);
        (wx, wy, dx, dy)
    };
    let (wx, wy, dx, dy) = raw_grad(&cx, &cy, gamma);
    let dnorm = l1(&dx, &dy, &prob.objs);
    let mut lambda = if dnorm > 0.0 {
        config.init_lambda * l1(&wx, &wy, &prob.objs) / dnorm
    } else {
        config.init_lambda
    };
    if !lambda.is_finite() {
        lambda = config.init_lambda;
    }

    let precond_grad = |cx: &[f64], cy: &[f64], gamma: f64, lambda: f64| {
        let (wx, wy, dx, dy) = raw_grad(cx, cy, gamma);
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        for &i in &prob.objs {
            let p = 1.0 / (prob.precond_pins[i] + lambda * prob.area[i]).max(1.0);
            gx[i] = (wx[i] + lambda * dx[i]) * p;
            gy[i] = (wy[i] + lambda * dy[i]) * p;
        }
        (gx, gy)
    };

    let mut u = (cx.clone(), cy.clone());
    let mut v = (cx, cy);
    let mut alpha: Option<f64> = None;
    let mut a = 1.0f64;
    let mut log = Vec::new();
    let mut hpwl_history = Vec::new();
    let mut overflow_history = Vec::new();
    let mut min_hpwl = f64::INFINITY;
    let mut min_tau = f64::INFINITY;
    let hpwl_floor = prob.pins.num_nets() as f64 * bin;
    let mut converged = false;
    let objs = &prob.objs;
    let lipschitz = |v0: &[Vec<f64>; 2], v1: &[Vec<f64>; 2], g0: &[Vec<f64>; 2], g1: &[Vec<f64>; 2]| {
        let (mut dv, mut dg) = (0.0, 0.0);
        for &i in objs {
            for d in 0..2 {
                dv += (v1[d][i] - v0[d][i]).powi(2);
                dg += (g1[d][i] - g0[d][i]).powi(2);
            }
        }
        (dv > 0.0 && dg > 0.0).then(|| (dv / dg).sqrt())
    };

    for it in 0..config.iterations {
        let (gx, gy) = precond_grad(&v.0, &v.1, gamma, lambda);
        let g = [gx, gy];
        let gmax = objs.iter().map(|&i| g[0][i].abs().max(g[1][i].abs())).fold(0.0, f64::max);
        let mut step = alpha.unwrap_or(config.initial_step * bin / gmax.max(1e-300));
        let a_next = 0.5 * (1.0 + (4.0 * a * a + 1.0).sqrt());
        let coef = (a - 1.0) / a_next;
        let vv = [v.0.clone(), v.1.clone()];
        let mut attempt = 0;
        let (nu, nv, est) = loop {
            attempt += 1;
            let mut nu = vv.clone();
            for &i in objs {
                nu[0][i] -= step * g[0][i];
                nu[1][i] -= step * g[1][i];
            }
            let (a0, a1) = nu.split_at_mut(1);
            prob.project(&mut a0[0], &mut a1[0]);
            let mut nv = nu.clone();
            for &i in objs {
                nv[0][i] += coef * (nu[0][i] - u.0[i]);
                nv[1][i] += coef * (nu[1][i] - u.1[i]);
            }
            let (b0, b1) = nv.split_at_mut(1);
            prob.project(&mut b0[0], &mut b1[0]);
            let (ngx, ngy) = precond_grad(&nv[0], &nv[1], gamma, lambda);
            let est = lipschitz(&vv, &nv, &g, &[ngx, ngy]).unwrap_or(step);
            if est >= 0.95 * step || attempt >= MAX_BACKTRACK {
                break (nu, nv, est);
            }
            step = est;
        };
        // restart momentum when the step runs against the gradient
        let mut dot = 0.0;
        for &i in objs {
            dot += g[0][i] * (nu[0][i] - u.0[i]) + g[1][i] * (nu[1][i] - u.1[i]);
        }
        a = if dot > 0.0 { 1.0 } else { a_next };
        alpha = Some(est);
        let [nu0, nu1] = nu;
        let [nv0, nv1] = nv;
        u = (nu0, nu1);
        v = (nv0, nv1);

        let hpwl = prob.pins.hpwl(&u.0, &u.1);
        let ov = prob.overflow_at(&u.0, &u.1, config.d_t);
        if !hpwl.is_finite() || u.0.iter().chain(&u.1).any(|p| !p.is_finite()) {
            return Err(Error::numerical(format!(
                "placer produced non-finite state at iteration {it} (lambda {lambda:e}, overflow {:.4})",
                ov.total_overflow
            )));
        }
        tau = ov.total_overflow;
        min_hpwl = min_hpwl.min(hpwl.max(hpwl_floor));
        min_tau = min_tau.min(tau);
        // spreading raises HPWL while overflow falls; both rising is divergence
        if hpwl > 10.0 * min_hpwl && tau > min_tau + 0.2 {
            return Err(Error::numerical(format!(
                "placer diverged at iteration {it}: hpwl {hpwl:.6e} vs minimum {min_hpwl:.6e}, \
                 lambda {lambda:e}, overflow {tau:.4}, gamma {gamma:e}"
            )));
        }
        log.push(IterationRecord {
            iteration: it,
            hpwl,
            max_overflow: ov.max_overflow,
            total_overflow: ov.total_overflow,
            lambda,
        });
        hpwl_history.push(hpwl);
        overflow_history.push(tau);
        if it + 1 >= config.min_iterations && tau <= config.overflow_stop {
            converged = true;
            break;
        }
        gamma = gamma_for(config.gamma_base, bin, tau);
        if it + 1 >= config.warmup {
            lambda *= config.lambda_growth;
        }
    }
    if !converged {
        log::warn!(
            "placer stopped at the iteration cap with total overflow {:.4}",
            overflow_history.last().copied().unwrap_or(f64::NAN)
        );
    }

    let (cx, cy) = u;
    let positions = (0..n0)
        .map(|i| {
            let c = &nl.cells[i];
            if prob.movable[i] {
                (cx[i] - 0.5 * c.width, cy[i] - 0.5 * c.height)
            } else {
                fixed.positions[i]
            }
        })
        .collect();
    let fillers = (n0..n)
        .map(|i| {
            let c = &nl.cells[i];
            Rect::new(cx[i] - 0.5 * c.width, cy[i] - 0.5 * c.height, c.width, c.height)
        })
        .collect();
    Ok(PlaceOutcome {
        placement: Placement::new(format!("{}-placed", fixed.frame_id), positions),
        fillers,
        log,
        converged,
        state: PlacerState { cx, cy, lambda, overflow_history, hpwl_history },
        geometry: geom,
        inflation: None,
    })
}

/// Runs the placer in `config.mode`. In inflated mode the movable standard
/// cells are widened by `1 / t_i`, `d_t` is forced to 1, and the returned
/// placement refers to the original cell sizes, centered on the inflated
/// footprints.
pub fn place_with_targets(
    netlist: &Netlist,
    targets: Option<&[f64]>,
    config: &PlacerConfig,
    fixed: &Placement,
) -> Result<PlaceOutcome> {
    match config.mode {
        PlacerMode::Uniform => place(netlist, config, fixed),
        PlacerMode::Inflated => {
            let targets = targets.ok_or_else(|| Error::invalid("inflated mode needs targets"))?;
            let infl = fit_to_capacity(
                netlist,
                &factors_from_targets(netlist, targets, config.r_max)?,
                INFLATION_CAPACITY,
            )?;
            let inflated = apply_inflation(netlist, &infl)?;
            let mut cfg = config.clone();
            cfg.d_t = 1.0;
            let mut out = place(&inflated.netlist, &cfg, fixed)?;
            for (i, p) in out.placement.positions.iter_mut().enumerate() {
                let dw = inflated.netlist.cells[i].width - netlist.cells[i].width;
                if dw != 0.0 {
                    p.0 += 0.5 * dw;
                }
            }
            out.inflation = Some(infl);
            Ok(out)
        }
    }
}
