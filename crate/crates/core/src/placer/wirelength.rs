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

//! Weighted-average smooth wirelength over cell centers.

use rayon::prelude::*;

use crate::netlist::Netlist;

/// Flattened pin table. Pin positions are `center[cell] + (dx, dy)`.
#[derive(Debug, Clone)]
pub struct PinModel {
    net_start: Vec<usize>,
    pin_cell: Vec<usize>,
    pin_dx: Vec<f64>,
    pin_dy: Vec<f64>,
    num_cells: usize,
}

impl PinModel {
    pub fn new(netlist: &Netlist) -> Self {
        let mut net_start = vec![0];
        let (mut pin_cell, mut pin_dx, mut pin_dy) = (Vec::new(), Vec::new(), Vec::new());
        for net in &netlist.nets {
            if net.pins.len() < 2 {
                continue;
            }
            for p in &net.pins {
                let c = &netlist.cells[p.cell];
                let (ox, oy) = c.pin_offsets[p.pin];
                pin_cell.push(p.cell);
                pin_dx.push(ox - 0.5 * c.width);
                pin_dy.push(oy - 0.5 * c.height);
            }
            net_start.push(pin_cell.len());
        }
        PinModel { net_start, pin_cell, pin_dx, pin_dy, num_cells: netlist.cells.len() }
    }

    pub fn num_nets(&self) -> usize {
        self.net_start.len() - 1
    }

    /// Pin count per cell.
    pub fn pin_counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.num_cells];
        for &c in &self.pin_cell {
            n[c] += 1;
        }
        n
    }

    fn net(&self, k: usize) -> std::ops::Range<usize> {
        self.net_start[k]..self.net_start[k + 1]
    }

    pub fn hpwl(&self, cx: &[f64], cy: &[f64]) -> f64 {
        (0..self.num_nets())
            .map(|k| {
                let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
                for p in self.net(k) {
                    let x = cx[self.pin_cell[p]] + self.pin_dx[p];
                    let y = cy[self.pin_cell[p]] + self.pin_dy[p];
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
                (x1 - x0) + (y1 - y0)
            })
            .sum()
    }

    /// Smoothed wirelength and its gradient with respect to every cell center.
    /// Per-net terms are computed in parallel and reduced in net order, so the
    /// result does not depend on the thread count.
    pub fn wa(&self, cx: &[f64], cy: &[f64], gamma: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let per_net: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..self.num_nets())
            .into_par_iter()
            .map(|k| {
                let r = self.net(k);
                let xs: Vec<f64> = r.clone().map(|p| cx[self.pin_cell[p]] + self.pin_dx[p]).collect();
                let ys: Vec<f64> = r.map(|p| cy[self.pin_cell[p]] + self.pin_dy[p]).collect();
                let (vx, gx) = wa_1d(&xs, gamma);
                let (vy, gy) = wa_1d(&ys, gamma);
                (vx + vy, gx, gy)
            })
            .collect();
        let mut gx = vec![0.0; self.num_cells];
        let mut gy = vec![0.0; self.num_cells];
        let mut total = 0.0;
        for (k, (v, nx, ny)) in per_net.into_iter().enumerate() {
            total += v;
            for (j, p) in self.net(k).enumerate() {
                gx[self.pin_cell[p]] += nx[j];
                gy[self.pin_cell[p]] += ny[j];
            }
        }
        (total, gx, gy)
    }
}

/// Weighted-average span of `x` and its gradient.
pub fn wa_1d(x: &[f64], gamma: f64) -> (f64, Vec<f64>) {
    let xmax = x.iter().cloned().fold(f64::MIN, f64::max);
    let xmin = x.iter().cloned().fold(f64::MAX, f64::min);
    let a: Vec<f64> = x.iter().map(|v| ((v - xmax) / gamma).exp()).collect();
    let b: Vec<f64> = x.iter().map(|v| (-(v - xmin) / gamma).exp()).collect();
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let hi = x.iter().zip(&a).map(|(v, w)| v * w).sum::<f64>() / sa;
    let lo = x.iter().zip(&b).map(|(v, w)| v * w).sum::<f64>() / sb;
    let g = x
        .iter()
        .enumerate()
        .map(|(i, v)| a[i] / sa * (1.0 + (v - hi) / gamma) - b[i] / sb * (1.0 - (v - lo) / gamma))
        .collect();
    (hi - lo, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wa_approaches_span() {
        let x = [0.0, 1.0, 4.0, 2.5];
        let (v, _) = wa_1d(&x, 0.01);
        assert!((v - 4.0).abs() < 1e-6);
        let (v, _) = wa_1d(&x, 10.0);
        assert!(v < 4.0 && v > 0.0);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let x = [0.3, 1.7, -0.4, 2.2, 2.1];
        let gamma = 0.8;
        let (_, g) = wa_1d(&x, gamma);
        for i in 0..x.len() {
            let h = 1e-6;
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (wa_1d(&xp, gamma).0 - wa_1d(&xm, gamma).0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "{i}: {fd} vs {}", g[i]);
        }
        // translation invariance
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
    }
}
