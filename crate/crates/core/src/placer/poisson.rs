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

//! Spectral solver for the discrete Poisson equation on the bin grid.
//!
//! Solves `lap(phi) = -(rho - mean(rho))` with the 5-point Laplacian and
//! reflective (zero-flux) boundaries. The cosine basis
//! `cos(pi k (j + 1/2) / n)` diagonalizes that operator exactly, so a solve is
//! two separable orthonormal DCT-II transforms and a diagonal scaling.

use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct PoissonSolver {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    /// Row-major `n x n` orthonormal DCT-II matrices, `c[k][j]`.
    cx: Vec<f64>,
    cy: Vec<f64>,
    eig_x: Vec<f64>,
    eig_y: Vec<f64>,
}

fn dct_matrix(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for j in 0..n {
            m[k * n + j] = s * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / nf).cos();
        }
    }
    m
}

/// Eigenvalues of the 1-D reflective second difference with spacing `h`.
fn eigenvalues(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = (std::f64::consts::PI * k as f64 / (2.0 * n as f64)).sin();
            -4.0 * s * s / (h * h)
        })
        .collect()
}

/// `out = a * f` along x for every row of an `nx`-wide grid, `a` being `c` or `c^T`.
fn along_x(f: &[f64], c: &[f64], nx: usize, transpose: bool) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    out.par_chunks_mut(nx).zip(f.par_chunks(nx)).for_each(|(row, src)| {
        for (k, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, v) in src.iter().enumerate() {
                let cij = if transpose { c[j * nx + k] } else { c[k * nx + j] };
                acc += cij * v;
            }
            *o = acc;
        }
    });
    out
}

/// Same along y; row `k` of the output mixes all input rows.
fn along_y(f: &[f64], c: &[f64], nx: usize, ny: usize, transpose: bool) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    out.par_chunks_mut(nx).enumerate().for_each(|(k, row)| {
        for j in 0..ny {
            let cij = if transpose { c[j * ny + k] } else { c[k * ny + j] };
            if cij == 0.0 {
                continue;
            }
            for (o, v) in row.iter_mut().zip(&f[j * nx..(j + 1) * nx]) {
                *o += cij * v;
            }
        }
    });
    out
}

impl PoissonSolver {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64) -> Self {
        PoissonSolver {
            nx,
            ny,
            hx,
            hy,
            cx: dct_matrix(nx),
            cy: dct_matrix(ny),
            eig_x: eigenvalues(nx, hx),
            eig_y: eigenvalues(ny, hy),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Potential for the charge density `rho` (row-major, x fastest). The result
    /// has zero mean.
    pub fn solve(&self, rho: &[f64]) -> Vec<f64> {
        assert_eq!(rho.len(), self.nx * self.ny);
        let spec = along_y(&along_x(rho, &self.cx, self.nx, false), &self.cy, self.nx, self.ny, false);
        let mut phi_hat = vec![0.0; spec.len()];
        for ky in 0..self.ny {
            for kx in 0..self.nx {
                if kx == 0 && ky == 0 {
                    continue;
                }
                let i = ky * self.nx + kx;
                phi_hat[i] = -spec[i] / (self.eig_x[kx] + self.eig_y[ky]);
            }
        }
        along_y(&along_x(&phi_hat, &self.cx, self.nx, true), &self.cy, self.nx, self.ny, true)
    }

    fn at(&self, f: &[f64], ix: isize, iy: isize) -> f64 {
        let cx = ix.clamp(0, self.nx as isize - 1) as usize;
        let cy = iy.clamp(0, self.ny as isize - 1) as usize;
        f[cy * self.nx + cx]
    }

    /// 5-point Laplacian with mirrored ghost cells.
    pub fn laplacian(&self, phi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; phi.len()];
        for iy in 0..self.ny as isize {
            for ix in 0..self.nx as isize {
                let c = self.at(phi, ix, iy);
                let dxx = (self.at(phi, ix + 1, iy) - 2.0 * c + self.at(phi, ix - 1, iy)) / (self.hx * self.hx);
                let dyy = (self.at(phi, ix, iy + 1) - 2.0 * c + self.at(phi, ix, iy - 1)) / (self.hy * self.hy);
                out[iy as usize * self.nx + ix as usize] = dxx + dyy;
            }
        }
        out
    }

    /// Max-norm of `lap(phi) + (rho - mean(rho))`.
    pub fn residual(&self, rho: &[f64], phi: &[f64]) -> f64 {
        let mean = rho.iter().sum::<f64>() / rho.len() as f64;
        self.laplacian(phi)
            .iter()
            .zip(rho)
            .map(|(l, r)| (l + r - mean).abs())
            .fold(0.0, f64::max)
    }

    /// Central-difference gradient of `phi` at bin centers.
    pub fn gradient(&self, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = phi.len();
        let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
        for iy in 0..self.ny as isize {
            for ix in 0..self.nx as isize {
                let i = iy as usize * self.nx + ix as usize;
                gx[i] = (self.at(phi, ix + 1, iy) - self.at(phi, ix - 1, iy)) / (2.0 * self.hx);
                gy[i] = (self.at(phi, ix, iy + 1) - self.at(phi, ix, iy - 1)) / (2.0 * self.hy);
            }
        }
        (gx, gy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dct_is_orthonormal() {
        let n = 7;
        let c = dct_matrix(n);
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|j| c[a * n + j] * c[b * n + j]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn random_density_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(nx, ny) in &[(8usize, 8usize), (13, 5), (32, 24)] {
            let s = PoissonSolver::new(nx, ny, 1.5, 0.75);
            let rho: Vec<f64> = (0..nx * ny).map(|_| rng.random_range(0.0..2.0)).collect();
            let phi = s.solve(&rho);
            assert!(s.residual(&rho, &phi) < 1e-8, "{nx}x{ny}");
            assert!(phi.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_density_has_flat_potential() {
        let s = PoissonSolver::new(6, 6, 1.0, 1.0);
        let phi = s.solve(&vec![0.8; 36]);
        assert!(phi.iter().all(|p| p.abs() < 1e-14));
    }

    #[test]
    fn field_points_away_from_charge() {
        let (nx, ny) = (9, 9);
        let s = PoissonSolver::new(nx, ny, 1.0, 1.0);
        let mut rho = vec![0.0; nx * ny];
        rho[4 * nx + 4] = 10.0;
        let phi = s.solve(&rho);
        let (gx, _) = s.gradient(&phi);
        // descending the potential moves away from the peak
        assert!(gx[4 * nx + 6] < 0.0);
        assert!(gx[4 * nx + 2] > 0.0);
    }
}
