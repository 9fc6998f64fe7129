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

//! Shrinking factors for cells with different known variances.
//!
//! For each cell `i` the cell's own degrees of freedom are set to 3 (all others
//! to 1) and the prior variance `A` is estimated as the Fisher-information
//! weighted mean of the unbiased per-cell estimates `E_j`. The resulting fixed
//! point is solved by damped iteration.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{shrink_toward, PriorEnsemble, ShrinkFactor, ShrinkageMode, ShrinkageResult};
use crate::error::{Error, Result};

const OWN_DOF: f64 = 3.0;
const DAMPING: f64 = 0.5;
const MAX_ITER: usize = 1000;
const TOL: f64 = 1e-10;
const A_FLOOR: f64 = 1e-12;

/// Per-cell solver output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeteroCell {
    /// Fixed point `A_hat`.
    pub a_hat: f64,
    /// `|T(A_hat) - A_hat|` with `T` the projected update map.
    pub residual: f64,
    pub iterations: usize,
    pub d_star: f64,
    pub b_hat: f64,
}

/// Sums over cells sharing the same variance.
struct Group {
    sigma2: f64,
    sum_e: f64,
    count: f64,
}

struct Problem {
    groups: Vec<Group>,
    s: Vec<f64>,
    sigma2: Vec<f64>,
    mean_e1: f64,
}

impl Problem {
    fn new(z: &[f64], mean: &[f64], sigmas: &[f64]) -> Self {
        let s: Vec<f64> = z.iter().zip(mean).map(|(z, m)| (z - m) * (z - m)).collect();
        let sigma2: Vec<f64> = sigmas.iter().map(|s| s * s).collect();
        let mut map: BTreeMap<u64, Group> = BTreeMap::new();
        for (sj, s2) in s.iter().zip(&sigma2) {
            let g = map.entry(s2.to_bits()).or_insert(Group {
                sigma2: *s2,
                sum_e: 0.0,
                count: 0.0,
            });
            g.sum_e += sj - s2;
            g.count += 1.0;
        }
        let n = s.len() as f64;
        let mean_e1 = s.iter().zip(&sigma2).map(|(a, b)| a - b).sum::<f64>() / n;
        Problem {
            groups: map.into_values().collect(),
            s,
            sigma2,
            mean_e1,
        }
    }

    /// `(sum_j E_j I_j(A), sum_j I_j(A))` with cell `i` at `d_i = 3`.
    fn sums(&self, i: usize, a: f64) -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for g in &self.groups {
            let w = 1.0 / (2.0 * (a + g.sigma2) * (a + g.sigma2));
            num += g.sum_e * w;
            den += g.count * w;
        }
        let s2 = self.sigma2[i];
        let w = 1.0 / (2.0 * (a + s2) * (a + s2));
        let e1 = self.s[i] - s2;
        let e3 = (self.s[i] - OWN_DOF * s2) / OWN_DOF;
        num += (OWN_DOF * e3 - e1) * w;
        den += (OWN_DOF - 1.0) * w;
        (num, den)
    }

    fn update(&self, i: usize, a: f64) -> f64 {
        let (num, den) = self.sums(i, a);
        (num / den).max(0.0)
    }

    fn solve(&self, i: usize) -> Result<HeteroCell> {
        let n = self.s.len() as f64;
        let s2 = self.sigma2[i];
        // mean of E_j with d_i = 3
        let e1 = self.s[i] - s2;
        let e3 = (self.s[i] - OWN_DOF * s2) / OWN_DOF;
        let mean_e = self.mean_e1 + (e3 - e1) / n;
        let mut a = mean_e.max(A_FLOOR);
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        while iterations < MAX_ITER {
            let t = self.update(i, a);
            residual = (t - a).abs();
            if residual <= TOL {
                break;
            }
            a = ((1.0 - DAMPING) * a + DAMPING * t).max(0.0);
            iterations += 1;
        }
        if residual > TOL {
            return Err(Error::numerical(format!(
                "variance fixed point for cell {i} did not converge: A = {a}, residual = {residual:e} after {MAX_ITER} iterations"
            )));
        }
        let (_, den) = self.sums(i, a);
        let d_star = 2.0 * (a + s2) * (a + s2) * den;
        let b_hat = 1.0 - (d_star - 4.0) / d_star * s2 / (a + s2);
        Ok(HeteroCell {
            a_hat: a,
            residual,
            iterations,
            d_star,
            b_hat,
        })
    }
}

/// Heteroscedastic shrinkage using the prior's per-cell standard deviations.
pub fn hetero_shrink(z: &[f64], prior: &PriorEnsemble) -> Result<(ShrinkageResult, Vec<HeteroCell>)> {
    hetero_shrink_with(z, &prior.mean, &prior.std)
}

/// Heteroscedastic shrinkage with explicit prior means and noise levels.
pub fn hetero_shrink_with(
    z: &[f64],
    mean: &[f64],
    sigmas: &[f64],
) -> Result<(ShrinkageResult, Vec<HeteroCell>)> {
    let n = z.len();
    if mean.len() != n || sigmas.len() != n {
        return Err(Error::invalid("heteroscedastic inputs cover different cell counts"));
    }
    if n < 5 {
        return Err(Error::invalid(format!("heteroscedastic shrinkage needs N >= 5, got {n}")));
    }
    if let Some(i) = sigmas.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::invalid(format!("cell {i} has non-positive sigma {}", sigmas[i])));
    }
    let problem = Problem::new(z, mean, sigmas);
    let cells = (0..n)
        .into_par_iter()
        .map(|i| problem.solve(i))
        .collect::<Result<Vec<_>>>()?;
    let b: Vec<f64> = cells.iter().map(|c| c.b_hat).collect();
    let raw = shrink_toward(z, mean, |i| b[i]);
    let s = problem.s.iter().sum();
    let sigma0 = (problem.sigma2.iter().sum::<f64>() / n as f64).sqrt();
    let result = ShrinkageResult::finish(
        ShrinkageMode::JsHetero,
        raw,
        ShrinkFactor::PerCell(b),
        sigma0,
        s,
    );
    Ok((result, cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ebayes::js_factor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(n: usize, sigma: impl Fn(usize) -> f64, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = rand_distr::StandardNormal;
        let mean: Vec<f64> = (0..n).map(|_| 0.5 + 0.05 * rng.sample::<f64, _>(std)).collect();
        let sig: Vec<f64> = (0..n).map(&sigma).collect();
        let z: Vec<f64> = (0..n)
            .map(|i| mean[i] + (0.01f64 + sig[i] * sig[i]).sqrt() * rng.sample::<f64, _>(std))
            .collect();
        (z, mean, sig)
    }

    #[test]
    fn equal_variances_match_global_factor() {
        let n = 2000;
        let (z, mean, sig) = synthetic(n, |_| 0.1, 5);
        let (res, cells) = hetero_shrink_with(&z, &mean, &sig).unwrap();
        let s: f64 = z.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum();
        let b_global = js_factor(n, 0.1, s);
        for c in &cells {
            assert!((c.b_hat - cells[0].b_hat).abs() <= 1e-6);
            assert!((c.b_hat - b_global).abs() <= 1e-2);
            assert!((c.d_star - (n as f64 + 2.0)).abs() < 1e-6);
        }
        assert_eq!(res.mode, ShrinkageMode::JsHetero);
    }

    #[test]
    fn fixed_point_is_self_consistent() {
        let (z, mean, sig) = synthetic(300, |i| 0.05 + 0.002 * (i % 50) as f64, 9);
        let problem = Problem::new(&z, &mean, &sig);
        let (_, cells) = hetero_shrink_with(&z, &mean, &sig).unwrap();
        for (i, c) in cells.iter().enumerate() {
            // brute-force re-evaluation of the weighted mean over all cells
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..z.len() {
                let d = if j == i { 3.0 } else { 1.0 };
                let s2 = sig[j] * sig[j];
                let e = ((z[j] - mean[j]).powi(2) - d * s2) / d;
                let info = d / (2.0 * (c.a_hat + s2).powi(2));
                num += e * info;
                den += info;
            }
            assert!(((num / den).max(0.0) - c.a_hat).abs() <= 1e-10);
            assert!((c.a_hat - problem.update(i, c.a_hat)).abs() <= 1e-10);
        }
    }

    #[test]
    fn noiseless_cell_is_barely_shrunk() {
        let (z, mean, mut sig) = synthetic(200, |_| 0.1, 2);
        sig[7] = 1e-6;
        let (_, cells) = hetero_shrink_with(&z, &mean, &sig).unwrap();
        assert!(cells[7].b_hat > 1.0 - 1e-6 && cells[7].b_hat <= 1.0);
        assert!(cells[8].b_hat < 0.9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(hetero_shrink_with(&[0.1; 4], &[0.2; 4], &[0.1; 4]).is_err());
        assert!(hetero_shrink_with(&[0.1; 6], &[0.2; 6], &[0.1, 0.1, 0.0, 0.1, 0.1, 0.1]).is_err());
    }
}
