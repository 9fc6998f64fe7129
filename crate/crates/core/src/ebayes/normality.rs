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

//! Per-cell Gaussianity diagnostic for the prior ensemble.
//!
//! Uses the Anderson-Darling statistic with estimated mean and variance,
//! Stephens' small-sample correction `A*^2 = A^2 (1 + 0.75/n + 2.25/n^2)`, and
//! the D'Agostino-Stephens piecewise p-value approximation.

use serde::Serialize;
use statrs::function::erf::erfc;

use super::PriorEnsemble;
use crate::error::{Error, Result};

pub const MIN_RUNS: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct NormalityReport {
    pub alpha: f64,
    pub tested: usize,
    pub passed: usize,
    /// Cells with zero spread, not tested.
    pub skipped: Vec<usize>,
    pub pass_fraction: f64,
}

/// Corrected statistic `A*^2` and its p-value; `None` for zero spread.
pub fn anderson_darling(samples: &[f64]) -> Option<(f64, f64)> {
    let n = samples.len();
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if !(var > 0.0) {
        return None;
    }
    let sd = var.sqrt();
    let mut xs: Vec<f64> = samples.iter().map(|x| (x - mean) / sd).collect();
    xs.sort_by(f64::total_cmp);
    let ln_cdf = |x: f64| (0.5 * erfc(-x / std::f64::consts::SQRT_2)).max(f64::MIN_POSITIVE).ln();
    let ln_sf = |x: f64| (0.5 * erfc(x / std::f64::consts::SQRT_2)).max(f64::MIN_POSITIVE).ln();
    let mut s = 0.0;
    for i in 0..n {
        let k = (2 * i + 1) as f64;
        s += k * (ln_cdf(xs[i]) + ln_sf(xs[n - 1 - i]));
    }
    let a2 = -nf - s / nf;
    let a2 = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a2 >= 0.6 {
        (1.2937 - 5.709 * a2 + 0.0186 * a2 * a2).exp()
    } else if a2 >= 0.34 {
        (0.9177 - 4.279 * a2 - 1.38 * a2 * a2).exp()
    } else if a2 >= 0.2 {
        1.0 - (-8.318 + 42.796 * a2 - 59.938 * a2 * a2).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a2 - 223.73 * a2 * a2).exp()
    };
    Some((a2, p.clamp(0.0, 1.0)))
}

/// Fraction of cells whose densities across the ensemble pass the test at `alpha`.
pub fn normality_check(prior: &PriorEnsemble, alpha: f64) -> Result<NormalityReport> {
    if prior.num_runs() < MIN_RUNS {
        return Err(Error::invalid(format!(
            "normality check needs at least {MIN_RUNS} runs, got {}",
            prior.num_runs()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let mut skipped = Vec::new();
    let mut tested = 0;
    let mut passed = 0;
    for i in 0..prior.num_cells() {
        match anderson_darling(&prior.cell_samples(i)) {
            None => skipped.push(i),
            Some((_, p)) => {
                tested += 1;
                if p >= alpha {
                    passed += 1;
                }
            }
        }
    }
    let pass_fraction = if tested == 0 { f64::NAN } else { passed as f64 / tested as f64 };
    Ok(NormalityReport {
        alpha,
        tested,
        passed,
        skipped,
        pass_fraction,
    })
}
