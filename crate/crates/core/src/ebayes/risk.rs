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

//! Monte Carlo risk of the MLE, James-Stein and Bayes estimators under the
//! normal-normal model `mu_i ~ N(M, A)`, `z_i | mu_i ~ N(mu_i, sigma0^2)`.
//!
//! The prior mean `M` is known to all estimators, so the expected ratio of
//! James-Stein to Bayes risk is `1 + 2 sigma0^2 / (N A)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::js_factor;
use crate::error::{Error, Result};

/// Prior mean used for the simulated cells.
const PRIOR_MEAN: f64 = 0.5;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RiskReport {
    pub trials: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "A")]
    pub a: f64,
    pub sigma0: f64,
    pub seed: u64,
    /// Mean total squared error over trials.
    #[serde(rename = "R_MLE")]
    pub r_mle: f64,
    #[serde(rename = "R_JS")]
    pub r_js: f64,
    #[serde(rename = "R_Bayes")]
    pub r_bayes: f64,
    #[serde(rename = "ratio_JS_Bayes")]
    pub ratio_js_bayes: f64,
    /// `1 + 2 sigma0^2 / (N A)`.
    #[serde(rename = "expected_ratio_JS_Bayes")]
    pub expected_ratio: f64,
    #[serde(rename = "ratio_JS_MLE")]
    pub ratio_js_mle: f64,
    /// Fraction of trials where the James-Stein loss is below the MLE loss.
    pub js_beats_mle: f64,
}

struct TrialLoss {
    mle: f64,
    js: f64,
    bayes: f64,
}

fn trial(n: usize, a: f64, sigma0: f64, seed: u64, index: u64) -> TrialLoss {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let sd_a = a.sqrt();
    let mut mu = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let m = PRIOR_MEAN + sd_a * rng.sample::<f64, _>(StandardNormal);
        mu.push(m);
        z.push(m + sigma0 * rng.sample::<f64, _>(StandardNormal));
    }
    let s: f64 = z.iter().map(|z| (z - PRIOR_MEAN).powi(2)).sum();
    let b_js = js_factor(n, sigma0, s);
    let b_bayes = a / (a + sigma0 * sigma0);
    let mut loss = TrialLoss {
        mle: 0.0,
        js: 0.0,
        bayes: 0.0,
    };
    for (m, z) in mu.iter().zip(&z) {
        let r = z - PRIOR_MEAN;
        loss.mle += (z - m).powi(2);
        loss.js += (PRIOR_MEAN + b_js * r - m).powi(2);
        loss.bayes += (PRIOR_MEAN + b_bayes * r - m).powi(2);
    }
    loss
}

/// Each trial draws from its own ChaCha stream, so the report is independent
/// of the thread count.
pub fn risk_report(trials: usize, n: usize, a: f64, sigma0: f64, seed: u64) -> Result<RiskReport> {
    if n < 3 {
        return Err(Error::invalid(format!("risk report needs N >= 3, got {n}")));
    }
    if trials < 100 {
        return Err(Error::invalid(format!("risk report needs >= 100 trials, got {trials}")));
    }
    if !(a > 0.0 && sigma0 > 0.0) {
        return Err(Error::invalid("A and sigma0 must be positive"));
    }
    let losses: Vec<TrialLoss> = (0..trials as u64)
        .into_par_iter()
        .map(|t| trial(n, a, sigma0, seed, t))
        .collect();
    let k = trials as f64;
    let r_mle = losses.iter().map(|l| l.mle).sum::<f64>() / k;
    let r_js = losses.iter().map(|l| l.js).sum::<f64>() / k;
    let r_bayes = losses.iter().map(|l| l.bayes).sum::<f64>() / k;
    let wins = losses.iter().filter(|l| l.js < l.mle).count();
    Ok(RiskReport {
        trials,
        n,
        a,
        sigma0,
        seed,
        r_mle,
        r_js,
        r_bayes,
        ratio_js_bayes: r_js / r_bayes,
        expected_ratio: 1.0 + 2.0 * sigma0 * sigma0 / (n as f64 * a),
        ratio_js_mle: r_js / r_mle,
        js_beats_mle: wins as f64 / k,
    })
}
