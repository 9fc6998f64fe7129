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

//! Hierarchy-aware netlist clustering and cluster-level statistics.
//!
//! Modules are cut from the name trie, each module's nets are clique-expanded
//! with name-distance weights, and Leiden partitions the resulting graph.

mod graph;
mod leiden;
mod trie;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use graph::{clique_expand, clique_weight, levenshtein, normalized_levenshtein, WeightedGraph, DEFAULT_NET_CAP};
pub use leiden::{leiden, modularity, THETA};
pub use trie::{decompose_modules, HierTrie, TrieNode};

use crate::error::{Error, Result};
use crate::netlist::{Netlist, Placement};
use crate::stats;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub resolution: f64,
    pub min_size: usize,
    pub max_size: usize,
    pub net_cap: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { resolution: 1.0, min_size: 1000, max_size: 50000, net_cap: DEFAULT_NET_CAP, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub size: usize,
    /// Cluster mean density, averaged over the supplied placements.
    pub mean_density: Option<f64>,
    /// Standard deviation of the cluster mean density across placements.
    pub density_std: Option<f64>,
    pub mean_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster id per cell; ids are `0..num_clusters`.
    pub assignment: Vec<usize>,
    pub num_clusters: usize,
    pub clusters: Vec<ClusterStats>,
    pub dbi: Option<f64>,
    pub rho_dt: Option<f64>,
    pub rho_dt_timcrit: Option<f64>,
    pub sigma_cluster_dens: Option<f64>,
}

impl Clustering {
    /// Wraps an arbitrary labelling, relabelling ids to be contiguous in order
    /// of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = HashMap::new();
        let assignment: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        let k = map.len();
        let mut clusters = vec![ClusterStats { size: 0, mean_density: None, density_std: None, mean_slack: None }; k];
        for &c in &assignment {
            clusters[c].size += 1;
        }
        Clustering {
            assignment,
            num_clusters: k,
            clusters,
            dbi: None,
            rho_dt: None,
            rho_dt_timcrit: None,
            sigma_cluster_dens: None,
        }
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.num_clusters];
        for (i, &c) in self.assignment.iter().enumerate() {
            m[c].push(i);
        }
        m
    }
}

/// Clusters every cell of `netlist`: module decomposition, then Leiden on the
/// clique expansion of each module. Modules are processed in parallel with
/// per-module seeds, so the result is independent of the thread count.
pub fn cluster_netlist(netlist: &Netlist, cfg: &ClusterConfig) -> Result<Clustering> {
    let groups = decompose_modules(netlist, cfg.min_size, cfg.max_size)?;
    let parts: Vec<Result<Vec<usize>>> = groups
        .par_iter()
        .enumerate()
        .map(|(g, cells)| {
            let graph = clique_expand(netlist, cells, cfg.net_cap);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(g as u64);
            leiden(&graph, cfg.resolution, rand::Rng::random(&mut rng))
        })
        .collect();
    let mut labels = vec![0; netlist.cells.len()];
    let mut offset = 0;
    for (cells, part) in groups.iter().zip(parts) {
        let part = part?;
        for (&c, &p) in cells.iter().zip(&part) {
            labels[c] = offset + p;
        }
        offset += part.iter().max().map_or(0, |m| m + 1);
    }
    Ok(Clustering::from_labels(&labels))
}

/// Davies–Bouldin index of `assignment` over `positions`. Cluster pairs with
/// coincident centroids are skipped with a warning.
pub fn dbi(positions: &[(f64, f64)], assignment: &[usize]) -> Result<f64> {
    if positions.len() != assignment.len() {
        return Err(Error::invalid("positions and assignment differ in length"));
    }
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut n = vec![0usize; k];
    let mut cen = vec![(0.0, 0.0); k];
    for (&(x, y), &c) in positions.iter().zip(assignment) {
        n[c] += 1;
        cen[c].0 += x;
        cen[c].1 += y;
    }
    let live: Vec<usize> = (0..k).filter(|&c| n[c] > 0).collect();
    if live.len() < 2 {
        return Err(Error::invalid("DBI needs at least two clusters"));
    }
    for &c in &live {
        cen[c].0 /= n[c] as f64;
        cen[c].1 /= n[c] as f64;
    }
    let mut scatter = vec![0.0; k];
    for (&(x, y), &c) in positions.iter().zip(assignment) {
        scatter[c] += (x - cen[c].0).hypot(y - cen[c].1);
    }
    for &c in &live {
        scatter[c] /= n[c] as f64;
    }
    let mut total = 0.0;
    let mut counted = 0;
    for &i in &live {
        let mut worst: Option<f64> = None;
        for &j in &live {
            if i == j {
                continue;
            }
            let d = (cen[i].0 - cen[j].0).hypot(cen[i].1 - cen[j].1);
            if d == 0.0 {
                log::warn!("clusters {i} and {j} share a centroid; pair skipped");
                continue;
            }
            let r = (scatter[i] + scatter[j]) / d;
            worst = Some(worst.map_or(r, |w: f64| w.max(r)));
        }
        if let Some(w) = worst {
            total += w;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::numerical("all cluster centroids coincide"));
    }
    Ok(total / counted as f64)
}

/// DBI over cell centers of a placement.
pub fn dbi_placement(netlist: &Netlist, placement: &Placement, clustering: &Clustering) -> Result<f64> {
    let centers: Vec<(f64, f64)> = netlist.rects(placement).iter().map(|r| r.center()).collect();
    dbi(&centers, &clustering.assignment)
}

/// Fills per-cluster density and slack statistics and the density/timing
/// correlations. `densities` holds one per-cell vector per placement.
pub fn cluster_stats(clustering: &Clustering, densities: &[Vec<f64>], slacks: &[Option<f64>]) -> Result<Clustering> {
    let n = clustering.assignment.len();
    if densities.iter().any(|d| d.len() != n) || slacks.len() != n {
        return Err(Error::invalid("densities and slacks must cover the clustered cells"));
    }
    let members = clustering.members();
    let mut out = clustering.clone();
    let per_placement: Vec<Vec<f64>> = members
        .iter()
        .map(|m| densities.iter().map(|d| stats::mean(&m.iter().map(|&i| d[i]).collect::<Vec<_>>())).collect())
        .collect();
    for (c, m) in members.iter().enumerate() {
        let s: Vec<f64> = m.iter().filter_map(|&i| slacks[i]).collect();
        let d = &per_placement[c];
        out.clusters[c] = ClusterStats {
            size: m.len(),
            mean_density: (!d.is_empty()).then(|| stats::mean(d)),
            density_std: (d.len() >= 2).then(|| stats::sample_std(d)),
            mean_slack: (!s.is_empty()).then(|| stats::mean(&s)),
        };
    }
    let stds: Vec<f64> = out.clusters.iter().filter_map(|c| c.density_std).collect();
    out.sigma_cluster_dens = (!stds.is_empty()).then(|| stats::mean(&stds));

    let mut pairs: Vec<(f64, f64)> =
        out.clusters.iter().filter_map(|c| Some((c.mean_density?, c.mean_slack?))).collect();
    let corr = |p: &[(f64, f64)]| {
        if p.len() < 3 {
            return None;
        }
        let (d, s): (Vec<f64>, Vec<f64>) = p.iter().copied().unzip();
        stats::pearson(&d, &s)
    };
    out.rho_dt = corr(&pairs);
    pairs.sort_by(|a, b| a.1.total_cmp(&b.1));
    let quartile = pairs.len().div_ceil(4);
    out.rho_dt_timcrit = corr(&pairs[..quartile]);
    if out.rho_dt.is_none() {
        log::warn!("density/timing correlation undefined ({} clusters with slack)", pairs.len());
    }
    Ok(out)
}

/// Adjusted Rand index between two labellings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("labellings differ in length"));
    }
    let n = a.len() as f64;
    let comb2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut ra: HashMap<usize, usize> = HashMap::new();
    let mut rb: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| comb2(v as f64)).sum();
    let sa: f64 = ra.values().map(|&v| comb2(v as f64)).sum();
    let sb: f64 = rb.values().map(|&v| comb2(v as f64)).sum();
    let expected = sa * sb / comb2(n).max(f64::MIN_POSITIVE);
    let max = 0.5 * (sa + sb);
    if (max - expected).abs() < 1e-12 {
        return Ok(if index == max { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}
