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

//! Weighted cell graphs from clique expansion of hypernets.

use rayon::prelude::*;

use crate::netlist::Netlist;

/// Default cap on net cardinality for clique expansion.
pub const DEFAULT_NET_CAP: usize = 64;

/// Sparse undirected graph. `adj[i]` is sorted by neighbor and holds each
/// edge once per endpoint; no self-loops, all weights positive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedGraph {
    /// Cell id of every vertex.
    pub nodes: Vec<usize>,
    pub adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    /// Builds from an edge list; parallel edges are summed in list order,
    /// self-loops and non-positive weights dropped.
    pub fn from_edges(nodes: Vec<usize>, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let n = nodes.len();
        let mut raw: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (u, v, w) in edges {
            if u == v || !(w > 0.0) {
                continue;
            }
            raw[u].push((v, w));
            raw[v].push((u, w));
        }
        let adj = raw
            .into_iter()
            .map(|mut list| {
                list.sort_by_key(|&(v, _)| v);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(list.len());
                for (v, w) in list {
                    match merged.last_mut() {
                        Some(last) if last.0 == v => last.1 += w,
                        _ => merged.push((v, w)),
                    }
                }
                merged
            })
            .collect();
        WeightedGraph { nodes, adj }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.adj[u]
            .binary_search_by_key(&v, |&(x, _)| x)
            .map(|i| self.adj[u][i].1)
            .unwrap_or(0.0)
    }

    /// Weighted degree of every vertex.
    pub fn strengths(&self) -> Vec<f64> {
        self.adj.iter().map(|l| l.iter().map(|&(_, w)| w).sum()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.adj.iter().enumerate().all(|(u, l)| l.iter().all(|&(v, w)| self.weight(v, u) == w && v != u && w > 0.0))
    }
}

/// Edit distance with unit insert/delete/substitute costs, over chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized edit distance `2L / (|a| + |b| + L)`, in `[0, 1]`.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let l = levenshtein(a, b);
    let denom = a.chars().count() + b.chars().count() + l;
    if denom == 0 {
        0.0
    } else {
        2.0 * l as f64 / denom as f64
    }
}

/// Pair weight of a net with `degree` distinct cells and name distance `nlev`.
pub fn clique_weight(degree: usize, nlev: f64) -> f64 {
    2.0 / (degree as f64 * (1.0 + nlev))
}

/// Clique expansion of the nets restricted to `group`. Net cardinality is the
/// number of distinct cells on the whole net; nets above `net_cap` or below two
/// cells are skipped.
pub fn clique_expand(netlist: &Netlist, group: &[usize], net_cap: usize) -> WeightedGraph {
    let mut local = vec![usize::MAX; netlist.cells.len()];
    for (i, &c) in group.iter().enumerate() {
        local[c] = i;
    }
    let per_net: Vec<Vec<(usize, usize, f64)>> = netlist
        .nets
        .par_iter()
        .map(|net| {
            let mut cells: Vec<usize> = net.pins.iter().map(|p| p.cell).collect();
            cells.sort_unstable();
            cells.dedup();
            let deg = cells.len();
            if deg < 2 || deg > net_cap {
                return Vec::new();
            }
            let inside: Vec<usize> = cells.into_iter().filter(|&c| local[c] != usize::MAX).collect();
            let mut out = Vec::with_capacity(inside.len() * inside.len().saturating_sub(1) / 2);
            for (a, &u) in inside.iter().enumerate() {
                for &v in &inside[a + 1..] {
                    let nlev = normalized_levenshtein(&netlist.cells[u].name, &netlist.cells[v].name);
                    out.push((local[u], local[v], clique_weight(deg, nlev)));
                }
            }
            out
        })
        .collect();
    WeightedGraph::from_edges(group.to_vec(), per_net.into_iter().flatten())
}
