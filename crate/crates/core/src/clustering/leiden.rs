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

//! Leiden community detection with resolution-scaled modularity.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::WeightedGraph;
use crate::error::{Error, Result};

/// Randomness of the refinement merge step.
pub const THETA: f64 = 0.01;
const MAX_PASSES: usize = 32;

/// Modularity with resolution `gamma`:
/// `(1/2m) sum_c [ in_c - gamma K_c^2 / 2m ]`.
pub fn modularity(graph: &WeightedGraph, partition: &[usize], gamma: f64) -> f64 {
    let k = graph.strengths();
    let m2: f64 = k.iter().sum();
    if m2 <= 0.0 {
        return 0.0;
    }
    let nc = partition.iter().max().map_or(0, |m| m + 1);
    let mut inner = vec![0.0; nc];
    let mut tot = vec![0.0; nc];
    for (u, list) in graph.adj.iter().enumerate() {
        tot[partition[u]] += k[u];
        for &(v, w) in list {
            if partition[u] == partition[v] {
                inner[partition[u]] += w;
            }
        }
    }
    inner.iter().zip(&tot).map(|(i, t)| i - gamma * t * t / m2).sum::<f64>() / m2
}

/// One level of the multilevel scheme. `adj` excludes self-loops; `k` keeps
/// the full strength of the original vertices merged into each node.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    k: Vec<f64>,
}

impl Level {
    fn n(&self) -> usize {
        self.k.len()
    }

    fn aggregate(&self, membership: &[usize], count: usize) -> Level {
        let mut k = vec![0.0; count];
        let mut raw: Vec<Vec<(usize, f64)>> = vec![Vec::new(); count];
        for (u, list) in self.adj.iter().enumerate() {
            let cu = membership[u];
            k[cu] += self.k[u];
            for &(v, w) in list {
                let cv = membership[v];
                if cu != cv {
                    raw[cu].push((cv, w));
                }
            }
        }
        let adj = raw
            .into_iter()
            .map(|mut l| {
                l.sort_by_key(|&(v, _)| v);
                let mut out: Vec<(usize, f64)> = Vec::with_capacity(l.len());
                for (v, w) in l {
                    match out.last_mut() {
                        Some(last) if last.0 == v => last.1 += w,
                        _ => out.push((v, w)),
                    }
                }
                out
            })
            .collect();
        Level { adj, k }
    }
}

/// Relabels to `0..count` in order of first appearance.
fn relabel(p: &mut [usize]) -> usize {
    let mut map = vec![usize::MAX; p.iter().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    for c in p.iter_mut() {
        if map[*c] == usize::MAX {
            map[*c] = next;
            next += 1;
        }
        *c = map[*c];
    }
    next
}

struct Ctx {
    gamma: f64,
    m2: f64,
}

fn move_nodes(level: &Level, part: &mut [usize], ctx: &Ctx, rng: &mut ChaCha8Rng) {
    let n = level.n();
    let mut tot = vec![0.0; n];
    let mut size = vec![0usize; n];
    for v in 0..n {
        tot[part[v]] += level.k[v];
        size[part[v]] += 1;
    }
    let mut empty: Vec<usize> = (0..n).filter(|&c| size[c] == 0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut queue: VecDeque<usize> = order.into();
    let mut queued = vec![true; n];
    let mut w_to = vec![0.0; n];
    let mut touched = Vec::new();
    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let kv = level.k[v];
        let old = part[v];
        tot[old] -= kv;
        size[old] -= 1;
        if size[old] == 0 {
            empty.push(old);
        }
        for &(u, w) in &level.adj[v] {
            let c = part[u];
            if w_to[c] == 0.0 {
                touched.push(c);
            }
            w_to[c] += w;
        }
        let gain = |c: usize, w: f64| w - ctx.gamma * kv * tot[c] / ctx.m2;
        let mut best = old;
        let mut best_gain = gain(old, w_to[old]);
        let tol = 1e-12 * kv.max(f64::MIN_POSITIVE);
        for &c in &touched {
            let g = gain(c, w_to[c]);
            if g > best_gain + tol {
                best = c;
                best_gain = g;
            }
        }
        if size[old] != 0 && best_gain < -tol {
            best = *empty.last().expect("an empty community exists while a node is detached");
        }
        for &c in &touched {
            w_to[c] = 0.0;
        }
        touched.clear();
        if size[best] == 0 {
            empty.retain(|&c| c != best);
        }
        part[v] = best;
        tot[best] += kv;
        size[best] += 1;
        if best != old {
            for &(u, _) in &level.adj[v] {
                if !queued[u] && part[u] != best {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
}

/// Splits every community of `part` into refined subcommunities, merging only
/// well-connected singletons into well-connected subsets.
fn refine(level: &Level, part: &[usize], ctx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = level.n();
    let mut refined: Vec<usize> = (0..n).collect();
    let mut rsize = vec![1usize; n];
    let mut rtot = level.k.clone();
    // weight from each refined community to the rest of its parent community
    let mut rext = vec![0.0; n];
    let nc = part.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for v in 0..n {
        members[part[v]].push(v);
    }
    let mut w_to = vec![0.0; n];
    let mut touched = Vec::new();
    for s in members {
        if s.len() < 2 {
            continue;
        }
        let c_s = part[s[0]];
        let k_s: f64 = s.iter().map(|&v| level.k[v]).sum();
        for &v in &s {
            rext[v] = level.adj[v].iter().filter(|&&(u, _)| part[u] == c_s).map(|&(_, w)| w).sum();
        }
        let mut candidates: Vec<usize> = s
            .iter()
            .copied()
            .filter(|&v| rext[v] >= ctx.gamma * level.k[v] * (k_s - level.k[v]) / ctx.m2)
            .collect();
        candidates.shuffle(rng);
        for v in candidates {
            if rsize[refined[v]] != 1 {
                continue;
            }
            let kv = level.k[v];
            for &(u, w) in &level.adj[v] {
                if part[u] != c_s {
                    continue;
                }
                let c = refined[u];
                if w_to[c] == 0.0 {
                    touched.push(c);
                }
                w_to[c] += w;
            }
            let own = refined[v];
            let mut options: Vec<(usize, f64)> = vec![(own, 0.0)];
            for &c in &touched {
                if c == own {
                    continue;
                }
                let well = rext[c] >= ctx.gamma * rtot[c] * (k_s - rtot[c]) / ctx.m2;
                let dh = w_to[c] - ctx.gamma * kv * rtot[c] / ctx.m2;
                if well && dh >= 0.0 {
                    options.push((c, dh));
                }
            }
            let top = options.iter().map(|o| o.1).fold(0.0, f64::max);
            let weights: Vec<f64> = options.iter().map(|o| ((o.1 - top) / THETA).exp()).collect();
            let mut pick = rng.random::<f64>() * weights.iter().sum::<f64>();
            let mut chosen = options[options.len() - 1].0;
            for (o, w) in options.iter().zip(&weights) {
                if pick < *w {
                    chosen = o.0;
                    break;
                }
                pick -= w;
            }
            if chosen != own {
                let wv = w_to[chosen];
                rext[chosen] = rext[chosen] + rext[v] - 2.0 * wv;
                rtot[chosen] += kv;
                rsize[chosen] += 1;
                rsize[own] = 0;
                refined[v] = chosen;
            }
            for &c in &touched {
                w_to[c] = 0.0;
            }
            touched.clear();
        }
    }
    refined
}

/// One multilevel pass starting from `start` on the original graph.
fn pass(graph: &WeightedGraph, start: &[usize], ctx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut level = Level { adj: graph.adj.clone(), k: graph.strengths() };
    let mut part = start.to_vec();
    relabel(&mut part);
    let mut node_of: Vec<usize> = (0..graph.num_nodes()).collect();
    loop {
        move_nodes(&level, &mut part, ctx, rng);
        let ncomm = relabel(&mut part);
        if ncomm == level.n() {
            break;
        }
        let mut refined = refine(&level, &part, ctx, rng);
        let mut nref = relabel(&mut refined);
        if nref == level.n() {
            refined = part.clone();
            nref = ncomm;
        }
        let mut next_part = vec![0; nref];
        for v in 0..level.n() {
            next_part[refined[v]] = part[v];
        }
        for x in node_of.iter_mut() {
            *x = refined[*x];
        }
        level = level.aggregate(&refined, nref);
        part = next_part;
    }
    node_of.iter().map(|&x| part[x]).collect()
}

/// Splits communities that are not connected into their components.
fn split_disconnected(graph: &WeightedGraph, part: &mut [usize]) {
    let n = graph.num_nodes();
    let mut out = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if out[s] != usize::MAX {
            continue;
        }
        out[s] = next;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &(u, _) in &graph.adj[v] {
                if out[u] == usize::MAX && part[u] == part[s] {
                    out[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    part.copy_from_slice(&out);
}

/// Community assignment (ids `0..k` in order of first appearance). Passes are
/// repeated until modularity stops improving.
pub fn leiden(graph: &WeightedGraph, resolution: f64, seed: u64) -> Result<Vec<usize>> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::invalid(format!("resolution must be positive, got {resolution}")));
    }
    let n = graph.num_nodes();
    let m2: f64 = graph.strengths().iter().sum();
    let mut part: Vec<usize> = (0..n).collect();
    if n == 0 || m2 <= 0.0 {
        return Ok(part);
    }
    let ctx = Ctx { gamma: resolution, m2 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = modularity(graph, &part, resolution);
    for _ in 0..MAX_PASSES {
        let mut next = pass(graph, &part, &ctx, &mut rng);
        split_disconnected(graph, &mut next);
        let qn = modularity(graph, &next, resolution);
        if qn <= q + 1e-13 * q.abs().max(1.0) {
            if qn >= q {
                part = next;
            }
            break;
        }
        part = next;
        q = qn;
    }
    relabel(&mut part);
    Ok(part)
}
