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

//! Trie over `/`-separated hierarchical cell names and module decomposition.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::netlist::Netlist;

#[derive(Debug, Clone, Default)]
pub struct TrieNode {
    pub segment: String,
    pub children: BTreeMap<String, usize>,
    /// Number of cells at or below this node.
    pub count: usize,
    /// Cell whose full name ends at this node.
    pub cell: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct HierTrie {
    nodes: Vec<TrieNode>,
}

impl HierTrie {
    pub const ROOT: usize = 0;

    pub fn build<'a>(names: impl IntoIterator<Item = (usize, &'a str)>) -> Self {
        let mut nodes = vec![TrieNode::default()];
        for (cell, name) in names {
            let mut cur = Self::ROOT;
            nodes[cur].count += 1;
            for seg in name.split('/') {
                let next = match nodes[cur].children.get(seg) {
                    Some(&n) => n,
                    None => {
                        nodes.push(TrieNode { segment: seg.to_string(), ..Default::default() });
                        let n = nodes.len() - 1;
                        nodes[cur].children.insert(seg.to_string(), n);
                        n
                    }
                };
                cur = next;
                nodes[cur].count += 1;
            }
            nodes[cur].cell = Some(cell);
        }
        HierTrie { nodes }
    }

    pub fn from_netlist(netlist: &Netlist) -> Self {
        Self::build(netlist.cells.iter().map(|c| (c.id, c.name.as_str())))
    }

    /// Node count, excluding the root.
    pub fn num_nodes(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.cell.is_some()).count()
    }

    pub fn node(&self, i: usize) -> &TrieNode {
        &self.nodes[i]
    }

    /// Cells at or below node `i`, in trie order.
    pub fn cells_under(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes[i].count);
        let mut stack = vec![i];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            out.extend(node.cell);
            stack.extend(node.children.values().rev());
        }
        out
    }
}

/// Top-down split of the hierarchy into modules whose size lies in
/// `[min_size, max_size]`. Everything not claimed by such a module (flat
/// names, undersized modules, cells sitting directly on an oversized node)
/// ends up in one trailing residual group.
pub fn decompose_modules(netlist: &Netlist, min_size: usize, max_size: usize) -> Result<Vec<Vec<usize>>> {
    if min_size == 0 || min_size >= max_size {
        return Err(Error::invalid(format!("module size range [{min_size}, {max_size}] is empty or starts at 0")));
    }
    let trie = HierTrie::from_netlist(netlist);
    let mut groups = Vec::new();
    let mut residual = Vec::new();
    let mut stack = vec![HierTrie::ROOT];
    while let Some(n) = stack.pop() {
        let node = trie.node(n);
        if node.count > max_size {
            residual.extend(node.cell);
            stack.extend(node.children.values().rev());
        } else if node.count >= min_size {
            let mut g = trie.cells_under(n);
            g.sort_unstable();
            groups.push(g);
        } else {
            residual.extend(trie.cells_under(n));
        }
    }
    if !residual.is_empty() {
        residual.sort_unstable();
        groups.push(residual);
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{Cell, CellKind, Floorplan, Netlist};

    fn netlist(names: &[String]) -> Netlist {
        let cells = names
            .iter()
            .enumerate()
            .map(|(i, n)| Cell {
                id: i,
                name: n.clone(),
                width: 1.0,
                height: 1.0,
                kind: CellKind::StdCell,
                movable: true,
                pin_offsets: vec![(0.5, 0.5)],
                slack: None,
            })
            .collect();
        Netlist::new(Floorplan::new(0.0, 0.0, 100.0, 100.0), 0.2, 1.0, cells, vec![]).unwrap()
    }

    #[test]
    fn trie_counts() {
        let names: Vec<String> = ["a/b/c", "a/b/d", "a/e", "f"].iter().map(|s| s.to_string()).collect();
        let t = HierTrie::build(names.iter().enumerate().map(|(i, s)| (i, s.as_str())));
        assert_eq!(t.num_leaves(), 4);
        assert_eq!(t.num_nodes(), 6);
        assert_eq!(t.node(HierTrie::ROOT).count, 4);
        let a = t.node(HierTrie::ROOT).children["a"];
        assert_eq!(t.node(a).count, 3);
        assert_eq!(t.cells_under(a), vec![0, 1, 2]);
        assert_eq!(t.node(a).segment, "a");
    }

    #[test]
    fn flat_netlist_is_one_residual_group() {
        let names: Vec<String> = (0..30).map(|i| format!("u{i}")).collect();
        let g = decompose_modules(&netlist(&names), 2, 10).unwrap();
        assert_eq!(g, vec![(0..30).collect::<Vec<_>>()]);
    }

    #[test]
    fn two_modules() {
        let mut names: Vec<String> = (0..50).map(|i| format!("a/u{i}")).collect();
        names.extend((0..60).map(|i| format!("b/x/u{i}")));
        let g = decompose_modules(&netlist(&names), 10, 100).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0], (0..50).collect::<Vec<_>>());
        assert_eq!(g[1], (50..110).collect::<Vec<_>>());
    }

    #[test]
    fn bad_range() {
        let names = vec!["a".to_string()];
        assert!(decompose_modules(&netlist(&names), 5, 5).is_err());
        assert!(decompose_modules(&netlist(&names), 0, 5).is_err());
    }
}
