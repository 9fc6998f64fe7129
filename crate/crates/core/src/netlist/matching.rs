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

//! Place-netlist vs post-route-netlist matching.
//!
//! Produces the reference geometry that tool density targets are measured on:
//! buffers are dropped, cells present in both netlists sit at their post-route
//! position with their post-synthesis size, and post-route-only standard cells
//! are kept at their post-route position with a single-site footprint.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{CellKind, Floorplan, Netlist, Placement, Rect, SizeTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchReport {
    /// (place-netlist name, post-route name); identical under exact-name matching.
    pub matched: Vec<(String, String)>,
    pub removed_buffers: usize,
    /// Post-route-only standard cells provisioned with a one-site footprint.
    pub zeroed: Vec<String>,
    /// Place-netlist cells that do not exist post-route.
    pub place_only: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeomOrigin {
    Matched(usize),
    Zeroed,
    /// Post-route-only macro, kept as a blockage.
    Blockage,
}

#[derive(Debug, Clone)]
pub struct MatchedGeometry {
    pub floorplan: Floorplan,
    pub site_width: f64,
    pub row_height: f64,
    pub rects: Vec<Rect>,
    pub origins: Vec<GeomOrigin>,
    /// Place-netlist cell id to index into `rects`, `None` for place-only cells.
    pub place_index: Vec<Option<usize>>,
}

impl MatchedGeometry {
    /// Total area provisioned by the geometry.
    pub fn total_area(&self) -> f64 {
        self.rects.iter().map(Rect::area).sum()
    }
}

pub fn match_netlists(
    place: &Netlist,
    postroute: &Netlist,
    postroute_positions: &Placement,
    postsynth_sizes: &SizeTable,
) -> Result<(MatchedGeometry, MatchReport)> {
    if postroute_positions.len() != postroute.len() {
        return Err(Error::invalid(format!(
            "post-route placement has {} positions for {} cells",
            postroute_positions.len(),
            postroute.len()
        )));
    }
    let zero = (postroute.site_width, postroute.row_height);
    let mut rects = Vec::new();
    let mut origins = Vec::new();
    let mut place_index = vec![None; place.len()];
    let mut matched = BTreeSet::new();
    let mut zeroed = BTreeSet::new();
    let mut removed_buffers = 0;

    for cell in &postroute.cells {
        let (x, y) = postroute_positions.positions[cell.id];
        match cell.kind {
            CellKind::Buffer => {
                removed_buffers += 1;
                continue;
            }
            CellKind::Filler => continue,
            _ => {}
        }
        if let Some(pid) = place.cell_id(&cell.name) {
            let &(w, h) = postsynth_sizes
                .get(&cell.name)
                .ok_or_else(|| Error::MissingCell(cell.name.clone()))?;
            place_index[pid] = Some(rects.len());
            rects.push(Rect::new(x, y, w, h));
            origins.push(GeomOrigin::Matched(pid));
            matched.insert(cell.name.clone());
        } else if cell.kind == CellKind::StdCell {
            rects.push(Rect::new(x, y, zero.0, zero.1));
            origins.push(GeomOrigin::Zeroed);
            zeroed.insert(cell.name.clone());
        } else {
            rects.push(Rect::new(x, y, cell.width, cell.height));
            origins.push(GeomOrigin::Blockage);
        }
    }
    if matched.is_empty() {
        return Err(Error::NoMatchedCells);
    }
    let place_only: BTreeSet<String> = place
        .cells
        .iter()
        .filter(|c| place_index[c.id].is_none())
        .map(|c| c.name.clone())
        .collect();

    let report = MatchReport {
        matched: matched.into_iter().map(|n| (n.clone(), n)).collect(),
        removed_buffers,
        zeroed: zeroed.into_iter().collect(),
        place_only: place_only.into_iter().collect(),
    };
    let geometry = MatchedGeometry {
        floorplan: postroute.floorplan,
        site_width: postroute.site_width,
        row_height: postroute.row_height,
        rects,
        origins,
        place_index,
    };
    Ok((geometry, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::Cell;

    fn std(name: &str, kind: CellKind) -> Cell {
        Cell {
            id: 0,
            name: name.into(),
            width: 1.0,
            height: 1.0,
            kind,
            movable: true,
            pin_offsets: vec![(0.5, 0.5)],
            slack: None,
        }
    }

    fn netlist(cells: Vec<Cell>) -> Netlist {
        Netlist::new(Floorplan::new(0.0, 0.0, 50.0, 50.0), 0.25, 1.0, cells, vec![]).unwrap()
    }

    fn sizes(names: &[&str]) -> SizeTable {
        names.iter().map(|n| (n.to_string(), (2.0, 1.0))).collect()
    }

    fn grid_positions(n: usize) -> Placement {
        Placement::new("pr", (0..n).map(|i| (i as f64 * 3.0, 1.0)).collect())
    }

    #[test]
    fn identical_netlists_match_fully() {
        let names = ["a", "b", "c"];
        let place = netlist(names.iter().map(|n| std(n, CellKind::StdCell)).collect());
        let (geom, report) =
            match_netlists(&place, &place, &grid_positions(3), &sizes(&names)).unwrap();
        assert_eq!(report.matched.len(), 3);
        assert!(report.zeroed.is_empty());
        assert_eq!(report.removed_buffers, 0);
        assert!(geom.place_index.iter().all(Option::is_some));
        assert_eq!(geom.rects[1], Rect::new(3.0, 1.0, 2.0, 1.0));
    }

    #[test]
    fn postroute_only_cell_is_zero_sized() {
        let place = netlist(vec![std("a", CellKind::StdCell)]);
        let post = netlist(vec![std("a", CellKind::StdCell), std("x", CellKind::StdCell)]);
        let (geom, report) =
            match_netlists(&place, &post, &grid_positions(2), &sizes(&["a"])).unwrap();
        assert_eq!(report.zeroed, vec!["x".to_string()]);
        assert_eq!(geom.rects[1], Rect::new(3.0, 1.0, 0.25, 1.0));
        // provisioned area = matched post-synthesis area + one site per zeroed cell
        assert_eq!(geom.total_area(), 2.0 + 0.25);
    }

    #[test]
    fn buffers_are_removed() {
        let place = netlist(vec![std("a", CellKind::StdCell)]);
        let post = netlist(vec![
            std("a", CellKind::StdCell),
            std("b1", CellKind::Buffer),
            std("b2", CellKind::Buffer),
            std("b3", CellKind::Buffer),
        ]);
        let (geom, report) =
            match_netlists(&place, &post, &grid_positions(4), &sizes(&["a"])).unwrap();
        assert_eq!(report.removed_buffers, 3);
        assert_eq!(geom.rects.len(), 1);
    }

    #[test]
    fn errors() {
        let place = netlist(vec![std("a", CellKind::StdCell)]);
        let post = netlist(vec![std("z", CellKind::StdCell)]);
        assert!(matches!(
            match_netlists(&place, &post, &grid_positions(1), &sizes(&[])),
            Err(Error::NoMatchedCells)
        ));
        assert!(matches!(
            match_netlists(&place, &place, &grid_positions(1), &sizes(&[])),
            Err(Error::MissingCell(n)) if n == "a"
        ));
    }

    #[test]
    fn report_is_independent_of_cell_order() {
        let a = ["u/a", "u/b", "v/c", "v/d"];
        let place = netlist(a.iter().map(|n| std(n, CellKind::StdCell)).collect());
        let mut post_cells: Vec<Cell> = ["v/d", "x/e", "u/a", "v/c", "buf"]
            .iter()
            .map(|n| std(n, if *n == "buf" { CellKind::Buffer } else { CellKind::StdCell }))
            .collect();
        let post1 = netlist(post_cells.clone());
        post_cells.reverse();
        let post2 = netlist(post_cells);
        let (_, r1) = match_netlists(&place, &post1, &grid_positions(5), &sizes(&a)).unwrap();
        let (_, r2) = match_netlists(&place, &post2, &grid_positions(5), &sizes(&a)).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.place_only, vec!["u/b".to_string()]);
    }
}
