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

//! Netlist, placement and target-vector data model.
//!
//! Cells are addressed by dense ids `0..N`; every per-cell vector in the crate
//! (positions, densities, targets, inflation factors) is indexed by that id.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod io;
mod matching;
mod targets;

pub use io::{
    netlist_to_jsonl, parse_netlist, parse_netlist_str, read_placement, read_size_table,
    read_slacks, write_netlist, write_placement, write_size_table, write_slacks, NetlistFormat,
};
pub use matching::{match_netlists, MatchReport, MatchedGeometry};
pub use targets::{load_targets, load_targets_for, serialize_targets, Provenance, TargetVector};

/// Axis-aligned rectangle given by its lower-left corner and size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    /// Area of the intersection with `other` (0 when disjoint).
    pub fn overlap(&self, other: &Rect) -> f64 {
        let dx = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let dy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if dx > 0.0 && dy > 0.0 {
            dx * dy
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Floorplan {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Floorplan {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Floorplan {
            x,
            y,
            width,
            height,
        }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn rect(&self) -> Rect {
        Rect::new(self.x, self.y, self.width, self.height)
    }

    pub fn x_max(&self) -> f64 {
        self.x + self.width
    }

    pub fn y_max(&self) -> f64 {
        self.y + self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    StdCell,
    Macro,
    Filler,
    Buffer,
}

impl CellKind {
    /// Standard cells and buffers are row-based and subject to inflation.
    pub fn is_standard(self) -> bool {
        matches!(self, CellKind::StdCell | CellKind::Buffer)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub name: String,
    pub width: f64,
    pub height: f64,
    pub kind: CellKind,
    pub movable: bool,
    /// Pin positions relative to the cell's lower-left corner.
    pub pin_offsets: Vec<(f64, f64)>,
    /// Worst slack in ns from an external timing report.
    pub slack: Option<f64>,
}

impl Cell {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Movable row-based cell that takes part in inflation.
    pub fn is_movable_std(&self) -> bool {
        self.movable && self.kind.is_standard()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PinRef {
    pub cell: usize,
    pub pin: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub id: usize,
    pub pins: Vec<PinRef>,
}

impl Net {
    /// Hyperedge cardinality `|e|`.
    pub fn degree(&self) -> usize {
        self.pins.len()
    }
}

#[derive(Debug, Clone)]
pub struct Netlist {
    pub cells: Vec<Cell>,
    pub nets: Vec<Net>,
    pub floorplan: Floorplan,
    pub site_width: f64,
    pub row_height: f64,
    index: HashMap<String, usize>,
}

impl PartialEq for Netlist {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells
            && self.nets == other.nets
            && self.floorplan == other.floorplan
            && self.site_width == other.site_width
            && self.row_height == other.row_height
    }
}

impl Netlist {
    /// Builds a netlist, reassigning cell ids to their position in `cells`.
    pub fn new(
        floorplan: Floorplan,
        site_width: f64,
        row_height: f64,
        mut cells: Vec<Cell>,
        nets: Vec<Net>,
    ) -> Result<Self> {
        if !(floorplan.width > 0.0 && floorplan.height > 0.0) {
            return Err(Error::invalid("floorplan dimensions must be positive"));
        }
        if !(site_width > 0.0 && row_height > 0.0) {
            return Err(Error::invalid("site width and row height must be positive"));
        }
        let mut index = HashMap::with_capacity(cells.len());
        for (i, cell) in cells.iter_mut().enumerate() {
            cell.id = i;
            if !(cell.width > 0.0 && cell.height > 0.0) {
                return Err(Error::invalid(format!(
                    "cell `{}` has non-positive size {}x{}",
                    cell.name, cell.width, cell.height
                )));
            }
            if index.insert(cell.name.clone(), i).is_some() {
                return Err(Error::DuplicateCell(cell.name.clone()));
            }
        }
        for net in &nets {
            if net.pins.is_empty() {
                return Err(Error::invalid(format!("net {} has no pins", net.id)));
            }
            for pin in &net.pins {
                let Some(cell) = cells.get(pin.cell) else {
                    return Err(Error::DanglingPin {
                        net: net.id.to_string(),
                        cell: format!("#{}", pin.cell),
                    });
                };
                if pin.pin >= cell.pin_offsets.len() {
                    return Err(Error::invalid(format!(
                        "net {} references pin {} of `{}` which has {} pins",
                        net.id,
                        pin.pin,
                        cell.name,
                        cell.pin_offsets.len()
                    )));
                }
            }
        }
        Ok(Netlist {
            cells,
            nets,
            floorplan,
            site_width,
            row_height,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn cell_by_name(&self, name: &str) -> Option<&Cell> {
        self.cell_id(name).map(|i| &self.cells[i])
    }

    pub fn movable_std_ids(&self) -> Vec<usize> {
        self.cells
            .iter()
            .filter(|c| c.is_movable_std())
            .map(|c| c.id)
            .collect()
    }

    pub fn sizes(&self) -> Vec<(f64, f64)> {
        self.cells.iter().map(|c| (c.width, c.height)).collect()
    }

    /// Cell rectangles at `placement` using the netlist's own sizes.
    pub fn rects(&self, placement: &Placement) -> Vec<Rect> {
        self.cells
            .iter()
            .zip(&placement.positions)
            .map(|(c, &(x, y))| Rect::new(x, y, c.width, c.height))
            .collect()
    }

    pub fn pin_position(&self, pin: PinRef, placement: &Placement) -> (f64, f64) {
        let (x, y) = placement.positions[pin.cell];
        let (dx, dy) = self.cells[pin.cell].pin_offsets[pin.pin];
        (x + dx, y + dy)
    }

    /// Half-perimeter wirelength of `placement`.
    pub fn hpwl(&self, placement: &Placement) -> f64 {
        self.nets
            .iter()
            .map(|net| {
                let mut x0 = f64::INFINITY;
                let mut x1 = f64::NEG_INFINITY;
                let mut y0 = f64::INFINITY;
                let mut y1 = f64::NEG_INFINITY;
                for &pin in &net.pins {
                    let (x, y) = self.pin_position(pin, placement);
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
                (x1 - x0) + (y1 - y0)
            })
            .sum()
    }

    /// Attaches per-cell slacks from a name-keyed report; absent names stay `None`.
    pub fn set_slacks(&mut self, slacks: &HashMap<String, f64>) {
        for cell in &mut self.cells {
            cell.slack = slacks.get(&cell.name).copied();
        }
    }

    pub fn slacks(&self) -> Vec<Option<f64>> {
        self.cells.iter().map(|c| c.slack).collect()
    }
}

/// Per-cell lower-left positions, indexed by cell id.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub frame_id: String,
    pub positions: Vec<(f64, f64)>,
}

impl Placement {
    pub fn new(frame_id: impl Into<String>, positions: Vec<(f64, f64)>) -> Self {
        Placement {
            frame_id: frame_id.into(),
            positions,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Checks that every movable standard cell lies fully inside the floorplan.
    pub fn check_bounds(&self, netlist: &Netlist, tol: f64) -> Result<()> {
        let fp = netlist.floorplan;
        for cell in netlist.cells.iter().filter(|c| c.is_movable_std()) {
            let (x, y) = self.positions[cell.id];
            if x < fp.x - tol
                || y < fp.y - tol
                || x + cell.width > fp.x_max() + tol
                || y + cell.height > fp.y_max() + tol
            {
                return Err(Error::invalid(format!(
                    "cell `{}` at ({x}, {y}) is outside the floorplan",
                    cell.name
                )));
            }
        }
        Ok(())
    }
}

/// Post-synthesis sizes keyed by cell name.
pub type SizeTable = HashMap<String, (f64, f64)>;
