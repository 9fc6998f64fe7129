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

//! JSON-lines and Bookshelf-style readers/writers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Cell, CellKind, Floorplan, Net, Netlist, PinRef, Placement, SizeTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetlistFormat {
    Jsonl,
    /// `.aux` file naming `.nodes`, `.nets` and `.scl` siblings.
    BookshelfLike,
}

#[derive(Serialize, Deserialize)]
struct HeaderRec {
    floorplan: [f64; 4],
    site_w: f64,
    row_h: f64,
}

#[derive(Serialize, Deserialize)]
struct CellRec {
    cell: String,
    w: f64,
    h: f64,
    #[serde(default = "default_kind")]
    kind: CellKind,
    #[serde(default)]
    movable: Option<bool>,
    #[serde(default)]
    pins: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slack: Option<f64>,
}

fn default_kind() -> CellKind {
    CellKind::StdCell
}

#[derive(Serialize, Deserialize)]
struct NetRec {
    net: usize,
    pins: Vec<(String, usize)>,
}

#[derive(Serialize, Deserialize)]
struct PosRec {
    cell: String,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct FrameRec {
    frame: String,
}

#[derive(Serialize, Deserialize)]
struct SizeRec {
    cell: String,
    w: f64,
    h: f64,
}

#[derive(Deserialize)]
struct SlackRec {
    cell: String,
    slack: f64,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, s: &str) -> Result<()> {
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(path: &Path, line: usize, msg: impl ToString) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    }
}

fn decode<T: for<'de> Deserialize<'de>>(path: &Path, line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| parse_err(path, line, e))
}

pub fn parse_netlist(path: impl AsRef<Path>, format: NetlistFormat) -> Result<Netlist> {
    let path = path.as_ref();
    match format {
        NetlistFormat::Jsonl => parse_netlist_str(&read_to_string(path)?, path),
        NetlistFormat::BookshelfLike => parse_bookshelf(path),
    }
}

/// Parses JSON-lines netlist text; `origin` is only used in error messages.
pub fn parse_netlist_str(text: &str, origin: &Path) -> Result<Netlist> {
    let mut header: Option<HeaderRec> = None;
    let mut cells = Vec::new();
    let mut raw_nets: Vec<(usize, NetRec)> = Vec::new();
    let mut names: HashMap<String, usize> = HashMap::new();

    for (line, rec) in records(text) {
        let value: Value = decode(origin, line, rec)?;
        let Value::Object(obj) = &value else {
            return Err(parse_err(origin, line, "expected a JSON object"));
        };
        if obj.contains_key("floorplan") {
            if header.is_some() {
                return Err(parse_err(origin, line, "duplicate header record"));
            }
            header = Some(serde_json::from_value(value).map_err(|e| parse_err(origin, line, e))?);
        } else if obj.contains_key("net") {
            let net: NetRec =
                serde_json::from_value(value).map_err(|e| parse_err(origin, line, e))?;
            raw_nets.push((line, net));
        } else if obj.contains_key("cell") {
            let c: CellRec =
                serde_json::from_value(value).map_err(|e| parse_err(origin, line, e))?;
            if names.insert(c.cell.clone(), cells.len()).is_some() {
                return Err(Error::DuplicateCell(c.cell));
            }
            cells.push(Cell {
                id: cells.len(),
                movable: c.movable.unwrap_or(c.kind != CellKind::Macro),
                name: c.cell,
                width: c.w,
                height: c.h,
                kind: c.kind,
                pin_offsets: c.pins.into_iter().map(|[x, y]| (x, y)).collect(),
                slack: c.slack,
            });
        } else {
            return Err(parse_err(origin, line, "unrecognized record"));
        }
    }

    let header = header.ok_or_else(|| parse_err(origin, 0, "missing floorplan header record"))?;
    let mut nets = Vec::with_capacity(raw_nets.len());
    for (_, rec) in raw_nets {
        let mut pins = Vec::with_capacity(rec.pins.len());
        for (name, pin) in rec.pins {
            let cell = *names.get(&name).ok_or_else(|| Error::DanglingPin {
                net: rec.net.to_string(),
                cell: name.clone(),
            })?;
            pins.push(PinRef { cell, pin });
        }
        nets.push(Net { id: rec.net, pins });
    }
    let [x, y, w, h] = header.floorplan;
    Netlist::new(Floorplan::new(x, y, w, h), header.site_w, header.row_h, cells, nets)
}

pub fn netlist_to_jsonl(netlist: &Netlist) -> String {
    let mut out = String::new();
    let fp = netlist.floorplan;
    let header = HeaderRec {
        floorplan: [fp.x, fp.y, fp.width, fp.height],
        site_w: netlist.site_width,
        row_h: netlist.row_height,
    };
    push_json(&mut out, &header);
    for c in &netlist.cells {
        let rec = CellRec {
            cell: c.name.clone(),
            w: c.width,
            h: c.height,
            kind: c.kind,
            movable: Some(c.movable),
            pins: c.pin_offsets.iter().map(|&(x, y)| [x, y]).collect(),
            slack: c.slack,
        };
        push_json(&mut out, &rec);
    }
    for n in &netlist.nets {
        let rec = NetRec {
            net: n.id,
            pins: n
                .pins
                .iter()
                .map(|p| (netlist.cells[p.cell].name.clone(), p.pin))
                .collect(),
        };
        push_json(&mut out, &rec);
    }
    out
}

fn push_json<T: Serialize>(out: &mut String, rec: &T) {
    // serializing plain records into a String cannot fail
    out.push_str(&serde_json::to_string(rec).expect("serializable record"));
    out.push('\n');
}

pub fn write_netlist(netlist: &Netlist, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &netlist_to_jsonl(netlist))
}

/// Reads a placement; every cell of `netlist` must have a position.
pub fn read_placement(path: impl AsRef<Path>, netlist: &Netlist) -> Result<Placement> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut positions = vec![None; netlist.len()];
    let mut frame = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    for (line, rec) in records(&text) {
        if rec.contains("\"frame\"") && !rec.contains("\"cell\"") {
            let f: FrameRec = decode(path, line, rec)?;
            frame = f.frame;
            continue;
        }
        let p: PosRec = decode(path, line, rec)?;
        let id = netlist
            .cell_id(&p.cell)
            .ok_or_else(|| parse_err(path, line, format!("unknown cell `{}`", p.cell)))?;
        positions[id] = Some((p.x, p.y));
    }
    let positions = positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| Error::MissingCell(netlist.cells[i].name.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok(Placement::new(frame, positions))
}

pub fn write_placement(
    placement: &Placement,
    netlist: &Netlist,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = String::new();
    push_json(
        &mut out,
        &FrameRec {
            frame: placement.frame_id.clone(),
        },
    );
    for (cell, &(x, y)) in netlist.cells.iter().zip(&placement.positions) {
        push_json(
            &mut out,
            &PosRec {
                cell: cell.name.clone(),
                x,
                y,
            },
        );
    }
    write_string(path.as_ref(), &out)
}

pub fn read_size_table(path: impl AsRef<Path>) -> Result<SizeTable> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut table = SizeTable::new();
    for (line, rec) in records(&text) {
        let s: SizeRec = decode(path, line, rec)?;
        if !(s.w > 0.0 && s.h > 0.0) {
            return Err(parse_err(path, line, "sizes must be positive"));
        }
        table.insert(s.cell, (s.w, s.h));
    }
    Ok(table)
}

pub fn write_size_table(table: &SizeTable, path: impl AsRef<Path>) -> Result<()> {
    let mut names: Vec<&String> = table.keys().collect();
    names.sort();
    let mut out = String::new();
    for name in names {
        let (w, h) = table[name];
        push_json(
            &mut out,
            &SizeRec {
                cell: name.clone(),
                w,
                h,
            },
        );
    }
    write_string(path.as_ref(), &out)
}

pub fn read_slacks(path: impl AsRef<Path>) -> Result<HashMap<String, f64>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut map = HashMap::new();
    for (line, rec) in records(&text) {
        let s: SlackRec = decode(path, line, rec)?;
        map.insert(s.cell, s.slack);
    }
    Ok(map)
}

pub fn write_slacks(netlist: &Netlist, path: &Path) -> Result<()> {
    let mut out = String::new();
    for c in &netlist.cells {
        if let Some(s) = c.slack {
            let _ = writeln!(
                out,
                "{}",
                serde_json::json!({ "cell": c.name, "slack": s })
            );
        }
    }
    write_string(path, &out)
}

// Bookshelf-style input: .aux lists sibling files; only .nodes, .nets and .scl are read.

fn bookshelf_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        if l.is_empty() || l.starts_with("UCLA") {
            None
        } else {
            Some((i + 1, l.split_whitespace().collect()))
        }
    })
}

fn num(path: &Path, line: usize, tok: Option<&&str>) -> Result<f64> {
    tok.ok_or_else(|| parse_err(path, line, "missing number"))?
        .parse::<f64>()
        .map_err(|e| parse_err(path, line, e))
}

fn parse_bookshelf(aux: &Path) -> Result<Netlist> {
    let text = read_to_string(aux)?;
    let dir = aux.parent().unwrap_or(Path::new("."));
    let mut files: HashMap<&str, PathBuf> = HashMap::new();
    for tok in text.split_whitespace() {
        for ext in ["nodes", "nets", "scl"] {
            if tok.ends_with(&format!(".{ext}")) {
                files.insert(ext, dir.join(tok));
            }
        }
    }
    let get = |ext: &str| {
        files
            .get(ext)
            .cloned()
            .ok_or_else(|| parse_err(aux, 1, format!("aux file names no .{ext} file")))
    };
    let nodes_path = get("nodes")?;
    let nets_path = get("nets")?;
    let scl_path = get("scl")?;

    let mut cells = Vec::new();
    let mut names = HashMap::new();
    for (line, toks) in bookshelf_lines(&read_to_string(&nodes_path)?) {
        if toks.contains(&":") {
            continue;
        }
        let name = toks[0].to_string();
        let w = num(&nodes_path, line, toks.get(1))?;
        let h = num(&nodes_path, line, toks.get(2))?;
        let terminal = toks.get(3).is_some_and(|t| t.starts_with("terminal"));
        if names.insert(name.clone(), cells.len()).is_some() {
            return Err(Error::DuplicateCell(name));
        }
        cells.push(Cell {
            id: cells.len(),
            name,
            width: w,
            height: h,
            kind: if terminal { CellKind::Macro } else { CellKind::StdCell },
            movable: !terminal,
            pin_offsets: Vec::new(),
            slack: None,
        });
    }

    let mut nets: Vec<Net> = Vec::new();
    let mut remaining = 0usize;
    for (line, toks) in bookshelf_lines(&read_to_string(&nets_path)?) {
        if toks[0] == "NetDegree" {
            remaining = num(&nets_path, line, toks.get(2))? as usize;
            nets.push(Net {
                id: nets.len(),
                pins: Vec::with_capacity(remaining),
            });
            continue;
        }
        if toks.contains(&":") && remaining == 0 {
            continue;
        }
        let net = nets
            .last_mut()
            .ok_or_else(|| parse_err(&nets_path, line, "pin outside of a net"))?;
        let name = toks[0];
        let cell = *names.get(name).ok_or_else(|| Error::DanglingPin {
            net: net.id.to_string(),
            cell: name.to_string(),
        })?;
        // offsets after ':' are relative to the cell center
        let (dx, dy) = match toks.iter().position(|t| *t == ":") {
            Some(p) => (
                num(&nets_path, line, toks.get(p + 1))?,
                num(&nets_path, line, toks.get(p + 2))?,
            ),
            None => (0.0, 0.0),
        };
        let c = &mut cells[cell];
        c.pin_offsets.push((dx + 0.5 * c.width, dy + 0.5 * c.height));
        net.pins.push(PinRef {
            cell,
            pin: c.pin_offsets.len() - 1,
        });
        remaining = remaining.saturating_sub(1);
    }

    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut row_h, mut site_w) = (None, None);
    let (mut row_y, mut row_height) = (0.0, 0.0);
    for (line, toks) in bookshelf_lines(&read_to_string(&scl_path)?) {
        match toks[0] {
            "Coordinate" => row_y = num(&scl_path, line, toks.get(2))?,
            "Height" => {
                row_height = num(&scl_path, line, toks.get(2))?;
                row_h.get_or_insert(row_height);
            }
            "Sitewidth" => {
                site_w.get_or_insert(num(&scl_path, line, toks.get(2))?);
            }
            "SubrowOrigin" => {
                let ox = num(&scl_path, line, toks.get(2))?;
                let n = num(&scl_path, line, toks.get(5))?;
                let sw = site_w.unwrap_or(1.0);
                x0 = x0.min(ox);
                x1 = x1.max(ox + n * sw);
                y0 = y0.min(row_y);
                y1 = y1.max(row_y + row_height);
            }
            _ => {}
        }
    }
    let (Some(row_h), Some(site_w)) = (row_h, site_w) else {
        return Err(parse_err(&scl_path, 0, "no rows found"));
    };
    Netlist::new(
        Floorplan::new(x0, y0, x1 - x0, y1 - y0),
        site_w,
        row_h,
        cells,
        nets,
    )
}
