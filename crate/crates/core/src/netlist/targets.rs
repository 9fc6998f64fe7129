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

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Netlist;
use crate::error::{Error, Result};

/// Where a target vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Tool,
    Prior,
    Mle,
    Js,
    Jsd,
    JsHetero,
    Shifted,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Tool => "tool",
            Provenance::Prior => "prior",
            Provenance::Mle => "mle",
            Provenance::Js => "js",
            Provenance::Jsd => "jsd",
            Provenance::JsHetero => "js_hetero",
            Provenance::Shifted => "shifted",
        }
    }
}

/// Per-cell density targets keyed by cell name.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    pub provenance: Provenance,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl TargetVector {
    /// Targets for every cell of `netlist`, in id order.
    pub fn for_netlist(netlist: &Netlist, values: Vec<f64>, provenance: Provenance) -> Self {
        assert_eq!(values.len(), netlist.len(), "one target per cell");
        TargetVector {
            provenance,
            names: netlist.cells.iter().map(|c| c.name.clone()).collect(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>, provenance: Provenance) -> Self {
        assert_eq!(values.len(), self.len());
        TargetVector {
            provenance,
            names: self.names.clone(),
            values,
        }
    }

    /// Reorders to netlist id order; the name sets must agree exactly.
    pub fn align(&self, netlist: &Netlist) -> Result<TargetVector> {
        let mut values = vec![None; netlist.len()];
        for (name, &v) in self.names.iter().zip(&self.values) {
            let id = netlist
                .cell_id(name)
                .ok_or_else(|| Error::UnknownCell(name.clone()))?;
            values[id] = Some(v);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::MissingCell(netlist.cells[i].name.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(TargetVector::for_netlist(netlist, values, self.provenance))
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderRec {
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct TargetRec {
    cell: String,
    t: f64,
}

/// Writes a header `{"provenance": ...}` followed by one `{"cell", "t"}` record per cell.
pub fn serialize_targets(targets: &TargetVector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(targets.len() * 32);
    let _ = writeln!(
        out,
        "{}",
        serde_json::to_string(&HeaderRec {
            provenance: targets.provenance
        })
        .expect("serializable")
    );
    for (name, &t) in targets.names.iter().zip(&targets.values) {
        let rec = TargetRec {
            cell: name.clone(),
            t,
        };
        out.push_str(&serde_json::to_string(&rec).expect("serializable"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_targets(path: impl AsRef<Path>) -> Result<TargetVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, e: &dyn std::fmt::Display| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| perr(1, &"empty target file"))?;
    let header: HeaderRec = serde_json::from_str(header).map_err(|e| perr(hl + 1, &e))?;
    let mut names = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in lines {
        let rec: TargetRec = serde_json::from_str(line).map_err(|e| perr(i + 1, &e))?;
        if seen.insert(rec.cell.clone(), ()).is_some() {
            return Err(Error::DuplicateCell(rec.cell));
        }
        names.push(rec.cell);
        values.push(rec.t);
    }
    Ok(TargetVector {
        provenance: header.provenance,
        names,
        values,
    })
}

/// Loads targets and aligns them to `netlist`, failing on any name mismatch.
pub fn load_targets_for(path: impl AsRef<Path>, netlist: &Netlist) -> Result<TargetVector> {
    load_targets(path)?.align(netlist)
}
