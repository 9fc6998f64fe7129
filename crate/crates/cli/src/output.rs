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

//! Output directory handling and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use goalplace::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    params: &'a serde_json::Value,
    inputs: &'a [FileEntry],
    outputs: &'a [FileEntry],
    status: &'static str,
    error: Option<String>,
}

fn sha256_file(path: &Path) -> Option<String> {
    let bytes = fs::read(path).ok()?;
    Some(format!("{:x}", Sha256::digest(&bytes)))
}

/// Tracks the inputs and outputs of one command.
pub struct Session {
    out: PathBuf,
    inputs: Vec<FileEntry>,
    outputs: Vec<String>,
}

impl Session {
    /// Records an input file; unreadable files are hashed as `null`.
    pub fn input(&mut self, path: &Path) -> PathBuf {
        self.inputs.push(FileEntry { path: path.display().to_string(), sha256: sha256_file(path) });
        path.to_path_buf()
    }

    /// Path of an output file inside the output directory.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.output(name);
        fs::write(&path, contents).map_err(|e| Error::io(path, e))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
        s.push('\n');
        self.write(name, s)
    }
}

/// Runs `body` with a session rooted at `out`, then writes `manifest.json`
/// whether or not the body succeeded.
pub fn with_session<P: Serialize>(
    command: &str,
    params: &P,
    out: &Path,
    body: impl FnOnce(&mut Session) -> Result<()>,
) -> Result<()> {
    let start = Instant::now();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut session = Session { out: out.to_path_buf(), inputs: Vec::new(), outputs: Vec::new() };
    let result = body(&mut session);
    let outputs: Vec<FileEntry> = session
        .outputs
        .iter()
        .filter_map(|name| {
            let p = out.join(name);
            p.exists().then(|| FileEntry { path: name.clone(), sha256: sha256_file(&p) })
        })
        .collect();
    let params = serde_json::to_value(params).unwrap_or(serde_json::Value::Null);
    let manifest = Manifest {
        tool: "goalplace",
        version: env!("CARGO_PKG_VERSION"),
        command,
        params: &params,
        inputs: &session.inputs,
        outputs: &outputs,
        status: if result.is_ok() { "ok" } else { "error" },
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = out.join("manifest.json");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    println!("{command}: {} in {:.2}s", manifest.status, start.elapsed().as_secs_f64());
    result
}
