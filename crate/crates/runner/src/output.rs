//! Result files. Every CSV starts with a `#` line carrying the schema, seed
//! and config hash; every JSON file wraps its payload with the same fields.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{RunError, RunResult};

pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "config.toml";

/// Shortest round-trip decimal form; `NaN` and `inf` spelled out.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'a str,
    seed: u64,
    config_hash: &'a str,
    data: &'a T,
}

#[derive(Debug, Deserialize)]
pub struct EnvelopeOwned<T> {
    pub schema: String,
    pub seed: u64,
    pub config_hash: String,
    pub data: T,
}

pub struct Outputs {
    dir: PathBuf,
    seed: u64,
    hash: String,
    files: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path, seed: u64, hash: &str) -> RunResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), seed, hash: hash.to_string(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_raw(&mut self, name: &str, bytes: &[u8]) -> RunResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| RunError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv<R>(&mut self, name: &str, schema: &str, columns: &[&str], rows: R) -> RunResult<()>
    where
        R: IntoIterator<Item = Vec<String>>,
    {
        let mut text = format!("# schema={schema} seed={} config_hash={}\n", self.seed, self.hash);
        text.push_str(&columns.join(","));
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write_raw(name, text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, schema: &str, data: &T) -> RunResult<()> {
        let env = Envelope { schema, seed: self.seed, config_hash: &self.hash, data };
        let mut text = serde_json::to_string_pretty(&env).map_err(|e| RunError::format(&self.dir.join(name), e.to_string()))?;
        text.push('\n');
        self.write_raw(name, text.as_bytes())
    }
}

/// Realizations dropped for tied ground states in one stage of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardCount {
    pub stage: String,
    pub discarded: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub kind: String,
    pub config_hash: String,
    pub artifact_version: String,
    pub seed: u64,
    pub workers: usize,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub discarded: Vec<DiscardCount>,
    pub outputs: Vec<String>,
    /// Invariant violations; any entry makes the run exit nonzero.
    pub violations: Vec<String>,
    /// Estimates that could not be formed, such as fits with too few sizes.
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> RunResult<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| RunError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| RunError::format(&path, e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> RunResult<()> {
        let path = dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| RunError::format(&path, e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| RunError::io(&path, e))
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}
