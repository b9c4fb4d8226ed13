//! Reproducibility record written next to every CLI output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::write_string_atomic;
use crate::signal_model::BrownConstants;
use crate::solver::SolverConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

/// An output file and the command-line flag that named it. Replay redirects
/// that flag to a scratch location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub flag: String,
    pub path: PathBuf,
    /// Files produced under `path` when it names a directory.
    #[serde(default)]
    pub files: Vec<String>,
    /// CSV columns holding wall-clock measurements, skipped by replay.
    #[serde(default)]
    pub volatile_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub build: String,
    pub subcommand: String,
    /// Arguments after the program name, exactly as given.
    pub argv: Vec<String>,
    pub seed: u64,
    pub constants: BrownConstants,
    pub solver: SolverConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<OutputRecord>,
    pub timings_ms: BTreeMap<String, f64>,
}

pub fn build_id() -> String {
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    match option_env!("SSE_BUILD_ID") {
        Some(id) => format!("{id}-{profile}"),
        None => format!("{}-{profile}", env!("CARGO_PKG_VERSION")),
    }
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        argv: Vec<String>,
        seed: u64,
        constants: BrownConstants,
        solver: SolverConfig,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            build: build_id(),
            subcommand: subcommand.to_string(),
            argv,
            seed,
            constants,
            solver,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e.to_string()))?;
        write_string_atomic(path, &(text + "\n"))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Manifest location for a single-file output: `<output>.manifest.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Drops the named columns from a CSV text.
pub fn strip_csv_columns(text: &str, columns: &[String]) -> String {
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let keep: Vec<bool> = header.split(',').map(|h| !columns.iter().any(|c| c == h)).collect();
    let filter = |line: &str| -> String {
        line.split(',')
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(v, _)| v)
            .collect::<Vec<_>>()
            .join(",")
    };
    std::iter::once(header)
        .chain(lines)
        .map(filter)
        .collect::<Vec<_>>()
        .join("\n")
}
