//! Run manifests: every output file gets a sibling `<out>.manifest.json`
//! recording the fully resolved command, so `qmit replay` can rerun it.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::commands::write_file;
use crate::{Command, Failure};

/// Inputs, output and seed of one executed command.
pub(crate) struct RunRecord {
    inputs: Vec<PathBuf>,
    output: PathBuf,
    seed: Option<u64>,
}

impl RunRecord {
    pub(crate) fn new(inputs: Vec<PathBuf>, output: PathBuf, seed: Option<u64>) -> Self {
        Self { inputs, output, seed }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// The command with every default filled in.
    pub command: Command,
    pub argv: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    pub seed: Option<u64>,
    pub threads: usize,
    pub wall_time_s: f64,
}

pub(crate) fn manifest_path(output: &Path) -> PathBuf {
    let mut s = OsString::from(output.as_os_str());
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub(crate) fn write(cmd: &Command, record: &RunRecord, elapsed: Duration, argv: &[String]) -> Result<(), Failure> {
    let manifest = RunManifest {
        tool: "qmit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: cmd.name().into(),
        command: cmd.clone(),
        argv: argv.to_vec(),
        inputs: record.inputs.clone(),
        output: record.output.clone(),
        seed: record.seed,
        threads: rayon::current_num_threads(),
        wall_time_s: elapsed.as_secs_f64(),
    };
    let doc = serde_json::to_string_pretty(&manifest).map_err(qmit::Error::from)?;
    write_file(&manifest_path(&record.output), &doc)
}

pub(crate) fn load(path: &Path) -> Result<Command, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Failure {
        kind: "json",
        message: format!("{}: not a run manifest ({e})", path.display()),
        code: 1,
    })?;
    Ok(manifest.command)
}
