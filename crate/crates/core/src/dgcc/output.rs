use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::dgcc::RunResult;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct RunSummary<T> {
    pub variant: String,
    pub seed: u64,
    pub final_hv: T,
    pub reference: [T; 3],
    pub fes_total: usize,
    pub setup_fes: usize,
    pub max_fes: usize,
    pub rounds: usize,
    pub archive_size: usize,
    pub final_days: Vec<usize>,
    pub wall_ms: u64,
}

impl<T: Scalar> RunSummary<T> {
    pub fn new(result: &RunResult<T>, variant: &str, seed: u64, wall_ms: u64) -> Self {
        Self {
            variant: variant.to_string(),
            seed,
            final_hv: result.final_hv(),
            reference: result.reference.coords,
            fes_total: result.fes_total,
            setup_fes: result.setup_fes,
            max_fes: result.max_fes,
            rounds: result.history.len(),
            archive_size: result.archive.len(),
            final_days: result.plan.days().to_vec(),
            wall_ms,
        }
    }
}

/// Writes `archive.csv`, `history.jsonl` and `summary.json` into `dir`.
pub fn write_run_outputs<T: Scalar>(dir: &Path, result: &RunResult<T>, summary: &RunSummary<T>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("archive.csv");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    result.archive.write_csv(BufWriter::new(file))?;

    let path = dir.join("history.jsonl");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for snap in &result.history {
        serde_json::to_writer(&mut w, snap)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}
