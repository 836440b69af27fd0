//! Run orchestration and artifact emission.
//!
//! Every artifact is first written into a staging directory inside the output
//! directory and moved into place only after the whole set succeeded.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::scenario::{parse_scenario, to_toml, Scenario, ScenarioError, UnknownKeys};
use crate::sim::{drop_network, run_rounds, RunResult, SimError};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Scenario { path: PathBuf, source: ScenarioError },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid run manifest: {0}")]
    Manifest(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Which optional artifacts a run writes. KPI files are always written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EmitFlags {
    pub heatmaps: bool,
    pub spectra: bool,
    pub maps: bool,
    pub action_log: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            heatmaps: false,
            spectra: false,
            maps: false,
            action_log: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub scenario_path: PathBuf,
    pub out_dir: PathBuf,
    pub rounds: u64,
    /// Replaces the scenario's master seed when set.
    pub seed: Option<u64>,
    pub emit: EmitFlags,
    /// Warn on unknown scenario keys instead of rejecting them.
    pub lenient: bool,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(scenario_path: impl Into<PathBuf>, out_dir: impl Into<PathBuf>, rounds: u64) -> Self {
        Self {
            scenario_path: scenario_path.into(),
            out_dir: out_dir.into(),
            rounds,
            seed: None,
            emit: EmitFlags::default(),
            lenient: false,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), OutputError> {
        if self.rounds == 0 {
            return Err(OutputError::Manifest("rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// Coverage per round, as the exact strings written to the KPI files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rows: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub round: String,
    pub coverage_85: String,
    pub coverage_80: String,
}

impl RunSummary {
    pub fn table(&self) -> String {
        let mut out = format!("{:>5}  {:<22}  {:<22}\n", "round", "coverage_ge_-85dbm", "coverage_ge_-80dbm");
        for r in &self.rows {
            out.push_str(&format!("{:>5}  {:<22}  {:<22}\n", r.round, r.coverage_85, r.coverage_80));
        }
        out
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path, lenient: bool) -> Result<(Scenario, Vec<String>), OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mode = if lenient { UnknownKeys::Warn } else { UnknownKeys::Reject };
    let parsed = parse_scenario(&text, mode).map_err(|source| OutputError::Scenario {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((parsed.scenario, parsed.warnings))
}

/// Artifact name and bytes, in write order.
type Artifact = (String, Vec<u8>);

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing CSV to memory cannot fail");
    buf
}

fn artifacts(manifest: &RunManifest, scenario: &Scenario, result: &RunResult) -> Vec<Artifact> {
    let emit = manifest.emit;
    let mut out = Vec::new();
    for k in &result.kpis {
        out.push((format!("kpi_round_{}.csv", k.round), csv_bytes(|b| k.write_csv(b))));
    }
    if emit.action_log {
        let mut buf = Vec::new();
        for rec in &result.log {
            serde_json::to_writer(&mut buf, rec).expect("action records always serialize");
            buf.push(b'\n');
        }
        out.push(("actions.jsonl".to_string(), buf));
    }
    if emit.heatmaps {
        for (round, g) in result.grids.iter().enumerate() {
            let mut pgm = Vec::new();
            g.write_pgm(&mut pgm).expect("writing PGM to memory cannot fail");
            out.push((format!("heatmap_round_{round}.pgm"), pgm));
            out.push((format!("heatmap_round_{round}.csv"), csv_bytes(|b| g.write_csv(b))));
        }
    }
    if emit.maps {
        for (i, maps) in result.maps.iter().enumerate() {
            for m in maps {
                let name = format!("map_cell_{}_round_{}.csv", m.cell_id, i + 1);
                out.push((name, csv_bytes(|b| m.write_csv(b))));
            }
        }
    }
    if emit.spectra {
        for (i, cells) in result.spectra.iter().enumerate() {
            for (cell, s) in cells.iter().enumerate() {
                if let Some(s) = s {
                    let name = format!("spectrum_cell_{cell}_round_{}.csv", i + 1);
                    out.push((name, csv_bytes(|b| s.write_csv(b))));
                }
            }
        }
    }
    let mut resolved = format!(
        "# tool_version = {}\n# rounds = {}\n",
        manifest.tool_version, manifest.rounds
    );
    resolved.push_str(&to_toml(scenario));
    out.push(("scenario_resolved.toml".to_string(), resolved.into_bytes()));
    out
}

/// Writes `files` into `dir` through a staging directory; on failure nothing
/// new is left in `dir`.
fn commit(dir: &Path, files: &[Artifact]) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let staging = tempfile::Builder::new()
        .prefix(".aco-staging-")
        .tempdir_in(dir)
        .map_err(io_err(dir))?;
    for (name, bytes) in files {
        let path = staging.path().join(name);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        w.write_all(bytes).map_err(io_err(&path))?;
        w.into_inner()
            .map_err(|e| e.into_error())
            .and_then(|f| f.sync_all())
            .map_err(io_err(&path))?;
    }
    let mut moved = Vec::with_capacity(files.len());
    for (name, _) in files {
        let target = dir.join(name);
        if let Err(e) = fs::rename(staging.path().join(name), &target) {
            for p in &moved {
                let _ = fs::remove_file(p);
            }
            return Err(io_err(&target)(e));
        }
        moved.push(target);
    }
    Ok(moved)
}

/// Runs a scenario and writes its artifacts.
pub fn run(manifest: &RunManifest) -> Result<RunSummary, OutputError> {
    manifest.validate()?;
    let (mut scenario, warnings) = load_scenario(&manifest.scenario_path, manifest.lenient)?;
    for w in &warnings {
        log::warn!("{}: {w}", manifest.scenario_path.display());
    }
    if let Some(seed) = manifest.seed {
        scenario.config.network.seed = seed;
    }
    log::info!(
        "running {} for {} rounds, seed {}",
        manifest.scenario_path.display(),
        manifest.rounds,
        scenario.config.network.seed
    );
    let net = drop_network(&scenario.config, &scenario.faults)?;
    let result = run_rounds(net, manifest.rounds)?;

    let files = commit(&manifest.out_dir, &artifacts(manifest, &scenario, &result))?;
    let rows = result
        .kpis
        .iter()
        .map(|k| {
            let fields = k.rows();
            let get = |key: &str| {
                fields
                    .iter()
                    .find(|(k, _)| k == key)
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default()
            };
            SummaryRow {
                round: get("round"),
                coverage_85: get("coverage_ge_-85dbm"),
                coverage_80: get("coverage_ge_-80dbm"),
            }
        })
        .collect();
    Ok(RunSummary { rows, files, warnings })
}
