use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use gasgrid::decomposition::{format_budget, format_gap, text_table, HeuristicResult, RunReport, SolveConfig};
use gasgrid::ingest::FORMAT_VERSION;
use gasgrid::relaxation::MisocStatus;
use gasgrid::Instance;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Everything needed to rerun a solve: the instance file by path and hash,
/// and the full configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool_version: String,
    pub format: u32,
    pub instance_path: String,
    pub instance_sha256: String,
    pub seed: Option<u64>,
    pub stress: f64,
    pub config: SolveConfig,
}

impl Header {
    pub fn new(path: &Path, inst: &Instance, config: &SolveConfig) -> Result<Self> {
        Ok(Header {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            format: FORMAT_VERSION,
            instance_path: path.display().to_string(),
            instance_sha256: sha256_file(path)?,
            seed: inst.seed,
            stress: inst.stress,
            config: config.clone(),
        })
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub header: Header,
    pub report: RunReport,
}

impl SolveRecord {
    /// `<stem>.report.json` and `<stem>.table.txt` in `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_file(&dir.join(format!("{stem}.report.json")), &pretty(self)?)?;
        write_file(&dir.join(format!("{stem}.table.txt")), &text_table(std::slice::from_ref(&self.report)))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxRecord {
    pub instance: String,
    pub instance_path: String,
    pub instance_sha256: String,
    pub perspective: bool,
    pub time_limit: f64,
    pub status: MisocStatus,
    pub bound: Option<f64>,
    pub nodes: usize,
    pub wall_time: f64,
    pub incumbent: Option<f64>,
    pub gap_percent: Option<f64>,
    pub heuristic: Option<HeuristicResult>,
}

impl RelaxRecord {
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_file(&dir.join(format!("{stem}.relax.json")), &pretty(self)?)
    }

    pub fn text(&self) -> String {
        let budget = |v: Option<f64>| format_budget(v.unwrap_or(f64::INFINITY));
        let mut out = String::new();
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k:<16}{v}");
        };
        row("instance", self.instance.clone());
        row("perspective", if self.perspective { "on" } else { "off" }.into());
        row("status", format!("{:?}", self.status));
        row("nodes", self.nodes.to_string());
        row("bound(1e9)", budget(self.bound));
        row("time(s)", format!("{:.2}", self.wall_time));
        if self.incumbent.is_some() {
            row("incumbent(1e9)", budget(self.incumbent));
            row("gap(%)", format_gap(self.gap_percent));
        }
        row(
            "heuristic",
            match &self.heuristic {
                Some(HeuristicResult { feasible: true, cost }) => format!("validated at {}", budget(*cost)),
                Some(_) => "did not validate".into(),
                None => "no relaxed point".into(),
            },
        );
        out
    }
}
