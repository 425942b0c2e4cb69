//! Line-delimited JSON files.
//!
//! Every file opens with a header line carrying the schema version and the
//! config hash. Layout of an output directory:
//!
//! ```text
//! logs/<cond>_<agent>_s<session>_t<trial>.jsonl   header, step records, pulse records
//! trial_metrics.jsonl                             header, one row per trial
//! pulse_metrics.jsonl                             header, one row per pulse
//! summary.jsonl                                   header, cell and pulse estimates
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::env::SimConfig;
use crate::error::{Error, Result};
use crate::harness::aggregate::{summarize, CellSummary, PulseSummary, Summary};
use crate::harness::metrics::{rows_for, PulseRow, TrialRow};
use crate::harness::trial::{PulseRecord, StepRecord, TrialHeader, TrialLog};

pub const TRIAL_METRICS_SCHEMA: &str = "frost-hollow/trial-metrics/v1";
pub const PULSE_METRICS_SCHEMA: &str = "frost-hollow/pulse-metrics/v1";
pub const SUMMARY_SCHEMA: &str = "frost-hollow/summary/v1";

pub const LOGS_DIR: &str = "logs";
pub const TRIAL_METRICS_FILE: &str = "trial_metrics.jsonl";
pub const PULSE_METRICS_FILE: &str = "pulse_metrics.jsonl";
pub const SUMMARY_FILE: &str = "summary.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogLine {
    Header(TrialHeader),
    Step(StepRecord),
    Pulse(PulseRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename = "header")]
pub struct TableHeader {
    pub schema: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SummaryLine {
    Cell(CellSummary),
    Pulse(PulseSummary),
}

struct LineWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LineWriter {
    fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), out: BufWriter::new(file) })
    }

    fn line<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, value)
            .map_err(|e| Error::io(&self.path, std::io::Error::other(e)))?;
        self.out.write_all(b"\n").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), line, msg: msg.into() }
}

pub fn log_file_name(header: &TrialHeader) -> String {
    format!(
        "{}_{}_s{:03}_t{:02}_{:016x}.jsonl",
        header.condition,
        header.agent,
        header.session.unwrap_or(0),
        header.trial.unwrap_or(0),
        header.seed
    )
}

pub fn write_trial_log(path: &Path, log: &TrialLog) -> Result<()> {
    let mut w = LineWriter::create(path)?;
    w.line(&LogLine::Header(log.header.clone()))?;
    for rec in &log.steps {
        w.line(&LogLine::Step(*rec))?;
    }
    for p in &log.pulses {
        w.line(&LogLine::Pulse(*p))?;
    }
    w.finish()
}

pub fn read_trial_log(path: &Path) -> Result<TrialLog> {
    let mut lines = read_lines::<LogLine>(path)?.into_iter();
    let header = match lines.next() {
        Some(LogLine::Header(h)) => h,
        _ => return Err(format_err(path, 1, "first line must be a header")),
    };
    let mut log = TrialLog { header, steps: Vec::new(), pulses: Vec::new() };
    for (i, line) in lines.enumerate() {
        match line {
            LogLine::Step(s) => log.steps.push(s),
            LogLine::Pulse(p) => log.pulses.push(p),
            LogLine::Header(_) => return Err(format_err(path, i + 2, "duplicate header")),
        }
    }
    Ok(log)
}

/// Reads every `*.jsonl` log in `dir`, sorted by file name.
pub fn read_trial_logs(dir: &Path) -> Result<Vec<TrialLog>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_trial_log(p)).collect()
}

fn shared_hash<'a>(mut hashes: impl Iterator<Item = &'a str>) -> String {
    match hashes.next() {
        None => "none".to_string(),
        Some(first) if hashes.all(|h| h == first) => first.to_string(),
        Some(_) => "mixed".to_string(),
    }
}

fn write_table<T: Serialize>(path: &Path, schema: &str, config_hash: &str, rows: &[T]) -> Result<()> {
    let mut w = LineWriter::create(path)?;
    w.line(&TableHeader { schema: schema.to_string(), config_hash: config_hash.to_string() })?;
    for row in rows {
        w.line(row)?;
    }
    w.finish()
}

fn read_table<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<(TableHeader, Vec<T>)> {
    let values = read_lines::<serde_json::Value>(path)?;
    let mut iter = values.into_iter();
    let header: TableHeader = iter
        .next()
        .and_then(|v| serde_json::from_value(v).ok())
        .ok_or_else(|| format_err(path, 1, "missing table header"))?;
    if header.schema != schema {
        return Err(format_err(path, 1, format!("expected schema {schema}, found {}", header.schema)));
    }
    let rows = iter
        .enumerate()
        .map(|(i, v)| serde_json::from_value(v).map_err(|e| format_err(path, i + 2, e.to_string())))
        .collect::<Result<Vec<T>>>()?;
    Ok((header, rows))
}

/// Per-trial and per-pulse metric tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTables {
    pub config_hash: String,
    pub trials: Vec<TrialRow>,
    pub pulses: Vec<PulseRow>,
}

pub fn compute_metrics(logs: &[TrialLog], sim: &SimConfig) -> MetricTables {
    let mut tables = MetricTables {
        config_hash: shared_hash(logs.iter().map(|l| l.header.config_hash.as_str())),
        ..MetricTables::default()
    };
    for log in logs {
        let (trial, pulses) = rows_for(log, sim);
        tables.trials.push(trial);
        tables.pulses.extend(pulses);
    }
    // Canonical order so tables depend only on the set of logs.
    tables.trials.sort_by_key(|r| (r.id, r.seed));
    tables.pulses.sort_by_key(|r| (r.id, r.seed, r.metric.index));
    tables
}

pub fn write_metrics(dir: &Path, tables: &MetricTables) -> Result<Vec<PathBuf>> {
    let trials = dir.join(TRIAL_METRICS_FILE);
    let pulses = dir.join(PULSE_METRICS_FILE);
    write_table(&trials, TRIAL_METRICS_SCHEMA, &tables.config_hash, &tables.trials)?;
    write_table(&pulses, PULSE_METRICS_SCHEMA, &tables.config_hash, &tables.pulses)?;
    Ok(vec![trials, pulses])
}

pub fn read_metrics(dir: &Path) -> Result<MetricTables> {
    let (header, trials) = read_table(&dir.join(TRIAL_METRICS_FILE), TRIAL_METRICS_SCHEMA)?;
    let (_, pulses) = read_table(&dir.join(PULSE_METRICS_FILE), PULSE_METRICS_SCHEMA)?;
    Ok(MetricTables { config_hash: header.config_hash, trials, pulses })
}

pub fn write_summary(dir: &Path, config_hash: &str, summary: &Summary) -> Result<PathBuf> {
    let path = dir.join(SUMMARY_FILE);
    let mut w = LineWriter::create(&path)?;
    w.line(&TableHeader { schema: SUMMARY_SCHEMA.to_string(), config_hash: config_hash.to_string() })?;
    for c in &summary.cells {
        w.line(&SummaryLine::Cell(c.clone()))?;
    }
    for p in &summary.pulses {
        w.line(&SummaryLine::Pulse(p.clone()))?;
    }
    w.finish()?;
    Ok(path)
}

pub fn read_summary(dir: &Path) -> Result<(TableHeader, Summary)> {
    let (header, lines) = read_table::<SummaryLine>(&dir.join(SUMMARY_FILE), SUMMARY_SCHEMA)?;
    let mut summary = Summary::default();
    for line in lines {
        match line {
            SummaryLine::Cell(c) => summary.cells.push(c),
            SummaryLine::Pulse(p) => summary.pulses.push(p),
        }
    }
    Ok((header, summary))
}

/// Writes trial logs, metric tables and the summary under `out_dir`.
/// Returns every file written.
pub fn export(logs: &[TrialLog], sim: &SimConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::with_capacity(logs.len() + 3);
    let log_dir = out_dir.join(LOGS_DIR);
    fs::create_dir_all(&log_dir).map_err(|e| Error::io(&log_dir, e))?;
    for log in logs {
        let path = log_dir.join(log_file_name(&log.header));
        write_trial_log(&path, log)?;
        files.push(path);
    }
    let tables = compute_metrics(logs, sim);
    files.extend(write_metrics(out_dir, &tables)?);
    let summary = summarize(&tables.trials, &tables.pulses);
    files.push(write_summary(out_dir, &tables.config_hash, &summary)?);
    Ok(files)
}
