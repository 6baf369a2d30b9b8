//! Session persistence: one append-only JSON-lines file per session, plus
//! import, replay and export.

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::io::write_campaign_csv;
use crate::experiment::trial::{run_trial, InputSource, TrialConfig, TrialRecord};
use crate::session::engine::LogEntry;

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        // fail at startup rather than on the first append
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"")?;
        fs::remove_file(&probe)?;
        Ok(Self { dir })
    }

    pub fn path_of(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    /// Append entries; sessions write to separate files so concurrent
    /// sessions never contend.
    pub fn append(&self, session_id: &str, entries: &[LogEntry]) -> Result<()> {
        if entries.is_empty() {
            return Ok(());
        }
        let file = OpenOptions::new().create(true).append(true).open(self.path_of(session_id))?;
        let mut w = BufWriter::new(file);
        for e in entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(&self, session_id: &str) -> Result<Vec<LogEntry>> {
        let path = self.path_of(session_id);
        if !path.exists() {
            return Err(Error::NotFound(format!("session {session_id}")));
        }
        read_log(&path)
    }

    pub fn sessions(&self) -> Result<Vec<String>> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".jsonl")).map(str::to_string))
            .collect();
        ids.sort();
        Ok(ids)
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_log(path: &Path, entries: &[LogEntry]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// A trial as logged: its config, the raw wheel commands and the x values
/// the server computed.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedTrial {
    pub config: TrialConfig,
    pub raw: Vec<f64>,
    pub xs: Vec<f64>,
}

pub fn logged_trials(entries: &[LogEntry]) -> Result<Vec<LoggedTrial>> {
    let mut out: Vec<LoggedTrial> = Vec::new();
    for e in entries {
        match e {
            LogEntry::Trial { config, .. } => {
                out.push(LoggedTrial { config: config.clone(), raw: Vec::new(), xs: Vec::new() })
            }
            LogEntry::Tick { trial_id, raw, record, .. } => {
                let cur = out
                    .last_mut()
                    .filter(|t| &t.config.trial_id == trial_id)
                    .ok_or_else(|| Error::Parse(format!("tick for {trial_id} outside its trial")))?;
                cur.raw.push(*raw);
                cur.xs.push(record.x);
            }
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub records: Vec<TrialRecord>,
    /// Ticks whose replayed `x` differs in any bit from the logged one.
    pub mismatches: usize,
}

/// Re-run every logged trial from its raw commands and compare `x` bit for bit.
pub fn replay_log(entries: &[LogEntry]) -> Result<ReplayReport> {
    let mut records = Vec::new();
    let mut mismatches = 0;
    for t in logged_trials(entries)? {
        let rec = run_trial(&t.config, &InputSource::Replay(t.raw.clone()))?;
        let replayed: Vec<f64> = rec.trajectory.records.iter().map(|r| r.x).collect();
        mismatches += replayed.len().abs_diff(t.xs.len());
        mismatches += replayed.iter().zip(&t.xs).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
        records.push(rec);
    }
    Ok(ReplayReport { records, mismatches })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    RawLog,
    CampaignCsv,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw-log" => Ok(ExportFormat::RawLog),
            "campaign-csv" => Ok(ExportFormat::CampaignCsv),
            other => Err(Error::Parse(format!("unknown export format {other:?}"))),
        }
    }
}

pub fn export_session(store: &SessionStore, session_id: &str, format: ExportFormat, out: &Path) -> Result<()> {
    let entries = store.load(session_id)?;
    match format {
        ExportFormat::RawLog => write_log(out, &entries),
        ExportFormat::CampaignCsv => {
            let report = replay_log(&entries)?;
            if report.mismatches > 0 {
                return Err(Error::Mismatch(format!("{} logged ticks do not replay", report.mismatches)));
            }
            write_campaign_csv(fs::File::create(out)?, &report.records)
        }
    }
}
