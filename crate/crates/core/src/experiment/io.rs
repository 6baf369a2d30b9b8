//! File formats of the experiment.
//!
//! Trial configs are TOML: an optional `[pilot]` table with the
//! [`PilotModel`] fields, then one `[[trial]]` table per trial with the
//! [`TrialConfig`] fields (only `trial_id` and `condition` are required).
//!
//! ```toml
//! [pilot]
//! reaction_delay = 4
//! effective_rate = 4.0
//! motor_noise_std = 0.05
//! gain = 0.8
//! command_range = 1.5
//!
//! [[trial]]
//! trial_id = "t1"
//! condition = "both"
//! added_delay_ticks = 4
//! added_rate_bits = 3
//! seed = 7
//! ```
//!
//! Results go to a campaign CSV with one row per window and a summary CSV
//! with one row per trial.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::PilotModel;
use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::experiment::trial::{Condition, TrialConfig, TrialRecord};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot: Option<PilotModel>,
    #[serde(default, rename = "trial")]
    pub trials: Vec<TrialConfig>,
}

impl TrialFile {
    pub fn parse(text: &str) -> Result<Self> {
        let f: TrialFile = toml::from_str(text)?;
        for t in &f.trials {
            t.validate()?;
        }
        if let Some(p) = &f.pilot {
            p.validate()?;
        }
        Ok(f)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn read_trial_file(path: &Path) -> Result<TrialFile> {
    TrialFile::parse(&fs::read_to_string(path)?)
}

/// One row of the campaign CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub trial_id: String,
    pub condition: Condition,
    pub added_delay_ticks: i32,
    pub added_rate: Option<u32>,
    pub window_index: usize,
    pub window_worst_case: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub trial_id: String,
    pub condition: Condition,
    pub added_delay_ticks: i32,
    pub added_rate: Option<u32>,
    pub coupled_sat: bool,
    pub seed: u64,
    pub complete: bool,
    pub windows: usize,
    pub sup_error: f64,
    pub mean_windowed: f64,
    pub mse: f64,
}

pub fn window_rows(records: &[TrialRecord]) -> Vec<WindowRow> {
    records
        .iter()
        .flat_map(|r| {
            r.windowed_errors.iter().enumerate().map(move |(i, e)| WindowRow {
                trial_id: r.config.trial_id.clone(),
                condition: r.config.condition,
                added_delay_ticks: r.config.added_delay_ticks,
                added_rate: r.config.added_rate_bits,
                window_index: i,
                window_worst_case: *e,
            })
        })
        .collect()
}

pub fn summary_rows(records: &[TrialRecord]) -> Vec<SummaryRow> {
    records
        .iter()
        .map(|r| SummaryRow {
            trial_id: r.config.trial_id.clone(),
            condition: r.config.condition,
            added_delay_ticks: r.config.added_delay_ticks,
            added_rate: r.config.added_rate_bits,
            coupled_sat: r.config.coupled_sat,
            seed: r.config.seed,
            complete: r.complete,
            windows: r.windowed_errors.len(),
            sup_error: r.summary.sup_error,
            mean_windowed: r.summary.mean_windowed,
            mse: r.summary.mse,
        })
        .collect()
}

/// Serialize rows with a header. The header is written even with no rows.
pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub const WINDOW_HEADER: [&str; 6] =
    ["trial_id", "condition", "added_delay_ticks", "added_rate", "window_index", "window_worst_case"];
pub const SUMMARY_HEADER: [&str; 11] = [
    "trial_id",
    "condition",
    "added_delay_ticks",
    "added_rate",
    "coupled_sat",
    "seed",
    "complete",
    "windows",
    "sup_error",
    "mean_windowed",
    "mse",
];
pub const TRAJECTORY_HEADER: [&str; 8] = ["tick", "x", "w", "b", "r", "u", "u_low", "u_high"];

/// Campaign CSV counts only completed trials.
pub fn write_campaign_csv<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let done: Vec<TrialRecord> = records.iter().filter(|r| r.complete).cloned().collect();
    write_csv(out, &window_rows(&done), &WINDOW_HEADER)
}

pub fn write_summary_csv<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    write_csv(out, &summary_rows(records), &SUMMARY_HEADER)
}

pub fn write_trajectory_csv<W: Write>(out: W, records: &[TrajectoryRecord]) -> Result<()> {
    write_csv(out, records, &TRAJECTORY_HEADER)
}

pub fn read_campaign_csv<R: Read>(input: R) -> Result<Vec<WindowRow>> {
    read_csv(input)
}

pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    read_csv(input)
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectoryRecord>> {
    read_csv(input)
}

/// Windowed errors per trial id, in window order.
pub fn group_windows(rows: &[WindowRow]) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in rows {
        let v = out.entry(row.trial_id.clone()).or_default();
        if row.window_index != v.len() {
            return Err(Error::Parse(format!("trial {} window {} out of order", row.trial_id, row.window_index)));
        }
        v.push(row.window_worst_case);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::trial::{run_trial, InputSource};

    fn records() -> Vec<TrialRecord> {
        let pilot = InputSource::Pilot { model: PilotModel::default(), seed: 4 };
        vec![
            run_trial(&TrialConfig::new("a", Condition::Both, 4).with_rate(Some(3)), &pilot).unwrap(),
            run_trial(&TrialConfig::new("b", Condition::TrailOnly, 5).with_delay(-8), &pilot).unwrap(),
        ]
    }

    #[test]
    fn trial_file_round_trip() {
        let text = r#"
            [pilot]
            reaction_delay = 3
            effective_rate = 5.0
            motor_noise_std = 0.01
            gain = 0.5
            command_range = 1.0

            [[trial]]
            trial_id = "x"
            condition = "bump_only"

            [[trial]]
            trial_id = "y"
            condition = "both"
            added_rate_bits = 2
            added_delay_ticks = -3
            coupled_sat = true
        "#;
        let f = TrialFile::parse(text).unwrap();
        assert_eq!(f.trials.len(), 2);
        assert_eq!(f.trials[0], TrialConfig::new("x", Condition::BumpOnly, 0));
        assert_eq!(f.pilot.unwrap().reaction_delay, 3);
        assert_eq!(TrialFile::parse(&f.to_toml().unwrap()).unwrap(), f);
        assert!(TrialFile::parse("[[trial]]\ntrial_id = \"z\"\ncondition = \"sideways\"").is_err());
        // coupled flag with the wrong delay
        assert!(TrialFile::parse("[[trial]]\ntrial_id=\"z\"\ncondition=\"both\"\nadded_rate_bits=2\ncoupled_sat=true")
            .is_err());
    }

    #[test]
    fn campaign_csv_round_trip() {
        let recs = records();
        let mut buf = Vec::new();
        write_campaign_csv(&mut buf, &recs).unwrap();
        let rows = read_campaign_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), recs.iter().map(|r| r.windowed_errors.len()).sum::<usize>());
        assert_eq!(rows, window_rows(&recs));
        let grouped = group_windows(&rows).unwrap();
        assert_eq!(grouped["a"], recs[0].windowed_errors);
        assert_eq!(rows[0].added_rate, Some(3));
        assert_eq!(rows.last().unwrap().added_rate, None);
    }

    #[test]
    fn summary_and_trajectory_round_trip() {
        let recs = records();
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &recs).unwrap();
        assert_eq!(read_summary_csv(buf.as_slice()).unwrap(), summary_rows(&recs));
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &recs[1].trajectory.records).unwrap();
        assert_eq!(read_trajectory_csv(buf.as_slice()).unwrap(), recs[1].trajectory.records);
    }

    #[test]
    fn empty_campaign_has_header_only() {
        let mut buf = Vec::new();
        write_campaign_csv(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.trim(), WINDOW_HEADER.join(","));
        assert!(read_campaign_csv(text.as_bytes()).unwrap().is_empty());
    }
}
