//! The trail-following driving experiment: disturbances, trials, windowed
//! metrics, the additivity and sweep analyses, and file formats.

pub mod analysis;
pub mod disturbance;
pub mod io;
pub mod stats;
pub mod trial;

pub use analysis::{
    additivity_analysis, additivity_campaign, run_additivity_triplets, run_campaign, sat_sweeps, AdditivityReport,
    AdditivityStats, CoupledPoint, SatSweeps, SweepPoint,
};
pub use disturbance::{generate_bumps, generate_trail, BumpSpec, Bumps, Trail, TrailSpec};
pub use stats::{ks_two_sample, paired_t_test, pearson, KsTest, TTest};
pub use trial::{
    compute_windowed_worst_case, run_trial, trial_disturbance, Condition, InputSource, TrialConfig, TrialRecord,
    TrialRun, TrialSummary,
};
pub use io::{
    read_campaign_csv, read_summary_csv, read_trajectory_csv, read_trial_file, write_campaign_csv, write_summary_csv,
    write_trajectory_csv, SummaryRow, TrialFile, WindowRow,
};
