//! Run configuration, repeated runs with derived seeds, versioned JSON
//! reports, and report comparison.

mod compare;
mod config;
pub mod float_sentinel;
mod runner;

pub use compare::{compare, Cell, Comparison, ADVERSARIAL_ROW};
pub use config::{DataConfig, LearnerConfig, LoadedData, Method, RunConfig, Snapshot, OUTPUT_DIR_ENV};
pub use runner::{
    run, run_seed, Interval, MatchSummary, OutcomeScore, OutcomeSummary, Report, RunRecord, Summary,
    SynthSummary, Timings, WeightSummary, REPORT_VERSION,
};
