//! Configuration files, sweeps and result aggregation.

pub mod config;
pub mod run;
pub mod summary;
pub mod units;

pub use config::{ConfigError, ExperimentConfig, PolicyKind, SweepPoint};
pub use run::{read_records, run, run_one, tasks, write_rows, write_summaries, ExperimentError, RunReport, RunTask};
pub use summary::{effects, summarize, EffectRow, RunRecord, SummaryRow};
