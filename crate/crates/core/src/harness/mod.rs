//! Test-function bank, experiment configuration, studies and reports.

pub mod bank;
pub mod config;
pub mod order;
pub mod report;
pub mod study;

pub use bank::{build_bank, default_bank, BankSpec, TestFunction};
pub use config::{ExperimentConfig, ScaleSpec, StudyKind, Tolerances};
pub use order::measure_order;
pub use report::{emit_reports, Check, StudyReport};
pub use study::{run_all, run_study};
