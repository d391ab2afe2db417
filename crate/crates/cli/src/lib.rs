//! Scenario files, sweeps, randomized verification and text reports on top
//! of `kr_advance`.

pub mod config;
pub mod report;
pub mod sweep;
pub mod verify;

pub use config::{parse_scenario_config, ConfigError, RegimeChoice, ScenarioConfig, SweepRange};
pub use report::{cutoff_text, optimal_text, report_scenario};
pub use sweep::{run_sweep, SweepError, SweepRow, SweepTable};
pub use verify::{run_verification, run_verification_with, Check, VerificationReport, VerifyOptions};
