//! Synthetic participants: sensor traces with known ground truth, and a
//! driver that runs the whole engine over a study period on a virtual clock.

mod scenario;
mod study;
mod trace;

use thiserror::Error;

pub use scenario::{Scenario, SleepPlan, Visits};
pub use study::{
    entry_marker, read_trace, replay, run_study, study_profile, study_scenario, study_traces, study_user, write_trace,
    ProviderKind, StudyConfig, StudyOutput, StudyUser,
};
pub use trace::{corrupt_lines, generate, DayTruth, Manifest, Place, SleepTruth, Stay, Trace};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Engine(#[from] crate::service::EngineError),
}
