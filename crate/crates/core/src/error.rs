use thiserror::Error;

use crate::narx::TrainingReport;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid task spec: {0}")]
    InvalidSpec(String),

    #[error("invalid joint parameters: {0}")]
    InvalidJoint(String),

    #[error("incompatible trajectories: {0}")]
    IncompatibleTrajectory(String),

    #[error("integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("analytic response requires an underdamped joint (B^2 < 4JK), got B^2 - 4JK = {discriminant}")]
    UnsupportedRegime { discriminant: f64 },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid lesion: {0}")]
    InvalidLesion(String),

    #[error("network output diverged at step {step}")]
    NetworkDivergence { step: usize },

    #[error("training stalled after {} epochs: Gauss-Newton system singular at maximum damping", report.epochs_run)]
    TrainingStalled { report: Box<TrainingReport> },

    #[error("invalid controller config: {0}")]
    InvalidController(String),

    #[error("invalid controller state: {0}")]
    InvalidState(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("seed {seed}, trial {trial}: {source}")]
    Trial {
        seed: u64,
        trial: usize,
        #[source]
        source: Box<SimError>,
    },
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
