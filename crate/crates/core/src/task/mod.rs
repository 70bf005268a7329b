//! The multi-distance matching task: does the Landolt ring on one screen
//! share a table column with the Sloan letter on another?

mod block;
mod layout;
mod observer;
mod record;
mod trial;

use thiserror::Error;

pub use block::{
    aggregate, run_block, stimulus_direction, stimulus_screen, trial_script, BlockConfig,
    BlockResult, FocusCondition, GazeModel, PreparedBlock, ScreenSummary, Stimulus, TrialOutcome,
};
pub use layout::{SceneLayout, ScreenSpec, TaskConfig};
pub use observer::{observer_respond, score, ObserverModel, Response, TrialResponse};
pub use record::{
    read_trials, read_trials_file, record_trials, write_trials, TrialRecord, TRIALS_FILE_STEM,
};
pub use trial::{generate_trial, ground_truth, Anchor, ColumnTable, Placement, Trial};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Optics(#[from] crate::optics::OpticsError),
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
    #[error(transparent)]
    Gaze(#[from] crate::gaze::GazeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
