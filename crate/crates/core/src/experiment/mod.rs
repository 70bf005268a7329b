//! The experiment controller: protocols, scene sequencing, lifecycle events,
//! and per-subject session folders.

mod controller;
mod mask;
mod protocol;
mod registry;
mod session;

use std::path::Path;

use thiserror::Error;

pub use controller::{Command, Controller, EventKind, Phase, SceneEvent};
pub use mask::{DemographicsMask, MaskField, MaskFieldKind};
pub use protocol::{resolve_order, OrderMode, Protocol, SceneEntry};
pub use registry::{
    bind_scene_handlers, missing_scene_ids, BoundExperiment, HandlerError, SceneContext,
    SceneHandler, SceneOutcome, SceneRegistry,
};
pub use session::{
    create_session, create_unique_file, validate_path_component, Session, SESSION_FILE,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Validation(String),
    #[error("protocol references unregistered scenes: {}", .0.join(", "))]
    UnknownScenes(Vec<String>),
    #[error("invalid controller state: {0}")]
    State(String),
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("scene {scene:?} failed: {source}")]
    Scene {
        scene: String,
        #[source]
        source: HandlerError,
    },
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
