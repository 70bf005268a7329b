use thiserror::Error;

use crate::runner::Diagnostic;

/// Any failure surfaced by the runner or the command line.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Optics(#[from] crate::optics::OpticsError),
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
    #[error(transparent)]
    Experiment(#[from] crate::experiment::ExperimentError),
    #[error(transparent)]
    Gaze(#[from] crate::gaze::GazeError),
    #[error(transparent)]
    Task(#[from] crate::task::TaskError),
    #[error(transparent)]
    Questionnaire(#[from] crate::questionnaire::QuestionnaireError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("websocket: {0}")]
    WebSocket(String),
}

impl Error {
    /// Stable machine-readable category.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Optics(_) => "optics",
            Error::Render(_) => "render",
            Error::Experiment(_) => "experiment",
            Error::Gaze(_) => "gaze",
            Error::Task(_) => "task",
            Error::Questionnaire(_) => "questionnaire",
            Error::Io(_) => "io",
            Error::Invalid(_) => "invalid",
            Error::WebSocket(_) => "websocket",
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            Error::Invalid(d) => d.clone(),
            other => vec![Diagnostic::new(other.code(), other.to_string())],
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
