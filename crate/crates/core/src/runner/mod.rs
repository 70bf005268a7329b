//! Running protocols: unattended runs, offline previews, validation, and
//! the participant session served over WebSocket.

pub mod messages;
mod preview;
mod run;
mod scenes;
mod server;
mod service;
mod validate;

pub use messages::{ClientBody, ClientCommand, ClientMessage, ServerBody, ServerMessage};
pub use preview::{preview, PreviewOptions, PreviewReport};
pub use run::{default_data_root, list_dirs, run_protocol, RunOptions, RunSummary, DATA_ENV};
pub use scenes::{
    headless_registry, parse_task_parameter, scene_seed, task_scene_focus, GazeFeed,
    HeadlessSettings, SharedFeed, TaskParameter, HEADLESS_SCENES, ITEM_GAZE_SECONDS,
    MENU_GAZE_SECONDS,
};
pub use server::{Server, TICK};
pub use service::{replay_trace, ServiceConfig, SessionService};
pub use validate::{default_questionnaire_dir, validate_protocol, Diagnostic};
