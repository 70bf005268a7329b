//! Headless engine for multi-distance vision experiments.
//!
//! - [`optics`]: defocus blur from refraction, lens power and viewing
//!   distance, plus the autofocal lens controllers.
//! - [`render`]: per-pixel blur fields over a depth map and a CPU disc blur.
//! - [`experiment`]: protocols, scene ordering, sessions and on-disk layout.
//! - [`gaze`]: gaze samples, CSV recording, replay and device lifecycles.
//! - [`task`]: the Landolt/Sloan matching task and its simulated observer.
//! - [`questionnaire`]: JSON questionnaires and response files.
//! - [`runner`]: unattended runs, previews, validation and the WebSocket
//!   session service.

mod error;
pub mod experiment;
pub mod gaze;
pub mod optics;
pub mod optotype;
pub mod questionnaire;
pub mod render;
pub mod runner;
pub mod task;

pub use error::{Error, Result};
