use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenes::{parse_task_parameter, task_scene_focus, HEADLESS_SCENES};
use crate::experiment::{missing_scene_ids, Protocol};
use crate::gaze::DeviceRegistry;
use crate::questionnaire::{load_questionnaire, QuestionnaireError};

/// One finding about a protocol or its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
}

impl Diagnostic {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
            path: None,
            scene: None,
        }
    }

    fn at(mut self, path: &Path) -> Self {
        self.path = Some(path.to_path_buf());
        self
    }

    fn in_scene(mut self, scene: String) -> Self {
        self.scene = Some(scene);
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(scene) = &self.scene {
            write!(f, "[{scene}] ")?;
        }
        write!(f, "{}", self.message)?;
        if let Some(path) = &self.path {
            write!(f, " ({})", path.display())?;
        }
        Ok(())
    }
}

/// Default questionnaire folder: `questionnaires/` next to the protocol.
pub fn default_questionnaire_dir(protocol_path: &Path) -> PathBuf {
    protocol_path
        .parent()
        .unwrap_or(Path::new("."))
        .join("questionnaires")
}

/// Checks everything a headless run needs before any file is written.
/// Returns the protocol when it at least parsed.
pub fn validate_protocol(
    protocol_path: &Path,
    questionnaire_dir: Option<&Path>,
    devices: Option<&Path>,
) -> (Option<Protocol>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let protocol = match Protocol::load(protocol_path) {
        Ok(p) => p,
        Err(e) => {
            diags.push(Diagnostic::new("protocol", e.to_string()).at(protocol_path));
            return (None, diags);
        }
    };

    for id in missing_scene_ids(&protocol, |id| HEADLESS_SCENES.contains(&id)) {
        diags.push(Diagnostic::new(
            "unknown_scene",
            format!(
                "no scene handler for {id:?}; known: {}",
                HEADLESS_SCENES.join(", ")
            ),
        ));
    }

    let qdir = questionnaire_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_questionnaire_dir(protocol_path));
    for (i, entry) in protocol.scenes.iter().enumerate() {
        let scene = protocol.scene_name(i);
        if entry.scene_id == "questionnaire" {
            match load_questionnaire(&entry.parameter, &qdir) {
                Ok(_) => {}
                Err(QuestionnaireError::NotFound { path }) => diags.push(
                    Diagnostic::new(
                        "questionnaire_not_found",
                        format!("questionnaire {:?} not found", entry.parameter),
                    )
                    .at(&path)
                    .in_scene(scene),
                ),
                Err(e) => diags
                    .push(Diagnostic::new("questionnaire_invalid", e.to_string()).in_scene(scene)),
            }
        } else if let Some(focus) = task_scene_focus(&entry.scene_id) {
            if let Err(e) =
                parse_task_parameter(&entry.parameter, focus).and_then(|p| p.config.validate())
            {
                diags.push(Diagnostic::new("task_parameter", e.to_string()).in_scene(scene));
            }
        }
    }

    if let Err(e) = DeviceRegistry::discover(devices) {
        let mut d = Diagnostic::new("devices", e.to_string());
        if let Some(p) = devices {
            d = d.at(p);
        }
        diags.push(d);
    }
    (Some(protocol), diags)
}
