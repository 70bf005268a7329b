//! Wire format of the session channel. Every frame is a JSON object
//! `{type, seq, timestamp, payload}`; see `docs/protocol.md`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::experiment::DemographicsMask;
use crate::optics::FocusAlgorithm;
use crate::optotype::{Orientation, SloanLetter};
use crate::questionnaire::{Answer, Questionnaire};
use crate::task::{ColumnTable, Placement, Response, SceneLayout, Trial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<B> {
    /// Strictly increasing per sender.
    pub seq: u64,
    /// Sender clock, seconds.
    pub timestamp: f64,
    #[serde(flatten)]
    pub body: B,
}

pub type ClientMessage = Envelope<ClientBody>;
pub type ServerMessage = Envelope<ServerBody>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ClientCommand {
    Next,
    Previous,
    Restart,
    Repeat,
    Jump { index: usize },
    Finish,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ClientBody {
    SessionStart {
        subject_id: String,
        #[serde(default)]
        demographics: BTreeMap<String, String>,
    },
    Command(ClientCommand),
    /// Pointer position in normalized view coordinates (0..1, origin top
    /// left) and the screen the client drew under it, if any.
    GazeProxy {
        x: f64,
        y: f64,
        #[serde(default)]
        screen: Option<String>,
    },
    TrialResponse {
        trial_id: u64,
        response: Response,
    },
    QuestionnaireAnswers {
        answers: BTreeMap<String, Answer>,
    },
}

impl ClientBody {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientBody::SessionStart { .. } => "session_start",
            ClientBody::Command(_) => "command",
            ClientBody::GazeProxy { .. } => "gaze_proxy",
            ClientBody::TrialResponse { .. } => "trial_response",
            ClientBody::QuestionnaireAnswers { .. } => "questionnaire_answers",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseName {
    Setup,
    Running,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub phase: PhaseName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    /// Position in the presentation order, while running.
    pub position: Option<usize>,
    pub total: usize,
    pub scene_index: Option<usize>,
    pub scene_id: Option<String>,
    pub parameter: Option<String>,
    pub scene_name: Option<String>,
    /// What the scene waits for: "command", "trial_response", or
    /// "questionnaire_answers".
    pub awaiting: Option<String>,
}

/// What the client needs to draw a trial; the answer is left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialView {
    pub id: u64,
    pub table_screen: usize,
    pub landolt_screen: usize,
    pub sloan_screen: usize,
    pub landolt_orientation: Orientation,
    pub sloan_letter: SloanLetter,
    pub table: ColumnTable,
    pub landolt_placement: Placement,
    pub sloan_placement: Placement,
    pub optotype_gap: f64,
}

impl From<&Trial> for TrialView {
    fn from(t: &Trial) -> Self {
        Self {
            id: t.id,
            table_screen: t.table_screen,
            landolt_screen: t.landolt_screen,
            sloan_screen: t.sloan_screen,
            landolt_orientation: t.landolt_orientation,
            sloan_letter: t.sloan_letter,
            table: t.table,
            landolt_placement: t.landolt_placement,
            sloan_placement: t.sloan_placement,
            optotype_gap: t.optotype_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenBlur {
    pub name: String,
    pub distance: f64,
    /// Arcminutes.
    pub major: f64,
    pub minor: f64,
    pub orientation: f64,
    /// Major axis in pixels of the server's view geometry.
    pub major_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum ServerBody {
    SetupMask {
        protocol: String,
        fields: DemographicsMask,
    },
    SceneState(SceneState),
    TrialPresent {
        trial: TrialView,
        index: usize,
        total: usize,
        layout: SceneLayout,
        /// Drawn optotype size, degrees.
        glyph_size: f64,
    },
    QuestionnairePresent {
        questionnaire: Questionnaire,
    },
    AutofocalState {
        /// Diopters.
        lens_power: f64,
        target_vergence: f64,
        /// Meters; null at optical infinity.
        focus_distance: Option<f64>,
        /// Null when the scene holds the lens fixed.
        algorithm: Option<FocusAlgorithm>,
        pupil_mm: f64,
    },
    BlurSummary {
        screens: Vec<ScreenBlur>,
    },
    Error {
        /// Seq of the offending client message, when it could be read.
        seq: Option<u64>,
        message: String,
    },
}

impl ServerBody {
    pub fn kind(&self) -> &'static str {
        match self {
            ServerBody::SetupMask { .. } => "setup_mask",
            ServerBody::SceneState(_) => "scene_state",
            ServerBody::TrialPresent { .. } => "trial_present",
            ServerBody::QuestionnairePresent { .. } => "questionnaire_present",
            ServerBody::AutofocalState { .. } => "autofocal_state",
            ServerBody::BlurSummary { .. } => "blur_summary",
            ServerBody::Error { .. } => "error",
        }
    }
}

/// Best-effort seq of a frame that failed to parse.
pub fn salvage_seq(text: &str) -> Option<u64> {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()?
        .get("seq")?
        .as_u64()
}
