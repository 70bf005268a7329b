//! Participant-facing session logic behind the WebSocket channel. The
//! service is transport-free: feed it text frames and clock ticks, and it
//! returns the frames to send back.

use std::path::{Path, PathBuf};

use chrono::Utc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::messages::{
    salvage_seq, ClientBody, ClientCommand, ClientMessage, PhaseName, SceneState, ScreenBlur,
    ServerBody, ServerMessage, TrialView,
};
use super::scenes::{
    parse_task_parameter, scene_seed, task_scene_focus, TaskParameter, HEADLESS_SCENES,
};
use super::validate::{default_questionnaire_dir, validate_protocol};
use crate::error::{Error, Result};
use crate::experiment::{
    create_session, Command, Controller, DemographicsMask, EventKind, Phase, Protocol, SceneEvent,
    Session,
};
use crate::gaze::{direction_from_angles, record_gaze, EyeSample, GazeSample};
use crate::optics::{
    autofocal_update, blur_ellipse, gaze_target_vergence, BlurEllipse, FocusState,
};
use crate::questionnaire::{load_questionnaire, record_responses, Questionnaire, ResponseSet};
use crate::render::{pixel_pitch, render_office_scene, view_angles, DepthMap};
use crate::task::{
    generate_trial, record_trials, score, BlockConfig, FocusCondition, Trial, TrialRecord,
};

/// Everything a service needs before the first client connects.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub protocol: Protocol,
    pub mask: DemographicsMask,
    pub data_root: PathBuf,
    pub questionnaire_dir: PathBuf,
}

impl ServiceConfig {
    /// Loads and validates a protocol file. The mask defaults to an empty
    /// one and questionnaires to `questionnaires/` next to the protocol.
    pub fn load(
        protocol_path: &Path,
        mask: Option<&Path>,
        data_root: PathBuf,
        questionnaire_dir: Option<PathBuf>,
    ) -> Result<Self> {
        let (protocol, diags) =
            validate_protocol(protocol_path, questionnaire_dir.as_deref(), None);
        if !diags.is_empty() {
            return Err(Error::Invalid(diags));
        }
        Ok(Self {
            protocol: protocol.expect("validated"),
            mask: match mask {
                Some(p) => DemographicsMask::load(p)?,
                None => DemographicsMask::default(),
            },
            data_root,
            questionnaire_dir: questionnaire_dir
                .unwrap_or_else(|| default_questionnaire_dir(protocol_path)),
        })
    }
}

struct TaskRun {
    config: BlockConfig,
    /// Office depth as the client is assumed to draw it.
    depth: DepthMap,
    pitch: f64,
    trial: Trial,
    /// Client time of the frame that led to the current presentation.
    presented_at: f64,
    records: Vec<TrialRecord>,
    gaze: Vec<GazeSample>,
    focus: FocusState,
    target: f64,
}

impl TaskRun {
    fn lens_power(&self) -> f64 {
        match self.config.focus {
            FocusCondition::Fixed { power } => power,
            _ => self.focus.lens_power,
        }
    }

    fn screen_blur(&self) -> Result<Vec<ScreenBlur>> {
        let c = &self.config;
        let lens = self.lens_power();
        c.layout
            .screens
            .iter()
            .map(|s| {
                let blur = match c.focus {
                    FocusCondition::UniformBlur { arcmin } => BlurEllipse::circular(arcmin),
                    _ => blur_ellipse(&c.refraction, lens, s.vergence(), c.pupil_mm)?,
                };
                Ok(ScreenBlur {
                    name: s.name.clone(),
                    distance: s.distance,
                    major: blur.major,
                    minor: blur.minor,
                    orientation: blur.orientation,
                    major_px: blur.major / self.pitch,
                })
            })
            .collect()
    }
}

enum ActiveScene {
    None,
    Menu,
    Task(Box<TaskRun>),
    Questionnaire(Questionnaire),
}

impl ActiveScene {
    fn awaiting(&self) -> &'static str {
        match self {
            ActiveScene::None | ActiveScene::Menu => "command",
            ActiveScene::Task(_) => "trial_response",
            ActiveScene::Questionnaire(_) => "questionnaire_answers",
        }
    }
}

/// One participant session driven by client frames.
pub struct SessionService {
    config: ServiceConfig,
    controller: Controller,
    session: Option<Session>,
    scene: ActiveScene,
    out_seq: u64,
    last_client_seq: Option<u64>,
    clock: f64,
    /// Timestamp of the client frame being handled.
    client_time: f64,
}

/// Trial `id` of a block, drawn from the same stream the simulator uses.
fn trial_for(config: &BlockConfig, id: u64) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2 * id);
    Ok(generate_trial(&mut rng, id, &config.layout, &config.task)?)
}

fn to_command(c: ClientCommand) -> Command {
    match c {
        ClientCommand::Next => Command::Next,
        ClientCommand::Previous => Command::Previous,
        ClientCommand::Restart => Command::RestartScene,
        ClientCommand::Repeat => Command::RepeatScene,
        ClientCommand::Jump { index } => Command::Jump(index),
        ClientCommand::Finish => Command::Finish,
    }
}

impl SessionService {
    pub fn new(config: ServiceConfig) -> Result<Self> {
        let missing = crate::experiment::missing_scene_ids(&config.protocol, |id| {
            HEADLESS_SCENES.contains(&id)
        });
        if !missing.is_empty() {
            return Err(crate::experiment::ExperimentError::UnknownScenes(
                missing.into_iter().map(str::to_string).collect(),
            )
            .into());
        }
        Ok(Self {
            controller: Controller::new(config.protocol.clone())?,
            config,
            session: None,
            scene: ActiveScene::None,
            out_seq: 0,
            last_client_seq: None,
            clock: 0.0,
            client_time: 0.0,
        })
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    pub fn phase(&self) -> Phase {
        self.controller.phase()
    }

    /// Seconds of server time accumulated through [`tick`](Self::tick).
    pub fn clock(&self) -> f64 {
        self.clock
    }

    fn emit(&mut self, body: ServerBody) -> ServerMessage {
        self.out_seq += 1;
        ServerMessage {
            seq: self.out_seq,
            timestamp: self.clock,
            body,
        }
    }

    fn error(&mut self, seq: Option<u64>, message: impl Into<String>) -> ServerMessage {
        self.emit(ServerBody::Error {
            seq,
            message: message.into(),
        })
    }

    /// Frames for a newly connected client: the demographics mask, the
    /// current scene state, and whatever the scene is presenting.
    pub fn hello(&mut self) -> Vec<ServerMessage> {
        let mask = ServerBody::SetupMask {
            protocol: self.config.protocol.name.clone(),
            fields: self.config.mask.clone(),
        };
        let mut out = vec![self.emit(mask)];
        out.push(self.scene_state());
        out.extend(self.presentation());
        out
    }

    fn scene_state(&mut self) -> ServerMessage {
        let phase = match self.controller.phase() {
            Phase::Ready => PhaseName::Setup,
            Phase::Running => PhaseName::Running,
            Phase::Finished => PhaseName::Finished,
        };
        let protocol = self.controller.protocol();
        let current = self.controller.current().map(|(pos, idx, entry)| {
            (
                pos,
                idx,
                entry.scene_id.clone(),
                entry.parameter.clone(),
                protocol.scene_name(idx),
            )
        });
        let awaiting = match phase {
            PhaseName::Setup => Some("session_start".to_string()),
            PhaseName::Running => Some(self.scene.awaiting().to_string()),
            PhaseName::Finished => None,
        };
        let state = SceneState {
            phase,
            subject_id: self.session.as_ref().map(|s| s.subject_id.clone()),
            position: current.as_ref().map(|c| c.0),
            total: self.controller.order().len(),
            scene_index: current.as_ref().map(|c| c.1),
            scene_id: current.as_ref().map(|c| c.2.clone()),
            parameter: current.as_ref().map(|c| c.3.clone()),
            scene_name: current.map(|c| c.4),
            awaiting,
        };
        self.emit(ServerBody::SceneState(state))
    }

    fn presentation(&mut self) -> Vec<ServerMessage> {
        let body = match &self.scene {
            ActiveScene::Task(run) => ServerBody::TrialPresent {
                trial: TrialView::from(&run.trial),
                index: run.records.len(),
                total: run.config.n_trials,
                layout: run.config.layout.clone(),
                glyph_size: run.config.task.glyph_size(),
            },
            ActiveScene::Questionnaire(q) => ServerBody::QuestionnairePresent {
                questionnaire: q.clone(),
            },
            _ => return Vec::new(),
        };
        vec![self.emit(body)]
    }

    /// Handles one client text frame.
    pub fn handle(&mut self, text: &str) -> Vec<ServerMessage> {
        let msg: ClientMessage = match serde_json::from_str(text) {
            Ok(m) => m,
            Err(e) => return vec![self.error(salvage_seq(text), format!("malformed message: {e}"))],
        };
        if self.last_client_seq.is_some_and(|last| msg.seq <= last) {
            log::debug!("dropping stale frame seq {}", msg.seq);
            return Vec::new();
        }
        self.last_client_seq = Some(msg.seq);
        self.client_time = msg.timestamp;
        let seq = msg.seq;
        match self.dispatch(msg) {
            Ok(out) => out,
            Err(e) => vec![self.error(Some(seq), e.to_string())],
        }
    }

    fn dispatch(&mut self, msg: ClientMessage) -> Result<Vec<ServerMessage>> {
        let kind = msg.body.kind();
        let out_of_phase = |what: &str| {
            Error::Experiment(crate::experiment::ExperimentError::State(format!(
                "{kind} is not accepted {what}"
            )))
        };
        match msg.body {
            ClientBody::SessionStart {
                subject_id,
                demographics,
            } => {
                if self.controller.phase() != Phase::Ready {
                    return Err(out_of_phase("after the session started"));
                }
                self.config.mask.validate(&demographics)?;
                let mut session =
                    create_session(&subject_id, demographics, &self.config.data_root)?;
                session.bind_protocol(&self.config.protocol.name)?;
                self.session = Some(session);
                let events = self.controller.step(Command::Start)?;
                self.apply(events)
            }
            ClientBody::Command(c) => {
                if self.controller.phase() != Phase::Running {
                    return Err(out_of_phase("outside a running session"));
                }
                let command = to_command(c);
                let events = self.controller.step(command)?;
                let mut out = self.apply(events)?;
                if command == Command::RepeatScene {
                    out.push(self.scene_state());
                }
                Ok(out)
            }
            ClientBody::GazeProxy { x, y, screen } => {
                if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                    return Err(Error::Invalid(vec![super::Diagnostic::new(
                        "gaze_proxy",
                        format!("gaze proxy ({x}, {y}) outside the unit square"),
                    )]));
                }
                let ActiveScene::Task(run) = &mut self.scene else {
                    return Ok(Vec::new());
                };
                proxy_gaze(run, x, y, screen.as_deref(), msg.timestamp)?;
                Ok(Vec::new())
            }
            ClientBody::TrialResponse { trial_id, response } => {
                let ActiveScene::Task(run) = &mut self.scene else {
                    return Err(out_of_phase("outside a task scene"));
                };
                if trial_id != run.trial.id {
                    return Err(Error::Invalid(vec![super::Diagnostic::new(
                        "trial_response",
                        format!(
                            "response for trial {trial_id}, but trial {} is presented",
                            run.trial.id
                        ),
                    )]));
                }
                let rt = (msg.timestamp - run.presented_at).max(0.0);
                let scored = score(&run.trial, response, rt);
                run.records
                    .push(TrialRecord::new(&run.config.layout, &run.trial, &scored));
                if run.records.len() < run.config.n_trials {
                    run.trial = trial_for(&run.config, run.records.len() as u64)?;
                    run.presented_at = msg.timestamp;
                    Ok(self.presentation())
                } else {
                    let events = self.controller.step(Command::Next)?;
                    self.apply(events)
                }
            }
            ClientBody::QuestionnaireAnswers { answers } => {
                let ActiveScene::Questionnaire(q) = &self.scene else {
                    return Err(out_of_phase("outside a questionnaire scene"));
                };
                q.check_answers(&answers)?;
                let (_, idx, _) = self.controller.current().expect("running");
                let responses = ResponseSet {
                    questionnaire: q.abbreviation.clone(),
                    scene_name: self.controller.protocol().scene_name(idx),
                    answers,
                    completed_at: Utc::now(),
                };
                record_responses(
                    &responses,
                    q,
                    self.session.as_ref().expect("session started"),
                )?;
                let events = self.controller.step(Command::Next)?;
                self.apply(events)
            }
        }
    }

    fn apply(&mut self, events: Vec<SceneEvent>) -> Result<Vec<ServerMessage>> {
        let mut out = Vec::new();
        for event in events {
            match event.kind {
                EventKind::SceneUnloaded => self.unload(&event)?,
                EventKind::SceneLoaded => {
                    self.load(&event)?;
                    out.push(self.scene_state());
                    out.extend(self.presentation());
                    if matches!(self.scene, ActiveScene::Task(_)) {
                        out.extend(self.focus_frames()?);
                    }
                }
                EventKind::ExperimentFinished => out.push(self.scene_state()),
                EventKind::ExperimentStarted => {}
            }
        }
        Ok(out)
    }

    fn scene_name(&self, event: &SceneEvent) -> String {
        self.controller.protocol().scene_name(event.scene_index)
    }

    fn load(&mut self, event: &SceneEvent) -> Result<()> {
        self.scene = if let Some(focus) = task_scene_focus(&event.scene_id) {
            let TaskParameter { mut config, seed } = parse_task_parameter(&event.parameter, focus)?;
            config.validate()?;
            config.seed =
                seed.unwrap_or_else(|| scene_seed(self.config.protocol.seed, event.position));
            let depth = render_office_scene(&config.layout, &config.geometry).1;
            let focus = FocusState::new(config.initial_lens_power, config.pupil_mm)?;
            ActiveScene::Task(Box::new(TaskRun {
                pitch: pixel_pitch(&config.geometry),
                trial: trial_for(&config, 0)?,
                presented_at: self.client_time,
                records: Vec::new(),
                gaze: Vec::new(),
                target: focus.lens_power,
                focus,
                depth,
                config,
            }))
        } else if event.scene_id == "questionnaire" {
            ActiveScene::Questionnaire(load_questionnaire(
                &event.parameter,
                &self.config.questionnaire_dir,
            )?)
        } else {
            ActiveScene::Menu
        };
        Ok(())
    }

    /// Persists what a task scene collected, even if it ended early.
    fn unload(&mut self, event: &SceneEvent) -> Result<()> {
        let scene = std::mem::replace(&mut self.scene, ActiveScene::None);
        if let ActiveScene::Task(run) = scene {
            let name = self.scene_name(event);
            let session = self.session.as_ref().expect("session started");
            record_trials(&run.records, session, &name)?;
            record_gaze(run.gaze, session, &name)?;
        }
        Ok(())
    }

    fn focus_frames(&mut self) -> Result<Vec<ServerMessage>> {
        let ActiveScene::Task(run) = &self.scene else {
            return Ok(Vec::new());
        };
        let algorithm = match run.config.focus {
            FocusCondition::Autofocal(af) => Some(af.algorithm),
            _ => None,
        };
        let lens_power = run.lens_power();
        let state = ServerBody::AutofocalState {
            lens_power,
            target_vergence: run.target,
            focus_distance: (lens_power > 0.0).then(|| 1.0 / lens_power),
            algorithm,
            pupil_mm: run.config.pupil_mm,
        };
        let blur = ServerBody::BlurSummary {
            screens: run.screen_blur()?,
        };
        Ok(vec![self.emit(state), self.emit(blur)])
    }

    /// Advances server time by `dt` seconds. While a task scene runs, the
    /// lens steps toward the gaze target and the new focus and blur are
    /// returned.
    pub fn tick(&mut self, dt: f64) -> Result<Vec<ServerMessage>> {
        if !(dt > 0.0) {
            return Ok(Vec::new());
        }
        self.clock += dt;
        let ActiveScene::Task(run) = &mut self.scene else {
            return Ok(Vec::new());
        };
        if let FocusCondition::Autofocal(af) = run.config.focus {
            run.focus = autofocal_update(&af, run.focus, run.target, dt)?;
        }
        self.focus_frames()
    }
}

fn proxy_gaze(
    run: &mut TaskRun,
    x: f64,
    y: f64,
    screen: Option<&str>,
    timestamp: f64,
) -> Result<()> {
    let g = &run.config.geometry;
    let px = (x * g.image_width as f64 - 0.5).clamp(0.0, g.image_width as f64 - 1.0);
    let py = (y * g.image_height as f64 - 0.5).clamp(0.0, g.image_height as f64 - 1.0);
    let known = screen.and_then(|name| run.config.layout.screen_index(name));
    let target = match (known, &run.config.focus) {
        (Some(i), _) => Some(run.config.layout.screens[i].vergence()),
        (None, FocusCondition::Autofocal(af)) => {
            gaze_target_vergence(&run.depth, (px, py), af, run.pitch)?
        }
        (None, _) => None,
    };
    if let Some(v) = target {
        run.target = v;
    }

    let (az, el) = view_angles(g, px, py);
    let timestamp_ns = (timestamp.max(0.0) * 1e9).round() as u64;
    if run
        .gaze
        .last()
        .is_some_and(|s| timestamp_ns <= s.timestamp_ns)
    {
        return Ok(());
    }
    let dir = direction_from_angles(az, el);
    let pupil = run.config.pupil_mm;
    run.gaze.push(GazeSample {
        timestamp_ns,
        combined: EyeSample::toward([0.0; 3], dir, pupil),
        vendor_extras: screen.unwrap_or_default().to_string(),
        ..Default::default()
    });
    Ok(())
}

/// Feeds recorded client frames through a fresh service, ticking by the
/// client clock between frames. Returns the service and every frame it sent.
pub fn replay_trace(
    config: ServiceConfig,
    frames: &[String],
) -> Result<(SessionService, Vec<ServerMessage>)> {
    let mut service = SessionService::new(config)?;
    let mut out = service.hello();
    let mut last: Option<f64> = None;
    for frame in frames {
        let ts = serde_json::from_str::<serde_json::Value>(frame)
            .ok()
            .and_then(|v| v.get("timestamp").and_then(serde_json::Value::as_f64));
        if let Some(ts) = ts {
            match last {
                Some(prev) if ts > prev => {
                    out.extend(service.tick(ts - prev)?);
                    last = Some(ts);
                }
                None => last = Some(ts),
                _ => {}
            }
        }
        out.extend(service.handle(frame));
    }
    Ok((service, out))
}
