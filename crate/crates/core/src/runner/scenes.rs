//! Scene handlers for unattended runs: every scene completes on load and
//! the experiment advances on its own.

use std::cell::RefCell;
use std::io::Write;
use std::path::PathBuf;
use std::rc::Rc;

use chrono::Utc;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::experiment::{
    create_unique_file, HandlerError, SceneContext, SceneHandler, SceneOutcome, SceneRegistry,
};
use crate::gaze::{record_gaze, GazeSample, SampleSource};
use crate::optics::AutofocalConfig;
use crate::questionnaire::{load_questionnaire, record_responses, ResponseSet};
use crate::task::{
    record_trials, run_block, BlockConfig, FocusCondition, ScreenSummary, TaskError, TrialRecord,
};

/// Scene ids the headless runner can play.
pub const HEADLESS_SCENES: [&str; 4] = ["main_menu", "baseline", "matching_task", "questionnaire"];

/// Seconds of device gaze recorded on the main menu.
pub const MENU_GAZE_SECONDS: f64 = 1.0;
/// Seconds of device gaze recorded per questionnaire item.
pub const ITEM_GAZE_SECONDS: f64 = 3.0;

/// Focus condition a task scene uses when its parameter does not pick one.
/// `None` for scene ids that are not task scenes.
pub fn task_scene_focus(scene_id: &str) -> Option<FocusCondition> {
    match scene_id {
        "baseline" => Some(FocusCondition::Fixed { power: 0.0 }),
        "matching_task" => Some(FocusCondition::Autofocal(AutofocalConfig::default())),
        _ => None,
    }
}

/// A task scene parameter: empty, or a JSON object of block settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskParameter {
    pub config: BlockConfig,
    /// Seed given explicitly in the parameter.
    pub seed: Option<u64>,
}

pub fn parse_task_parameter(
    parameter: &str,
    default_focus: FocusCondition,
) -> Result<TaskParameter, TaskError> {
    if parameter.trim().is_empty() {
        return Ok(TaskParameter {
            config: BlockConfig {
                focus: default_focus,
                ..BlockConfig::default()
            },
            seed: None,
        });
    }
    let value: Value = serde_json::from_str(parameter)
        .map_err(|e| TaskError::Validation(format!("task parameter is not JSON: {e}")))?;
    let Some(object) = value.as_object() else {
        return Err(TaskError::Validation(
            "task parameter must be a JSON object".into(),
        ));
    };
    let has_focus = object.contains_key("focus");
    let seed = object.get("seed").and_then(Value::as_u64);
    let mut config: BlockConfig = serde_json::from_value(value)
        .map_err(|e| TaskError::Validation(format!("task parameter: {e}")))?;
    if !has_focus {
        config.focus = default_focus;
    }
    Ok(TaskParameter { config, seed })
}

/// Per-scene seed derived from the run seed and the presentation position.
pub fn scene_seed(run_seed: u64, position: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(position as u64);
    rng.next_u64()
}

/// Pulls device samples in scene-sized chunks. The sample that crosses a
/// chunk boundary is kept for the next chunk.
pub struct GazeFeed {
    source: Box<dyn SampleSource>,
    pending: Option<GazeSample>,
}

pub type SharedFeed = Rc<RefCell<GazeFeed>>;

impl GazeFeed {
    pub fn new(source: Box<dyn SampleSource>) -> Self {
        Self {
            source,
            pending: None,
        }
    }

    pub fn shared(source: Box<dyn SampleSource>) -> SharedFeed {
        Rc::new(RefCell::new(Self::new(source)))
    }

    /// Up to `seconds` of samples, timestamps rebased to start at zero.
    /// Shorter if the source runs dry.
    pub fn take(&mut self, seconds: f64) -> Vec<GazeSample> {
        let Some(first) = self.pending.take().or_else(|| self.source.next_sample()) else {
            return Vec::new();
        };
        let t0 = first.timestamp_ns;
        let end = t0 + (seconds * 1e9).round() as u64;
        let mut out = vec![first];
        while let Some(s) = self.source.next_sample() {
            if s.timestamp_ns >= end {
                self.pending = Some(s);
                break;
            }
            out.push(s);
        }
        for s in &mut out {
            s.timestamp_ns -= t0;
        }
        out
    }
}

/// Run-wide settings shared by the headless handlers.
#[derive(Debug, Clone)]
pub struct HeadlessSettings {
    pub seed: u64,
    pub questionnaire_dir: PathBuf,
}

fn write_json(
    ctx: &SceneContext<'_>,
    stem: &str,
    value: &impl Serialize,
) -> Result<PathBuf, HandlerError> {
    let dir = ctx.session.scene_dir(&ctx.scene_name)?;
    let (mut file, path) = create_unique_file(&dir, stem, "json")?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(path)
}

struct MainMenu {
    feed: SharedFeed,
    seed: u64,
}

impl SceneHandler for MainMenu {
    fn on_load(&mut self, ctx: &mut SceneContext<'_>) -> Result<SceneOutcome, HandlerError> {
        let menu = serde_json::json!({
            "subject_id": ctx.session.subject_id,
            "demographics": ctx.session.demographics,
            "protocol": ctx.session.protocol,
            "seed": self.seed,
        });
        write_json(ctx, "menu", &menu)?;
        let gaze = self.feed.borrow_mut().take(MENU_GAZE_SECONDS);
        record_gaze(gaze, ctx.session, &ctx.scene_name)?;
        Ok(SceneOutcome::Completed { auto_advance: true })
    }
}

#[derive(Serialize)]
struct TaskSummary<'a> {
    scene: &'a str,
    scene_id: &'a str,
    seed: u64,
    n_trials: usize,
    proportion_correct: f64,
    mean_response_time: f64,
    focus: &'a FocusCondition,
    screens: &'a [ScreenSummary],
}

struct TaskScene {
    default_focus: FocusCondition,
    seed: u64,
}

impl SceneHandler for TaskScene {
    fn on_load(&mut self, ctx: &mut SceneContext<'_>) -> Result<SceneOutcome, HandlerError> {
        let TaskParameter { mut config, seed } =
            parse_task_parameter(ctx.parameter, self.default_focus)?;
        config.seed = seed.unwrap_or_else(|| scene_seed(self.seed, ctx.position));
        config.record_gaze = true;
        let result = run_block(&config)?;

        let records: Vec<TrialRecord> = result
            .outcomes
            .iter()
            .map(|o| TrialRecord::new(&config.layout, &o.trial, &o.response))
            .collect();
        record_trials(&records, ctx.session, &ctx.scene_name)?;
        record_gaze(
            result.concatenated_gaze(config.gaze.sample_rate),
            ctx.session,
            &ctx.scene_name,
        )?;
        let summary = TaskSummary {
            scene: &ctx.scene_name,
            scene_id: ctx.scene_id,
            seed: config.seed,
            n_trials: result.n_trials,
            proportion_correct: result.proportion_correct,
            mean_response_time: result.mean_response_time,
            focus: &config.focus,
            screens: &result.screens,
        };
        write_json(ctx, "summary", &summary)?;
        log::info!(
            "{}: {} trials, {:.3} correct",
            ctx.scene_name,
            result.n_trials,
            result.proportion_correct
        );
        Ok(SceneOutcome::Completed { auto_advance: true })
    }
}

struct QuestionnaireScene {
    feed: SharedFeed,
    settings: HeadlessSettings,
}

impl SceneHandler for QuestionnaireScene {
    fn on_load(&mut self, ctx: &mut SceneContext<'_>) -> Result<SceneOutcome, HandlerError> {
        let q = load_questionnaire(ctx.parameter, &self.settings.questionnaire_dir)?;
        let mut rng = ChaCha8Rng::seed_from_u64(scene_seed(self.settings.seed, ctx.position));
        let responses = ResponseSet {
            questionnaire: q.abbreviation.clone(),
            scene_name: ctx.scene_name.clone(),
            answers: q.auto_answers(&mut rng),
            completed_at: Utc::now(),
        };
        record_responses(&responses, &q, ctx.session)?;
        let gaze = self
            .feed
            .borrow_mut()
            .take(ITEM_GAZE_SECONDS * q.items.len() as f64);
        record_gaze(gaze, ctx.session, &ctx.scene_name)?;
        Ok(SceneOutcome::Completed { auto_advance: true })
    }
}

/// Registry with a handler for every id in [`HEADLESS_SCENES`].
pub fn headless_registry(feed: SharedFeed, settings: HeadlessSettings) -> SceneRegistry {
    let mut registry = SceneRegistry::new();
    registry.register(
        "main_menu",
        MainMenu {
            feed: feed.clone(),
            seed: settings.seed,
        },
    );
    for id in ["baseline", "matching_task"] {
        registry.register(
            id,
            TaskScene {
                default_focus: task_scene_focus(id).expect("task scene"),
                seed: settings.seed,
            },
        );
    }
    registry.register("questionnaire", QuestionnaireScene { feed, settings });
    registry
}
