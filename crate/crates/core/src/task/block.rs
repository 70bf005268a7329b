use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    generate_trial, observer_respond, ObserverModel, SceneLayout, TaskConfig, TaskError, Trial,
    TrialResponse,
};
use crate::gaze::{simulated_gaze, FixationScript, FixationTarget, GazeSample, Segment};
use crate::optics::{
    autofocal_update, blur_ellipse, gaze_target_vergence, AutofocalConfig, BlurEllipse, FocusState,
    RefractionProfile,
};
use crate::render::{pixel_pitch, render_office_scene, view_pixel, DepthMap, ViewGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stimulus {
    Landolt,
    Sloan,
    Table,
}

/// How the simulated subject looks around during a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GazeModel {
    /// Hz; also the autofocal update rate.
    pub sample_rate: f64,
    /// Seconds per fixation.
    pub dwell: f64,
    /// Seconds per saccade.
    pub saccade: f64,
    /// Degrees per axis.
    pub noise_sigma: f64,
    /// Extra Landolt-then-table look-backs after the first pass.
    pub rechecks: usize,
}

impl Default for GazeModel {
    fn default() -> Self {
        Self {
            sample_rate: 90.0,
            dwell: 0.5,
            saccade: 0.05,
            noise_sigma: 0.2,
            rechecks: 1,
        }
    }
}

impl GazeModel {
    pub fn visit_plan(&self) -> Vec<Stimulus> {
        let mut plan = vec![Stimulus::Landolt, Stimulus::Sloan, Stimulus::Table];
        for _ in 0..self.rechecks {
            plan.extend([Stimulus::Landolt, Stimulus::Table]);
        }
        plan
    }

    /// Total viewing time of one trial, which is also its response time.
    pub fn trial_duration(&self) -> f64 {
        let visits = self.visit_plan().len() as f64;
        visits * self.dwell + (visits - 1.0) * self.saccade
    }
}

/// View direction (azimuth, elevation) of a stimulus center, degrees.
pub fn stimulus_direction(layout: &SceneLayout, trial: &Trial, stimulus: Stimulus) -> (f64, f64) {
    let (screen, offset) = match stimulus {
        Stimulus::Landolt => (trial.landolt_screen, trial.landolt_placement.offset),
        Stimulus::Sloan => (trial.sloan_screen, trial.sloan_placement.offset),
        Stimulus::Table => (trial.table_screen, [0.0, 0.0]),
    };
    let s = &layout.screens[screen];
    (s.lateral_offset + offset[0], s.elevation + offset[1])
}

pub fn stimulus_screen(trial: &Trial, stimulus: Stimulus) -> usize {
    match stimulus {
        Stimulus::Landolt => trial.landolt_screen,
        Stimulus::Sloan => trial.sloan_screen,
        Stimulus::Table => trial.table_screen,
    }
}

/// The fixation script the simulated subject follows for `trial`.
pub fn trial_script(
    layout: &SceneLayout,
    trial: &Trial,
    gaze: &GazeModel,
    pupil_mm: f64,
) -> FixationScript {
    let targets = gaze
        .visit_plan()
        .into_iter()
        .map(|stim| {
            let (az, el) = stimulus_direction(layout, trial, stim);
            let d = layout.screens[stimulus_screen(trial, stim)].distance;
            FixationTarget {
                position: [d * az.to_radians().tan(), d * el.to_radians().tan(), d],
                dwell: gaze.dwell,
            }
        })
        .collect();
    FixationScript {
        targets,
        saccade_duration: gaze.saccade,
        noise_sigma: gaze.noise_sigma,
        sample_rate: gaze.sample_rate,
        pupil_mm,
    }
}

/// What sets the lens power (or the blur directly) during a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FocusCondition {
    /// Gaze-driven tunable lens.
    Autofocal(AutofocalConfig),
    /// Lens held at `power` diopters.
    Fixed { power: f64 },
    /// Every screen gets the same circular blur of `arcmin`, bypassing optics.
    UniformBlur { arcmin: f64 },
}

impl Default for FocusCondition {
    fn default() -> Self {
        FocusCondition::Autofocal(AutofocalConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockConfig {
    #[serde(rename = "trials")]
    pub n_trials: usize,
    pub layout: SceneLayout,
    pub task: TaskConfig,
    pub refraction: RefractionProfile,
    pub pupil_mm: f64,
    pub focus: FocusCondition,
    pub observer: ObserverModel,
    pub gaze: GazeModel,
    pub geometry: ViewGeometry,
    /// Lens power at the start of every trial.
    pub initial_lens_power: f64,
    pub seed: u64,
    /// Keep each trial's simulated gaze stream in the result.
    pub record_gaze: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            n_trials: 100,
            layout: SceneLayout::default(),
            task: TaskConfig::default(),
            refraction: RefractionProfile::default(),
            pupil_mm: 4.0,
            focus: FocusCondition::default(),
            observer: ObserverModel::default(),
            gaze: GazeModel::default(),
            geometry: ViewGeometry::default(),
            initial_lens_power: 0.0,
            seed: 0,
            record_gaze: false,
        }
    }
}

impl BlockConfig {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.n_trials == 0 {
            return Err(TaskError::Validation("n_trials must be >= 1".into()));
        }
        self.layout.validate()?;
        self.task.validate()?;
        self.refraction.validate()?;
        self.observer.validate()?;
        self.geometry.validate()?;
        FocusState::new(self.initial_lens_power, self.pupil_mm)?;
        match self.focus {
            FocusCondition::Autofocal(c) => c.validate()?,
            FocusCondition::Fixed { power } if !power.is_finite() => {
                return Err(TaskError::Validation(
                    "fixed lens power must be finite".into(),
                ))
            }
            FocusCondition::UniformBlur { arcmin } if !(arcmin >= 0.0) => {
                return Err(TaskError::Validation("uniform blur must be >= 0".into()))
            }
            _ => {}
        }
        let g = &self.gaze;
        if !(g.sample_rate > 0.0 && g.dwell > 0.0 && g.saccade >= 0.0 && g.noise_sigma >= 0.0) {
            return Err(TaskError::Validation(
                "gaze model needs sample_rate > 0, dwell > 0, saccade >= 0, noise >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Everything one simulated trial produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: Trial,
    pub response: TrialResponse,
    /// Blur on each screen when its stimulus was last read, layout order.
    pub read_blur: Vec<BlurEllipse>,
    /// Empty unless the block records gaze.
    pub gaze: Vec<GazeSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenSummary {
    pub name: String,
    pub distance: f64,
    /// Trials whose table was on this screen.
    pub table_trials: usize,
    pub table_correct: usize,
    pub proportion_correct: f64,
    /// Mean blur major axis at read time, arcminutes.
    pub mean_read_blur: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockResult {
    pub n_trials: usize,
    pub proportion_correct: f64,
    pub mean_response_time: f64,
    pub screens: Vec<ScreenSummary>,
    /// Sorted by trial id.
    pub outcomes: Vec<TrialOutcome>,
}

impl BlockResult {
    /// Gaze of all trials as one stream, each trial continuing one sample
    /// interval after the previous one ended.
    pub fn concatenated_gaze(&self, sample_rate: f64) -> Vec<GazeSample> {
        let step = (1e9 / sample_rate).round() as u64;
        let mut out: Vec<GazeSample> = Vec::new();
        let mut offset = 0u64;
        for o in &self.outcomes {
            for s in &o.gaze {
                let mut s = s.clone();
                s.timestamp_ns += offset;
                out.push(s);
            }
            if let Some(last) = out.last() {
                offset = last.timestamp_ns + step;
            }
        }
        out
    }
}

/// A validated block with its scene depth prepared, ready to simulate
/// trials independently.
pub struct PreparedBlock {
    config: BlockConfig,
    depth: Option<DepthMap>,
    pitch: f64,
}

impl PreparedBlock {
    pub fn new(config: BlockConfig) -> Result<Self, TaskError> {
        config.validate()?;
        let depth = matches!(config.focus, FocusCondition::Autofocal(_))
            .then(|| render_office_scene(&config.layout, &config.geometry).1);
        let pitch = pixel_pitch(&config.geometry);
        Ok(Self {
            config,
            depth,
            pitch,
        })
    }

    pub fn config(&self) -> &BlockConfig {
        &self.config
    }

    fn rngs(&self, id: u64) -> (ChaCha8Rng, ChaCha8Rng) {
        let mut trial = ChaCha8Rng::seed_from_u64(self.config.seed);
        trial.set_stream(2 * id);
        let mut gaze = ChaCha8Rng::seed_from_u64(self.config.seed);
        gaze.set_stream(2 * id + 1);
        (trial, gaze)
    }

    /// Simulates trial `id`. Depends only on the config and `id`.
    pub fn simulate_trial(&self, id: u64) -> Result<TrialOutcome, TaskError> {
        let c = &self.config;
        let (mut rng, mut gaze_rng) = self.rngs(id);
        let trial = generate_trial(&mut rng, id, &c.layout, &c.task)?;
        let script = trial_script(&c.layout, &trial, &c.gaze, c.pupil_mm);
        let plan = c.gaze.visit_plan();

        let need_gaze = c.record_gaze || self.depth.is_some();
        let gaze = if need_gaze {
            simulated_gaze(&script, &mut gaze_rng)?
        } else {
            Vec::new()
        };

        let screens = c.layout.screens.len();
        let read_blur = match c.focus {
            FocusCondition::UniformBlur { arcmin } => vec![BlurEllipse::circular(arcmin); screens],
            FocusCondition::Fixed { power } => {
                let mut blur = vec![BlurEllipse::ZERO; screens];
                for stim in [Stimulus::Landolt, Stimulus::Sloan, Stimulus::Table] {
                    let s = stimulus_screen(&trial, stim);
                    blur[s] = self.blur_at(s, power)?;
                }
                blur
            }
            FocusCondition::Autofocal(af) => {
                let lens_at_visit = self.run_controller(&af, &script, &gaze, plan.len())?;
                let mut blur = vec![BlurEllipse::ZERO; screens];
                for stim in [Stimulus::Landolt, Stimulus::Sloan, Stimulus::Table] {
                    let last_visit = plan
                        .iter()
                        .rposition(|&v| v == stim)
                        .expect("every stimulus is visited");
                    let s = stimulus_screen(&trial, stim);
                    blur[s] = self.blur_at(s, lens_at_visit[last_visit])?;
                }
                blur
            }
        };

        let response = observer_respond(
            &trial,
            &read_blur,
            &c.observer,
            c.gaze.trial_duration(),
            &mut rng,
        )?;
        Ok(TrialOutcome {
            trial,
            response,
            read_blur,
            gaze: if c.record_gaze { gaze } else { Vec::new() },
        })
    }

    fn blur_at(&self, screen: usize, lens_power: f64) -> Result<BlurEllipse, TaskError> {
        let c = &self.config;
        Ok(blur_ellipse(
            &c.refraction,
            lens_power,
            c.layout.screens[screen].vergence(),
            c.pupil_mm,
        )?)
    }

    /// Steps the autofocal controller through the gaze stream and returns
    /// the lens power at the end of each visit's fixation.
    fn run_controller(
        &self,
        af: &AutofocalConfig,
        script: &FixationScript,
        gaze: &[GazeSample],
        visits: usize,
    ) -> Result<Vec<f64>, TaskError> {
        let c = &self.config;
        let depth = self.depth.as_ref().expect("autofocal blocks render depth");
        let dt = 1.0 / script.sample_rate;
        let mut state = FocusState::new(c.initial_lens_power, c.pupil_mm)?;
        let mut target = state.lens_power;
        let mut at_visit: Vec<Option<f64>> = vec![None; visits];
        for sample in gaze {
            if let Some((az, el)) = sample.view_angles() {
                let (x, y) = view_pixel(&c.geometry, az, el);
                if x >= 0.0 && y >= 0.0 && x < depth.width() as f64 && y < depth.height() as f64 {
                    if let Some(v) = gaze_target_vergence(depth, (x, y), af, self.pitch)? {
                        target = v;
                    }
                }
            }
            state = autofocal_update(af, state, target, dt)?;
            let t = sample.timestamp_ns as f64 * 1e-9;
            if let Segment::Fixation(i) = script.segment_at(t) {
                at_visit[i] = Some(state.lens_power);
            }
        }
        Ok(at_visit
            .into_iter()
            .map(|p| p.unwrap_or(state.lens_power))
            .collect())
    }
}

/// Summarizes outcomes in trial-id order, so the result does not depend on
/// the order trials were simulated in.
pub fn aggregate(layout: &SceneLayout, mut outcomes: Vec<TrialOutcome>) -> BlockResult {
    outcomes.sort_by_key(|o| o.trial.id);
    let n = outcomes.len();
    let correct = outcomes.iter().filter(|o| o.response.correct).count();
    let mean_rt = outcomes
        .iter()
        .map(|o| o.response.response_time)
        .sum::<f64>()
        / n as f64;
    let screens = layout
        .screens
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let on_table: Vec<&TrialOutcome> = outcomes
                .iter()
                .filter(|o| o.trial.table_screen == i)
                .collect();
            let table_correct = on_table.iter().filter(|o| o.response.correct).count();
            let blurs: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.read_blur.get(i).map(|b| b.major))
                .collect();
            ScreenSummary {
                name: s.name.clone(),
                distance: s.distance,
                table_trials: on_table.len(),
                table_correct,
                proportion_correct: if on_table.is_empty() {
                    0.0
                } else {
                    table_correct as f64 / on_table.len() as f64
                },
                mean_read_blur: if blurs.is_empty() {
                    0.0
                } else {
                    blurs.iter().sum::<f64>() / blurs.len() as f64
                },
            }
        })
        .collect();
    BlockResult {
        n_trials: n,
        proportion_correct: correct as f64 / n as f64,
        mean_response_time: mean_rt,
        screens,
        outcomes,
    }
}

/// Simulates a whole block. Trials run in parallel; the result is
/// deterministic per seed.
pub fn run_block(config: &BlockConfig) -> Result<BlockResult, TaskError> {
    let prepared = PreparedBlock::new(config.clone())?;
    let outcomes = (0..config.n_trials as u64)
        .into_par_iter()
        .map(|id| prepared.simulate_trial(id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(&config.layout, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::FocusAlgorithm;

    fn config(n: usize, focus: FocusCondition) -> BlockConfig {
        BlockConfig {
            n_trials: n,
            focus,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn zero_trials_is_rejected() {
        assert!(matches!(
            run_block(&config(0, FocusCondition::default())),
            Err(TaskError::Validation(_))
        ));
    }

    #[test]
    fn instant_autofocal_reads_every_screen_sharp() {
        let prepared = PreparedBlock::new(config(
            40,
            FocusCondition::Autofocal(AutofocalConfig::with_algorithm(FocusAlgorithm::Instant)),
        ))
        .unwrap();
        for id in 0..40 {
            let o = prepared.simulate_trial(id).unwrap();
            assert!(
                o.read_blur.iter().all(|b| b.major == 0.0),
                "trial {id}: {:?}",
                o.read_blur
            );
        }
    }

    #[test]
    fn fixed_focus_blur_matches_defocus() {
        let prepared = PreparedBlock::new(config(1, FocusCondition::Fixed { power: 1.0 })).unwrap();
        let o = prepared.simulate_trial(0).unwrap();
        // pupil (m) x |defocus| (D) x arcmin per radian
        let arcmin = |d: f64| 0.004 * (1.0 / d - 1.0).abs() * 3437.7468;
        for (blur, d) in o.read_blur.iter().zip([0.3, 1.0, 6.0]) {
            assert!((blur.major - arcmin(d)).abs() < 1e-9);
        }
        assert!((o.read_blur[0].major - 32.08).abs() < 0.01);
        assert!((o.read_blur[2].major - 11.46).abs() < 0.01);
    }

    #[test]
    fn order_independent_aggregation() {
        let cfg = config(60, FocusCondition::default());
        let prepared = PreparedBlock::new(cfg.clone()).unwrap();
        let forward: Vec<_> = (0..60)
            .map(|i| prepared.simulate_trial(i).unwrap())
            .collect();
        let backward: Vec<_> = (0..60)
            .rev()
            .map(|i| prepared.simulate_trial(i).unwrap())
            .collect();
        let a = aggregate(&cfg.layout, forward);
        let b = aggregate(&cfg.layout, backward);
        assert_eq!(a, b);
        assert_eq!(a, run_block(&cfg).unwrap());
    }

    #[test]
    fn response_time_is_viewing_time() {
        let g = GazeModel::default();
        assert!((g.trial_duration() - (5.0 * 0.5 + 4.0 * 0.05)).abs() < 1e-12);
        let r = run_block(&config(5, FocusCondition::UniformBlur { arcmin: 0.0 })).unwrap();
        assert!((r.mean_response_time - g.trial_duration()).abs() < 1e-12);
        assert_eq!(r.screens.iter().map(|s| s.table_trials).sum::<usize>(), 5);
    }

    #[test]
    fn recorded_gaze_concatenates_monotonically() {
        let mut cfg = config(3, FocusCondition::default());
        cfg.record_gaze = true;
        let r = run_block(&cfg).unwrap();
        let all = r.concatenated_gaze(cfg.gaze.sample_rate);
        let per_trial = r.outcomes[0].gaze.len();
        assert_eq!(all.len(), 3 * per_trial);
        assert!(all
            .windows(2)
            .all(|w| w[0].timestamp_ns < w[1].timestamp_ns));
    }

    #[test]
    fn config_from_json() {
        let cfg: BlockConfig = serde_json::from_str(
            r#"{"trials": 20, "focus": {"mode": "fixed", "power": 1.0}, "pupil_mm": 3.0}"#,
        )
        .unwrap();
        assert_eq!(cfg.n_trials, 20);
        assert_eq!(cfg.focus, FocusCondition::Fixed { power: 1.0 });
        let cfg: BlockConfig = serde_json::from_str(
            r#"{"focus": {"mode": "autofocal", "algorithm": "slew_limited", "slew_rate": 5.0}}"#,
        )
        .unwrap();
        match cfg.focus {
            FocusCondition::Autofocal(a) => {
                assert_eq!(a.algorithm, FocusAlgorithm::SlewLimited);
                assert_eq!(a.slew_rate, 5.0);
                assert_eq!(a.time_constant, 0.2);
            }
            other => panic!("{other:?}"),
        }
    }
}
