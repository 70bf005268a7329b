use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ground_truth, TaskError, Trial};
use crate::optics::BlurEllipse;
use crate::optotype::{Orientation, SloanLetter};

/// Logistic psychometric observer driven by blur relative to optotype size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObserverModel {
    /// Chance of naming an unread optotype correctly, γ.
    pub guess_rate: f64,
    /// Blur-to-gap ratio at the psychometric midpoint, r₀.
    pub threshold_ratio: f64,
    /// Logistic slope, k.
    pub slope: f64,
    /// Lapse probability, λ.
    pub lapse: f64,
}

impl Default for ObserverModel {
    fn default() -> Self {
        Self {
            guess_rate: 1.0 / 8.0,
            threshold_ratio: 1.0,
            slope: 4.0,
            lapse: 0.0,
        }
    }
}

impl ObserverModel {
    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |m: &str| Err(TaskError::Validation(m.into()));
        if !(0.0..=0.05).contains(&self.lapse) {
            return bad("lapse must be in [0, 0.05]");
        }
        if !(self.threshold_ratio > 0.0) || !(self.slope > 0.0) {
            return bad("threshold_ratio and slope must be > 0");
        }
        if !(0.0..1.0).contains(&self.guess_rate) {
            return bad("guess_rate must be in [0, 1)");
        }
        Ok(())
    }

    /// Probability of identifying an optotype whose blur major axis is
    /// `blur_major` arcminutes, for a gap of `gap` arcminutes.
    pub fn p_identify(&self, blur_major: f64, gap: f64) -> f64 {
        let r = blur_major / gap;
        let logistic = 1.0 / (1.0 + (-self.slope * (1.0 - r / self.threshold_ratio)).exp());
        self.lapse / 8.0
            + (1.0 - self.lapse) * (self.guess_rate + (1.0 - self.guess_rate) * logistic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Match,
    NoMatch,
}

impl Response {
    pub fn from_match(is_match: bool) -> Self {
        if is_match {
            Response::Match
        } else {
            Response::NoMatch
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Response::Match => "match",
            Response::NoMatch => "no_match",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResponse {
    pub trial_id: u64,
    pub response: Response,
    pub correct: bool,
    /// Seconds.
    pub response_time: f64,
}

/// Scores a response against the trial's ground truth.
pub fn score(trial: &Trial, response: Response, response_time: f64) -> TrialResponse {
    TrialResponse {
        trial_id: trial.id,
        response,
        correct: response == Response::from_match(ground_truth(trial)),
        response_time,
    }
}

fn misread<T: Copy + PartialEq, R: Rng + ?Sized>(truth: T, all: &[T], rng: &mut R) -> T {
    let others: Vec<T> = all.iter().copied().filter(|&x| x != truth).collect();
    *others.choose(rng).expect("alternatives exist")
}

/// Simulated answer to `trial` given the blur on each screen (indexed like
/// the layout). Random draws happen in a fixed order: Landolt, Sloan, table.
pub fn observer_respond<R: Rng + ?Sized>(
    trial: &Trial,
    blur_at_screen: &[BlurEllipse],
    model: &ObserverModel,
    response_time: f64,
    rng: &mut R,
) -> Result<TrialResponse, TaskError> {
    let blur = |screen: usize| {
        blur_at_screen
            .get(screen)
            .copied()
            .ok_or_else(|| TaskError::Domain(format!("no blur given for screen {screen}")))
    };
    let p_landolt = model.p_identify(blur(trial.landolt_screen)?.major, trial.optotype_gap);
    let p_sloan = model.p_identify(blur(trial.sloan_screen)?.major, trial.optotype_gap);
    let p_table = model.p_identify(blur(trial.table_screen)?.major, trial.optotype_gap);

    let orientations: Vec<Orientation> = Orientation::all().collect();
    let seen_orientation = if rng.random_bool(p_landolt) {
        trial.landolt_orientation
    } else {
        misread(trial.landolt_orientation, &orientations, rng)
    };
    let seen_letter = if rng.random_bool(p_sloan) {
        trial.sloan_letter
    } else {
        misread(trial.sloan_letter, &SloanLetter::ALL, rng)
    };
    let column_letter = trial.table.letter_for(seen_orientation);
    let seen_column = if rng.random_bool(p_table) {
        column_letter
    } else {
        misread(column_letter, &SloanLetter::ALL, rng)
    };
    Ok(score(
        trial,
        Response::from_match(seen_column == seen_letter),
        response_time,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{generate_trial, SceneLayout, TaskConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sharp_identification_probability() {
        let m = ObserverModel::default();
        // closed form at r = 0
        let expected = 0.125 + 0.875 / (1.0 + (-4.0f64).exp());
        assert!((m.p_identify(0.0, 2.0) - expected).abs() < 1e-15);
        assert!((m.p_identify(0.0, 2.0) - 0.9843).abs() < 5e-5);
        assert!((m.p_identify(f64::INFINITY, 2.0) - 0.125).abs() < 1e-15);
        // midpoint
        assert!((m.p_identify(2.0, 2.0) - (0.125 + 0.875 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn p_identify_decreases_with_blur() {
        let m = ObserverModel {
            lapse: 0.03,
            ..Default::default()
        };
        let ps: Vec<f64> = (0..50).map(|i| m.p_identify(i as f64 * 0.3, 2.0)).collect();
        assert!(ps.windows(2).all(|w| w[1] < w[0]));
    }

    fn proportion(blur: BlurEllipse, n: u64) -> f64 {
        let layout = SceneLayout::default();
        let cfg = TaskConfig::default();
        let m = ObserverModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let blurs = [blur; 3];
        let correct = (0..n)
            .filter(|&i| {
                let t = generate_trial(&mut rng, i, &layout, &cfg).unwrap();
                observer_respond(&t, &blurs, &m, 1.0, &mut rng)
                    .unwrap()
                    .correct
            })
            .count();
        correct as f64 / n as f64
    }

    #[test]
    fn sharp_observer_is_accurate() {
        assert!(proportion(BlurEllipse::ZERO, 2000) >= 0.93);
    }

    #[test]
    fn blind_observer_guesses() {
        let p = proportion(BlurEllipse::circular(f64::INFINITY), 20_000);
        assert!((p - 0.5).abs() < 0.015, "{p}");
    }

    #[test]
    fn missing_screen_blur_is_a_domain_error() {
        let layout = SceneLayout::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = generate_trial(&mut rng, 0, &layout, &TaskConfig::default()).unwrap();
        let r = observer_respond(
            &t,
            &[BlurEllipse::ZERO],
            &ObserverModel::default(),
            0.0,
            &mut rng,
        );
        assert!(matches!(r, Err(TaskError::Domain(_))));
    }

    #[test]
    fn scoring_follows_ground_truth() {
        let layout = SceneLayout::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..50 {
            let t = generate_trial(&mut rng, i, &layout, &TaskConfig::default()).unwrap();
            let r = score(&t, Response::Match, 1.0);
            assert_eq!(r.correct, t.is_match);
            assert_eq!(score(&t, Response::NoMatch, 1.0).correct, !t.is_match);
        }
    }
}
