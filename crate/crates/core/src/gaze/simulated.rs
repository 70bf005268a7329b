use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sample::{normalize, sub, EyeSample, GazeSample, Vec3};
use super::GazeError;

/// Half the interpupillary distance, meters.
pub const HALF_IPD: f64 = 0.032;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationTarget {
    /// Head-frame position, meters.
    pub position: Vec3,
    /// Seconds.
    pub dwell: f64,
}

/// Scripted gaze for the synthetic device: fixate each target in turn with
/// linear saccades between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationScript {
    pub targets: Vec<FixationTarget>,
    #[serde(default = "default_saccade")]
    pub saccade_duration: f64,
    /// Angular noise per axis during fixations, degrees.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_pupil")]
    pub pupil_mm: f64,
}

fn default_saccade() -> f64 {
    0.05
}
fn default_rate() -> f64 {
    100.0
}
fn default_pupil() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Fixation(usize),
    /// Moving from target `from` to `from + 1`, with progress in [0, 1).
    Saccade {
        from: usize,
        progress: f64,
    },
}

impl FixationScript {
    pub fn validate(&self) -> Result<(), GazeError> {
        let bad = |m: String| Err(GazeError::InvalidScript(m));
        if self.targets.is_empty() {
            return bad("script has no targets".into());
        }
        if let Some(t) = self.targets.iter().find(|t| !(t.dwell > 0.0)) {
            return bad(format!("dwell must be > 0, got {}", t.dwell));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad(format!("sample rate must be > 0, got {}", self.sample_rate));
        }
        if !(self.saccade_duration >= 0.0) || !(self.noise_sigma >= 0.0) {
            return bad("saccade duration and noise must be >= 0".into());
        }
        if self.targets.iter().any(|t| t.position[2] <= 0.0) {
            return bad("targets must lie in front of the viewer (z > 0)".into());
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        let dwell: f64 = self.targets.iter().map(|t| t.dwell).sum();
        dwell + self.saccade_duration * (self.targets.len() - 1) as f64
    }

    pub fn sample_count(&self) -> usize {
        (self.total_duration() * self.sample_rate).round() as usize
    }

    /// Which part of the script is active at `t` seconds.
    pub fn segment_at(&self, t: f64) -> Segment {
        let mut start = 0.0;
        let last = self.targets.len() - 1;
        for (i, target) in self.targets.iter().enumerate() {
            let fixation_end = start + target.dwell;
            if t < fixation_end || i == last {
                return Segment::Fixation(i);
            }
            let saccade_end = fixation_end + self.saccade_duration;
            if t < saccade_end {
                return Segment::Saccade {
                    from: i,
                    progress: (t - fixation_end) / self.saccade_duration,
                };
            }
            start = saccade_end;
        }
        Segment::Fixation(last)
    }

    pub fn sample_time(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }
}

fn eye_origins() -> [Vec3; 3] {
    [[-HALF_IPD, 0.0, 0.0], [HALF_IPD, 0.0, 0.0], [0.0, 0.0, 0.0]]
}

/// Rotates `dir` by small angular offsets (degrees) about two axes
/// perpendicular to it.
fn perturb(dir: Vec3, dx_deg: f64, dy_deg: f64) -> Vec3 {
    if dx_deg == 0.0 && dy_deg == 0.0 {
        return dir;
    }
    let helper = if dir[1].abs() < 0.9 {
        [0.0, 1.0, 0.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    // u = helper x dir, w = dir x u
    let u = normalize([
        helper[1] * dir[2] - helper[2] * dir[1],
        helper[2] * dir[0] - helper[0] * dir[2],
        helper[0] * dir[1] - helper[1] * dir[0],
    ]);
    let w = [
        dir[1] * u[2] - dir[2] * u[1],
        dir[2] * u[0] - dir[0] * u[2],
        dir[0] * u[1] - dir[1] * u[0],
    ];
    let (tx, ty) = (dx_deg.to_radians().tan(), dy_deg.to_radians().tan());
    normalize([
        dir[0] + tx * u[0] + ty * w[0],
        dir[1] + tx * u[1] + ty * w[1],
        dir[2] + tx * u[2] + ty * w[2],
    ])
}

/// Generates the full sample stream for a script. Timestamps start at 0.
pub fn simulated_gaze<R: Rng + ?Sized>(
    script: &FixationScript,
    rng: &mut R,
) -> Result<Vec<GazeSample>, GazeError> {
    script.validate()?;
    let noise = Normal::new(0.0, script.noise_sigma).expect("sigma validated");
    let origins = eye_origins();
    let n = script.sample_count();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = script.sample_time(k);
        let dirs: [Vec3; 3] = match script.segment_at(t) {
            Segment::Fixation(i) => {
                let (ex, ey) = if script.noise_sigma > 0.0 {
                    (noise.sample(rng), noise.sample(rng))
                } else {
                    (0.0, 0.0)
                };
                origins.map(|o| perturb(normalize(sub(script.targets[i].position, o)), ex, ey))
            }
            Segment::Saccade { from, progress } => origins.map(|o| {
                let a = normalize(sub(script.targets[from].position, o));
                let b = normalize(sub(script.targets[from + 1].position, o));
                normalize([
                    a[0] + (b[0] - a[0]) * progress,
                    a[1] + (b[1] - a[1]) * progress,
                    a[2] + (b[2] - a[2]) * progress,
                ])
            }),
        };
        let eye = |i: usize| EyeSample {
            origin: origins[i],
            direction: dirs[i],
            pupil_mm: script.pupil_mm,
            valid: true,
        };
        out.push(GazeSample {
            timestamp_ns: (t * 1e9).round() as u64,
            left: eye(0),
            right: eye(1),
            combined: eye(2),
            vendor_extras: String::new(),
        });
    }
    Ok(out)
}
