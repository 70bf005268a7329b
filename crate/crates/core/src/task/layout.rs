use serde::{Deserialize, Serialize};

use super::TaskError;

/// One flat screen in the office scene. Angles are degrees in view space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenSpec {
    pub name: String,
    /// Meters.
    pub distance: f64,
    /// Horizontal angular width.
    pub angular_size: f64,
    /// Height over width.
    #[serde(default = "default_aspect")]
    pub aspect: f64,
    /// Azimuth of the screen center, positive to the right.
    pub lateral_offset: f64,
    /// Elevation of the screen center, positive up.
    #[serde(default)]
    pub elevation: f64,
}

fn default_aspect() -> f64 {
    0.5625
}

impl ScreenSpec {
    pub fn new(
        name: &str,
        distance: f64,
        angular_size: f64,
        aspect: f64,
        lateral_offset: f64,
        elevation: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            distance,
            angular_size,
            aspect,
            lateral_offset,
            elevation,
        }
    }

    /// Half width and half height, degrees.
    pub fn half_extents(&self) -> (f64, f64) {
        (
            0.5 * self.angular_size,
            0.5 * self.angular_size * self.aspect,
        )
    }

    pub fn contains(&self, az: f64, el: f64) -> bool {
        let (hw, hh) = self.half_extents();
        (az - self.lateral_offset).abs() <= hw && (el - self.elevation).abs() <= hh
    }

    pub fn vergence(&self) -> f64 {
        1.0 / self.distance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub screens: Vec<ScreenSpec>,
    /// Depth of everything that is not a screen, meters.
    #[serde(default = "default_background")]
    pub background_distance: f64,
}

fn default_background() -> f64 {
    8.0
}

impl Default for SceneLayout {
    /// Smartphone at reading distance, desktop display, television across the room.
    fn default() -> Self {
        Self {
            screens: vec![
                ScreenSpec::new("smartphone", 0.3, 13.0, 2.0, -28.0, -14.0),
                ScreenSpec::new("display", 1.0, 30.0, 0.5625, 0.0, 2.0),
                ScreenSpec::new("tv", 6.0, 12.0, 0.5625, 28.0, 5.0),
            ],
            background_distance: default_background(),
        }
    }
}

impl SceneLayout {
    /// Checks what the matching task needs: at least three screens at
    /// distinct positive distances.
    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |m: String| Err(TaskError::Validation(m));
        if self.screens.len() < 3 {
            return bad(format!(
                "the matching task needs at least 3 screens, layout has {}",
                self.screens.len()
            ));
        }
        for (i, s) in self.screens.iter().enumerate() {
            if !(s.distance > 0.0 && s.distance.is_finite()) {
                return bad(format!("screen {:?} distance must be > 0", s.name));
            }
            if !(s.angular_size > 0.0 && s.aspect > 0.0) {
                return bad(format!("screen {:?} must have a positive size", s.name));
            }
            if self.screens[..i].iter().any(|o| o.distance == s.distance) {
                return bad(format!(
                    "screen distances must be distinct ({} m repeats)",
                    s.distance
                ));
            }
        }
        if !(self.background_distance > 0.0) {
            return bad("background distance must be > 0".into());
        }
        Ok(())
    }

    pub fn screen_index(&self, name: &str) -> Option<usize> {
        self.screens.iter().position(|s| s.name == name)
    }
}

/// Parameters of trial generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    /// Critical detail of every optotype, arcminutes.
    pub optotype_gap: f64,
    /// Probability a stimulus is anchored at its screen center rather than a corner.
    pub p_center: f64,
    /// Placement jitter standard deviation, degrees.
    pub jitter_sigma: f64,
    /// Corner anchors sit at this fraction of the screen half-extents.
    pub corner_fraction: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            optotype_gap: 2.0,
            p_center: 0.5,
            jitter_sigma: 0.5,
            corner_fraction: 0.6,
        }
    }
}

impl TaskConfig {
    /// Optotype height in degrees; the gap is a fifth of the letter.
    pub fn glyph_size(&self) -> f64 {
        5.0 * self.optotype_gap / 60.0
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |m: &str| Err(TaskError::Validation(m.into()));
        if !(self.optotype_gap > 0.0 && self.optotype_gap.is_finite()) {
            return bad("optotype_gap must be > 0");
        }
        if !(0.0..=1.0).contains(&self.p_center) {
            return bad("p_center must be in [0, 1]");
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return bad("jitter_sigma must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.corner_fraction) {
            return bad("corner_fraction must be in [0, 1]");
        }
        Ok(())
    }
}
