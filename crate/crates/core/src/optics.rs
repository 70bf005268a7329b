//! Defocus optics for a simulated eye looking through a tunable spectacle lens.
//!
//! Everything here is a pure function of its inputs. Powers and vergences are
//! in diopters, angles in degrees unless a name says otherwise, and angular
//! blur in arcminutes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::DepthMap;

/// Arcminutes per radian, fixed rather than derived so results are reproducible.
pub const ARCMIN_PER_RADIAN: f64 = 3437.7468;

/// Accepted pupil diameters (exclusive bounds), millimeters.
pub const PUPIL_RANGE_MM: (f64, f64) = (0.5, 10.0);

/// Width of the vergence bins used by the `mode` depth aggregator.
pub const MODE_BIN_DIOPTERS: f64 = 1.0 / 16.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("invalid refraction profile: {0}")]
    InvalidProfile(String),
    #[error("pupil diameter {0} mm outside the open range (0.5, 10.0)")]
    PupilOutOfRange(f64),
    #[error("lens power must be finite, got {0}")]
    NonFinitePower(f64),
    #[error("time step must be positive, got {0} s")]
    NonPositiveStep(f64),
    #[error("gaze point ({x}, {y}) lies outside the {width}x{height} depth map")]
    GazeOutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("invalid power map: {0}")]
    InvalidPowerMap(String),
    #[error("invalid autofocal config: {0}")]
    InvalidConfig(String),
}

/// Viewing distance of an object, with optical infinity as a distinct value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distance {
    Meters(f64),
    Infinity,
}

/// Vergence of light arriving from an object at `distance`.
pub fn vergence_from_distance(distance: Distance) -> Result<f64, OpticsError> {
    match distance {
        Distance::Infinity => Ok(0.0),
        Distance::Meters(d) if d.is_infinite() && d > 0.0 => Ok(0.0),
        Distance::Meters(d) if d > 0.0 => Ok(1.0 / d),
        Distance::Meters(d) => Err(OpticsError::NonPositiveDistance(d)),
    }
}

/// Sphero-cylindrical refractive state of the eye, plus how much it can still
/// accommodate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefractionProfile {
    #[serde(default)]
    pub sphere: f64,
    #[serde(default)]
    pub cylinder: f64,
    #[serde(default)]
    pub axis: f64,
    #[serde(default)]
    pub residual_accommodation: f64,
}

impl Default for RefractionProfile {
    /// Emmetropic, fully presbyopic eye.
    fn default() -> Self {
        Self {
            sphere: 0.0,
            cylinder: 0.0,
            axis: 0.0,
            residual_accommodation: 0.0,
        }
    }
}

impl RefractionProfile {
    pub fn new(
        sphere: f64,
        cylinder: f64,
        axis: f64,
        residual_accommodation: f64,
    ) -> Result<Self, OpticsError> {
        let profile = Self {
            sphere,
            cylinder,
            axis,
            residual_accommodation,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        let bad = |msg: String| Err(OpticsError::InvalidProfile(msg));
        if !(self.sphere.is_finite()
            && self.cylinder.is_finite()
            && self.axis.is_finite()
            && self.residual_accommodation.is_finite())
        {
            return bad("all fields must be finite".into());
        }
        if self.cylinder < 0.0 {
            return bad(format!("cylinder must be >= 0, got {}", self.cylinder));
        }
        if !(0.0..180.0).contains(&self.axis) {
            return bad(format!("axis must be in [0, 180), got {}", self.axis));
        }
        if self.residual_accommodation < 0.0 {
            return bad(format!(
                "residual accommodation must be >= 0, got {}",
                self.residual_accommodation
            ));
        }
        Ok(())
    }
}

/// Defocus along the two principal meridians of a sphero-cylinder.
///
/// `along_axis` is the sphere-only meridian, `across_axis` carries the
/// cylinder. Positive values mean the object vergence exceeds the system's
/// focusing power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeridionalDefocus {
    pub along_axis: f64,
    pub across_axis: f64,
    pub orientation: f64,
}

/// Per-meridian defocus with residual accommodation engaging toward the target.
pub fn meridional_defocus(
    profile: &RefractionProfile,
    lens_power: f64,
    object_vergence: f64,
) -> MeridionalDefocus {
    let demand = object_vergence - profile.sphere - lens_power;
    let accommodation = demand.clamp(0.0, profile.residual_accommodation);
    let focusing = profile.sphere + lens_power + accommodation;
    MeridionalDefocus {
        along_axis: object_vergence - focusing,
        across_axis: object_vergence - (focusing + profile.cylinder),
        orientation: profile.axis,
    }
}

/// Angular blur of a point source, in arcminutes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlurEllipse {
    pub major: f64,
    pub minor: f64,
    /// Direction of the major axis, degrees in [0, 180).
    pub orientation: f64,
}

impl BlurEllipse {
    pub const ZERO: BlurEllipse = BlurEllipse {
        major: 0.0,
        minor: 0.0,
        orientation: 0.0,
    };

    pub fn circular(diameter: f64) -> Self {
        Self {
            major: diameter,
            minor: diameter,
            orientation: 0.0,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            major: self.major * factor,
            minor: self.minor * factor,
            orientation: self.orientation,
        }
    }
}

pub fn check_pupil(pupil_diameter: f64) -> Result<(), OpticsError> {
    let (lo, hi) = PUPIL_RANGE_MM;
    if pupil_diameter > lo && pupil_diameter < hi {
        Ok(())
    } else {
        Err(OpticsError::PupilOutOfRange(pupil_diameter))
    }
}

/// Geometric blur disc for a meridional defocus pair: pupil (m) times |defocus|.
pub fn blur_from_defocus(defocus: MeridionalDefocus, pupil_diameter: f64) -> BlurEllipse {
    let pupil_m = pupil_diameter * 1e-3;
    let along = pupil_m * defocus.along_axis.abs() * ARCMIN_PER_RADIAN;
    let across = pupil_m * defocus.across_axis.abs() * ARCMIN_PER_RADIAN;
    if across >= along {
        BlurEllipse {
            major: across,
            minor: along,
            orientation: defocus.orientation,
        }
    } else {
        BlurEllipse {
            major: along,
            minor: across,
            orientation: (defocus.orientation + 90.0) % 180.0,
        }
    }
}

pub fn blur_ellipse(
    profile: &RefractionProfile,
    lens_power: f64,
    object_vergence: f64,
    pupil_diameter: f64,
) -> Result<BlurEllipse, OpticsError> {
    check_pupil(pupil_diameter)?;
    Ok(blur_from_defocus(
        meridional_defocus(profile, lens_power, object_vergence),
        pupil_diameter,
    ))
}

/// Add-power field of a progressive lens over normalized view coordinates.
///
/// Row 0 is the top of the view (`v = 0`), column 0 the left (`u = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PowerMapRepr", into = "PowerMapRepr")]
pub struct PowerMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PowerMapRepr {
    grid: Vec<Vec<f64>>,
}

impl TryFrom<PowerMapRepr> for PowerMap {
    type Error = OpticsError;
    fn try_from(repr: PowerMapRepr) -> Result<Self, Self::Error> {
        PowerMap::from_rows(repr.grid)
    }
}

impl From<PowerMap> for PowerMapRepr {
    fn from(map: PowerMap) -> Self {
        PowerMapRepr {
            grid: map.values.chunks(map.cols).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl PowerMap {
    pub fn from_rows(grid: Vec<Vec<f64>>) -> Result<Self, OpticsError> {
        let rows = grid.len();
        let cols = grid.first().map_or(0, Vec::len);
        if rows < 2 || cols < 2 {
            return Err(OpticsError::InvalidPowerMap(format!(
                "grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if grid.iter().any(|r| r.len() != cols) {
            return Err(OpticsError::InvalidPowerMap("ragged grid rows".into()));
        }
        let values: Vec<f64> = grid.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(OpticsError::InvalidPowerMap("non-finite add power".into()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn uniform(power: f64) -> Self {
        Self {
            rows: 2,
            cols: 2,
            values: vec![power; 4],
        }
    }

    /// Simple progressive design: `far` add in the upper half ramping linearly
    /// to `near` add at the bottom edge.
    pub fn progressive(far: f64, near: f64, rows: usize) -> Self {
        let rows = rows.max(2);
        let values = (0..rows)
            .flat_map(|r| {
                let t = r as f64 / (rows - 1) as f64;
                let add = if t <= 0.5 {
                    far
                } else {
                    far + (near - far) * (t - 0.5) * 2.0
                };
                [add, add]
            })
            .collect();
        Self {
            rows,
            cols: 2,
            values,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

/// Bilinear add power at `(u, v)`; coordinates are clamped to [0, 1].
pub fn progressive_add(map: &PowerMap, u: f64, v: f64) -> f64 {
    let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) };
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let x = u * (map.cols - 1) as f64;
    let y = v * (map.rows - 1) as f64;
    let c0 = (x.floor() as usize).min(map.cols - 2);
    let r0 = (y.floor() as usize).min(map.rows - 2);
    let fx = x - c0 as f64;
    let fy = y - r0 as f64;
    let top = map.at(r0, c0) * (1.0 - fx) + map.at(r0, c0 + 1) * fx;
    let bottom = map.at(r0 + 1, c0) * (1.0 - fx) + map.at(r0 + 1, c0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusState {
    pub lens_power: f64,
    pub pupil_diameter: f64,
    pub timestamp: f64,
}

impl FocusState {
    pub fn new(lens_power: f64, pupil_diameter: f64) -> Result<Self, OpticsError> {
        check_pupil(pupil_diameter)?;
        if !lens_power.is_finite() {
            return Err(OpticsError::NonFinitePower(lens_power));
        }
        Ok(Self {
            lens_power,
            pupil_diameter,
            timestamp: 0.0,
        })
    }

    /// Distance the lens is currently focused at, `None` at optical infinity.
    pub fn focus_distance(&self) -> Option<f64> {
        (self.lens_power > 0.0).then(|| 1.0 / self.lens_power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocusAlgorithm {
    Instant,
    SlewLimited,
    LowPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthAggregator {
    Center,
    Median,
    Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutofocalConfig {
    pub algorithm: FocusAlgorithm,
    /// Diopters per second.
    pub slew_rate: f64,
    /// Seconds.
    pub time_constant: f64,
    /// Full width of the foveal depth window, degrees.
    pub foveal_window: f64,
    pub depth_aggregator: DepthAggregator,
}

impl Default for AutofocalConfig {
    fn default() -> Self {
        Self {
            algorithm: FocusAlgorithm::Instant,
            slew_rate: 10.0,
            time_constant: 0.2,
            foveal_window: 2.0,
            depth_aggregator: DepthAggregator::Median,
        }
    }
}

impl AutofocalConfig {
    pub fn with_algorithm(algorithm: FocusAlgorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.slew_rate) {
            return Err(OpticsError::InvalidConfig(format!(
                "slew_rate must be > 0, got {}",
                self.slew_rate
            )));
        }
        if !positive(self.time_constant) {
            return Err(OpticsError::InvalidConfig(format!(
                "time_constant must be > 0, got {}",
                self.time_constant
            )));
        }
        if !positive(self.foveal_window) {
            return Err(OpticsError::InvalidConfig(format!(
                "foveal_window must be > 0, got {}",
                self.foveal_window
            )));
        }
        Ok(())
    }
}

/// Advance the tunable lens toward `target_vergence` over `dt` seconds.
pub fn autofocal_update(
    config: &AutofocalConfig,
    state: FocusState,
    target_vergence: f64,
    dt: f64,
) -> Result<FocusState, OpticsError> {
    if !(dt > 0.0) {
        return Err(OpticsError::NonPositiveStep(dt));
    }
    let error = target_vergence - state.lens_power;
    let lens_power = match config.algorithm {
        FocusAlgorithm::Instant => target_vergence,
        FocusAlgorithm::SlewLimited => {
            let max_step = config.slew_rate * dt;
            if error.abs() <= max_step {
                target_vergence
            } else {
                state.lens_power + max_step.copysign(error)
            }
        }
        FocusAlgorithm::LowPass => {
            state.lens_power + error * (1.0 - (-dt / config.time_constant).exp())
        }
    };
    Ok(FocusState {
        lens_power,
        timestamp: state.timestamp + dt,
        ..state
    })
}

/// Focus state for both eye channels. Both are driven by one controller
/// unless a caller advances them separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinocularFocus {
    pub left: FocusState,
    pub right: FocusState,
}

impl BinocularFocus {
    pub fn shared(state: FocusState) -> Self {
        Self {
            left: state,
            right: state,
        }
    }

    pub fn advance(
        &mut self,
        config: &AutofocalConfig,
        target_vergence: f64,
        dt: f64,
    ) -> Result<(), OpticsError> {
        self.left = autofocal_update(config, self.left, target_vergence, dt)?;
        self.right = autofocal_update(config, self.right, target_vergence, dt)?;
        Ok(())
    }
}

/// Target vergence for a gaze point, aggregated over the foveal window.
///
/// Returns `Ok(None)` when no valid depth falls inside the window.
pub fn gaze_target_vergence(
    depth: &DepthMap,
    gaze_point: (f64, f64),
    config: &AutofocalConfig,
    pixel_pitch: f64,
) -> Result<Option<f64>, OpticsError> {
    let (gx, gy) = gaze_point;
    let (width, height) = (depth.width(), depth.height());
    if !(gx >= 0.0 && gy >= 0.0 && gx < width as f64 && gy < height as f64) {
        return Err(OpticsError::GazeOutOfBounds {
            x: gx,
            y: gy,
            width,
            height,
        });
    }
    let cx = gx.floor() as usize;
    let cy = gy.floor() as usize;

    if config.depth_aggregator == DepthAggregator::Center {
        return Ok(depth.get(cx, cy).map(|d| 1.0 / d));
    }

    let radius_px = config.foveal_window * 0.5 * 60.0 / pixel_pitch;
    let samples = window_depths(depth, cx, cy, radius_px);
    if samples.is_empty() {
        return Ok(None);
    }
    let vergence = match config.depth_aggregator {
        DepthAggregator::Center => unreachable!(),
        DepthAggregator::Median => 1.0 / median(samples),
        DepthAggregator::Mode => mode_vergence(&samples),
    };
    Ok(Some(vergence))
}

fn window_depths(depth: &DepthMap, cx: usize, cy: usize, radius: f64) -> Vec<f64> {
    let r = radius.max(0.0);
    let reach = r.floor() as isize;
    let r2 = r * r;
    let mut out = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if (dx * dx + dy * dy) as f64 > r2 {
                continue;
            }
            let x = cx as isize + dx;
            let y = cy as isize + dy;
            if x < 0 || y < 0 || x >= depth.width() as isize || y >= depth.height() as isize {
                continue;
            }
            if let Some(d) = depth.get(x as usize, y as usize) {
                out.push(d);
            }
        }
    }
    out
}

/// Median of a non-empty sample; even counts average the two middle values.
pub(crate) fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Most populated vergence bin; ties go to the nearer bin. Returns the mean
/// vergence of the winning bin.
fn mode_vergence(depths: &[f64]) -> f64 {
    use std::collections::BTreeMap;
    let mut bins: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    for d in depths {
        let v = 1.0 / d;
        let entry = bins
            .entry((v / MODE_BIN_DIOPTERS).floor() as i64)
            .or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += v;
    }
    let (_, (count, sum)) = bins
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .expect("non-empty sample");
    sum / count as f64
}
