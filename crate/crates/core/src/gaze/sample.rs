use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub(crate) fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn normalize(v: Vec3) -> Vec3 {
    let n = norm(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Angle between two directions, degrees.
pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    norm(cross).atan2(dot).to_degrees()
}

/// One eye's (or the cyclopean) gaze ray in the head frame: +x right, +y up,
/// +z forward, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EyeSample {
    pub origin: Vec3,
    pub direction: Vec3,
    pub pupil_mm: f64,
    pub valid: bool,
}

impl EyeSample {
    /// Placeholder for missing eye data; keeps the sample rate constant.
    pub const INVALID: EyeSample = EyeSample {
        origin: [0.0; 3],
        direction: [0.0; 3],
        pupil_mm: 0.0,
        valid: false,
    };

    pub fn toward(origin: Vec3, target: Vec3, pupil_mm: f64) -> Self {
        Self {
            origin,
            direction: normalize(sub(target, origin)),
            pupil_mm,
            valid: true,
        }
    }
}

/// One eye-tracker record in the generic format.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GazeSample {
    /// Monotonic nanoseconds since the start of the stream.
    pub timestamp_ns: u64,
    pub left: EyeSample,
    pub right: EyeSample,
    pub combined: EyeSample,
    /// Vendor-specific payload carried through untouched.
    pub vendor_extras: String,
}

impl GazeSample {
    pub fn eyes(&self) -> [&EyeSample; 3] {
        [&self.left, &self.right, &self.combined]
    }

    /// View angles (azimuth right, elevation up) of the combined gaze,
    /// degrees, for a planar screen model.
    pub fn view_angles(&self) -> Option<(f64, f64)> {
        let d = self.combined.direction;
        (self.combined.valid && d[2] > 0.0).then(|| {
            (
                (d[0] / d[2]).atan().to_degrees(),
                (d[1] / d[2]).atan().to_degrees(),
            )
        })
    }
}

/// Unit direction for view angles under the planar model used by the renderer.
pub fn direction_from_angles(az_deg: f64, el_deg: f64) -> Vec3 {
    normalize([az_deg.to_radians().tan(), el_deg.to_radians().tan(), 1.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_roundtrip() {
        let d = direction_from_angles(-20.0, 7.5);
        let s = GazeSample {
            combined: EyeSample {
                origin: [0.0; 3],
                direction: d,
                pupil_mm: 4.0,
                valid: true,
            },
            ..Default::default()
        };
        let (az, el) = s.view_angles().unwrap();
        assert!((az + 20.0).abs() < 1e-12 && (el - 7.5).abs() < 1e-12);
        assert!((norm(d) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn angle_between_basics() {
        assert!((angle_between([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]) - 90.0).abs() < 1e-12);
        assert_eq!(angle_between([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]), 0.0);
    }
}
