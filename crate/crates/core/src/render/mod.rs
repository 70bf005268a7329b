//! Software stand-in for the defocus shader: per-pixel blur fields computed
//! from a depth map, and a spatially varying disc blur that applies them.

mod blur;
pub mod io;
mod scene;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::optics::{
    blur_from_defocus, check_pupil, meridional_defocus, progressive_add, FocusState, OpticsError,
    PowerMap, RefractionProfile,
};

pub use blur::apply_blur;
pub use image::Rgb32FImage as Raster;
pub use scene::{render_office_scene, render_trial_scene, view_angles, view_pixel};

/// Angular blur below this (arcmin) is dropped at render time.
pub const DIFFRACTION_FLOOR_ARCMIN: f64 = 0.5;

/// Blur diameters are capped at this fraction of the image width.
pub const MAX_BLUR_FRACTION: f64 = 0.25;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("dimension mismatch: {what} is {got:?}, expected {expected:?}")]
    DimensionMismatch {
        what: &'static str,
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("invalid depth map: {0}")]
    InvalidDepth(String),
    #[error("invalid view geometry: {0}")]
    InvalidGeometry(String),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

/// Per-pixel viewing distance in meters. Invalid pixels are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depths: Vec<f64>,
}

impl DepthMap {
    /// Builds a map from row-major (top row first) depths. NaN marks an
    /// invalid pixel; every other value must be positive and finite.
    pub fn from_meters(width: usize, height: usize, depths: Vec<f64>) -> Result<Self, RenderError> {
        if width == 0 || height == 0 {
            return Err(RenderError::InvalidDepth(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if depths.len() != width * height {
            return Err(RenderError::InvalidDepth(format!(
                "{} samples for a {width}x{height} map",
                depths.len()
            )));
        }
        if let Some(i) = depths
            .iter()
            .position(|d| !d.is_nan() && !(d.is_finite() && *d > 0.0))
        {
            return Err(RenderError::InvalidDepth(format!(
                "pixel {} has depth {}",
                i, depths[i]
            )));
        }
        Ok(Self {
            width,
            height,
            depths,
        })
    }

    pub fn uniform(width: usize, height: usize, meters: f64) -> Self {
        Self::from_meters(width, height, vec![meters; width * height])
            .expect("uniform depth must be positive")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let d = self.depths[y * self.width + x];
        (!d.is_nan()).then_some(d)
    }

    /// Row-major samples, NaN for invalid pixels.
    pub fn samples(&self) -> &[f64] {
        &self.depths
    }

    pub(crate) fn set(&mut self, x: usize, y: usize, meters: f64) {
        self.depths[y * self.width + x] = meters;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ViewGeometry {
    /// Degrees, in (0, 180).
    pub horizontal_fov: f64,
    pub image_width: usize,
    pub image_height: usize,
}

impl ViewGeometry {
    pub fn new(
        horizontal_fov: f64,
        image_width: usize,
        image_height: usize,
    ) -> Result<Self, RenderError> {
        let g = Self {
            horizontal_fov,
            image_width,
            image_height,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < 180.0) {
            return Err(RenderError::InvalidGeometry(format!(
                "horizontal fov must be in (0, 180), got {}",
                self.horizontal_fov
            )));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(RenderError::InvalidGeometry("empty image".into()));
        }
        Ok(())
    }

    /// Pinhole focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.image_width as f64 / (0.5 * self.horizontal_fov).to_radians().tan()
    }
}

impl Default for ViewGeometry {
    fn default() -> Self {
        Self {
            horizontal_fov: 100.0,
            image_width: 800,
            image_height: 500,
        }
    }
}

/// Arcminutes subtended by one pixel.
pub fn pixel_pitch(geometry: &ViewGeometry) -> f64 {
    geometry.horizontal_fov * 60.0 / geometry.image_width as f64
}

/// Blur of one pixel expressed in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PixelBlur {
    pub major_px: f64,
    pub minor_px: f64,
    pub orientation: f64,
}

impl PixelBlur {
    pub const ZERO: PixelBlur = PixelBlur {
        major_px: 0.0,
        minor_px: 0.0,
        orientation: 0.0,
    };

    pub fn circular(diameter_px: f64) -> Self {
        Self {
            major_px: diameter_px,
            minor_px: diameter_px,
            orientation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlurField {
    width: usize,
    height: usize,
    cells: Vec<PixelBlur>,
}

impl BlurField {
    pub fn zero(width: usize, height: usize) -> Self {
        Self::uniform(width, height, PixelBlur::ZERO)
    }

    pub fn uniform(width: usize, height: usize, blur: PixelBlur) -> Self {
        Self {
            width,
            height,
            cells: vec![blur; width * height],
        }
    }

    /// Row-major cells; panics if the count does not match.
    pub fn from_cells(width: usize, height: usize, cells: Vec<PixelBlur>) -> Self {
        assert_eq!(cells.len(), width * height, "blur field cell count");
        Self {
            width,
            height,
            cells,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn at(&self, x: usize, y: usize) -> PixelBlur {
        self.cells[y * self.width + x]
    }

    pub fn cells(&self) -> &[PixelBlur] {
        &self.cells
    }

    pub fn max_major(&self) -> f64 {
        self.cells.iter().map(|c| c.major_px).fold(0.0, f64::max)
    }
}

/// Blur field for a depth map seen through the simulated eye and lens.
pub fn compute_blur_field(
    depth: &DepthMap,
    profile: &RefractionProfile,
    focus: &FocusState,
    power_map: Option<&PowerMap>,
    geometry: &ViewGeometry,
) -> Result<BlurField, RenderError> {
    geometry.validate()?;
    let expected = (geometry.image_width, geometry.image_height);
    if (depth.width(), depth.height()) != expected {
        return Err(RenderError::DimensionMismatch {
            what: "depth map",
            got: (depth.width(), depth.height()),
            expected,
        });
    }
    check_pupil(focus.pupil_diameter)?;
    profile.validate()?;

    let (width, height) = expected;
    let pitch = pixel_pitch(geometry);
    let cap = MAX_BLUR_FRACTION * width as f64;
    let mut cells = vec![PixelBlur::ZERO; width * height];

    cells
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| {
            let v = (y as f64 + 0.5) / height as f64;
            for (x, cell) in row.iter_mut().enumerate() {
                let Some(d) = depth.get(x, y) else { continue };
                let mut lens = focus.lens_power;
                if let Some(map) = power_map {
                    lens += progressive_add(map, (x as f64 + 0.5) / width as f64, v);
                }
                let blur = blur_from_defocus(
                    meridional_defocus(profile, lens, 1.0 / d),
                    focus.pupil_diameter,
                );
                if blur.major < DIFFRACTION_FLOOR_ARCMIN {
                    continue;
                }
                let minor = if blur.minor < DIFFRACTION_FLOOR_ARCMIN {
                    0.0
                } else {
                    blur.minor
                };
                *cell = PixelBlur {
                    major_px: (blur.major / pitch).min(cap),
                    minor_px: (minor / pitch).min(cap),
                    orientation: blur.orientation,
                };
            }
        });

    Ok(BlurField {
        width,
        height,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pixel_pitch_examples() {
        assert_eq!(
            pixel_pitch(&ViewGeometry::new(100.0, 2000, 10).unwrap()),
            3.0
        );
        assert_eq!(
            pixel_pitch(&ViewGeometry::new(90.0, 5400, 10).unwrap()),
            1.0
        );
        assert_eq!(pixel_pitch(&ViewGeometry::new(1.0, 60, 10).unwrap()), 1.0);
        assert!(ViewGeometry::new(180.0, 10, 10).is_err());
        assert!(ViewGeometry::new(0.0, 10, 10).is_err());
    }

    #[test]
    fn depth_map_validation() {
        assert!(DepthMap::from_meters(0, 1, vec![]).is_err());
        assert!(DepthMap::from_meters(2, 1, vec![1.0]).is_err());
        assert!(DepthMap::from_meters(2, 1, vec![1.0, 0.0]).is_err());
        assert!(DepthMap::from_meters(2, 1, vec![1.0, f64::INFINITY]).is_err());
        let m = DepthMap::from_meters(2, 1, vec![1.0, f64::NAN]).unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        assert_eq!(m.get(1, 0), None);
    }

    #[test]
    fn in_focus_field_is_zero() {
        let geometry = ViewGeometry::new(100.0, 40, 30).unwrap();
        let depth = DepthMap::uniform(40, 30, 2.0);
        let focus = FocusState::new(0.5, 4.0).unwrap();
        let field = compute_blur_field(
            &depth,
            &RefractionProfile::default(),
            &focus,
            None,
            &geometry,
        )
        .unwrap();
        assert!(field.cells().iter().all(|c| *c == PixelBlur::ZERO));
    }

    #[test]
    fn near_screen_with_far_focus() {
        // 3 arcmin/px, wide enough that the 25% cap does not bind
        let geometry = ViewGeometry::new(100.0, 2000, 4).unwrap();
        let depth = DepthMap::uniform(2000, 4, 0.3);
        let focus = FocusState::new(0.1667, 4.0).unwrap();
        let field = compute_blur_field(
            &depth,
            &RefractionProfile::default(),
            &focus,
            None,
            &geometry,
        )
        .unwrap();
        let expected = (1.0 / 0.3 - 0.1667) * 0.004 * 3437.7468 / 3.0;
        assert_relative_eq!(expected, 14.51, epsilon = 0.01);
        for c in field.cells() {
            assert_relative_eq!(c.major_px, expected, max_relative = 1e-12);
            assert_eq!(c.major_px, c.minor_px);
        }
    }

    #[test]
    fn invalid_depth_gives_zero_blur() {
        let geometry = ViewGeometry::new(60.0, 2, 1).unwrap();
        let depth = DepthMap::from_meters(2, 1, vec![f64::NAN, 0.25]).unwrap();
        let focus = FocusState::new(0.0, 4.0).unwrap();
        let field = compute_blur_field(
            &depth,
            &RefractionProfile::default(),
            &focus,
            None,
            &geometry,
        )
        .unwrap();
        assert_eq!(field.at(0, 0), PixelBlur::ZERO);
        assert!(field.at(1, 0).major_px > 0.0);
    }

    #[test]
    fn cap_and_floor() {
        let geometry = ViewGeometry::new(100.0, 100, 1).unwrap();
        let focus = FocusState::new(0.0, 8.0).unwrap();
        // 100 D at 8 mm is about 46 px at 60 arcmin per pixel
        let near = DepthMap::uniform(100, 1, 0.01);
        let field = compute_blur_field(
            &near,
            &RefractionProfile::default(),
            &focus,
            None,
            &geometry,
        )
        .unwrap();
        assert_eq!(field.at(0, 0).major_px, 25.0);

        // 0.01 D at 4 mm is 0.1375 arcmin, under the floor
        let focus = FocusState::new(0.49, 4.0).unwrap();
        let depth = DepthMap::uniform(100, 1, 2.0);
        let field = compute_blur_field(
            &depth,
            &RefractionProfile::default(),
            &focus,
            None,
            &geometry,
        )
        .unwrap();
        assert_eq!(field.at(3, 0), PixelBlur::ZERO);
    }

    #[test]
    fn dimension_mismatch() {
        let geometry = ViewGeometry::new(100.0, 10, 10).unwrap();
        let depth = DepthMap::uniform(9, 10, 1.0);
        let focus = FocusState::new(0.0, 4.0).unwrap();
        assert!(matches!(
            compute_blur_field(
                &depth,
                &RefractionProfile::default(),
                &focus,
                None,
                &geometry
            ),
            Err(RenderError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_power_map_matches_none() {
        let geometry = ViewGeometry::new(90.0, 32, 24).unwrap();
        let depths = (0..32 * 24).map(|i| 0.3 + (i % 17) as f64 * 0.4).collect();
        let depth = DepthMap::from_meters(32, 24, depths).unwrap();
        let profile = RefractionProfile::new(-0.5, 0.75, 45.0, 0.5).unwrap();
        let focus = FocusState::new(1.2, 3.0).unwrap();
        let a = compute_blur_field(&depth, &profile, &focus, None, &geometry).unwrap();
        let b = compute_blur_field(
            &depth,
            &profile,
            &focus,
            Some(&PowerMap::uniform(0.0)),
            &geometry,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn progressive_map_sharpens_lower_near_field() {
        let geometry = ViewGeometry::new(90.0, 8, 20).unwrap();
        let depth = DepthMap::uniform(8, 20, 0.4);
        let focus = FocusState::new(0.0, 4.0).unwrap();
        let map = PowerMap::progressive(0.0, 2.5, 21);
        let field = compute_blur_field(
            &depth,
            &RefractionProfile::default(),
            &focus,
            Some(&map),
            &geometry,
        )
        .unwrap();
        assert!(field.at(4, 0).major_px > field.at(4, 19).major_px);
        assert!(field.at(4, 19).major_px < 0.5 * field.at(4, 0).major_px);
    }
}
