use std::path::PathBuf;

use crate::error::Result;
use crate::optics::{FocusState, PowerMap, RefractionProfile};
use crate::render::io::{load_depth, load_png, save_png, write_depth_pfm, write_field_heatmap};
use crate::render::{apply_blur, compute_blur_field, render_office_scene, ViewGeometry};
use crate::task::SceneLayout;

#[derive(Debug, Clone)]
pub struct PreviewOptions {
    /// Image and depth are given together, or both left out to render the
    /// synthetic office.
    pub image: Option<PathBuf>,
    pub depth: Option<PathBuf>,
    pub refraction: RefractionProfile,
    /// Diopters.
    pub lens_power: f64,
    pub pupil_mm: f64,
    /// Horizontal field of view, degrees.
    pub fov: f64,
    pub power_map: Option<PowerMap>,
    /// Size of the synthetic render.
    pub width: usize,
    pub height: usize,
    pub out: PathBuf,
    pub field_out: Option<PathBuf>,
    pub depth_out: Option<PathBuf>,
}

impl Default for PreviewOptions {
    fn default() -> Self {
        let g = ViewGeometry::default();
        Self {
            image: None,
            depth: None,
            refraction: RefractionProfile::default(),
            lens_power: 0.0,
            pupil_mm: 4.0,
            fov: g.horizontal_fov,
            power_map: None,
            width: g.image_width,
            height: g.image_height,
            out: PathBuf::from("preview.png"),
            field_out: None,
            depth_out: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreviewReport {
    pub width: usize,
    pub height: usize,
    /// Largest blur diameter in the field, pixels.
    pub max_blur_px: f64,
}

/// Renders one defocused frame to `opts.out`.
pub fn preview(opts: &PreviewOptions) -> Result<PreviewReport> {
    let focus = FocusState::new(opts.lens_power, opts.pupil_mm)?;
    opts.refraction.validate()?;
    let (image, depth) = match (&opts.image, &opts.depth) {
        (Some(image), Some(depth)) => (load_png(image)?, load_depth(depth)?),
        (None, None) => {
            let g = ViewGeometry::new(opts.fov, opts.width, opts.height)?;
            render_office_scene(&SceneLayout::default(), &g)
        }
        _ => {
            return Err(crate::Error::Invalid(vec![super::Diagnostic::new(
                "preview",
                "--image and --depth must be given together",
            )]))
        }
    };
    let geometry = ViewGeometry::new(opts.fov, depth.width(), depth.height())?;
    let field = compute_blur_field(
        &depth,
        &opts.refraction,
        &focus,
        opts.power_map.as_ref(),
        &geometry,
    )?;
    let blurred = apply_blur(&image, &field)?;
    save_png(&blurred, &opts.out)?;
    if let Some(path) = &opts.field_out {
        write_field_heatmap(&field, path)?;
    }
    if let Some(path) = &opts.depth_out {
        write_depth_pfm(&depth, path)?;
    }
    Ok(PreviewReport {
        width: depth.width(),
        height: depth.height(),
        max_blur_px: field.max_major(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn opts(dir: &std::path::Path) -> PreviewOptions {
        PreviewOptions {
            width: 96,
            height: 54,
            out: dir.join("out.png"),
            ..PreviewOptions::default()
        }
    }

    #[test]
    fn synthetic_scene_renders() {
        let dir = tempfile::tempdir().unwrap();
        let o = PreviewOptions {
            lens_power: 1.0,
            field_out: Some(dir.path().join("field.png")),
            ..opts(dir.path())
        };
        let r = preview(&o).unwrap();
        assert_eq!((r.width, r.height), (96, 54));
        assert!(r.max_blur_px > 0.0);
        assert!(o.out.exists() && dir.path().join("field.png").exists());
    }

    #[test]
    fn rejects_tiny_pupil() {
        let dir = tempfile::tempdir().unwrap();
        let o = PreviewOptions {
            pupil_mm: 0.1,
            ..opts(dir.path())
        };
        assert!(matches!(preview(&o), Err(Error::Optics(_))));
        assert!(!o.out.exists());
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = render_office_scene(
            &SceneLayout::default(),
            &ViewGeometry::new(60.0, 40, 20).unwrap(),
        );
        let (_, depth) = render_office_scene(
            &SceneLayout::default(),
            &ViewGeometry::new(60.0, 30, 20).unwrap(),
        );
        save_png(&img, &dir.path().join("i.png")).unwrap();
        write_depth_pfm(&depth, &dir.path().join("d.pfm")).unwrap();
        let o = PreviewOptions {
            image: Some(dir.path().join("i.png")),
            depth: Some(dir.path().join("d.pfm")),
            ..opts(dir.path())
        };
        assert!(matches!(preview(&o), Err(Error::Render(_))));

        let o = PreviewOptions {
            image: Some(dir.path().join("i.png")),
            ..opts(dir.path())
        };
        assert!(matches!(preview(&o), Err(Error::Invalid(_))));
    }
}
