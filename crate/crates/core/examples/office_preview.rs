//! Renders the office with the lens tuned to the smartphone and writes the
//! sharp frame, the simulated view, and the blur heatmap.
//!
//! `cargo run --example office_preview -- [out_dir]`

use std::path::PathBuf;

use visionsim::optics::{FocusState, RefractionProfile};
use visionsim::render::io::{save_png, write_field_heatmap};
use visionsim::render::{apply_blur, compute_blur_field, render_office_scene, ViewGeometry};
use visionsim::task::SceneLayout;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("visionsim_preview"));
    std::fs::create_dir_all(&out)?;

    let layout = SceneLayout::default();
    let geometry = ViewGeometry::default();
    let (image, depth) = render_office_scene(&layout, &geometry);
    let focus = FocusState::new(1.0 / 0.3, 4.0)?;
    let field = compute_blur_field(
        &depth,
        &RefractionProfile::default(),
        &focus,
        None,
        &geometry,
    )?;
    let blurred = apply_blur(&image, &field)?;

    save_png(&image, &out.join("sharp.png"))?;
    save_png(&blurred, &out.join("autofocal_smartphone.png"))?;
    write_field_heatmap(&field, &out.join("blur_field.png"))?;

    let unchanged = image
        .pixels()
        .zip(blurred.pixels())
        .filter(|(a, b)| a == b)
        .count();
    println!(
        "wrote {} ({} of {} pixels untouched, max blur {:.1} px)",
        out.display(),
        unchanged,
        image.width() * image.height(),
        field.max_major()
    );
    Ok(())
}
