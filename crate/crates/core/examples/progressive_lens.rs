//! A progressive lens: no add in the upper half, +2.5 D at the bottom.
//! Prints the mean blur per image band for a presbyopic eye.

use visionsim::optics::{FocusState, PowerMap, RefractionProfile};
use visionsim::render::{compute_blur_field, render_office_scene, ViewGeometry};
use visionsim::task::SceneLayout;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let geometry = ViewGeometry::new(100.0, 400, 250)?;
    let (_, depth) = render_office_scene(&SceneLayout::default(), &geometry);
    let eye = RefractionProfile::new(0.0, 0.0, 0.0, 0.5)?;
    let focus = FocusState::new(0.0, 4.0)?;
    let map = PowerMap::progressive(0.0, 2.5, 11);

    for (label, power_map) in [("single vision", None), ("progressive", Some(&map))] {
        let field = compute_blur_field(&depth, &eye, &focus, power_map, &geometry)?;
        print!("{label:>13}:");
        let bands = 5;
        let band_h = geometry.image_height / bands;
        for b in 0..bands {
            let mut sum = 0.0;
            let mut n = 0;
            for y in b * band_h..(b + 1) * band_h {
                for x in 0..geometry.image_width {
                    sum += field.at(x, y).major_px;
                    n += 1;
                }
            }
            print!(" {:6.2}", sum / n as f64);
        }
        println!("  (mean blur px, top to bottom)");
    }
    Ok(())
}
