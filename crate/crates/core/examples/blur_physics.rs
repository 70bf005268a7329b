//! Blur on the three screens of the office for a few eyes and lens settings.
//!
//! `sphere` is focusing power the eye has on top of the lens, so a positive
//! sphere behaves like a myopic eye (sharp up close without a lens).

use visionsim::optics::{blur_ellipse, RefractionProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eyes = [
        (
            "emmetrope, no accommodation",
            RefractionProfile::new(0.0, 0.0, 0.0, 0.0)?,
        ),
        (
            "presbyope +1.0 D residual",
            RefractionProfile::new(0.0, 0.0, 0.0, 1.0)?,
        ),
        (
            "sphere +2.5, cyl 1.5 x 90",
            RefractionProfile::new(2.5, 1.5, 90.0, 0.0)?,
        ),
    ];
    let distances = [0.3, 1.0, 6.0];
    let pupil = 4.0;

    for (label, eye) in &eyes {
        println!("{label}");
        for lens in [0.0, 1.0, 1.0 / 0.3] {
            print!("  lens {lens:5.2} D:");
            for d in distances {
                let b = blur_ellipse(eye, lens, 1.0 / d, pupil)?;
                print!(
                    "  {d:>3} m {:6.2}x{:<6.2} @{:>3.0}",
                    b.major, b.minor, b.orientation
                );
            }
            println!();
        }
    }

    // blur grows linearly with the pupil
    let eye = RefractionProfile::default();
    for pupil in [2.0, 4.0, 8.0] {
        let b = blur_ellipse(&eye, 0.0, 1.0, pupil)?;
        println!("pupil {pupil} mm, 1 D defocus: {:.3} arcmin", b.major);
    }
    Ok(())
}
