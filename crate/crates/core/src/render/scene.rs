use image::Rgb;

use super::{DepthMap, Raster, ViewGeometry};
use crate::optotype::{landolt_covers, sloan_covers, Orientation, SloanLetter};
use crate::task::{SceneLayout, Trial};

const WALL: [f32; 3] = [0.62, 0.60, 0.55];
const FLOOR: [f32; 3] = [0.36, 0.31, 0.26];
const BEZEL: [f32; 3] = [0.08, 0.08, 0.09];
const FACE: [f32; 3] = [0.95, 0.95, 0.95];
const INK: [f32; 3] = [0.02, 0.02, 0.02];
const HORIZON_DEG: f64 = -12.0;
const BEZEL_FRACTION: f64 = 0.04;

/// View angles (azimuth right, elevation up), degrees, at a pixel center.
pub fn view_angles(geometry: &ViewGeometry, x: f64, y: f64) -> (f64, f64) {
    let f = geometry.focal_px();
    let az = ((x + 0.5 - 0.5 * geometry.image_width as f64) / f)
        .atan()
        .to_degrees();
    let el = ((0.5 * geometry.image_height as f64 - y - 0.5) / f)
        .atan()
        .to_degrees();
    (az, el)
}

/// Continuous pixel coordinates of a view direction; inverse of [`view_angles`]
/// up to the half-pixel center offset.
pub fn view_pixel(geometry: &ViewGeometry, az: f64, el: f64) -> (f64, f64) {
    let f = geometry.focal_px();
    let x = 0.5 * geometry.image_width as f64 + f * az.to_radians().tan();
    let y = 0.5 * geometry.image_height as f64 - f * el.to_radians().tan();
    (x, y)
}

#[derive(Clone, Copy)]
enum Glyph {
    Landolt(Orientation),
    Sloan(SloanLetter),
}

struct PlacedGlyph {
    screen: usize,
    az: f64,
    el: f64,
    size: f64,
    glyph: Glyph,
}

/// Flat-shaded office: wall, floor, and the layout's screens with a Landolt
/// ring at each screen center.
pub fn render_office_scene(layout: &SceneLayout, geometry: &ViewGeometry) -> (Raster, DepthMap) {
    let glyphs = layout
        .screens
        .iter()
        .enumerate()
        .map(|(i, s)| PlacedGlyph {
            screen: i,
            az: s.lateral_offset,
            el: s.elevation,
            size: 0.4 * s.angular_size.min(s.angular_size * s.aspect),
            glyph: Glyph::Landolt(Orientation::from_index(0).unwrap()),
        })
        .collect::<Vec<_>>();
    rasterize(layout, geometry, &glyphs)
}

/// Office scene showing one matching-task trial. `glyph_deg` is the drawn
/// optotype size in degrees; the table is two rows of eight cells.
pub fn render_trial_scene(
    layout: &SceneLayout,
    geometry: &ViewGeometry,
    trial: &Trial,
    glyph_deg: f64,
) -> (Raster, DepthMap) {
    let mut glyphs = Vec::new();
    let center = |screen: usize| {
        let s = &layout.screens[screen];
        (s.lateral_offset, s.elevation)
    };

    let (az, el) = center(trial.landolt_screen);
    glyphs.push(PlacedGlyph {
        screen: trial.landolt_screen,
        az: az + trial.landolt_placement.offset[0],
        el: el + trial.landolt_placement.offset[1],
        size: glyph_deg,
        glyph: Glyph::Landolt(trial.landolt_orientation),
    });
    let (az, el) = center(trial.sloan_screen);
    glyphs.push(PlacedGlyph {
        screen: trial.sloan_screen,
        az: az + trial.sloan_placement.offset[0],
        el: el + trial.sloan_placement.offset[1],
        size: glyph_deg,
        glyph: Glyph::Sloan(trial.sloan_letter),
    });
    let (az, el) = center(trial.table_screen);
    let cell = 1.4 * glyph_deg;
    for (col, orientation) in Orientation::all().enumerate() {
        let caz = az + (col as f64 - 3.5) * cell;
        glyphs.push(PlacedGlyph {
            screen: trial.table_screen,
            az: caz,
            el: el + 0.5 * cell,
            size: glyph_deg,
            glyph: Glyph::Landolt(orientation),
        });
        glyphs.push(PlacedGlyph {
            screen: trial.table_screen,
            az: caz,
            el: el - 0.5 * cell,
            size: glyph_deg,
            glyph: Glyph::Sloan(trial.table.letter_for(orientation)),
        });
    }
    rasterize(layout, geometry, &glyphs)
}

fn rasterize(
    layout: &SceneLayout,
    geometry: &ViewGeometry,
    glyphs: &[PlacedGlyph],
) -> (Raster, DepthMap) {
    let (w, h) = (geometry.image_width, geometry.image_height);
    let mut image = Raster::new(w as u32, h as u32);
    let mut depth = DepthMap::uniform(w, h, layout.background_distance);

    for y in 0..h {
        for x in 0..w {
            let (az, el) = view_angles(geometry, x as f64, y as f64);
            let hit = layout
                .screens
                .iter()
                .enumerate()
                .filter(|(_, s)| s.contains(az, el))
                .min_by(|a, b| a.1.distance.total_cmp(&b.1.distance));

            let color = match hit {
                None if el < HORIZON_DEG => FLOOR,
                None => WALL,
                Some((i, screen)) => {
                    depth.set(x, y, screen.distance);
                    let (hw, hh) = screen.half_extents();
                    let du = (az - screen.lateral_offset).abs() / hw;
                    let dv = (el - screen.elevation).abs() / hh;
                    if du > 1.0 - BEZEL_FRACTION || dv > 1.0 - BEZEL_FRACTION {
                        BEZEL
                    } else if glyphs.iter().any(|g| g.screen == i && g.covers(az, el)) {
                        INK
                    } else {
                        FACE
                    }
                }
            };
            image.put_pixel(x as u32, y as u32, Rgb(color));
        }
    }
    (image, depth)
}

impl PlacedGlyph {
    fn covers(&self, az: f64, el: f64) -> bool {
        let u = (az - self.az) / self.size;
        let v = (el - self.el) / self.size;
        if u.abs() > 0.5 || v.abs() > 0.5 {
            return false;
        }
        match self.glyph {
            Glyph::Landolt(o) => landolt_covers(o, u, v),
            Glyph::Sloan(l) => sloan_covers(l, u, v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{generate_trial, TaskConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn distinct_depths(depth: &DepthMap) -> BTreeSet<u64> {
        depth.samples().iter().map(|d| d.to_bits()).collect()
    }

    #[test]
    fn default_layout_depths() {
        let layout = SceneLayout::default();
        let (_, depth) = render_office_scene(&layout, &ViewGeometry::default());
        let expected: BTreeSet<u64> = [0.3, 1.0, 6.0, layout.background_distance]
            .iter()
            .map(|d: &f64| d.to_bits())
            .collect();
        assert_eq!(distinct_depths(&depth), expected);
    }

    #[test]
    fn empty_layout_is_background() {
        let layout = SceneLayout {
            screens: vec![],
            ..SceneLayout::default()
        };
        let (_, depth) = render_office_scene(&layout, &ViewGeometry::new(90.0, 64, 48).unwrap());
        assert!(depth
            .samples()
            .iter()
            .all(|&d| d == layout.background_distance));
    }

    #[test]
    fn deterministic() {
        let layout = SceneLayout::default();
        let g = ViewGeometry::new(100.0, 200, 120).unwrap();
        let (a, da) = render_office_scene(&layout, &g);
        let (b, db) = render_office_scene(&layout, &g);
        assert_eq!(a.as_raw(), b.as_raw());
        assert_eq!(da, db);
    }

    #[test]
    fn angles_and_pixels_invert() {
        let g = ViewGeometry::new(100.0, 800, 500).unwrap();
        let (az, el) = view_angles(&g, 123.0, 77.0);
        let (x, y) = view_pixel(&g, az, el);
        assert!((x - 123.5).abs() < 1e-9 && (y - 77.5).abs() < 1e-9);
    }

    #[test]
    fn trial_scene_draws_ink_on_each_screen() {
        let layout = SceneLayout::default();
        let g = ViewGeometry::new(100.0, 800, 500).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trial = generate_trial(&mut rng, 0, &layout, &TaskConfig::default()).unwrap();
        let (img, depth) = render_trial_scene(&layout, &g, &trial, 2.0);
        for (i, screen) in layout.screens.iter().enumerate() {
            let inked = img.enumerate_pixels().any(|(x, y, p)| {
                p.0 == INK && depth.get(x as usize, y as usize) == Some(screen.distance)
            });
            assert!(inked, "no optotype drawn on screen {i}");
        }
    }
}
