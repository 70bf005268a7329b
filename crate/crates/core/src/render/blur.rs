use rayon::prelude::*;

use super::{BlurField, PixelBlur, Raster, RenderError};

const EDGE_EPS: f64 = 1e-9;

/// Elliptical flat kernel, queried one row offset at a time.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EllipseKernel {
    a_coef: f64,
    b_cross: f64,
    c_coef: f64,
    reach_y: isize,
}

impl EllipseKernel {
    /// `None` when the blur is below one pixel and the kernel collapses to identity.
    pub(crate) fn new(blur: PixelBlur) -> Option<Self> {
        if !(blur.major_px >= 1.0) {
            return None;
        }
        let a = 0.5 * blur.major_px;
        let b = (0.5 * blur.minor_px).max(0.5).min(a);
        let (s, c) = blur.orientation.to_radians().sin_cos();
        let (ia2, ib2) = (1.0 / (a * a), 1.0 / (b * b));
        let half_height = (a * a * s * s + b * b * c * c).sqrt();
        Some(Self {
            a_coef: c * c * ia2 + s * s * ib2,
            b_cross: 2.0 * c * s * (ia2 - ib2),
            c_coef: s * s * ia2 + c * c * ib2,
            reach_y: (half_height + EDGE_EPS).floor() as isize,
        })
    }

    pub(crate) fn reach_y(&self) -> isize {
        self.reach_y
    }

    /// Inclusive horizontal span of pixel offsets inside the ellipse at row
    /// offset `dy` (image rows grow downward).
    pub(crate) fn span(&self, dy: isize) -> Option<(isize, isize)> {
        let ey = -(dy as f64);
        let a = self.a_coef;
        let b = self.b_cross * ey;
        let c = self.c_coef * ey * ey - 1.0;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        let lo = ((-b - root) / (2.0 * a) - EDGE_EPS).ceil() as isize;
        let hi = ((-b + root) / (2.0 * a) + EDGE_EPS).floor() as isize;
        (lo <= hi).then_some((lo, hi))
    }
}

/// Spatially varying gather blur with a flat elliptical kernel per output pixel.
///
/// Each output pixel is the mean of the in-bounds source pixels inside its
/// ellipse. Pixels whose blur is under one pixel are copied unchanged.
pub fn apply_blur(image: &Raster, field: &BlurField) -> Result<Raster, RenderError> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if (field.width(), field.height()) != (w, h) {
        return Err(RenderError::DimensionMismatch {
            what: "blur field",
            got: (field.width(), field.height()),
            expected: (w, h),
        });
    }
    let src = image.as_raw();
    let stride = (w + 1) * 3;

    // per-row prefix sums, accumulated in f64 so a constant row sums exactly
    let mut prefix = vec![0.0f64; h * stride];
    prefix
        .par_chunks_mut(stride)
        .zip(src.par_chunks(w * 3))
        .for_each(|(p, row)| {
            for x in 0..w {
                for ch in 0..3 {
                    p[(x + 1) * 3 + ch] = p[x * 3 + ch] + row[x * 3 + ch] as f64;
                }
            }
        });

    let mut out = vec![0.0f32; w * h * 3];
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let px = x * 3;
            let Some(kernel) = EllipseKernel::new(field.at(x, y)) else {
                row[px..px + 3].copy_from_slice(&src[(y * w + x) * 3..(y * w + x) * 3 + 3]);
                continue;
            };
            let mut sum = [0.0f64; 3];
            let mut count = 0usize;
            for dy in -kernel.reach_y()..=kernel.reach_y() {
                let yy = y as isize + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                let Some((lo, hi)) = kernel.span(dy) else {
                    continue;
                };
                let lo = (x as isize + lo).max(0);
                let hi = (x as isize + hi).min(w as isize - 1);
                if lo > hi {
                    continue;
                }
                let (lo, hi) = (lo as usize, hi as usize);
                count += hi - lo + 1;
                let p = &prefix[yy as usize * stride..];
                for ch in 0..3 {
                    sum[ch] += p[(hi + 1) * 3 + ch] - p[lo * 3 + ch];
                }
            }
            let n = count as f64;
            for ch in 0..3 {
                row[px + ch] = (sum[ch] / n) as f32;
            }
        }
    });

    Ok(Raster::from_raw(w as u32, h as u32, out).expect("buffer sized to image"))
}
