//! Image and depth file formats.
//!
//! Depth maps are stored as grayscale PFM (meters, bottom row first, negative
//! scale for little-endian) or, as a fallback, 16-bit PNG in millimeters where
//! zero marks an invalid pixel.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use super::{BlurField, DepthMap, Raster, RenderError};

fn io_err(path: &Path, source: std::io::Error) -> RenderError {
    RenderError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> RenderError {
    RenderError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn load_png(path: &Path) -> Result<Raster, RenderError> {
    let img = image::open(path).map_err(|source| RenderError::Image {
        path: path.display().to_string(),
        source,
    })?;
    Ok(img.to_rgb32f())
}

/// Writes an 8-bit RGB PNG, clamping channels to [0, 1].
pub fn save_png(image: &Raster, path: &Path) -> Result<(), RenderError> {
    DynamicImage::ImageRgb32F(image.clone())
        .to_rgb8()
        .save(path)
        .map_err(|source| RenderError::Image {
            path: path.display().to_string(),
            source,
        })
}

pub fn encode_pfm(width: usize, height: usize, values: &[f32]) -> Vec<u8> {
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    for row in (0..height).rev() {
        for v in &values[row * width..(row + 1) * width] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parses a grayscale PFM into top-row-first samples.
pub fn decode_pfm(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>), String> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PFM header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?);
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0] != "Pf" {
        return Err(format!(
            "expected grayscale PFM magic 'Pf', found {:?}",
            fields[0]
        ));
    }
    let width: usize = fields[1].parse().map_err(|_| "bad PFM width")?;
    let height: usize = fields[2].parse().map_err(|_| "bad PFM height")?;
    let scale: f32 = fields[3].parse().map_err(|_| "bad PFM scale")?;
    let little = scale < 0.0;
    let need = width * height * 4;
    let data = bytes.get(pos..pos + need).ok_or("truncated PFM raster")?;
    let mut values = vec![0.0f32; width * height];
    for (i, chunk) in data.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row, col) = (height - 1 - i / width, i % width);
        values[row * width + col] = v;
    }
    Ok((width, height, values))
}

pub fn write_depth_pfm(depth: &DepthMap, path: &Path) -> Result<(), RenderError> {
    let values: Vec<f32> = depth
        .samples()
        .iter()
        .map(|d| if d.is_nan() { 0.0 } else { *d as f32 })
        .collect();
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&encode_pfm(depth.width(), depth.height(), &values))
        .map_err(|e| io_err(path, e))
}

/// Reads a depth map from `.pfm` (meters) or 16-bit `.png` (millimeters).
pub fn load_depth(path: &Path) -> Result<DepthMap, RenderError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pfm") => {
            let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
            let (w, h, values) = decode_pfm(&bytes).map_err(|m| format_err(path, m))?;
            let depths = values
                .into_iter()
                .map(|v| {
                    if v.is_finite() && v > 0.0 {
                        v as f64
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            DepthMap::from_meters(w, h, depths)
        }
        Some("png") => {
            let img = image::open(path).map_err(|source| RenderError::Image {
                path: path.display().to_string(),
                source,
            })?;
            let DynamicImage::ImageLuma16(gray) = img else {
                return Err(format_err(
                    path,
                    "depth PNG must be 16-bit grayscale (millimeters)",
                ));
            };
            let (w, h) = (gray.width() as usize, gray.height() as usize);
            let depths = gray
                .into_raw()
                .into_iter()
                .map(|mm| {
                    if mm == 0 {
                        f64::NAN
                    } else {
                        mm as f64 / 1000.0
                    }
                })
                .collect();
            DepthMap::from_meters(w, h, depths)
        }
        _ => Err(format_err(
            path,
            "unsupported depth format (expected .pfm or .png)",
        )),
    }
}

/// Writes a 16-bit PNG depth map in millimeters (saturating at 65.535 m).
pub fn write_depth_png16(depth: &DepthMap, path: &Path) -> Result<(), RenderError> {
    let raw: Vec<u16> = depth
        .samples()
        .iter()
        .map(|d| {
            if d.is_nan() {
                0
            } else {
                (d * 1000.0).round().clamp(1.0, u16::MAX as f64) as u16
            }
        })
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, raw)
            .expect("buffer sized to depth map");
    img.save(path).map_err(|source| RenderError::Image {
        path: path.display().to_string(),
        source,
    })
}

/// Debug dump of a blur field: major axis in pixels as a PFM heatmap.
pub fn write_field_heatmap(field: &BlurField, path: &Path) -> Result<(), RenderError> {
    let values: Vec<f32> = field.cells().iter().map(|c| c.major_px as f32).collect();
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&encode_pfm(field.width(), field.height(), &values))
        .map_err(|e| io_err(path, e))
}
