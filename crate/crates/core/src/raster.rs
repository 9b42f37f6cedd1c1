//! Grayscale raster images and their PGM / PNG encodings.
//!
//! Pixel `(row, col)` is addressed as `(x2, x1)`: the first image axis
//! `x1` runs along columns (left to right) and `x2` along rows (top to
//! bottom). Intensities live in `[0, 1]`, dark features are `0`.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use ndarray::Array2;

use crate::error::{Error, Result};

/// Smallest accepted side length.
pub const MIN_SIDE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    data: Array2<f64>,
}

impl RasterImage {
    /// Wrap a `height x width` array, checking the size and range invariants.
    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        let (h, w) = data.dim();
        if w < MIN_SIDE || h < MIN_SIDE {
            return Err(Error::InvalidStimulus(format!(
                "image is {w}x{h}, both sides must be at least {MIN_SIDE}"
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidStimulus(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self { data })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_array(Array2::from_elem((height, width), value))
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    /// Intensity at column `x1`, row `x2`.
    pub fn get(&self, x1: usize, x2: usize) -> f64 {
        self.data[[x2, x1]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Dark-on-bright ⇄ bright-on-dark.
    pub fn inverted(&self) -> Self {
        Self {
            data: self.data.mapv(|v| 1.0 - v),
        }
    }

    /// Reflection about the vertical center axis (column `j` ↔ `W-1-j`).
    pub fn mirrored(&self) -> Self {
        Self {
            data: mirror_columns(&self.data),
        }
    }

    /// Counter-clockwise quarter turn in the `(x1, x2)` frame, about the
    /// image center. Only square images keep their footprint.
    pub fn rotated_quarter(&self) -> Self {
        Self {
            data: rotate_quarter(&self.data),
        }
    }

    /// Quantized 8-bit copy.
    pub fn to_luma8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }
}

pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Column reflection `out[i][j] = a[i][W-1-j]`.
pub fn mirror_columns<T: Clone>(a: &Array2<T>) -> Array2<T> {
    let w = a.ncols();
    Array2::from_shape_fn(a.dim(), |(i, j)| a[[i, w - 1 - j]].clone())
}

/// Quarter turn `out[i][j] = a[N-1-j][i]`, i.e. `out(x) = a(R⁻¹x)` with
/// `R` the rotation by `+π/2` in the `(x1, x2)` frame.
pub fn rotate_quarter<T: Clone>(a: &Array2<T>) -> Array2<T> {
    let (h, w) = a.dim();
    Array2::from_shape_fn((w, h), |(i, j)| a[[h - 1 - j, i]].clone())
}

fn is_pgm(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm")
    )
}

/// Write `img` as binary PGM (`.pgm`) or 8-bit grayscale PNG (anything else).
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width(), img.height());
    let bytes = img.to_luma8();
    if is_pgm(path) {
        let mut out = Vec::with_capacity(bytes.len() + 32);
        write!(out, "P5\n{w} {h}\n255\n").expect("writing to a Vec cannot fail");
        out.extend_from_slice(&bytes);
        fs::write(path, out).map_err(|e| Error::io(path, e))
    } else {
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(w as u32, h as u32, bytes).expect("buffer size matches");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Decode {
                path: path.into(),
                reason: e.to_string(),
            })
    }
}

/// Read an 8-bit PGM (P5) or PNG file.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, bytes) = if raw.starts_with(b"P5") {
        decode_pgm(&raw, path)?
    } else {
        decode_png(&raw, path)?
    };
    let data = Array2::from_shape_vec((h, w), bytes.iter().map(|&b| b as f64 / 255.0).collect())
        .expect("decoded buffer matches header");
    RasterImage::from_array(data)
}

fn decode_png(raw: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let decoded = image::load_from_memory_with_format(raw, image::ImageFormat::Png).map_err(|e| {
        Error::Decode {
            path: path.into(),
            reason: e.to_string(),
        }
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let luma = match decoded {
        DynamicImage::ImageLuma8(b) => b,
        d @ (DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_)) => d.to_luma8(),
        other => {
            return Err(Error::UnsupportedBitDepth {
                path: path.into(),
                detail: format!("{:?}", other.color()),
            })
        }
    };
    Ok((w, h, luma.into_raw()))
}

fn decode_pgm(raw: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |reason: &str| Error::Decode {
        path: path.into(),
        reason: reason.to_string(),
    };
    // Header: magic, width, height, maxval, separated by whitespace with
    // optional `#` comments, then exactly one whitespace byte.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match raw.get(pos) {
                Some(b'#') => {
                    while raw.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while raw.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&raw[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("malformed header field"))?;
    }
    if !raw.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing separator after header"));
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedBitDepth {
            path: path.into(),
            detail: format!("maxval {maxval}, only 255 is supported"),
        });
    }
    let body = &raw[pos..];
    if body.len() < w * h {
        return Err(bad(&format!(
            "truncated pixel data: {} of {} bytes",
            body.len(),
            w * h
        )));
    }
    Ok((w, h, body[..w * h].to_vec()))
}
