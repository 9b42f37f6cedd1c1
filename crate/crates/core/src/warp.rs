//! Rendering of the displaced stimulus and deflection measurements on the
//! target lines.

use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{quantize, RasterImage};
use crate::solver::DisplacementField;
use crate::stimulus::{Axis, TargetLine};

/// Source pixels darker than this are splatted.
pub const DARK_EPS: f64 = 1e-12;

fn bilinear(a: &Array2<f64>, x1: f64, x2: f64) -> f64 {
    let (h, w) = a.dim();
    let j0 = (x1.floor() as usize).min(w - 1);
    let i0 = (x2.floor() as usize).min(h - 1);
    let (fx, fy) = (x1 - j0 as f64, x2 - i0 as f64);
    let j1 = (j0 + 1).min(w - 1);
    let i1 = (i0 + 1).min(h - 1);
    let top = if fx == 0.0 {
        a[[i0, j0]]
    } else {
        a[[i0, j0]] * (1.0 - fx) + a[[i0, j1]] * fx
    };
    if fy == 0.0 {
        return top;
    }
    let bottom = if fx == 0.0 {
        a[[i1, j0]]
    } else {
        a[[i1, j0]] * (1.0 - fx) + a[[i1, j1]] * fx
    };
    top * (1.0 - fy) + bottom * fy
}

/// Bilinear interpolation of `u` at a point of the grid's closed domain.
pub fn sample(u: &DisplacementField, x1: f64, x2: f64) -> Result<(f64, f64)> {
    let (w, h) = (u.width(), u.height());
    let inside = x1 >= 0.0 && x2 >= 0.0 && x1 <= (w - 1) as f64 && x2 <= (h - 1) as f64;
    if !inside {
        return Err(Error::OutOfGrid { x1, x2, width: w, height: h });
    }
    Ok((bilinear(&u.u1, x1, x2), bilinear(&u.u2, x1, x2)))
}

/// `x + ū(x)` for each point.
pub fn displace_points(points: &[(f64, f64)], u: &DisplacementField) -> Result<Vec<(f64, f64)>> {
    points
        .par_iter()
        .map(|&(x1, x2)| sample(u, x1, x2).map(|(a, b)| (x1 + a, x2 + b)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplatStats {
    /// `Σ (1 − I)` over splatted source pixels.
    pub source_mass: f64,
    /// Weight that landed inside the canvas.
    pub deposited_mass: f64,
    /// Weight that left the canvas.
    pub lost_mass: f64,
}

/// Darkness accumulated by forward-splatting every dark source pixel to
/// `x + ū(x)` with bilinear weights. Accumulation runs in row-major source
/// order, so the result does not depend on the thread count.
pub fn splat_darkness(img: &RasterImage, u: &DisplacementField) -> Result<(Array2<f64>, SplatStats)> {
    let (w, h) = (img.width(), img.height());
    if (u.width(), u.height()) != (w, h) {
        return Err(Error::ShapeMismatch(format!(
            "image is {w}x{h}, displacement is {}x{}",
            u.width(),
            u.height()
        )));
    }
    let mut acc = Array2::<f64>::zeros((h, w));
    let mut stats = SplatStats {
        source_mass: 0.0,
        deposited_mass: 0.0,
        lost_mass: 0.0,
    };
    for i in 0..h {
        for j in 0..w {
            let d = 1.0 - img.get(j, i);
            if d <= DARK_EPS {
                continue;
            }
            stats.source_mass += d;
            let (u1, u2) = u.at(j, i);
            let (x, y) = (j as f64 + u1, i as f64 + u2);
            let (jx, iy) = (x.floor(), y.floor());
            let (fx, fy) = (x - jx, y - iy);
            for (di, wy) in [(0, 1.0 - fy), (1, fy)] {
                for (dj, wx) in [(0, 1.0 - fx), (1, fx)] {
                    let wgt = d * wx * wy;
                    if wgt == 0.0 {
                        continue;
                    }
                    let (ti, tj) = (iy + di as f64, jx + dj as f64);
                    if ti >= 0.0 && tj >= 0.0 && (ti as usize) < h && (tj as usize) < w {
                        acc[[ti as usize, tj as usize]] += wgt;
                        stats.deposited_mass += wgt;
                    } else {
                        stats.lost_mass += wgt;
                    }
                }
            }
        }
    }
    Ok((acc, stats))
}

/// Proximal stimulus by forward splatting onto a bright canvas.
pub fn warp_image(img: &RasterImage, u: &DisplacementField) -> Result<RasterImage> {
    let (acc, _) = splat_darkness(img, u)?;
    RasterImage::from_array(acc.mapv(|d| 1.0 - d.min(1.0)))
}

/// Dense alternative: `out(x) = I(x − ū(x))`, bilinear with edge clamping.
pub fn warp_image_backward(img: &RasterImage, u: &DisplacementField) -> Result<RasterImage> {
    let (w, h) = (img.width(), img.height());
    if (u.width(), u.height()) != (w, h) {
        return Err(Error::ShapeMismatch(format!(
            "image is {w}x{h}, displacement is {}x{}",
            u.width(),
            u.height()
        )));
    }
    let a = img.as_array();
    let out = Array2::from_shape_fn((h, w), |(i, j)| {
        let (u1, u2) = u.at(j, i);
        let x = (j as f64 - u1).clamp(0.0, (w - 1) as f64);
        let y = (i as f64 - u2).clamp(0.0, (h - 1) as f64);
        bilinear(a, x, y).clamp(0.0, 1.0)
    });
    RasterImage::from_array(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineDeflection {
    pub axis: Axis,
    pub offset: f64,
    /// `max |ū·n̂|` over the samples.
    pub max_deflection: f64,
    /// `ū·n̂` at the midpoint, positive away from the image center.
    pub mid_deflection: f64,
    /// Least-squares slope of the displaced samples: `dx1/dx2` for vertical
    /// lines, `dx2/dx1` for horizontal ones.
    pub fitted_slope: f64,
    /// RMS distance of the displaced samples from their fitted line, measured
    /// along the line normal.
    pub straightness_residual: f64,
    /// Midpoint normal displacement minus the mean of the two end values;
    /// insensitive to uniform shifts and dilations of the line.
    pub bow: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectionMetrics {
    pub lines: Vec<LineDeflection>,
}

impl DeflectionMetrics {
    pub fn max_deflection(&self) -> f64 {
        self.lines.iter().map(|l| l.max_deflection).fold(0.0, f64::max)
    }
}

/// Sample positions `s` along a line: one per pixel of extent, always
/// including both ends.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn line_parameters(line: &TargetLine) -> Result<Vec<f64>> {
    let (a, b) = line.extent;
    if !(b > a) {
        return Err(Error::EmptyExtent);
    }
    let n = (b - a).floor() as usize;
    let mut s: Vec<f64> = (0..=n).map(|k| a + k as f64).collect();
    if b - s[n] > 1e-9 {
        s.push(b);
    }
    Ok(s)
}

/// Displaced sample points of a target line.
pub fn displaced_line(
    line: &TargetLine,
    center: (f64, f64),
    u: &DisplacementField,
) -> Result<Vec<(f64, f64)>> {
    let pts: Vec<(f64, f64)> = line_parameters(line)?
        .into_iter()
        .map(|s| line.point(center, s))
        .collect();
    displace_points(&pts, u)
}

/// Least-squares fit `y = c + m·x`; returns `(m, c)`.
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let m = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (m, my - m * mx)
}

pub fn line_deflection(
    line: &TargetLine,
    center: (f64, f64),
    u: &DisplacementField,
) -> Result<LineDeflection> {
    let params = line_parameters(line)?;
    let n_hat = line.outward_normal();
    let normal_of = |s: f64| -> Result<f64> {
        let (x1, x2) = line.point(center, s);
        let (a, b) = sample(u, x1, x2)?;
        Ok(a * n_hat.0 + b * n_hat.1)
    };
    let normals = params.iter().map(|&s| normal_of(s)).collect::<Result<Vec<_>>>()?;
    let mid = normal_of(0.5 * (line.extent.0 + line.extent.1))?;
    let max_deflection = normals.iter().fold(mid.abs(), |m, v| m.max(v.abs()));
    let bow = mid - 0.5 * (normals[0] + normals[normals.len() - 1]);

    let moved = displaced_line(line, center, u)?;
    let (along, across): (Vec<f64>, Vec<f64>) = match line.axis {
        Axis::Vertical => moved.iter().map(|&(x1, x2)| (x2, x1)).unzip(),
        Axis::Horizontal => moved.iter().copied().unzip(),
    };
    let (m, c) = fit_line(&along, &across);
    let ss: f64 = along
        .iter()
        .zip(&across)
        .map(|(x, y)| {
            let r = (y - c - m * x) / m.hypot(1.0);
            r * r
        })
        .sum();
    Ok(LineDeflection {
        axis: line.axis,
        offset: line.offset,
        max_deflection,
        mid_deflection: mid,
        fitted_slope: m,
        straightness_residual: (ss / along.len() as f64).sqrt(),
        bow,
        samples: along.len(),
    })
}

pub fn deflection_metrics(
    lines: &[TargetLine],
    center: (f64, f64),
    u: &DisplacementField,
) -> Result<DeflectionMetrics> {
    let lines = lines
        .iter()
        .map(|l| line_deflection(l, center, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(DeflectionMetrics { lines })
}

/// Warped stimulus in black over the undisplaced target lines in red.
pub fn render_overlay(
    warped: &RasterImage,
    lines: &[TargetLine],
    center: (f64, f64),
) -> RgbImage {
    let (w, h) = (warped.width(), warped.height());
    let mut out = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = quantize(warped.get(x as usize, y as usize));
        Rgb([v, v, v])
    });
    for line in lines {
        let Ok(params) = line_parameters(line) else {
            continue;
        };
        for s in params {
            let (x1, x2) = line.point(center, s);
            let (j, i) = (x1.round(), x2.round());
            if j >= 0.0 && i >= 0.0 && (j as usize) < w && (i as usize) < h {
                out.put_pixel(j as u32, i as u32, Rgb([220, 20, 20]));
            }
        }
    }
    out
}

pub fn save_overlay(overlay: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    overlay
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Decode {
                path: path.into(),
                reason: other.to_string(),
            },
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vline(offset: f64, half: f64) -> TargetLine {
        TargetLine {
            axis: Axis::Vertical,
            offset,
            extent: (-half, half),
        }
    }

    #[test]
    fn displacement_examples() {
        let pts = vec![(0.0, 0.0), (3.5, 2.25), (15.0, 15.0)];
        let zero = DisplacementField::zeros(16, 16);
        assert_eq!(displace_points(&pts, &zero).unwrap(), pts);
        let shift = DisplacementField::constant(16, 16, (1.0, 0.0));
        let moved = displace_points(&pts, &shift).unwrap();
        for (a, b) in pts.iter().zip(&moved) {
            assert_eq!((a.0 + 1.0, a.1), *b);
        }
        assert!(matches!(
            displace_points(&[(16.5, 0.0)], &zero),
            Err(Error::OutOfGrid { .. })
        ));
    }

    #[test]
    fn node_values_are_used_exactly() {
        let mut u = DisplacementField::zeros(16, 16);
        u.u1[[4, 7]] = 0.123456789;
        u.u2[[4, 7]] = -2.5;
        assert_eq!(sample(&u, 7.0, 4.0).unwrap(), (0.123456789, -2.5));
    }

    #[test]
    fn blank_and_identity_warps() {
        let blank = RasterImage::constant(20, 20, 1.0).unwrap();
        let u = DisplacementField::constant(20, 20, (0.3, -0.7));
        assert_eq!(warp_image(&blank, &u).unwrap(), blank);
        let mut a = Array2::from_elem((20, 20), 1.0);
        a[[5, 6]] = 0.0;
        a[[9, 2]] = 0.4;
        let img = RasterImage::from_array(a).unwrap();
        let zero = DisplacementField::zeros(20, 20);
        assert_eq!(warp_image(&img, &zero).unwrap(), img);
    }

    #[test]
    fn metrics_examples() {
        let u = DisplacementField::zeros(32, 32);
        let m = line_deflection(&vline(5.0, 10.0), (15.5, 15.5), &u).unwrap();
        assert_eq!(m.max_deflection, 0.0);
        assert_eq!(m.mid_deflection, 0.0);
        assert_eq!(m.fitted_slope, 0.0);
        assert_eq!(m.straightness_residual, 0.0);

        let u = DisplacementField::constant(32, 32, (-0.75, 0.0));
        let m = line_deflection(&vline(-5.0, 10.0), (15.5, 15.5), &u).unwrap();
        assert!((m.mid_deflection - 0.75).abs() < 1e-15);
        assert!(m.straightness_residual < 1e-12);
        assert!(m.bow.abs() < 1e-15);

        let empty = TargetLine {
            axis: Axis::Horizontal,
            offset: 1.0,
            extent: (2.0, 2.0),
        };
        assert!(matches!(
            line_deflection(&empty, (15.5, 15.5), &u),
            Err(Error::EmptyExtent)
        ));
    }

    #[test]
    fn bent_line_has_residual_and_bow() {
        let mut u = DisplacementField::zeros(41, 41);
        for i in 0..41 {
            let s = i as f64 - 20.0;
            u.u1.row_mut(i).fill(1.0 - (s / 20.0).powi(2));
        }
        let m = line_deflection(&vline(10.0, 20.0), (20.0, 20.0), &u).unwrap();
        assert!((m.mid_deflection - 1.0).abs() < 1e-12);
        assert!((m.bow - 1.0).abs() < 1e-12);
        assert!(m.straightness_residual > 0.1);
        assert!(m.fitted_slope.abs() < 1e-12);
    }
}
