//! Reference computations written independently of `goi_core`'s fast paths,
//! used by the acceptance suite.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use goi_core::raster::RasterImage;
use ndarray::Array2;

/// 5-point Laplacian with reflected ghost nodes, by clamped indexing.
pub fn stencil_laplacian(u: &Array2<f64>) -> Array2<f64> {
    let (h, w) = u.dim();
    let at = |i: isize, j: isize| {
        let i = i.clamp(0, h as isize - 1) as usize;
        let j = j.clamp(0, w as isize - 1) as usize;
        u[[i, j]]
    };
    Array2::from_shape_fn((h, w), |(i, j)| {
        let (i, j) = (i as isize, j as isize);
        at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1) - 4.0 * at(i, j)
    })
}

/// Relative residual `‖Δ_h u − (f − mean f)‖ / ‖f − mean f‖`.
pub fn relative_residual(u: &Array2<f64>, f: &Array2<f64>) -> f64 {
    let ft = f - f.mean().unwrap_or(0.0);
    let r = stencil_laplacian(u) - &ft;
    (r.mapv(|v| v * v).sum() / ft.mapv(|v| v * v).sum()).sqrt()
}

/// `u*(x) = cos(π x1 / n) cos(π x2 / n)` at cell centers and its exact
/// continuous Laplacian.
pub fn manufactured(n: usize) -> (Array2<f64>, Array2<f64>) {
    let k = PI / n as f64;
    let exact = Array2::from_shape_fn((n, n), |(i, j)| {
        (k * (j as f64 + 0.5)).cos() * (k * (i as f64 + 0.5)).cos()
    });
    let lap = &exact * (-2.0 * k * k);
    (exact, lap)
}

/// Root-mean-square difference.
pub fn rms(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    ((a - b).mapv(|v| v * v).sum() / a.len() as f64).sqrt()
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Dark straight line through the center of an `n × n` canvas along
/// `(cos θ, sin θ)`, anti-aliased with a one-pixel coverage ramp.
pub fn line_image(n: usize, theta: f64, thickness: f64) -> RasterImage {
    let c = (n as f64 - 1.0) / 2.0;
    let (s, co) = theta.sin_cos();
    RasterImage::from_array(Array2::from_shape_fn((n, n), |(i, j)| {
        let (x, y) = (j as f64 - c, i as f64 - c);
        let d = (x * s - y * co).abs();
        1.0 - (thickness / 2.0 + 0.5 - d).clamp(0.0, 1.0)
    }))
    .expect("line image is valid")
}

/// Distance between two undirected orientations.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Worst violation of `u1(x) = −u1(x̄)` and `u2(x) = u2(x̄)`, `x̄` the
/// reflection about the vertical center axis.
pub fn mirror_defect(u1: &Array2<f64>, u2: &Array2<f64>) -> f64 {
    let (h, w) = u1.dim();
    let mut err: f64 = 0.0;
    for i in 0..h {
        for j in 0..w {
            err = err
                .max((u1[[i, j]] + u1[[i, w - 1 - j]]).abs())
                .max((u2[[i, j]] - u2[[i, w - 1 - j]]).abs());
        }
    }
    err
}

/// Worst violation of `u'(x) = R u(R⁻¹x)` for `R` the counter-clockwise
/// quarter turn in the `(x1, x2)` frame on a square grid.
pub fn quarter_turn_defect(u1: &Array2<f64>, u2: &Array2<f64>, r1: &Array2<f64>, r2: &Array2<f64>) -> f64 {
    let (h, w) = u1.dim();
    let mut err: f64 = 0.0;
    for i in 0..h {
        for j in 0..w {
            let (si, sj) = (h - 1 - j, i);
            err = err
                .max((r1[[i, j]] + u2[[si, sj]]).abs())
                .max((r2[[i, j]] - u1[[si, sj]]).abs());
        }
    }
    err
}

/// Contents of every JSON and CSV file under `dir`, keyed by relative path.
pub fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = fs::read_dir(&d) else {
            continue;
        };
        for entry in entries.flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "csv")) {
                let rel = p.strip_prefix(dir).expect("under dir").to_string_lossy().into_owned();
                if let Ok(bytes) = fs::read(&p) {
                    out.insert(rel, bytes);
                }
            }
        }
    }
    out
}
