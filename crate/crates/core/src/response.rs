//! Lifting of a stimulus to the orientation domain and hypercolumn energy.

use std::sync::Arc;

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::gabor::{GaborBank, GaborFilter};
use crate::raster::RasterImage;

/// Hypercolumn sums at or below this value are treated as featureless no
/// matter how weak the strongest hypercolumn is. It sits well above the
/// roundoff level of the FFT correlation (~1e-16 per sample).
pub const ENERGY_FLOOR_ABS: f64 = 1e-10;
/// Relative part of the featureless threshold, scaled by the largest sum.
pub const ENERGY_FLOOR_REL: f64 = 1e-12;

/// Complex simple-cell outputs `O(x, θ_k)`, indexed `[[k, x2, x1]]`.
#[derive(Debug, Clone)]
pub struct OrientationResponse {
    pub values: Array3<Complex64>,
    pub delta_theta: f64,
}

impl OrientationResponse {
    pub fn n_orientations(&self) -> usize {
        self.values.dim().0
    }

    pub fn height(&self) -> usize {
        self.values.dim().1
    }

    pub fn width(&self) -> usize {
        self.values.dim().2
    }
}

#[derive(Debug, Clone)]
pub struct EnergyField {
    /// `E(x, θ_k) = |O(x, θ_k)|`, indexed `[[k, x2, x1]]`.
    pub values: Array3<f64>,
    /// `Σ_k E(x, θ_k)·Δθ`, indexed `[[x2, x1]]`.
    pub hypercolumn_sums: Array2<f64>,
    pub delta_theta: f64,
}

impl EnergyField {
    pub fn n_orientations(&self) -> usize {
        self.values.dim().0
    }

    /// Featureless threshold `ε_E` for this field.
    pub fn threshold(&self) -> f64 {
        let max = self.hypercolumn_sums.iter().cloned().fold(0.0, f64::max);
        (ENERGY_FLOOR_REL * max).max(ENERGY_FLOOR_ABS)
    }

    /// Index of the most energetic orientation at every pixel (ties go to
    /// the lowest index).
    pub fn argmax(&self) -> Array2<usize> {
        let (n, h, w) = self.values.dim();
        Array2::from_shape_fn((h, w), |(i, j)| {
            let mut best = 0;
            for k in 1..n {
                if self.values[[k, i, j]] > self.values[[best, i, j]] {
                    best = k;
                }
            }
            best
        })
    }
}

/// Half-sample symmetric reflection of index `i` into `0..n` (one fold).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - 1 - i
    } else {
        i
    };
    r as usize
}

fn check_support(image: &RasterImage, bank: &GaborBank) -> Result<usize> {
    let r = bank.params.kernel_radius;
    let needed = 2 * r + 1;
    if image.width() < needed || image.height() < needed {
        return Err(Error::ImageTooSmall {
            width: image.width(),
            height: image.height(),
            needed,
        });
    }
    Ok(r)
}

fn padded(image: &RasterImage, r: usize) -> Array2<f64> {
    let (w, h) = (image.width(), image.height());
    let a = image.as_array();
    Array2::from_shape_fn((h + 2 * r, w + 2 * r), |(i, j)| {
        a[[
            reflect(i as isize - r as isize, h),
            reflect(j as isize - r as isize, w),
        ]]
    })
}

struct Fft2 {
    rows: Arc<dyn Fft<f64>>,
    cols: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn process(&self, a: &mut Array2<Complex64>) {
        let (h, w) = a.dim();
        for mut row in a.rows_mut() {
            let slice = row.as_slice_mut().expect("standard layout");
            self.rows.process(slice);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); h];
        for j in 0..w {
            for i in 0..h {
                col[i] = a[[i, j]];
            }
            self.cols.process(&mut col);
            for i in 0..h {
                a[[i, j]] = col[i];
            }
        }
    }
}

/// Discrete simple-cell response `O(x, θ_k) = Σ_η I(x + η)·k_θ(η)` over the
/// kernel support, with half-sample symmetric padding at the borders.
///
/// Evaluated as a circular correlation on the padded grid, which is exact
/// because the output window never wraps.
pub fn lift(image: &RasterImage, bank: &GaborBank) -> Result<OrientationResponse> {
    let r = check_support(image, bank)?;
    let (w, h) = (image.width(), image.height());
    let p = padded(image, r);
    let (mh, mw) = p.dim();
    let mut planner = FftPlanner::<f64>::new();
    let forward = Fft2 {
        rows: planner.plan_fft_forward(mw),
        cols: planner.plan_fft_forward(mh),
    };
    let inverse = Fft2 {
        rows: planner.plan_fft_inverse(mw),
        cols: planner.plan_fft_inverse(mh),
    };
    let mut spectrum = p.mapv(|v| Complex64::new(v, 0.0));
    forward.process(&mut spectrum);
    let scale = 1.0 / (mh * mw) as f64;

    let slices: Vec<Array2<Complex64>> = bank
        .filters
        .par_iter()
        .map(|f| {
            let mut g = Array2::<Complex64>::zeros((mh, mw));
            let ri = r as isize;
            for a2 in -ri..=ri {
                for a1 in -ri..=ri {
                    let i = (-a2).rem_euclid(mh as isize) as usize;
                    let j = (-a1).rem_euclid(mw as isize) as usize;
                    g[[i, j]] = f.at(a1, a2);
                }
            }
            forward.process(&mut g);
            g.zip_mut_with(&spectrum, |a, b| *a *= *b);
            inverse.process(&mut g);
            g.slice(ndarray::s![r..r + h, r..r + w]).mapv(|v| v * scale)
        })
        .collect();

    let mut values = Array3::<Complex64>::zeros((bank.len(), h, w));
    for (k, s) in slices.into_iter().enumerate() {
        values.index_axis_mut(Axis(0), k).assign(&s);
    }
    Ok(OrientationResponse {
        values,
        delta_theta: bank.params.delta_theta(),
    })
}

fn direct_slice(p: &Array2<f64>, f: &GaborFilter, w: usize, h: usize) -> Array2<Complex64> {
    let r = f.radius as isize;
    Array2::from_shape_fn((h, w), |(i, j)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for a2 in -r..=r {
            for a1 in -r..=r {
                let v = p[[(i as isize + r + a2) as usize, (j as isize + r + a1) as usize]];
                acc += v * f.at(a1, a2);
            }
        }
        acc
    })
}

/// Reference implementation of [`lift`] by explicit summation. Quadratic in
/// the kernel side; meant for checking the fast path on small images.
pub fn lift_direct(image: &RasterImage, bank: &GaborBank) -> Result<OrientationResponse> {
    let r = check_support(image, bank)?;
    let (w, h) = (image.width(), image.height());
    let p = padded(image, r);
    let mut values = Array3::<Complex64>::zeros((bank.len(), h, w));
    for (k, f) in bank.filters.iter().enumerate() {
        values
            .index_axis_mut(Axis(0), k)
            .assign(&direct_slice(&p, f, w, h));
    }
    Ok(OrientationResponse {
        values,
        delta_theta: bank.params.delta_theta(),
    })
}

pub fn energy(resp: &OrientationResponse) -> EnergyField {
    let values = resp.values.mapv(|z| z.norm());
    let hypercolumn_sums = values.sum_axis(Axis(0)) * resp.delta_theta;
    EnergyField {
        values,
        hypercolumn_sums,
        delta_theta: resp.delta_theta,
    }
}

/// Discrete selection probabilities `w(x, θ_k)` that sum to one over `k`.
///
/// Where the hypercolumn is featureless (sum at or below
/// [`EnergyField::threshold`]) every orientation gets `1/n`.
pub fn normalized_weights(e: &EnergyField) -> Array3<f64> {
    let (n, h, w) = e.values.dim();
    let eps = e.threshold();
    let mut out = Array3::<f64>::zeros((n, h, w));
    for i in 0..h {
        for j in 0..w {
            let total: f64 = (0..n).map(|k| e.values[[k, i, j]]).sum();
            if e.hypercolumn_sums[[i, j]] > eps {
                for k in 0..n {
                    out[[k, i, j]] = e.values[[k, i, j]] / total;
                }
            } else {
                for k in 0..n {
                    out[[k, i, j]] = 1.0 / n as f64;
                }
            }
        }
    }
    out
}
