//! Energy-polarized cometric `p⁻¹` and its regularized inverse `p`.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 2e-2;
pub const DEFAULT_EIG_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorParams {
    pub gamma: f64,
    /// Floor on the eigenvalues of the unit-trace cometric `γ·p⁻¹`.
    pub eig_floor: f64,
}

impl Default for TensorParams {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            eig_floor: DEFAULT_EIG_FLOOR,
        }
    }
}

impl TensorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "gamma {} must be positive",
                self.gamma
            )));
        }
        if !(self.eig_floor > 0.0 && self.eig_floor < 0.5) {
            return Err(Error::InvalidParams(format!(
                "eig_floor {} must lie in (0, 0.5)",
                self.eig_floor
            )));
        }
        Ok(())
    }
}

/// Per-pixel symmetric 2×2 tensors `[t11, t12; t12, t22]`, indexed `[[x2, x1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub t11: Array2<f64>,
    pub t12: Array2<f64>,
    pub t22: Array2<f64>,
}

impl SymTensorField {
    pub fn constant(width: usize, height: usize, t: [f64; 3]) -> Self {
        Self {
            t11: Array2::from_elem((height, width), t[0]),
            t12: Array2::from_elem((height, width), t[1]),
            t22: Array2::from_elem((height, width), t[2]),
        }
    }

    pub fn width(&self) -> usize {
        self.t11.ncols()
    }

    pub fn height(&self) -> usize {
        self.t11.nrows()
    }

    /// `[t11, t12, t22]` at column `x1`, row `x2`.
    pub fn at(&self, x1: usize, x2: usize) -> [f64; 3] {
        [self.t11[[x2, x1]], self.t12[[x2, x1]], self.t22[[x2, x1]]]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            t11: &self.t11 * c,
            t12: &self.t12 * c,
            t22: &self.t22 * c,
        }
    }
}

/// Spectral data of one symmetric 2×2 tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Direction of the principal eigenvector in `[0, π)`.
    pub angle: f64,
    pub degenerate: bool,
}

/// Closed-form eigendecomposition, `λ1 ≥ λ2`.
pub fn eigen_sym(t: [f64; 3]) -> Eigen {
    let [a, b, d] = t;
    let mean = 0.5 * (a + d);
    let disc = (0.5 * (a - d)).hypot(b);
    let scale = a.abs().max(d.abs()).max(b.abs());
    let degenerate = disc <= 1e-12 * scale;
    let angle = if degenerate {
        0.0
    } else {
        let phi = 0.5 * (2.0 * b).atan2(a - d);
        if phi < 0.0 {
            phi + PI
        } else {
            phi
        }
    };
    Eigen {
        lambda1: mean + disc,
        lambda2: mean - disc,
        angle,
        degenerate,
    }
}

/// `p⁻¹(x) = γ⁻¹ Σ_k w(x, θ_k)·P_{θ_k}` with `P_θ` the projector on
/// `(cos θ, sin θ)` and `θ_k = kπ/n`. `weights` is indexed `[[k, x2, x1]]`
/// and must sum to one over `k`.
pub fn cometric(weights: &Array3<f64>, params: &TensorParams) -> Result<SymTensorField> {
    params.validate()?;
    let (n, h, w) = weights.dim();
    let trig: Vec<(f64, f64, f64)> = (0..n)
        .map(|k| {
            let (s, c) = (k as f64 * PI / n as f64).sin_cos();
            (c * c, s * c, s * s)
        })
        .collect();
    let inv_gamma = 1.0 / params.gamma;
    let mut out = SymTensorField::constant(w, h, [0.0; 3]);
    for i in 0..h {
        for j in 0..w {
            let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
            for (k, &(cc, sc, ss)) in trig.iter().enumerate() {
                let wk = weights[[k, i, j]];
                a += wk * cc;
                b += wk * sc;
                d += wk * ss;
            }
            out.t11[[i, j]] = a * inv_gamma;
            out.t12[[i, j]] = b * inv_gamma;
            out.t22[[i, j]] = d * inv_gamma;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InversionStats {
    /// Pixels whose minor cometric eigenvalue was raised to the floor.
    pub clamped_pixels: usize,
    /// Smallest minor eigenvalue of `γ·p⁻¹` before clamping.
    pub min_lambda2: f64,
}

/// Metric `p = γ Σ λᵢ⁻¹ vᵢvᵢᵀ` where `γ·p⁻¹ = Σ λᵢ vᵢvᵢᵀ` and each `λᵢ` is
/// first raised to `eig_floor`.
pub fn invert_to_metric(
    cometric: &SymTensorField,
    params: &TensorParams,
) -> Result<(SymTensorField, InversionStats)> {
    params.validate()?;
    let (w, h) = (cometric.width(), cometric.height());
    let mut out = SymTensorField::constant(w, h, [0.0; 3]);
    let mut stats = InversionStats {
        clamped_pixels: 0,
        min_lambda2: f64::INFINITY,
    };
    let g = params.gamma;
    for i in 0..h {
        for j in 0..w {
            let t = cometric.at(j, i).map(|v| v * g);
            let e = eigen_sym(t);
            stats.min_lambda2 = stats.min_lambda2.min(e.lambda2);
            if e.lambda2 < params.eig_floor {
                stats.clamped_pixels += 1;
            }
            let l1 = e.lambda1.max(params.eig_floor);
            let l2 = e.lambda2.max(params.eig_floor);
            let (s, c) = e.angle.sin_cos();
            let (i1, i2) = (1.0 / l1, 1.0 / l2);
            out.t11[[i, j]] = g * (i1 * c * c + i2 * s * s);
            out.t12[[i, j]] = g * (i1 - i2) * c * s;
            out.t22[[i, j]] = g * (i1 * s * s + i2 * c * c);
        }
    }
    Ok((out, stats))
}

#[derive(Debug, Clone)]
pub struct PrincipalField {
    pub lambda1: Array2<f64>,
    pub lambda2: Array2<f64>,
    pub angle: Array2<f64>,
    pub degenerate: Array2<bool>,
}

pub fn principal_directions(t: &SymTensorField) -> PrincipalField {
    let (w, h) = (t.width(), t.height());
    let mut out = PrincipalField {
        lambda1: Array2::zeros((h, w)),
        lambda2: Array2::zeros((h, w)),
        angle: Array2::zeros((h, w)),
        degenerate: Array2::from_elem((h, w), false),
    };
    Zip::indexed(&mut out.lambda1)
        .and(&mut out.lambda2)
        .and(&mut out.angle)
        .and(&mut out.degenerate)
        .for_each(|(i, j), l1, l2, a, d| {
            let e = eigen_sym(t.at(j, i));
            *l1 = e.lambda1;
            *l2 = e.lambda2;
            *a = e.angle;
            *d = e.degenerate;
        });
    out
}
