//! Complex Gabor receptive profiles and the discrete orientation bank.
//!
//! The mother profile is
//!
//! ```text
//! ψ₀(ξ₁, ξ₂) = 1/(4πσ²) · exp(-(ξ₁² + ξ₂²/4) / (2σ²)) · exp(i·2b̄ξ₂/σ)
//! ```
//!
//! and the cell tuned to position `x` and orientation `θ` samples it through
//! the inverse roto-translation, `ψ_{x,θ}(ξ) = ψ₀(R_θ⁻¹(ξ − x))`. The
//! oscillation runs along the rotated `ξ₂` axis, so `θ` labels the
//! orientation of the contour a cell prefers.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio between σ and the wavelength of the carrier.
pub const DEFAULT_B_BAR: f64 = 0.56;
pub const DEFAULT_ORIENTATIONS: usize = 32;
/// Fraction of the envelope's L¹ mass a truncated kernel must keep.
pub const MASS_FRACTION: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaborParams {
    pub sigma: f64,
    pub b_bar: f64,
    pub n_orientations: usize,
    /// Half-width of the sampled square support.
    pub kernel_radius: usize,
    /// Remove the carrier's DC leak (see [`GaborFilter::dc_offset`]).
    pub dc_compensation: bool,
}

impl GaborParams {
    /// Default bank at scale `sigma`, with the smallest support meeting the
    /// mass bound.
    pub fn new(sigma: f64) -> Result<Self> {
        Self::with_orientations(sigma, DEFAULT_ORIENTATIONS)
    }

    pub fn with_orientations(sigma: f64, n_orientations: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma {sigma} must be positive")));
        }
        if n_orientations < 2 {
            return Err(Error::InvalidParams(format!(
                "n_orientations {n_orientations} must be at least 2"
            )));
        }
        let params = Self {
            sigma,
            b_bar: DEFAULT_B_BAR,
            n_orientations,
            kernel_radius: minimal_radius(sigma, n_orientations),
            dc_compensation: true,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "sigma {} must be positive",
                self.sigma
            )));
        }
        if !(self.b_bar > 0.0 && self.b_bar.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "b_bar {} must be positive",
                self.b_bar
            )));
        }
        if self.n_orientations < 2 {
            return Err(Error::InvalidParams(format!(
                "n_orientations {} must be at least 2",
                self.n_orientations
            )));
        }
        if (self.kernel_radius as f64) < 3.0 * self.sigma {
            return Err(Error::InvalidParams(format!(
                "kernel_radius {} is below 3σ = {}",
                self.kernel_radius,
                3.0 * self.sigma
            )));
        }
        Ok(())
    }

    /// `θ_k = kπ/n`.
    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * PI / self.n_orientations as f64
    }

    pub fn delta_theta(&self) -> f64 {
        PI / self.n_orientations as f64
    }

    fn carrier_frequency(&self) -> f64 {
        2.0 * self.b_bar / self.sigma
    }
}

fn envelope(e1: f64, e2: f64, sigma: f64) -> f64 {
    (-(e1 * e1 + e2 * e2 / 4.0) / (2.0 * sigma * sigma)).exp() / (4.0 * PI * sigma * sigma)
}

/// The mother profile ψ₀ evaluated at `(ξ₁, ξ₂)`.
pub fn mother_profile(xi1: f64, xi2: f64, params: &GaborParams) -> Complex64 {
    let phase = params.carrier_frequency() * xi2;
    envelope(xi1, xi2, params.sigma) * Complex64::new(phase.cos(), phase.sin())
}

/// A point `(x₁, x₂, θ)` of the roto-translation group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x1: f64,
    pub x2: f64,
    pub theta: f64,
}

/// `A_{x,θ}(ξ) = x + R_θ ξ`.
pub fn apply_group_action(pose: Pose, xi: (f64, f64)) -> (f64, f64) {
    let (s, c) = pose.theta.sin_cos();
    (pose.x1 + c * xi.0 - s * xi.1, pose.x2 + s * xi.0 + c * xi.1)
}

/// `A⁻¹_{x,θ}(p) = R_θ⁻¹ (p − x)`.
pub fn inverse_group_action(pose: Pose, p: (f64, f64)) -> (f64, f64) {
    let (s, c) = pose.theta.sin_cos();
    let (d1, d2) = (p.0 - pose.x1, p.1 - pose.x2);
    (c * d1 + s * d2, -s * d1 + c * d2)
}

/// One oriented filter, sampled at integer offsets `ξ ∈ [-r, r]²`.
#[derive(Debug, Clone)]
pub struct GaborFilter {
    pub theta: f64,
    pub radius: usize,
    /// Indexed `[[r + ξ₂, r + ξ₁]]`.
    pub kernel: Array2<Complex64>,
    /// Constant `κ` subtracted from the carrier under the envelope, chosen so
    /// the sampled kernel sums to zero. Zero when compensation is off.
    pub dc_offset: Complex64,
}

impl GaborFilter {
    pub fn at(&self, xi1: isize, xi2: isize) -> Complex64 {
        let r = self.radius as isize;
        self.kernel[[(r + xi2) as usize, (r + xi1) as usize]]
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn l1_mass(&self) -> f64 {
        self.kernel.iter().map(|v| v.norm()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct GaborBank {
    pub params: GaborParams,
    pub filters: Vec<GaborFilter>,
}

impl GaborBank {
    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.filters.iter().map(|f| f.theta).collect()
    }
}

/// Envelope mass per Chebyshev ring `max(|ξ₁|, |ξ₂|) = k`, for `k ≤ reach`.
fn ring_masses(sigma: f64, theta: f64, reach: usize) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    let r = reach as isize;
    let mut rings = vec![0.0; reach + 1];
    for xi2 in -r..=r {
        for xi1 in -r..=r {
            let (a, b) = (xi1 as f64, xi2 as f64);
            let ring = xi1.unsigned_abs().max(xi2.unsigned_abs());
            rings[ring] += envelope(c * a + s * b, -s * a + c * b, sigma);
        }
    }
    rings
}

fn reference_reach(sigma: f64) -> usize {
    // The long envelope axis has standard deviation 2σ; 14σ is seven of them.
    (14.0 * sigma).ceil() as usize
}

/// Fraction of the envelope's L¹ mass inside `[-radius, radius]²` at angle `theta`.
pub fn truncated_mass_fraction(sigma: f64, theta: f64, radius: usize) -> f64 {
    let reach = reference_reach(sigma).max(radius);
    let rings = ring_masses(sigma, theta, reach);
    let total: f64 = rings.iter().sum();
    rings[..=radius].iter().sum::<f64>() / total
}

/// Smallest radius `≥ ⌈3σ⌉` whose square support keeps [`MASS_FRACTION`]
/// of the envelope mass at every bank orientation.
pub fn minimal_radius(sigma: f64, n_orientations: usize) -> usize {
    let reach = reference_reach(sigma);
    let lower = (3.0 * sigma).ceil() as usize;
    let mut needed = lower;
    for k in 0..n_orientations {
        let theta = k as f64 * PI / n_orientations as f64;
        let rings = ring_masses(sigma, theta, reach);
        let total: f64 = rings.iter().sum();
        let mut acc = 0.0;
        for (r, m) in rings.iter().enumerate() {
            acc += m;
            if acc >= MASS_FRACTION * total {
                needed = needed.max(r);
                break;
            }
        }
    }
    needed
}

fn sample_filter(params: &GaborParams, theta: f64) -> GaborFilter {
    let r = params.kernel_radius as isize;
    let side = 2 * params.kernel_radius + 1;
    let (s, c) = theta.sin_cos();
    let omega = params.carrier_frequency();
    let mut env = Array2::<f64>::zeros((side, side));
    let mut carrier = Array2::<Complex64>::zeros((side, side));
    for xi2 in -r..=r {
        for xi1 in -r..=r {
            let (a, b) = (xi1 as f64, xi2 as f64);
            let (e1, e2) = (c * a + s * b, -s * a + c * b);
            let idx = [(r + xi2) as usize, (r + xi1) as usize];
            env[idx] = envelope(e1, e2, params.sigma);
            let phase = omega * e2;
            carrier[idx] = Complex64::new(phase.cos(), phase.sin());
        }
    }
    let dc_offset = if params.dc_compensation {
        let weighted: Complex64 = env.iter().zip(carrier.iter()).map(|(&g, &z)| g * z).sum();
        weighted / env.sum()
    } else {
        Complex64::new(0.0, 0.0)
    };
    let mut kernel = Array2::<Complex64>::zeros((side, side));
    ndarray::Zip::from(&mut kernel)
        .and(&env)
        .and(&carrier)
        .for_each(|k, &g, &z| *k = g * (z - dc_offset));
    GaborFilter {
        theta,
        radius: params.kernel_radius,
        kernel,
        dc_offset,
    }
}

/// Sample the filter bank at `θ_k = kπ/n`, `k = 0..n`.
pub fn build_bank(params: &GaborParams) -> Result<GaborBank> {
    params.validate()?;
    for k in 0..params.n_orientations {
        let frac = truncated_mass_fraction(params.sigma, params.theta(k), params.kernel_radius);
        if frac < MASS_FRACTION {
            return Err(Error::InvalidParams(format!(
                "kernel_radius {} keeps only {:.5} of the envelope mass at θ = {:.4} (need {MASS_FRACTION}); \
                 use at least {}",
                params.kernel_radius,
                frac,
                params.theta(k),
                minimal_radius(params.sigma, params.n_orientations)
            )));
        }
    }
    let filters = (0..params.n_orientations)
        .map(|k| sample_filter(params, params.theta(k)))
        .collect();
    Ok(GaborBank {
        params: *params,
        filters,
    })
}
