//! Right-hand side of the displacement equations and the pure-Neumann
//! Poisson solves on the pixel grid (`h = 1`).
//!
//! The discrete Laplacian is the cell-centered 5-point stencil with mirrored
//! ghost nodes (`u[-1] = u[0]`, `u[N] = u[N-1]`), i.e. zero normal flux
//! across every border face. Its null space is the constant field, so the
//! right-hand side is projected to zero mean and the solution is returned in
//! the zero-mean gauge.

use ndarray::{Array2, Axis};
use rustdct::DctPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::SymTensorField;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    /// Direct diagonalization by the cosine transform, refined until the
    /// residual meets the tolerance.
    Spectral,
    /// Conjugate gradients on the negative semi-definite operator with the
    /// constant mode projected out at every step.
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    pub method: SolverMethod,
    /// Bound on `‖Δ_h u − f̃‖ / ‖f̃‖`.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            method: SolverMethod::Spectral,
            tol: DEFAULT_TOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParams(format!(
                "solver tolerance {} must lie in (0, 1)",
                self.tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParams("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolverMethod,
    /// Relative residual of the returned solution, recomputed with the stencil.
    pub residual_norm: f64,
    /// CG steps, or transform passes for the spectral method.
    pub iterations: usize,
    /// `|mean f|·W·H`, the incompatible part removed from the right-hand side.
    pub compatibility_defect: f64,
    pub converged: bool,
}

/// Derivative along `axis` (0 = rows/`x2`, 1 = columns/`x1`): central
/// differences inside, second-order one-sided differences at both ends.
fn derivative(f: &Array2<f64>, axis: usize) -> Array2<f64> {
    let n = f.len_of(Axis(axis));
    let mut out = Array2::zeros(f.dim());
    if n < 3 {
        return out;
    }
    for (src, mut dst) in f.lanes(Axis(axis)).into_iter().zip(out.lanes_mut(Axis(axis))) {
        dst[0] = (4.0 * (src[1] - src[0]) - (src[2] - src[0])) / 2.0;
        for i in 1..n - 1 {
            dst[i] = (src[i + 1] - src[i - 1]) / 2.0;
        }
        dst[n - 1] = (4.0 * (src[n - 1] - src[n - 2]) - (src[n - 1] - src[n - 3])) / 2.0;
    }
    out
}

/// `∂/∂x1`, along columns.
pub fn d1(f: &Array2<f64>) -> Array2<f64> {
    derivative(f, 1)
}

/// `∂/∂x2`, along rows.
pub fn d2(f: &Array2<f64>) -> Array2<f64> {
    derivative(f, 0)
}

/// `f1 = ∂1 p11 + 2 ∂2 p12 − ∂1 p22`, `f2 = ∂2 p22 + 2 ∂1 p12 − ∂2 p11`.
pub fn build_rhs(p: &SymTensorField) -> (Array2<f64>, Array2<f64>) {
    let f1 = d1(&p.t11) + d2(&p.t12) * 2.0 - d1(&p.t22);
    let f2 = d2(&p.t22) + d1(&p.t12) * 2.0 - d2(&p.t11);
    (f1, f2)
}

/// 5-point Laplacian with mirrored ghost nodes.
pub fn neumann_laplacian(u: &Array2<f64>) -> Array2<f64> {
    let (h, w) = u.dim();
    Array2::from_shape_fn((h, w), |(i, j)| {
        let c = u[[i, j]];
        let up = if i > 0 { u[[i - 1, j]] } else { c };
        let down = if i + 1 < h { u[[i + 1, j]] } else { c };
        let left = if j > 0 { u[[i, j - 1]] } else { c };
        let right = if j + 1 < w { u[[i, j + 1]] } else { c };
        up + down + left + right - 4.0 * c
    })
}

fn norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn remove_mean(a: &mut Array2<f64>) {
    let m = a.mean().unwrap_or(0.0);
    a.mapv_inplace(|v| v - m);
}

fn relative_residual(u: &Array2<f64>, f: &Array2<f64>, fnorm: f64) -> f64 {
    norm(&(neumann_laplacian(u) - f)) / fnorm
}

struct CosineSolver {
    rows: std::sync::Arc<dyn rustdct::TransformType2And3<f64>>,
    cols: std::sync::Arc<dyn rustdct::TransformType2And3<f64>>,
    eig: Array2<f64>,
}

impl CosineSolver {
    fn new(h: usize, w: usize) -> Self {
        let mut planner = DctPlanner::new();
        let lam = |k: usize, n: usize| 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos() - 2.0;
        Self {
            rows: planner.plan_dct2(w),
            cols: planner.plan_dct2(h),
            eig: Array2::from_shape_fn((h, w), |(i, j)| lam(i, h) + lam(j, w)),
        }
    }

    fn along(&self, a: &mut Array2<f64>, inverse: bool) {
        let (h, w) = a.dim();
        for mut row in a.rows_mut() {
            let s = row.as_slice_mut().expect("standard layout");
            if inverse {
                self.rows.process_dct3(s);
            } else {
                self.rows.process_dct2(s);
            }
        }
        let mut col = vec![0.0; h];
        for j in 0..w {
            for i in 0..h {
                col[i] = a[[i, j]];
            }
            if inverse {
                self.cols.process_dct3(&mut col);
            } else {
                self.cols.process_dct2(&mut col);
            }
            for i in 0..h {
                a[[i, j]] = col[i];
            }
        }
    }

    /// Zero-mean solution of `Δ_h u = f` for zero-mean `f`.
    fn solve(&self, f: &Array2<f64>) -> Array2<f64> {
        let (h, w) = f.dim();
        let mut a = f.clone();
        self.along(&mut a, false);
        a.zip_mut_with(&self.eig, |v, &l| *v = if l == 0.0 { 0.0 } else { *v / l });
        a[[0, 0]] = 0.0;
        self.along(&mut a, true);
        // DCT-III after DCT-II scales by N/2 per axis.
        let scale = 4.0 / (h * w) as f64;
        a.mapv_inplace(|v| v * scale);
        remove_mean(&mut a);
        a
    }
}

fn solve_spectral(f: &Array2<f64>, fnorm: f64, params: &SolverParams) -> (Array2<f64>, usize, f64) {
    let (h, w) = f.dim();
    let solver = CosineSolver::new(h, w);
    let mut u = solver.solve(f);
    let mut passes = 1;
    let mut res = relative_residual(&u, f, fnorm);
    while res > params.tol && passes < params.max_iterations.min(8) {
        let mut r = f - &neumann_laplacian(&u);
        remove_mean(&mut r);
        u += &solver.solve(&r);
        remove_mean(&mut u);
        passes += 1;
        res = relative_residual(&u, f, fnorm);
    }
    (u, passes, res)
}

fn solve_cg(f: &Array2<f64>, fnorm: f64, params: &SolverParams) -> (Array2<f64>, usize, f64) {
    // Solve (−Δ_h) u = −f̃, which is symmetric positive semi-definite.
    let mut u = Array2::<f64>::zeros(f.dim());
    let mut r = -f;
    remove_mean(&mut r);
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let target = params.tol * fnorm * 0.5;
    let mut it = 0;
    while it < params.max_iterations && rr.sqrt() > target {
        let mut ad = -neumann_laplacian(&d);
        remove_mean(&mut ad);
        let alpha = rr / dot(&d, &ad);
        u.scaled_add(alpha, &d);
        r.scaled_add(-alpha, &ad);
        let rr_new = dot(&r, &r);
        d = &r + &(d * (rr_new / rr));
        rr = rr_new;
        it += 1;
    }
    remove_mean(&mut u);
    let res = relative_residual(&u, f, fnorm);
    (u, it, res)
}

/// Zero-mean `u` with `Δ_h u = f − mean(f)`.
pub fn solve_neumann_poisson(
    f: &Array2<f64>,
    params: &SolverParams,
) -> Result<(Array2<f64>, SolveReport)> {
    params.validate()?;
    let (h, w) = f.dim();
    if h < 2 || w < 2 {
        return Err(Error::ShapeMismatch(format!("grid {w}x{h} is too small to solve on")));
    }
    let mean = f.mean().unwrap_or(0.0);
    let compatibility_defect = mean.abs() * (w * h) as f64;
    let mut ft = f.clone();
    remove_mean(&mut ft);
    let fnorm = norm(&ft);
    if fnorm == 0.0 {
        let report = SolveReport {
            method: params.method,
            residual_norm: 0.0,
            iterations: 0,
            compatibility_defect,
            converged: true,
        };
        return Ok((Array2::zeros((h, w)), report));
    }
    let (u, iterations, residual_norm) = match params.method {
        SolverMethod::Spectral => solve_spectral(&ft, fnorm, params),
        SolverMethod::ConjugateGradient => solve_cg(&ft, fnorm, params),
    };
    let converged = residual_norm <= params.tol;
    let report = SolveReport {
        method: params.method,
        residual_norm,
        iterations,
        compatibility_defect,
        converged,
    };
    if !converged {
        return Err(Error::NonConvergence(Box::new(report)));
    }
    Ok((u, report))
}

/// Per-pixel displacement `(u1, u2)` in pixels, indexed `[[x2, x1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub u1: Array2<f64>,
    pub u2: Array2<f64>,
}

impl DisplacementField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u1: Array2::zeros((height, width)),
            u2: Array2::zeros((height, width)),
        }
    }

    pub fn constant(width: usize, height: usize, u: (f64, f64)) -> Self {
        Self {
            u1: Array2::from_elem((height, width), u.0),
            u2: Array2::from_elem((height, width), u.1),
        }
    }

    pub fn width(&self) -> usize {
        self.u1.ncols()
    }

    pub fn height(&self) -> usize {
        self.u1.nrows()
    }

    pub fn at(&self, x1: usize, x2: usize) -> (f64, f64) {
        (self.u1[[x2, x1]], self.u2[[x2, x1]])
    }

    pub fn max_abs(&self) -> f64 {
        self.u1
            .iter()
            .chain(self.u2.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            u1: &self.u1 * c,
            u2: &self.u2 * c,
        }
    }
}

/// Solve both displacement components from the metric `p`.
pub fn solve_displacement(
    p: &SymTensorField,
    params: &SolverParams,
) -> Result<(DisplacementField, [SolveReport; 2])> {
    let (f1, f2) = build_rhs(p);
    let (a, b) = rayon::join(
        || solve_neumann_poisson(&f1, params),
        || solve_neumann_poisson(&f2, params),
    );
    let (u1, r1) = a?;
    let (u2, r2) = b?;
    Ok((DisplacementField { u1, u2 }, [r1, r2]))
}
