use goi_core::gabor::{build_bank, GaborBank, GaborParams};
use goi_core::response::{energy, lift, normalized_weights};
use goi_core::solver::{solve_neumann_poisson, SolverParams};
use goi_core::tensor::{cometric, eigen_sym, TensorParams};
use goi_core::warp::splat_darkness;
use goi_core::{displace_points, DisplacementField, RasterImage};
use ndarray::{Array2, Array3};
use proptest::prelude::*;

const SIDE: usize = 36;

fn bank(n: usize) -> GaborBank {
    build_bank(&GaborParams::with_orientations(2.5, n).unwrap()).unwrap()
}

fn image(values: Vec<f64>) -> RasterImage {
    RasterImage::from_array(Array2::from_shape_vec((SIDE, SIDE), values).unwrap()).unwrap()
}

fn pixels() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, SIDE * SIDE)
}

/// A smooth random pattern: a few cosines so the energy is well above the floor.
fn smooth(coeffs: &[(f64, f64, f64)]) -> RasterImage {
    let a = Array2::from_shape_fn((SIDE, SIDE), |(i, j)| {
        let mut v = 0.5;
        for &(fx, fy, amp) in coeffs {
            v += amp * (fx * j as f64 + fy * i as f64).cos();
        }
        v.clamp(0.0, 1.0)
    });
    RasterImage::from_array(a).unwrap()
}

fn max_diff(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn permuted(e: &Array3<f64>, map: impl Fn(usize) -> usize) -> Array3<f64> {
    let (n, h, w) = e.dim();
    Array3::from_shape_fn((n, h, w), |(k, i, j)| e[[map(k), i, j]])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn lift_is_linear(a in pixels(), b in pixels(), s in 0.0f64..0.5, t in 0.0f64..0.5) {
        let bank = bank(8);
        let (ia, ib) = (image(a.clone()), image(b.clone()));
        let mixed = image(a.iter().zip(&b).map(|(x, y)| s * x + t * y).collect());
        let oa = lift(&ia, &bank).unwrap().values;
        let ob = lift(&ib, &bank).unwrap().values;
        let om = lift(&mixed, &bank).unwrap().values;
        let err = om
            .iter()
            .zip(oa.iter().zip(ob.iter()))
            .fold(0.0f64, |m, (z, (x, y))| m.max((z - (x * s + y * t)).norm()));
        prop_assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn mirror_reverses_orientations(a in pixels()) {
        let bank = bank(8);
        let img = image(a);
        let e = energy(&lift(&img, &bank).unwrap()).values;
        let em = energy(&lift(&img.mirrored(), &bank).unwrap()).values;
        let n = bank.len();
        let expected = permuted(&e, |k| (n - k) % n);
        let (_, h, w) = e.dim();
        let flipped = Array3::from_shape_fn((n, h, w), |(k, i, j)| expected[[k, i, w - 1 - j]]);
        prop_assert!(max_diff(&em, &flipped) < 1e-10);
    }

    #[test]
    fn quarter_turn_shifts_orientations_by_half_the_bank(a in pixels()) {
        let bank = bank(8);
        let img = image(a);
        let e = energy(&lift(&img, &bank).unwrap()).values;
        let er = energy(&lift(&img.rotated_quarter(), &bank).unwrap()).values;
        let n = bank.len();
        let (_, h, _) = e.dim();
        // out[i][j] = a[N-1-j][i]
        let expected = Array3::from_shape_fn(e.dim(), |(k, i, j)| {
            e[[(k + n / 2) % n, h - 1 - j, i]]
        });
        prop_assert!(max_diff(&er, &expected) < 1e-10);
    }

    #[test]
    fn constant_image_has_no_preferred_orientation(c in 0.0f64..=1.0) {
        let bank = bank(8);
        let e = energy(&lift(&RasterImage::constant(SIDE, SIDE, c).unwrap(), &bank).unwrap());
        let n = bank.len();
        for i in 0..SIDE {
            for j in 0..SIDE {
                for k in 1..n {
                    prop_assert!((e.values[[k, i, j]] - e.values[[0, i, j]]).abs() < 1e-10);
                }
            }
        }
        let w = normalized_weights(&e);
        prop_assert!(w.iter().all(|&v| (v - 1.0 / n as f64).abs() < 1e-15));
    }

    #[test]
    fn weights_form_a_distribution(a in pixels()) {
        let bank = bank(8);
        let w = normalized_weights(&energy(&lift(&image(a), &bank).unwrap()));
        prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for s in w.sum_axis(ndarray::Axis(0)).iter() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cometric_is_psd_with_fixed_trace(a in pixels(), gamma in 1e-3f64..1.0) {
        let bank = bank(8);
        let w = normalized_weights(&energy(&lift(&image(a), &bank).unwrap()));
        let params = TensorParams { gamma, ..TensorParams::default() };
        let c = cometric(&w, &params).unwrap();
        for i in 0..SIDE {
            for j in 0..SIDE {
                let t = c.at(j, i);
                prop_assert!(((t[0] + t[2]) * gamma - 1.0).abs() < 1e-10);
                prop_assert!(eigen_sym(t).lambda2 >= -1e-10 / gamma);
            }
        }
    }

    #[test]
    fn weights_ignore_contrast_scale(
        coeffs in prop::collection::vec((0.1f64..1.0, 0.1f64..1.0, 0.05f64..0.2), 1..4),
        c in 0.3f64..1.0,
    ) {
        let bank = bank(8);
        let img = smooth(&coeffs);
        let dimmed = RasterImage::from_array(img.as_array() * c).unwrap();
        let w = normalized_weights(&energy(&lift(&img, &bank).unwrap()));
        let wd = normalized_weights(&energy(&lift(&dimmed, &bank).unwrap()));
        prop_assert!(max_diff(&w, &wd) < 1e-9);
    }

    #[test]
    fn poisson_solve_is_linear_with_zero_mean(
        f in prop::collection::vec(-1.0f64..1.0, 24 * 20),
        g in prop::collection::vec(-1.0f64..1.0, 24 * 20),
        s in -3.0f64..3.0,
    ) {
        let params = SolverParams::default();
        let f = Array2::from_shape_vec((20, 24), f).unwrap();
        let g = Array2::from_shape_vec((20, 24), g).unwrap();
        let (uf, _) = solve_neumann_poisson(&f, &params).unwrap();
        let (ug, _) = solve_neumann_poisson(&g, &params).unwrap();
        let (um, _) = solve_neumann_poisson(&(&f * s + &g), &params).unwrap();
        let scale = uf.iter().chain(ug.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
        let err = (&um - &(&uf * s + &ug)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err < 1e-8 * scale * (1.0 + s.abs()), "{err}");
        prop_assert!(um.mean().unwrap().abs() < 1e-10 * scale);
    }

    #[test]
    fn displacement_of_points_is_linear_in_the_field(
        u in prop::collection::vec(-2.0f64..2.0, 2 * 16 * 12),
        pts in prop::collection::vec((0.0f64..15.0, 0.0f64..11.0), 1..20),
        s in -2.0f64..2.0,
    ) {
        let (a, b) = u.split_at(16 * 12);
        let field = DisplacementField {
            u1: Array2::from_shape_vec((12, 16), a.to_vec()).unwrap(),
            u2: Array2::from_shape_vec((12, 16), b.to_vec()).unwrap(),
        };
        let base = displace_points(&pts, &field).unwrap();
        let scaled = displace_points(&pts, &field.scaled(s)).unwrap();
        for ((p, q), r) in pts.iter().zip(&base).zip(&scaled) {
            prop_assert!((r.0 - (p.0 + s * (q.0 - p.0))).abs() < 1e-12);
            prop_assert!((r.1 - (p.1 + s * (q.1 - p.1))).abs() < 1e-12);
        }
    }

    #[test]
    fn splatting_conserves_darkness(
        px in prop::collection::vec(0.0f64..=1.0, 20 * 20),
        u in prop::collection::vec(-3.0f64..3.0, 2 * 20 * 20),
    ) {
        let img = RasterImage::from_array(Array2::from_shape_vec((20, 20), px).unwrap()).unwrap();
        let (a, b) = u.split_at(400);
        let field = DisplacementField {
            u1: Array2::from_shape_vec((20, 20), a.to_vec()).unwrap(),
            u2: Array2::from_shape_vec((20, 20), b.to_vec()).unwrap(),
        };
        let (dark, stats) = splat_darkness(&img, &field).unwrap();
        prop_assert!((stats.deposited_mass + stats.lost_mass - stats.source_mass).abs() < 1e-9);
        prop_assert!((dark.sum() - stats.deposited_mass).abs() < 1e-9);
    }
}
