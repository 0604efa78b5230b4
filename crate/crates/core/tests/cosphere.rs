#![allow(clippy::needless_range_loop, clippy::type_complexity)]

use maglab_core::affine::AffineFiberFunction;
use maglab_core::cosphere::*;
use maglab_core::cosphere_nd::*;
use maglab_core::field::{ScalarField, TrigSeries};
use maglab_core::geometry::*;
use maglab_core::LabError;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn tau2() -> Vec<f64> {
    vec![2.0 * PI, 2.0 * PI]
}

fn conformal_torus() -> MetricChart {
    let t = TrigSeries::zero(&tau2())
        .with_term(&[1, -1], 0.15, 0.0)
        .with_term(&[1, 1], -0.15, 0.0)
        .with_term(&[0, 1], 0.0, 0.1);
    make_isothermal_chart(ScalarField::Trig(t), 16, None).unwrap()
}

fn half_plane() -> MetricChart {
    hyperbolic_patch(vec![[-0.5, 0.5], [1.0, 2.0]], 16).unwrap()
}

/// Random trigonometric polynomial with modes `|k|_inf <= 2`.
fn random_trig(rng: &mut ChaCha8Rng, periods: &[f64], amp: f64) -> TrigSeries {
    let mut t = TrigSeries::zero(periods);
    for a in -2..=2 {
        for b in 0..=2 {
            if (b == 0 && a <= 0) || rng.random::<f64>() < 0.4 {
                continue;
            }
            t = t.with_term(&[a, b], amp * rng.random_range(-1.0..1.0), amp * rng.random_range(-1.0..1.0));
        }
    }
    t
}

// Test fields that are not band-limited in theta or x.
fn field_a(x: &[f64], th: f64) -> C {
    C::new(1.0 / (2.2 - (th - x[0]).cos()) + (x[1] + 2.0 * th.sin()).sin(), 0.0)
}

fn field_b(x: &[f64], th: f64) -> C {
    C::new((0.5 * x[0].sin() * th.cos()).exp(), x[1].cos() / (2.5 + (2.0 * th).sin()))
}

fn field_c(x: &[f64], th: f64) -> C {
    C::new(0.0, x[0]).exp() / ((x[1] - 0.6).powi(2) + 0.25 + 0.2 * th.cos())
}

#[test]
fn flat_h_on_plane_wave() {
    let g = CosphereGrid::new(&make_flat_torus(&tau2(), 16).unwrap(), 16, 16).unwrap();
    let u = g.sample(&|x, _| C::new(0.0, x[0]).exp());
    let hu = g.apply_h(&u).unwrap();
    let want = g.sample(&|x, t| C::new(0.0, t.cos()) * C::new(0.0, x[0]).exp());
    assert!(g.sup_diff(&hu, &want) < 1e-12);
}

#[test]
fn h_on_pullback_is_one_form_lift() {
    // Oracle: H psi = <d psi, theta#> = e^{-phi}(psi_1 cos t + psi_2 sin t).
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let psi = random_trig(&mut rng, &tau2(), 0.4);
    let (d1, d2) = (psi.derivative(0), psi.derivative(1));
    for chart in [conformal_torus(), half_plane()] {
        let g = CosphereGrid::new(&chart, 32, 16).unwrap();
        let phi = chart.conformal_factor.clone().unwrap();
        let u = g.sample(&|x, _| C::new(psi.eval(x), 0.0));
        let hu = g.apply_h(&u).unwrap();
        let want = g.sample(&|x, t| {
            C::new((-phi.eval(x)).exp() * (d1.eval(x) * t.cos() + d2.eval(x) * t.sin()), 0.0)
        });
        assert!(g.sup_diff(&hu, &want) < 1e-9, "{}", g.sup_diff(&hu, &want));
    }
}

#[test]
fn constants_are_annihilated_and_v_is_angle_derivative() {
    let g = CosphereGrid::new(&half_plane(), 12, 16).unwrap();
    let one = g.sample(&|_, _| C::new(1.0, 0.0));
    assert!(g.apply_h(&one).unwrap().max_abs() < 1e-12);
    assert!(g.apply_hperp(&one).unwrap().max_abs() < 1e-12);
    let u = g.sample(&|x, t| C::new((3.0 * t).sin() * x[1], 0.0));
    let want = g.sample(&|x, t| C::new(3.0 * (3.0 * t).cos() * x[1], 0.0));
    assert!(g.sup_diff(&g.apply_v(&u).unwrap(), &want) < 1e-12);
}

#[test]
fn kind_mismatch_is_rejected() {
    let g = CosphereGrid::new(&half_plane(), 8, 8).unwrap();
    let mut u = g.sample(&|_, _| C::new(1.0, 0.0));
    u.kind = ValueKind::VerticalVector;
    assert!(matches!(g.apply_h(&u), Err(LabError::Mismatch(_))));
    assert!(matches!(CosphereGrid::new(&warped_three_torus(8).unwrap(), 8, 8), Err(LabError::Mismatch(_))));
}

#[test]
fn clenshaw_curtis_integrates_polynomials() {
    let (y, d, w) = chebyshev_axis(9, 1.0, 2.0);
    let int: f64 = y.iter().zip(&w).map(|(y, w)| w * y.powi(5)).sum();
    assert!((int - 63.0 / 6.0).abs() < 1e-13);
    // Differentiation matrix is exact on degree-8 polynomials.
    for i in 0..9 {
        let dv: f64 = (0..9).map(|j| d[i * 9 + j] * y[j].powi(8)).sum();
        assert!((dv - 8.0 * y[i].powi(7)).abs() < 1e-10);
    }
}

fn check_convergence(chart: &MetricChart, fields: &[&dyn Fn(&[f64], f64) -> C], n: usize, nt: usize) {
    let rep = bracket_residuals(chart, fields, n, nt).unwrap();
    assert_eq!(rep.len(), 6);
    for (coarse, fine) in rep[..3].iter().zip(&rep[3..]) {
        assert_eq!(coarse.identity_name, fine.identity_name);
        assert!(
            converges(coarse.residual, fine.residual, 1e-6),
            "{}: {:e} -> {:e}",
            coarse.identity_name,
            coarse.residual,
            fine.residual
        );
    }
}

#[test]
fn bracket_identities_converge_under_doubling() {
    let fields: [&dyn Fn(&[f64], f64) -> C; 3] = [&field_a, &field_b, &field_c];
    // field_c is not periodic in x2 and only enters on the patch.
    check_convergence(&make_flat_torus(&tau2(), 16).unwrap(), &fields[..2], 32, 48);
    check_convergence(&conformal_torus(), &fields[..2], 32, 48);
    check_convergence(&half_plane(), &fields, 18, 48);
}

#[test]
fn flat_kv_bracket_is_exact() {
    let g = CosphereGrid::new(&make_flat_torus(&tau2(), 16).unwrap(), 24, 32).unwrap();
    let r = bracket_residuals_on(&g, &g.sample(&field_a)).unwrap();
    assert!(r[1].1 < 1e-12, "{:?}", r);
}

#[test]
fn residual_report_serializes() {
    let rep = bracket_residuals(&half_plane(), &[&field_a], 8, 8).unwrap();
    let v = serde_json::to_value(&rep[3]).unwrap();
    for k in ["identity_name", "resolution", "residual", "convergence_order"] {
        assert!(v.get(k).is_some());
    }
    assert!(rep[0].convergence_order.is_none() && rep[3].convergence_order.is_some());
}

#[test]
fn hamiltonian_vector_field_restricts_to_h() {
    let f = |x: &[f64], xi: &[f64]| C::new((0.4 * x[0].sin() * xi[0] + 0.3 * xi[1]).exp(), x[1].cos() * xi[0] * xi[1]);
    for chart in [make_flat_torus(&tau2(), 16).unwrap(), conformal_torus(), half_plane()] {
        let g = CosphereGrid::new(&chart, 32, 48).unwrap();
        let r = hamiltonian_residual(&g, &f, 1e-3).unwrap();
        assert!(r < 1e-8, "{r:e}");
    }
}

/// `u = e^{i psi}` and `f = -<d psi, theta#>` for a random trigonometric `psi`.
fn manufactured(rng: &mut ChaCha8Rng, amp: f64) -> (TrigSeries, AffineFiberFunction) {
    let psi = random_trig(rng, &tau2(), amp);
    let f1 = (0..2).map(|k| ScalarField::Trig(psi.derivative(k).scaled(-1.0))).collect();
    (psi, AffineFiberFunction::one_form(f1))
}

#[test]
fn alpha_beta_of_pullback() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (psi, f) = manufactured(&mut rng, 0.3);
    for chart in [conformal_torus(), half_plane()] {
        let g = CosphereGrid::new(&chart, 48, 16).unwrap();
        let u = g.sample(&|x, _| C::new(0.0, psi.eval(x)).exp());
        let ab = build_alpha_beta(&g, &u).unwrap();
        assert!(ab.beta.max_abs() < 1e-12);
        assert!(ab.max_imag < 1e-9);
        // f = i conj(u) H u matches the symbolic lift with the minus sign.
        assert!(g.sup_diff(&ab.f, &g.sample_affine(&f)) < 1e-9);
    }
}

#[test]
fn alpha_beta_are_real_for_unimodular_fields() {
    let g = CosphereGrid::new(&conformal_torus(), 48, 64).unwrap();
    let u = g.sample(&|x, t| C::new(0.0, (x[0] + t).sin() + 0.5 * (x[1] - 2.0 * t).cos()).exp());
    let ab = build_alpha_beta(&g, &u).unwrap();
    assert!(ab.max_imag < 1e-9, "{:e}", ab.max_imag);
    assert!(ab.alpha.max_abs() > 0.1 && ab.beta.max_abs() > 0.1);
    let one = g.sample(&|_, _| C::new(1.0, 0.0));
    let ab = build_alpha_beta(&g, &one).unwrap();
    assert!(ab.alpha.max_abs() < 1e-14 && ab.beta.max_abs() < 1e-14);
    let bad = g.sample(&|_, _| C::new(1.1, 0.0));
    assert!(matches!(build_alpha_beta(&g, &bad), Err(LabError::NonUnimodular { .. })));
}

#[test]
fn pestov_on_manufactured_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let charts = [make_flat_torus(&tau2(), 16).unwrap(), conformal_torus(), half_plane()];
    let mut count = 0;
    for chart in &charts {
        let g = CosphereGrid::new(chart, 48, 16).unwrap();
        for _ in 0..7 {
            let (psi, f) = manufactured(&mut rng, 0.3);
            let u = g.sample(&|x, _| C::new(0.0, psi.eval(x)).exp());
            let rep = pestov_residual(&g, &u, &f).unwrap();
            assert!(rep.rearranged_residual < 1e-6, "{rep:?}");
            assert!(rep.identity_residual < 1e-6, "{rep:?}");
            assert!(rep.beta_norm < 1e-8, "{rep:?}");
            assert!(rep.f0_sq < 1e-12);
            // |Vf|^2 = |f|^2 in two dimensions.
            assert!((rep.vf_sq - rep.f_sq).abs() < 1e-8 * rep.f_sq.max(1.0));
            count += 1;
        }
    }
    assert!(count >= 20);
}

#[test]
fn pestov_trivial_and_negative_control() {
    let g = CosphereGrid::new(&conformal_torus(), 24, 16).unwrap();
    let one = g.sample(&|_, _| C::new(1.0, 0.0));
    let rep = pestov_residual(&g, &one, &AffineFiberFunction::zero(2)).unwrap();
    assert!(rep.identity_residual < 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (psi, f) = manufactured(&mut rng, 0.3);
    let u = g.sample(&|x, t| C::new(0.0, psi.eval(x) + 0.2 * (t + x[0]).sin()).exp());
    match pestov_residual(&g, &u, &f) {
        Err(LabError::Precondition { measured, .. }) => assert!(measured > 1e-3),
        other => panic!("expected precondition failure, got {other:?}"),
    }
    let rep = pestov_residual_unchecked(&g, &u, &f).unwrap();
    assert!(rep.identity_residual > 1e-5, "{rep:?}");
}

// ---- n-dimensional calculus ----

fn nd_field(n: usize) -> FiberFn {
    fiber_fn(move |x: &[f64], xi: &[f64]| {
        let s: f64 = (0..n).map(|k| (x[k] + 0.3 * k as f64).sin() * xi[k]).sum();
        C::new((0.7 * s).exp(), 0.0) / C::new(2.5 + xi[0] - 0.5 * xi[n - 1] * x[1].cos(), 0.3 * xi[1])
    })
}

#[test]
fn nd_identities_converge() {
    let charts = [warped_three_torus(16).unwrap(), hyperbolic_product_patch(16).unwrap(), half_plane()];
    for chart in &charts {
        let rep = bracket_residuals_nd(chart, &[nd_field(chart.dim)], 0.01, 2).unwrap();
        assert_eq!(rep.len(), 8);
        assert!(rep[0].residual < 1e-10 && rep[4].residual < 1e-10, "Euler {:?}", rep[0]);
        for (coarse, fine) in rep[1..4].iter().zip(&rep[5..]) {
            assert!(
                converges(coarse.residual, fine.residual, 1e-6),
                "{}: {:e} -> {:e}",
                coarse.identity_name,
                coarse.residual,
                fine.residual
            );
        }
    }
}

#[test]
fn nabla_of_pullback_is_gradient() {
    let chart = warped_three_torus(16).unwrap();
    let calc = FiberCalculus::new(&chart, 0.01).unwrap();
    let u = pullback(|x| C::new((x[0] + 2.0 * x[2]).sin(), x[1].cos()));
    let x = [0.3f64, 1.1, 2.0];
    let xi = [0.2, -0.5, 0.9];
    let grad = [(x[0] + 2.0 * x[2]).cos(), 0.0, 2.0 * (x[0] + 2.0 * x[2]).cos()];
    for j in 0..3 {
        let want = C::new(grad[j], if j == 1 { -x[1].sin() } else { 0.0 });
        assert!((calc.nabla(&u, j)(&x, &xi) - want).norm() < 1e-8);
    }
}

#[test]
fn degree_d_bookkeeping_agrees() {
    let chart = warped_three_torus(16).unwrap();
    let calc = FiberCalculus::new(&chart, 0.005).unwrap();
    let u = nd_field(3);
    let x = [0.4, 2.2, 5.0];
    let xi = [0.7, 0.1, -0.6];
    for j in 0..3 {
        let v0 = calc.vj(&u, j)(&x, &xi);
        for d in [1, 2, -1] {
            assert!((calc.vj_degree(&u, j, d)(&x, &xi) - v0).norm() < 1e-8);
        }
    }
}

/// Polynomial of degree <= 3 in the covector.
fn cubic(seed: u64, n: usize) -> FiberFn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
    fiber_fn(move |x: &[f64], t: &[f64]| {
        let a = t[0];
        let b = t[1];
        let z = if n > 2 { t[2] } else { 0.0 };
        let re = c[0] + c[1] * a + c[2] * b + c[3] * z * x[0].cos() + c[4] * a * b + c[5] * a * a * z
            + c[6] * b * b * b
            + c[7] * a * b * z;
        let im = c[8] * a + c[9] * b * b * x[1].sin() + c[10] * z * z * a + c[11] * b * z;
        C::new(re, im)
    })
}

#[test]
fn vertical_adjoint_formula() {
    for (chart, tol) in [(conformal_torus(), 1e-8), (warped_three_torus(16).unwrap(), 1e-6)] {
        let n = chart.dim;
        let calc = FiberCalculus::new(&chart, 0.01).unwrap();
        let pts = cosphere_quadrature(&chart, 3, 16).unwrap();
        let one = fiber_fn(|_: &[f64], _: &[f64]| C::new(1.0, 0.0));
        for j in 0..n {
            assert!(vertical_adjoint_residual(&calc, &one, &one, j, &pts).unwrap() < 1e-12);
            let r = vertical_adjoint_residual(&calc, &cubic(j as u64, n), &cubic(100 + j as u64, n), j, &pts).unwrap();
            assert!(r < tol, "n = {n}, j = {j}: {r:e}");
        }
    }
}

#[test]
fn special_form_norm_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let tau3 = vec![2.0 * PI; 3];
    for chart in [conformal_torus(), warped_three_torus(16).unwrap()] {
        let n = chart.dim;
        let periods = if n == 2 { tau2() } else { tau3.clone() };
        let calc = FiberCalculus::new(&chart, 0.01).unwrap();
        let pts = cosphere_quadrature(&chart, 3, 16).unwrap();
        for trial in 0..50 {
            let f1: Vec<ScalarField> = (0..n)
                .map(|_| {
                    let mut t = TrigSeries::constant(&periods, rng.random_range(-1.0..1.0));
                    for _ in 0..2 {
                        let k: Vec<i32> = (0..n).map(|_| rng.random_range(-1..=1)).collect();
                        t = t.with_term(&k, rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
                    }
                    ScalarField::Trig(t)
                })
                .collect();
            let f0 = ScalarField::Trig(TrigSeries::constant(&periods, rng.random_range(-1.0..1.0)));
            let nm = special_form_norms(&calc, &AffineFiberFunction::new(f0, f1), &pts).unwrap();
            assert!((nm.vf_sq / nm.f1_sq - (n as f64 - 1.0)).abs() < 1e-6, "trial {trial}: {nm:?}");
            assert!((nm.f_sq - nm.f0_sq - nm.f1_sq).abs() < 1e-10 * nm.f_sq);
            assert!(nm.cross_check < 1e-8);
        }
    }
}

#[test]
fn special_form_examples() {
    let chart = make_flat_torus(&[1.0, 1.0], 8).unwrap();
    let calc = FiberCalculus::new(&chart, 0.01).unwrap();
    let pts = cosphere_quadrature(&chart, 2, 16).unwrap();
    let dx1 = AffineFiberFunction::one_form(vec![ScalarField::constant(1.0), ScalarField::constant(0.0)]);
    let nm = special_form_norms(&calc, &dx1, &pts).unwrap();
    // Oracle: int_{S^1} cos^2 = pi, sin^2 likewise.
    assert!((nm.f1_sq - PI).abs() < 1e-12 && (nm.vf_sq - PI).abs() < 1e-12);
    let f0_only = AffineFiberFunction::new(ScalarField::constant(2.0), vec![ScalarField::constant(0.0); 2]);
    assert_eq!(special_form_norms(&calc, &f0_only, &pts).unwrap().vf_sq, 0.0);
}

#[test]
fn nd_alpha_beta_contraction() {
    let chart = warped_three_torus(16).unwrap();
    let calc = FiberCalculus::new(&chart, 0.005).unwrap();
    let u = fiber_fn(|x: &[f64], t: &[f64]| C::new(0.0, x[0].sin() * t[1] + x[2].cos() * t[0] * t[2]).exp());
    let s = alpha_beta_at(&calc, &u, &[0.5, 1.0, 2.0], &[0.3, -0.4, 0.8]).unwrap();
    assert!(s.max_imag < 1e-9 && s.contraction < 1e-12, "{s:?}");
    let bad = fiber_fn(|_: &[f64], _: &[f64]| C::new(2.0, 0.0));
    assert!(matches!(alpha_beta_at(&calc, &bad, &[0.5, 1.0, 2.0], &[1.0, 0.0, 0.0]), Err(LabError::NonUnimodular { .. })));
}

#[test]
fn nd_pestov_on_manufactured_solutions() {
    let chart = warped_three_torus(16).unwrap();
    let calc = FiberCalculus::new(&chart, 0.01).unwrap();
    let pts = cosphere_quadrature(&chart, 2, 0).unwrap();
    let tau3 = vec![2.0 * PI; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2 {
        let mut psi = TrigSeries::zero(&tau3);
        for _ in 0..3 {
            let k: Vec<i32> = (0..3).map(|_| rng.random_range(-1..=1)).collect();
            psi = psi.with_term(&k, rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
        }
        let f1 = (0..3).map(|k| ScalarField::Trig(psi.derivative(k).scaled(-1.0))).collect();
        let f = AffineFiberFunction::one_form(f1);
        let p2 = psi.clone();
        let u = pullback(move |x| C::new(0.0, p2.eval(x)).exp());
        let rep = pestov_nd(&calc, &u, &f, &pts).unwrap();
        assert!(rep.rearranged_residual < 1e-6 && rep.identity_residual < 1e-6, "{rep:?}");
        assert!(rep.beta_norm < 1e-8);
    }
    let u = fiber_fn(|x: &[f64], t: &[f64]| C::new(0.0, x[0].sin() + 0.2 * t[1]).exp());
    let f = AffineFiberFunction::one_form(vec![ScalarField::constant(0.0); 3]);
    assert!(matches!(pestov_nd(&calc, &u, &f, &pts), Err(LabError::Precondition { .. })));
    assert!(pestov_nd_unchecked(&calc, &u, &f, &pts).unwrap().identity_residual > 1e-5);
}

#[test]
fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
    for n in [1usize, 2, 5, 16] {
        let (x, w) = maglab_core::quadrature::gauss_legendre(n);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        for d in 0..(2 * n) {
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(d as i32)).sum();
            let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
            assert!((got - exact).abs() < 1e-14, "n={n} d={d}");
        }
    }
}
