use maglab_core::affine::AffineFiberFunction;
use maglab_core::field::{ScalarField, TrigSeries};
use maglab_core::flow::integrate_cogeodesic_flow;
use maglab_core::geodesic::ClosedGeodesic;
use maglab_core::geometry::make_flat_torus;
use maglab_core::hyperbolic::{build_genus2_group, geodesic_length};
use maglab_core::transport::*;
use maglab_core::LabError;
use std::f64::consts::PI;

fn tau2() -> Vec<f64> {
    vec![2.0 * PI, 2.0 * PI]
}

fn lattice(v: f64) -> f64 {
    let r = v.rem_euclid(2.0 * PI);
    r.min(2.0 * PI - r)
}

#[test]
fn zero_potential_gives_constant_solution() {
    let geo = ClosedGeodesic::torus_line(&[0.1, 0.2], &[1, 1], &tau2());
    let sol = solve_transport_on_geodesic(&geo, &AffineFiberFunction::zero(2), 64).unwrap();
    assert!(sol.u.iter().all(|z| (z - 1.0).norm() < 1e-15));
    assert_eq!(sol.defect, 0.0);
}

#[test]
fn full_turn_has_no_defect() {
    // f = dx1 along the (1,0) line: the integral is exactly 2 pi.
    let geo = ClosedGeodesic::torus_line(&[0.0, 1.0], &[1, 0], &tau2());
    let f = AffineFiberFunction::one_form(vec![ScalarField::constant(1.0), ScalarField::constant(0.0)]);
    let sol = solve_transport_on_geodesic(&geo, &f, 16).unwrap();
    assert!((sol.line_integral - 2.0 * PI).abs() < 1e-12);
    assert!(sol.lattice_distance < 1e-12);
    assert!(sol.u.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
}

#[test]
fn constant_potential_defect_is_ct_mod_2pi() {
    let c = 0.37;
    let f = AffineFiberFunction::new(ScalarField::constant(c), vec![ScalarField::constant(0.0); 2]);
    let geo = ClosedGeodesic::torus_line(&[0.0, 0.0], &[2, 3], &tau2());
    let sol = solve_transport_on_geodesic(&geo, &f, 50).unwrap();
    assert!((sol.defect - (c * geo.length).rem_euclid(2.0 * PI)).abs() < 1e-12);
    // Hyperbolic closed geodesic from the octagon group.
    let grp = build_genus2_group();
    let g = grp.eval_word("ab").unwrap();
    let len = geodesic_length(&g).unwrap();
    let hgeo = ClosedGeodesic {
        word: Some("ab".into()),
        representative: maglab_core::Representative::HyperbolicAxis { matrix: g },
        length: len,
        primitive_period: len,
        poincare_det: 4.0 * (len / 2.0).sinh().powi(2),
        iterate: 1,
    };
    let sol = solve_transport_on_geodesic(&hgeo, &f, 50).unwrap();
    assert!((sol.defect - (c * len).rem_euclid(2.0 * PI)).abs() < 1e-12);
}

#[test]
fn defect_matches_independent_line_integral() {
    let p = tau2();
    let a1 = TrigSeries::constant(&p, 0.3).with_term(&[0, 1], 0.7, 0.2);
    let a2 = TrigSeries::zero(&p).with_term(&[1, -1], 0.0, 0.5);
    let f = AffineFiberFunction::one_form(vec![ScalarField::Trig(a1.clone()), ScalarField::Trig(a2.clone())]);
    let start = [0.4, 0.9];
    let w = [1.0, 2.0];
    let geo = ClosedGeodesic::torus_line(&start, &[1, 2], &p);
    let sol = solve_transport_on_geodesic(&geo, &f, 64).unwrap();
    // Oracle: composite Simpson in the curve parameter tau in [0, 1].
    let m = 20000;
    let integrand = |tau: f64| {
        let x = [start[0] + tau * w[0] * p[0], start[1] + tau * w[1] * p[1]];
        a1.eval(&x) * w[0] * p[0] + a2.eval(&x) * w[1] * p[1]
    };
    let h = 1.0 / m as f64;
    let mut s = integrand(0.0) + integrand(1.0);
    for k in 1..m {
        s += integrand(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let oracle = s * h / 3.0;
    assert!((sol.line_integral - oracle).abs() < 1e-10);
    assert!((sol.lattice_distance - lattice(oracle)).abs() < 1e-10);
}

#[test]
fn flow_orbit_transport_matches_geodesic() {
    let p = tau2();
    let chart = make_flat_torus(&p, 16).unwrap();
    let a1 = TrigSeries::constant(&p, 0.2).with_term(&[1, 1], 0.4, 0.0);
    let f = AffineFiberFunction::new(
        ScalarField::constant(0.1),
        vec![ScalarField::Trig(a1), ScalarField::constant(-0.3)],
    );
    let len = 2.0 * PI * 2f64.sqrt();
    let dir = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
    let n = 400;
    let orbit = integrate_cogeodesic_flow(&chart, &[0.3, 0.1], &dir, len, len / n as f64).unwrap();
    let sol = solve_transport_along_orbit(&chart, &orbit, &f, 1e-9).unwrap();
    let geo = ClosedGeodesic::torus_line(&[0.3, 0.1], &[1, 1], &p);
    let exact = solve_transport_on_geodesic(&geo, &f, 400).unwrap();
    assert!((sol.line_integral - exact.line_integral).abs() < 1e-10);
    // Open orbit: half a period.
    let half = integrate_cogeodesic_flow(&chart, &[0.3, 0.1], &dir, len / 2.0, 0.05).unwrap();
    assert!(matches!(solve_transport_along_orbit(&chart, &half, &f, 1e-6), Err(LabError::NotClosed { .. })));
}

#[test]
fn zero_winding_is_not_closed() {
    let geo = ClosedGeodesic::torus_line(&[0.0, 0.0], &[0, 0], &tau2());
    assert!(matches!(
        solve_transport_on_geodesic(&geo, &AffineFiberFunction::zero(2), 8),
        Err(LabError::NotClosed { .. })
    ));
}
