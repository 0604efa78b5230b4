use maglab_core::affine::AffineFiberFunction;
use maglab_core::field::{ScalarField, TrigSeries};
use maglab_core::geodesic::{ClosedGeodesic, Representative};
use maglab_core::geometry::{make_flat_torus, MetricChart};
use maglab_core::hyperbolic::{build_genus2_group, geodesic_length, poincare_det};
use maglab_core::magnetic::{gauge_conjugate, GaugeFunction, PotentialData};
use maglab_core::xray::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn tau2() -> Vec<f64> {
    vec![2.0 * PI, 2.0 * PI]
}

fn torus(p: &[f64]) -> MetricChart {
    make_flat_torus(p, 16).unwrap()
}

fn trig(t: TrigSeries) -> ScalarField {
    ScalarField::Trig(t)
}

fn random_trig(rng: &mut ChaCha8Rng, periods: &[f64], max_mode: i32, amp: f64) -> TrigSeries {
    let mut t = TrigSeries::zero(periods);
    for _ in 0..4 {
        let k: Vec<i32> = (0..periods.len()).map(|_| rng.random_range(-max_mode..=max_mode)).collect();
        if k.iter().all(|&v| v == 0) {
            continue;
        }
        t = t.with_term(&k, amp * rng.random_range(-1.0..1.0), amp * rng.random_range(-1.0..1.0));
    }
    t.canonical()
}

fn test_lines(p: &[f64]) -> Vec<ClosedGeodesic> {
    [[1, 0], [0, 1], [1, 1], [1, -1], [2, 1]]
        .iter()
        .map(|w| ClosedGeodesic::torus_line(&[0.3, 0.7], w, p))
        .collect()
}

fn hyperbolic(word: &str) -> ClosedGeodesic {
    let g = build_genus2_group().eval_word(word).unwrap();
    let len = geodesic_length(&g).unwrap();
    let mut geo = ClosedGeodesic {
        word: Some(word.into()),
        representative: Representative::HyperbolicAxis { matrix: g },
        length: len,
        primitive_period: len,
        poincare_det: 0.0,
        iterate: 1,
    };
    geo.poincare_det = poincare_det(&geo);
    geo
}

#[test]
fn constants_integrate_to_length() {
    for geo in [ClosedGeodesic::torus_line(&[0.0, 0.0], &[2, 3], &tau2()), hyperbolic("ab")] {
        assert!((xray_function(&ScalarField::constant(1.0), &geo).unwrap() - geo.length).abs() < 1e-12);
        assert_eq!(xray_function(&ScalarField::constant(0.0), &geo).unwrap(), 0.0);
    }
}

#[test]
fn eigenfunction_on_rational_line_matches_closed_form() {
    let p = tau2();
    for (k, m) in [([1, 0], [1, 1]), ([2, 1], [1, 3]), ([1, -1], [1, 1]), ([3, 0], [0, 1])] {
        let q = TrigSeries::zero(&p).with_term(&k, 1.0, 0.0);
        let start = [0.4, 1.1];
        let geo = ClosedGeodesic::torus_line(&start, &m, &p);
        // cos(k.(s + t d)) over a full period: zero unless k.m = 0.
        let km = k[0] * m[0] + k[1] * m[1];
        let expect = if km == 0 { geo.length * (k[0] as f64 * start[0] + k[1] as f64 * start[1]).cos() } else { 0.0 };
        let got = xray_function(&trig(q), &geo).unwrap();
        assert!((got - expect).abs() < 1e-12, "{k:?} {m:?}: {got} vs {expect}");
    }
}

#[test]
fn coordinate_form_counts_windings() {
    let a = vec![ScalarField::constant(1.0), ScalarField::constant(0.0)];
    for (m, n) in [(1, 0), (2, 3), (-1, 4), (0, 1)] {
        let geo = ClosedGeodesic::torus_line(&[0.1, 0.2], &[m, n], &tau2());
        assert!((xray_oneform(&a, &geo).unwrap() - 2.0 * PI * m as f64).abs() < 1e-12);
    }
}

#[test]
fn exact_forms_vanish_on_torus_lines() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = vec![2.0 * PI, 3.0];
    for _ in 0..10 {
        let psi = random_trig(&mut rng, &p, 4, 1.0);
        let a: Vec<ScalarField> = (0..2).map(|j| trig(psi.derivative(j))).collect();
        for geo in test_lines(&p) {
            assert!(xray_oneform(&a, &geo).unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn exact_form_on_hyperbolic_axis_is_endpoint_difference() {
    // a = dx1 integrates to x1(end) - x1(start) along the fundamental segment.
    let a = vec![ScalarField::constant(1.0), ScalarField::constant(0.0)];
    for w in ["ab", "a", "aB", "abc"] {
        let geo = hyperbolic(w);
        let (x0, _) = geo.curve(0.0);
        let (x1, _) = geo.curve(geo.length);
        assert!((xray_oneform(&a, &geo).unwrap() - (x1[0] - x0[0])).abs() < 1e-10);
    }
}

#[test]
fn orientation_flips_only_the_one_form_part() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = tau2();
    let q = trig(random_trig(&mut rng, &p, 3, 1.0));
    let a: Vec<ScalarField> = (0..2).map(|_| trig(random_trig(&mut rng, &p, 3, 1.0))).collect();
    for geo in test_lines(&p) {
        let r = xray_record(&q, &a, &geo).unwrap();
        let s = xray_record(&q, &a, &geo.reversed()).unwrap();
        assert!((r.value_f0 - s.value_f0).abs() < 1e-12);
        assert!((r.value_f1 + s.value_f1).abs() < 1e-12);
        assert_eq!(r.combined, r.value_f0 + r.value_f1);
    }
}

#[test]
fn iterate_flux_is_multiple_of_primitive() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = tau2();
    let a: Vec<ScalarField> = (0..2).map(|_| trig(random_trig(&mut rng, &p, 3, 1.0))).collect();
    let prim = ClosedGeodesic::torus_line(&[0.5, 0.5], &[1, 2], &p);
    for m in 2..5 {
        let it = ClosedGeodesic::torus_line(&[0.5, 0.5], &[m, 2 * m], &p);
        assert_eq!(it.iterate, m as u32);
        let (f1, fm) = (xray_oneform(&a, &prim).unwrap(), xray_oneform(&a, &it).unwrap());
        assert!((fm - m as f64 * f1).abs() < 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn oneform_transform_is_linear(seed in 0u64..10_000, s in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = tau2();
        let a: Vec<TrigSeries> = (0..2).map(|_| random_trig(&mut rng, &p, 3, 1.0)).collect();
        let b: Vec<TrigSeries> = (0..2).map(|_| random_trig(&mut rng, &p, 3, 1.0)).collect();
        let sum: Vec<ScalarField> = a.iter().zip(&b).map(|(x, y)| trig(x.plus(&y.scaled(s)))).collect();
        let af: Vec<ScalarField> = a.into_iter().map(trig).collect();
        let bf: Vec<ScalarField> = b.into_iter().map(trig).collect();
        for geo in test_lines(&p) {
            let lhs = xray_oneform(&sum, &geo).unwrap();
            let rhs = xray_oneform(&af, &geo).unwrap() + s * xray_oneform(&bf, &geo).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}

fn random_potential(rng: &mut ChaCha8Rng, chart: &MetricChart) -> PotentialData {
    let p = chart.periods.clone();
    PotentialData::new(
        chart.clone(),
        (0..2).map(|_| trig(random_trig(rng, &p, 3, 0.8))).collect(),
        trig(random_trig(rng, &p, 2, 0.8)),
    )
    .unwrap()
}

#[test]
fn gauge_pair_is_equivalent_with_recovered_winding() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = vec![2.0 * PI, 3.0];
    let chart = torus(&p);
    for _ in 0..10 {
        let pot = random_potential(&mut rng, &chart);
        let w = vec![rng.random_range(-3..=3), rng.random_range(-3..=3)];
        let gauge = GaugeFunction::new(w.clone(), random_trig(&mut rng, &p, 3, 1.0)).unwrap();
        let other = gauge_conjugate(&pot, &gauge).unwrap();
        let d = gauge_equivalence_decision(&pot, &other, &test_lines(&p), DecisionOptions::default()).unwrap();
        assert_eq!(d.verdict, Verdict::Equivalent);
        let wit = d.witness.unwrap();
        assert_eq!(wit.winding, w);
        assert!(d.witness_residual.unwrap() < 1e-12);
        // The phase is recovered up to a constant.
        let x0 = [0.0, 0.0];
        let off = gauge.psi.eval(&x0) - wit.psi.eval(&x0);
        for x in chart.sample_points() {
            assert!((gauge.psi.eval(&x) - wit.psi.eval(&x) - off).abs() < 1e-12);
        }
    }
}

#[test]
fn unquantized_shift_is_not_equivalent() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = tau2();
    let chart = torus(&p);
    let pot = random_potential(&mut rng, &chart);
    let mut other = pot.clone();
    let ScalarField::Trig(a0) = &pot.a[0] else { unreachable!() };
    other.a[0] = trig(a0.plus(&TrigSeries::constant(&p, 0.3)));
    let d = gauge_equivalence_decision(&pot, &other, &test_lines(&p), DecisionOptions::default()).unwrap();
    assert_eq!(d.verdict, Verdict::NotEquivalent);
    assert!((d.fluxes[0].flux - 0.6 * PI).abs() < 1e-12);
    assert!(d.curl_residual < 1e-12);
    assert!(d.witness.is_none());
}

#[test]
fn non_closed_difference_is_not_equivalent() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let p = tau2();
    let chart = torus(&p);
    let pot = random_potential(&mut rng, &chart);
    let mut other = pot.clone();
    let ScalarField::Trig(a1) = &pot.a[1] else { unreachable!() };
    // Adds a magnetic field b = cos x1.
    other.a[1] = trig(a1.plus(&TrigSeries::zero(&p).with_term(&[1, 0], 0.0, 1.0)));
    let d = gauge_equivalence_decision(&pot, &other, &test_lines(&p), DecisionOptions::default()).unwrap();
    assert_eq!(d.verdict, Verdict::NotEquivalent);
    assert!(d.curl_residual > 0.5);
}

#[test]
fn empty_geodesic_list_is_inconclusive() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let chart = torus(&tau2());
    let pot = random_potential(&mut rng, &chart);
    let d = gauge_equivalence_decision(&pot, &pot, &[], DecisionOptions::default()).unwrap();
    assert_eq!(d.verdict, Verdict::Inconclusive);
    assert!(d.fluxes.is_empty());
}

#[test]
fn decision_is_symmetric_and_gauge_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let p = vec![2.0 * PI, 2.5];
    let chart = torus(&p);
    for trial in 0..12 {
        let pot = random_potential(&mut rng, &chart);
        let other = match trial % 3 {
            0 => gauge_conjugate(
                &pot,
                &GaugeFunction::new(vec![1, -2], random_trig(&mut rng, &p, 2, 0.5)).unwrap(),
            )
            .unwrap(),
            1 => {
                let mut o = pot.clone();
                let ScalarField::Trig(a) = &pot.a[1] else { unreachable!() };
                o.a[1] = trig(a.plus(&TrigSeries::constant(&p, 0.77)));
                o
            }
            _ => random_potential(&mut rng, &chart),
        };
        let lines = test_lines(&p);
        let opts = DecisionOptions::default();
        let fwd = gauge_equivalence_decision(&pot, &other, &lines, opts).unwrap();
        let bwd = gauge_equivalence_decision(&other, &pot, &lines, opts).unwrap();
        assert_eq!(fwd.verdict, bwd.verdict);
        let g = GaugeFunction::new(vec![2, 1], random_trig(&mut rng, &p, 2, 0.7)).unwrap();
        let both = gauge_equivalence_decision(
            &gauge_conjugate(&pot, &g).unwrap(),
            &gauge_conjugate(&other, &g).unwrap(),
            &lines,
            opts,
        )
        .unwrap();
        assert_eq!(fwd.verdict, both.verdict);
    }
}

#[test]
fn vanishing_integral_check_examples() {
    let p = tau2();
    let lines = test_lines(&p);
    assert_eq!(vanishing_integral_check(&AffineFiberFunction::zero(2), &lines).unwrap(), 0.0);
    let psi = TrigSeries::zero(&p).with_term(&[1, 2], 0.4, -0.3).with_term(&[0, 3], 0.2, 0.1);
    let exact = AffineFiberFunction::one_form((0..2).map(|j| trig(psi.derivative(j))).collect());
    assert!(vanishing_integral_check(&exact, &lines).unwrap() < 1e-10);
    let f0 = 0.25;
    let with_f0 = AffineFiberFunction::new(ScalarField::constant(f0), exact.f1.clone());
    let longest = lines.iter().map(|g| g.length).fold(0.0, f64::max);
    assert!((vanishing_integral_check(&with_f0, &lines).unwrap() - f0 * longest).abs() < 1e-10);
}
