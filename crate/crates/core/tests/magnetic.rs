#![allow(clippy::needless_range_loop)]

use maglab_core::field::{fd1, ScalarField, TrigSeries};
use maglab_core::geometry::{make_flat_torus, make_general_chart, MetricChart};
use maglab_core::magnetic::*;
use maglab_core::LabError;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn circle() -> MetricChart {
    make_flat_torus(&[2.0 * PI], 16).unwrap()
}

fn torus() -> MetricChart {
    make_flat_torus(&[2.0 * PI, 2.0 * PI], 16).unwrap()
}

fn konst(v: f64) -> ScalarField {
    ScalarField::constant(v)
}

fn random_trig(rng: &mut ChaCha8Rng, periods: &[f64], max_mode: i32, amp: f64) -> TrigSeries {
    let mut t = TrigSeries::zero(periods);
    let d = periods.len();
    for _ in 0..4 {
        let k: Vec<i32> = (0..d).map(|_| rng.random_range(-max_mode..=max_mode)).collect();
        if k.iter().all(|&v| v == 0) {
            continue;
        }
        t = t.with_term(&k, amp * rng.random_range(-1.0..1.0), amp * rng.random_range(-1.0..1.0));
    }
    t.canonical()
}

/// Diagonal oracle for constant `a = c dx` on the 2 pi circle.
fn shifted_squares(c: f64, cutoff: i32) -> Vec<f64> {
    let mut v: Vec<f64> = (-cutoff..=cutoff).map(|k| (k as f64 + c).powi(2)).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn spectrum(pot: &PotentialData, cutoff: usize, count: usize) -> Vec<f64> {
    eigenvalues_only(&assemble_schrodinger(pot, cutoff).unwrap().matrix, count).unwrap()
}

#[test]
fn free_circle_spectrum_is_squares() {
    let pot = PotentialData::zero(circle());
    let s = spectrum(&pot, 8, 17);
    assert!(max_gap(&s, &shifted_squares(0.0, 8)) < 1e-12);
    let m = multiplicities(&s, 1e-9);
    assert_eq!(m[0], (0.0, 1));
    assert!(m[1..].iter().all(|&(_, n)| n == 2));
    assert!((m[2].0 - 4.0).abs() < 1e-12);
}

#[test]
fn constant_potential_matches_diagonal_oracle() {
    let c = 0.25;
    let pot = PotentialData::new(circle(), vec![konst(c)], konst(0.0)).unwrap();
    let asm = assemble_schrodinger(&pot, 12).unwrap();
    assert!(asm.hermitian_defect < 1e-12);
    let s = eigenvalues_only(&asm.matrix, 25).unwrap();
    assert!(max_gap(&s, &shifted_squares(c, 12)) < 1e-12);
    assert!((s[0] - 0.0625).abs() < 1e-13);
    assert!((s[1] - 0.5625).abs() < 1e-13);
    assert!((s[2] - 1.5625).abs() < 1e-13);
}

#[test]
fn constant_q_shifts_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = [2.0 * PI, 3.0];
    let chart = make_flat_torus(&p, 16).unwrap();
    let a = vec![
        ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.5)),
        ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.5)),
    ];
    let q = random_trig(&mut rng, &p, 2, 0.5);
    let p1 = PotentialData::new(chart.clone(), a.clone(), ScalarField::Trig(q.clone())).unwrap();
    let p2 = PotentialData::new(chart, a, ScalarField::Trig(q.plus(&TrigSeries::constant(&p, 1.75)))).unwrap();
    let (s1, s2) = (spectrum(&p1, 5, 30), spectrum(&p2, 5, 30));
    assert!(s1.iter().zip(&s2).all(|(x, y)| (y - x - 1.75).abs() < 1e-11));
}

#[test]
fn anisotropic_free_torus_ground_state_is_constant() {
    let chart = make_flat_torus(&[2.0 * PI, 3.0], 16).unwrap();
    let asm = assemble_schrodinger(&PotentialData::zero(chart), 4).unwrap();
    let spec = eigenvalues(&asm.matrix, 3).unwrap();
    assert!(spec.values[0].abs() < 1e-13);
    // The constant mode is an exact eigenvector.
    let zero = asm.modes.iter().position(|k| k.iter().all(|&v| v == 0)).unwrap();
    assert!(asm.matrix.column(zero).iter().all(|z| z.norm() < 1e-15));
    // Next levels: (2 pi / 3)^2 > 1, so k = (+-1, 0) comes first.
    assert!((spec.values[1] - 1.0).abs() < 1e-12 && (spec.values[2] - 1.0).abs() < 1e-12);
}

/// Entries `<e_k, P e_l>` by trapezoid quadrature of
/// `P e_l = (sum_j ((w_l + a_j)^2 - i d_j a_j) + q) e_l`.
fn quadrature_matrix(pot: &PotentialData, a: &[TrigSeries], q: &TrigSeries, modes: &[Vec<i32>]) -> Vec<Vec<C>> {
    let p = &pot.chart.periods;
    let m = 40;
    let mut pts = Vec::new();
    for i in 0..m {
        for j in 0..m {
            pts.push(vec![p[0] * i as f64 / m as f64, p[1] * j as f64 / m as f64]);
        }
    }
    let vol = p[0] * p[1];
    let w = vol / pts.len() as f64;
    let omega = |k: &[i32], j: usize| 2.0 * PI * k[j] as f64 / p[j];
    let e = |k: &[i32], x: &[f64]| C::from_polar(1.0 / vol.sqrt(), omega(k, 0) * x[0] + omega(k, 1) * x[1]);
    modes
        .iter()
        .map(|k| {
            modes
                .iter()
                .map(|l| {
                    pts.iter()
                        .map(|x| {
                            let mut s = C::from(q.eval(x));
                            for j in 0..2 {
                                let mut alpha = [0usize; 2];
                                alpha[j] = 1;
                                s += (omega(l, j) + a[j].eval(x)).powi(2);
                                s -= C::i() * a[j].deriv(x, &alpha);
                            }
                            e(k, x).conj() * s * e(l, x) * w
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

#[test]
fn galerkin_entries_match_quadrature_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = [2.0 * PI, 4.0];
    let chart = make_flat_torus(&p, 16).unwrap();
    let a: Vec<TrigSeries> = (0..2).map(|_| random_trig(&mut rng, &p, 2, 0.7)).collect();
    let q = random_trig(&mut rng, &p, 3, 0.7);
    let pot = PotentialData::new(
        chart,
        a.iter().cloned().map(ScalarField::Trig).collect(),
        ScalarField::Trig(q.clone()),
    )
    .unwrap();
    let asm = assemble_schrodinger(&pot, 3).unwrap();
    let oracle = quadrature_matrix(&pot, &a, &q, &asm.modes);
    let mut err: f64 = 0.0;
    for (r, row) in oracle.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            err = err.max((asm.matrix[(r, c)] - v).norm());
        }
    }
    assert!(err < 1e-12, "entry error {err}");
    assert!(asm.hermitian_defect < 1e-12);
}

#[test]
fn eigenpair_residuals_are_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = [2.0 * PI, 2.0 * PI];
    let pot = PotentialData::new(
        torus(),
        (0..2).map(|_| ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.5))).collect(),
        ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.5)),
    )
    .unwrap();
    let asm = assemble_schrodinger(&pot, 6).unwrap();
    let spec = eigenvalues(&asm.matrix, 20).unwrap();
    assert!(spec.values.windows(2).all(|w| w[0] <= w[1]));
    assert!(spec.residuals.iter().all(|r| *r < 1e-9 * spec.operator_norm));
    let fast = eigenvalues_only(&asm.matrix, 20).unwrap();
    assert!(max_gap(&fast, &spec.values) < 1e-10);
}

#[test]
fn under_resolution_is_flagged() {
    let p = [2.0 * PI];
    let q = TrigSeries::zero(&p).with_term(&[5], 1.0, 0.0);
    let pot = PotentialData::new(circle(), vec![konst(0.0)], ScalarField::Trig(q)).unwrap();
    assert_eq!(assemble_schrodinger(&pot, 4).unwrap().warnings.len(), 1);
    assert!(assemble_schrodinger(&pot, 5).unwrap().warnings.is_empty());
    assert!(matches!(assemble_schrodinger(&pot, 0), Err(LabError::InvalidArgument(_))));
}

#[test]
fn patch_charts_are_rejected() {
    let chart = maglab_core::geometry::hyperbolic_patch(vec![[0.0, 1.0], [1.0, 2.0]], 8).unwrap();
    let pot = PotentialData::zero(chart);
    assert!(matches!(assemble_schrodinger(&pot, 4), Err(LabError::Mismatch(_))));
}

#[test]
fn winding_gauge_cancels_constant_potential() {
    let n = 3;
    let pot = PotentialData::new(circle(), vec![konst(n as f64)], konst(0.0)).unwrap();
    let gauge = GaugeFunction::new(vec![-n], TrigSeries::zero(&[2.0 * PI])).unwrap();
    let t = gauge_conjugate(&pot, &gauge).unwrap();
    for s in 0..20 {
        assert!(t.a[0].eval(&[0.3 * s as f64]).abs() < 1e-15);
    }
}

#[test]
fn gauge_preserves_field_and_quantizes_fluxes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = [2.0 * PI, 3.0];
    let chart = make_flat_torus(&p, 16).unwrap();
    for _ in 0..10 {
        let pot = PotentialData::new(
            chart.clone(),
            (0..2).map(|_| ScalarField::Trig(random_trig(&mut rng, &p, 3, 0.6))).collect(),
            ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.6)),
        )
        .unwrap();
        let w = vec![rng.random_range(-3..=3), rng.random_range(-3..=3)];
        let gauge = GaugeFunction::new(w.clone(), random_trig(&mut rng, &p, 3, 0.8)).unwrap();
        let t = gauge_conjugate(&pot, &gauge).unwrap();
        assert_eq!(t.q, pot.q);
        for x in chart.sample_points() {
            let (b0, b1) = (pot.magnetic_field(&x), t.magnetic_field(&x));
            assert!(max_gap(&b0, &b1) < 1e-12);
            // -i conj(t) dt from the complex field itself.
            let form: Vec<f64> = (0..2)
                .map(|j| {
                    let d = fd1(&|y: &[f64]| gauge.eval(y).im, &x, j, 2e-4) * gauge.eval(&x).im
                        + fd1(&|y: &[f64]| gauge.eval(y).re, &x, j, 2e-4) * gauge.eval(&x).re;
                    let cross = fd1(&|y: &[f64]| gauge.eval(y).im, &x, j, 2e-4) * gauge.eval(&x).re
                        - fd1(&|y: &[f64]| gauge.eval(y).re, &x, j, 2e-4) * gauge.eval(&x).im;
                    assert!(d.abs() < 1e-8);
                    cross
                })
                .collect();
            assert!(max_gap(&form, &t.a_at(&x).iter().zip(pot.a_at(&x)).map(|(u, v)| u - v).collect::<Vec<_>>()) < 1e-8);
        }
        let base = [rng.random_range(0.0..p[0]), rng.random_range(0.0..p[1])];
        for j in 0..2 {
            let shift = loop_flux(&t, &base, j, 64) - loop_flux(&pot, &base, j, 64);
            assert!((shift - 2.0 * PI * w[j] as f64).abs() < 1e-11);
        }
    }
}

#[test]
fn circle_unit_shift_is_isospectral() {
    let c = 0.3;
    let pot = PotentialData::new(circle(), vec![konst(c)], konst(0.0)).unwrap();
    let gauge = GaugeFunction::new(vec![1], TrigSeries::zero(&[2.0 * PI])).unwrap();
    assert!(isospectrality_check(&pot, &gauge, 16, 20).unwrap() < 1e-10);
}

#[test]
fn phase_gauge_on_torus_is_isospectral_at_cutoff_16() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = [2.0 * PI, 2.0 * PI];
    let pot = PotentialData::new(
        torus(),
        (0..2).map(|_| ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.5))).collect(),
        ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.5)),
    )
    .unwrap();
    let gauge = GaugeFunction::new(vec![0, 0], random_trig(&mut rng, &p, 2, 0.3)).unwrap();
    let gap = isospectrality_check(&pot, &gauge, 16, 50).unwrap();
    assert!(gap < 1e-8, "gap {gap}");
    // Non-quantized flux shift.
    let shift = GaugeFunction::new(vec![0, 0], TrigSeries::zero(&p)).unwrap();
    let mut bad = gauge_conjugate(&pot, &shift).unwrap();
    bad.a[0] = ScalarField::Trig(TrigSeries::constant(&p, 0.3).plus(match &pot.a[0] {
        ScalarField::Trig(t) => t,
        _ => unreachable!(),
    }));
    assert!(spectral_gap(&pot, &bad, 16, 50).unwrap() > 1e-3);
}

#[test]
fn gauge_gap_decays_under_cutoff_doubling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = [2.0 * PI];
    let pot = PotentialData::new(
        circle(),
        vec![ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.8))],
        ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.8)),
    )
    .unwrap();
    let gauge = GaugeFunction::new(vec![1], random_trig(&mut rng, &p, 2, 1.0)).unwrap();
    let g4 = isospectrality_check(&pot, &gauge, 4, 5).unwrap();
    let g8 = isospectrality_check(&pot, &gauge, 8, 5).unwrap();
    let g16 = isospectrality_check(&pot, &gauge, 16, 5).unwrap();
    let g32 = isospectrality_check(&pot, &gauge, 32, 5).unwrap();
    // Faster than any fixed geometric rate.
    assert!(g8 < 0.1 * g4 && g16 < 1e-4 * g8 && g32 < 1e-4 * g16, "{g4} {g8} {g16} {g32}");
    assert!(g32 < 1e-11);
}

#[test]
fn subprincipal_examples() {
    let pot = PotentialData::zero(torus());
    assert_eq!(subprincipal(&pot, &[0.2, 0.3], &[0.6, 0.8]).unwrap(), 0.0);
    let pot = PotentialData::new(torus(), vec![konst(1.0), konst(0.0)], konst(0.0)).unwrap();
    assert!((subprincipal(&pot, &[0.2, 0.3], &[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
    assert!(matches!(
        subprincipal(&pot, &[0.2, 0.3], &[1.0, 1.0]),
        Err(LabError::Precondition { .. })
    ));
}

fn curved_chart() -> MetricChart {
    let p = vec![2.0 * PI, 2.0 * PI];
    let g11 = TrigSeries::constant(&p, 1.2).with_term(&[1, 0], 0.3, 0.0).with_term(&[0, 1], 0.0, 0.1);
    let g12 = TrigSeries::zero(&p).with_term(&[1, 1], 0.0, 0.2);
    let g22 = TrigSeries::constant(&p, 1.5).with_term(&[1, -1], 0.1, 0.2);
    let c = [g11, g12.clone(), g12, g22].into_iter().map(ScalarField::Trig).collect();
    make_general_chart(c, p, None, 16).unwrap()
}

/// Full symbol of the half-density form `g^(1/4) P g^(-1/4)` evaluated as
/// `exp(-i x.xi) L exp(i x.xi)` with nested finite differences.
fn half_density_symbol(pot: &PotentialData, x: &[f64], xi: &[f64]) -> C {
    let chart = &pot.chart;
    let det = |y: &[f64]| chart.metric(y).determinant();
    let plane = |y: &[f64]| C::from_polar(1.0, xi[0] * y[0] + xi[1] * y[1]);
    let w = |y: &[f64]| plane(y) * det(y).powf(-0.25);
    let h_in = 1e-3;
    let h_out = 1e-2;
    let v = |y: &[f64], k: usize| -> C {
        let re = fd1(&|z: &[f64]| w(z).re, y, k, h_in);
        let im = fd1(&|z: &[f64]| w(z).im, y, k, h_in);
        -C::i() * C::new(re, im) + pot.a[k].eval(y) * w(y)
    };
    let f = |y: &[f64], j: usize| -> C {
        let gi = chart.inverse_metric(y).unwrap();
        let s = det(y).sqrt();
        (0..2).map(|k| v(y, k) * (s * gi[(j, k)])).sum()
    };
    let mut big = C::new(0.0, 0.0);
    for j in 0..2 {
        let re = fd1(&|z: &[f64]| f(z, j).re, x, j, h_out);
        let im = fd1(&|z: &[f64]| f(z, j).im, x, j, h_out);
        big += -C::i() * C::new(re, im) + pot.a[j].eval(x) * f(x, j);
    }
    let lu = det(x).powf(0.25) / det(x).sqrt() * big + pot.q.eval(x) * plane(x);
    lu * plane(x).conj()
}

#[test]
fn subprincipal_matches_symbol_of_coordinate_operator() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let chart = curved_chart();
    let p = chart.periods.clone();
    for _ in 0..5 {
        let pot = PotentialData::new(
            chart.clone(),
            (0..2).map(|_| ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.7))).collect(),
            ScalarField::Trig(random_trig(&mut rng, &p, 2, 0.7)),
        )
        .unwrap();
        let x = [rng.random_range(0.0..p[0]), rng.random_range(0.0..p[1])];
        let th: f64 = rng.random_range(0.0..2.0 * PI);
        // Unit covector: xi = g^(1/2)-normalized direction.
        let raw = [th.cos(), th.sin()];
        let gi = chart.inverse_metric(&x).unwrap();
        let nrm = (0..2).flat_map(|j| (0..2).map(move |k| (j, k))).map(|(j, k)| gi[(j, k)] * raw[j] * raw[k]).sum::<f64>().sqrt();
        let xi = [raw[0] / nrm, raw[1] / nrm];
        // Degree-1 part from the quadratic polynomial t -> sigma(t xi).
        let s = |t: f64| half_density_symbol(&pot, &x, &[t * xi[0], t * xi[1]]);
        let p1 = (4.0 * s(1.0) - s(2.0) - 3.0 * s(0.0)) / 2.0;
        // sum_j d^2 p2 / dx_j dxi_j with p2 = g^jk xi_j xi_k, so d_xi_j p2 = 2 g^jk xi_k.
        let mut mixed = 0.0;
        for j in 0..2 {
            mixed += fd1(
                &|y: &[f64]| {
                    let gi = chart.inverse_metric(y).unwrap();
                    2.0 * (0..2).map(|k| gi[(j, k)] * xi[k]).sum::<f64>()
                },
                &x,
                j,
                1e-3,
            );
        }
        let sub = p1 - mixed / (2.0 * C::i());
        let val = subprincipal(&pot, &x, &xi).unwrap();
        assert!((sub - val).norm() < 1e-6, "{sub} vs {val}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn subprincipal_is_linear_in_a_and_ignores_q(seed in 0u64..1000, s in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chart = curved_chart();
        let p = chart.periods.clone();
        let mk = |rng: &mut ChaCha8Rng| -> Vec<ScalarField> {
            (0..2).map(|_| ScalarField::Trig(random_trig(rng, &p, 2, 1.0))).collect()
        };
        let (a, b) = (mk(&mut rng), mk(&mut rng));
        let q1 = ScalarField::Trig(random_trig(&mut rng, &p, 2, 1.0));
        let x = [rng.random_range(0.0..p[0]), rng.random_range(0.0..p[1])];
        let gi = chart.inverse_metric(&x).unwrap();
        let raw = [0.3f64, -0.8];
        let nrm = (0..2).flat_map(|j| (0..2).map(move |k| (j, k))).map(|(j, k)| gi[(j, k)] * raw[j] * raw[k]).sum::<f64>().sqrt();
        let xi = [raw[0] / nrm, raw[1] / nrm];
        let combo: Vec<ScalarField> = a.iter().zip(&b).map(|(u, v)| match (u, v) {
            (ScalarField::Trig(u), ScalarField::Trig(v)) => ScalarField::Trig(u.plus(&v.scaled(s))),
            _ => unreachable!(),
        }).collect();
        let sp = |a: Vec<ScalarField>, q: ScalarField| subprincipal(&PotentialData::new(chart.clone(), a, q).unwrap(), &x, &xi).unwrap();
        let lhs = sp(combo, q1.clone());
        let rhs = sp(a.clone(), konst(0.0)) + s * sp(b, q1);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn galerkin_matrix_is_hermitian_and_bounded_below(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = [2.0 * PI, 2.5];
        let chart = make_flat_torus(&p, 16).unwrap();
        let q = random_trig(&mut rng, &p, 2, 1.0);
        let pot = PotentialData::new(
            chart,
            (0..2).map(|_| ScalarField::Trig(random_trig(&mut rng, &p, 2, 1.0))).collect(),
            ScalarField::Trig(q.clone()),
        ).unwrap();
        let asm = assemble_schrodinger(&pot, 4).unwrap();
        prop_assert!(asm.hermitian_defect < 1e-12);
        // min q >= mean - sum of mode amplitudes.
        let lower = q.mean() - q.terms.iter().filter(|t| t.k.iter().any(|&v| v != 0)).map(|t| t.c.hypot(t.s)).sum::<f64>();
        let l0 = eigenvalues_only(&asm.matrix, 1).unwrap()[0];
        prop_assert!(l0 >= lower - 1e-10);
    }
}
