//! Acceptance checks shared by the test suites, the CLI `--check` mode and the
//! runtime-budget harness. Each check reports its measured values next to the
//! pinned bounds; a check passes when every measurement does.

use crate::affine::AffineFiberFunction;
use crate::cosphere::{bracket_residuals, pestov_residual, ResidualRecord, ROUNDOFF_FLOOR};
use crate::cosphere_nd::{bracket_residuals_nd, cosphere_quadrature, fiber_fn, special_form_norms, FiberCalculus, FiberFn};
use crate::disk::{asymptotic_match, disk_dn_oracle, OracleOptions};
use crate::error::{LabError, Result};
use crate::field::{ScalarField, TrigSeries};
use crate::geodesic::{ClosedGeodesic, Representative};
use crate::geometry::{hyperbolic_patch, make_flat_torus, make_isothermal_chart, warped_three_torus, MetricChart};
use crate::hyperbolic::{build_genus2_group, enumerate_closed_geodesics, geodesic_length, trace_invariant};
use crate::magnetic::{assemble_schrodinger, eigenvalues_only, gauge_conjugate, GaugeFunction, PotentialData};
use crate::mobius::{self, Mat2};
use crate::recovery::{apply_ledger, jet_recovery, RecoveryOptions};
use crate::steklov::{gauge_shift_subprincipal, symbol_factorize, BoundaryJets, PhgSymbol, SymbolOptions};
use crate::xray::{gauge_equivalence_decision, DecisionOptions, Verdict};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::AtMost => "<=",
            Relation::Above => ">",
            Relation::AtLeast => ">=",
        }
    }

    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::Below => value < bound,
            Relation::AtMost => value <= bound,
            Relation::Above => value > bound,
            Relation::AtLeast => value >= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Measurement {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, bound: f64) -> Self {
        Measurement { name: name.into(), value, relation, bound, passed: relation.holds(value, bound) }
    }
}

fn below(name: impl Into<String>, value: f64, bound: f64) -> Measurement {
    Measurement::new(name, value, Relation::Below, bound)
}

fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Measurement {
    Measurement::new(name, value, Relation::AtMost, bound)
}

fn above(name: impl Into<String>, value: f64, bound: f64) -> Measurement {
    Measurement::new(name, value, Relation::Above, bound)
}

fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Measurement {
    Measurement::new(name, value, Relation::AtLeast, bound)
}

#[derive(Debug, Clone, Copy)]
pub struct Check {
    pub id: &'static str,
    pub title: &'static str,
    /// Wall-clock budget in seconds, when one is stated.
    pub budget: Option<f64>,
    run: fn(u64) -> Result<Vec<Measurement>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub seed: u64,
    pub seconds: f64,
    pub budget: Option<f64>,
    pub measurements: Vec<Measurement>,
    pub error: Option<String>,
}

impl CheckOutcome {
    /// First failing measurement, else the first one.
    pub fn headline(&self) -> Option<&Measurement> {
        self.measurements.iter().find(|m| !m.passed).or(self.measurements.first())
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let detail = match (&self.error, self.headline()) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(m)) => format!("{} = {:.3e} {} {:.1e}", m.name, m.value, m.relation.symbol(), m.bound),
            (None, None) => "no measurements".into(),
        };
        format!("{verdict} [{}] {}: {detail} ({} checks, {:.1} s)", self.id, self.title, self.measurements.len(), self.seconds)
    }

    pub fn within_budget(&self) -> bool {
        self.budget.is_none_or(|b| self.seconds < b)
    }
}

pub const CHECKS: [Check; 10] = [
    Check { id: "brackets", title: "bracket algebra converges", budget: Some(30.0), run: brackets },
    Check { id: "pestov", title: "Pestov identity on manufactured solutions", budget: Some(60.0), run: pestov },
    Check { id: "special-forms", title: "special-form norm ratio n - 1", budget: None, run: special_forms },
    Check { id: "isospectrality", title: "gauge isospectrality and flux controls", budget: Some(120.0), run: isospectrality },
    Check { id: "flux-decision", title: "flux quantization decisions", budget: None, run: flux_decision },
    Check { id: "length-spectrum", title: "genus-2 length spectrum", budget: Some(120.0), run: length_spectrum },
    Check { id: "trace-invariant", title: "trace invariant under 2 pi k shifts", budget: None, run: trace_shifts },
    Check { id: "dn-oracle", title: "disk DN oracle against the symbol", budget: Some(120.0), run: dn_oracle },
    Check { id: "degree-zero", title: "degree-zero symbol difference", budget: None, run: degree_zero },
    Check { id: "jet-recovery", title: "jet recovery to order 4", budget: Some(300.0), run: recovery },
];

pub fn find(id: &str) -> Option<&'static Check> {
    CHECKS.iter().find(|c| c.id == id)
}

impl Check {
    pub fn run(&self, seed: u64) -> CheckOutcome {
        let start = Instant::now();
        let result = (self.run)(seed);
        let seconds = start.elapsed().as_secs_f64();
        let (measurements, error) = match result {
            Ok(m) => (m, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        let passed = error.is_none() && !measurements.is_empty() && measurements.iter().all(|m| m.passed);
        CheckOutcome {
            id: self.id.into(),
            title: self.title.into(),
            passed,
            seed,
            seconds,
            budget: self.budget,
            measurements,
            error,
        }
    }
}

pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    CHECKS.iter().map(|c| c.run(seed)).collect()
}

fn tau(n: usize) -> Vec<f64> {
    vec![2.0 * PI; n]
}

/// Isothermal torus `e^{2 phi}(dx^2 + dy^2)` with a band-limited `phi`.
pub fn conformal_torus() -> Result<MetricChart> {
    let t = TrigSeries::zero(&tau(2))
        .with_term(&[1, -1], 0.15, 0.0)
        .with_term(&[1, 1], -0.15, 0.0)
        .with_term(&[0, 1], 0.0, 0.1);
    make_isothermal_chart(ScalarField::Trig(t), 16, None)
}

/// Upper half-plane patch `[-1/2, 1/2] x [1, 2]`.
pub fn half_plane() -> Result<MetricChart> {
    hyperbolic_patch(vec![[-0.5, 0.5], [1.0, 2.0]], 16)
}

/// Cosphere test fields that are not band-limited, so convergence under
/// doubling is observable. The third one is not periodic in `x_2` and is
/// only meant for patches.
pub fn bracket_test_fields() -> [fn(&[f64], f64) -> C; 3] {
    [field_a, field_b, field_c]
}

fn field_a(x: &[f64], th: f64) -> C {
    C::new(1.0 / (2.2 - (th - x[0]).cos()) + (x[1] + 2.0 * th.sin()).sin(), 0.0)
}

fn field_b(x: &[f64], th: f64) -> C {
    C::new((0.5 * x[0].sin() * th.cos()).exp(), x[1].cos() / (2.5 + (2.0 * th).sin()))
}

fn field_c(x: &[f64], th: f64) -> C {
    C::new(0.0, x[0]).exp() / ((x[1] - 0.6).powi(2) + 0.25 + 0.2 * th.cos())
}

/// Non-polynomial fiber function on an `n`-dimensional cosphere bundle.
pub fn nd_field(n: usize) -> FiberFn {
    fiber_fn(move |x: &[f64], xi: &[f64]| {
        let s: f64 = (0..n).map(|k| (x[k] + 0.3 * k as f64).sin() * xi[k]).sum();
        C::new((0.7 * s).exp(), 0.0) / C::new(2.5 + xi[0] - 0.5 * xi[n - 1] * x[1].cos(), 0.3 * xi[1])
    })
}

/// Base residual below `1e-6` and a tenfold drop, or both at the floor.
fn convergence(out: &mut Vec<Measurement>, chart: &str, coarse: &ResidualRecord, fine: &ResidualRecord) {
    let name = format!("{chart} {}", coarse.identity_name);
    out.push(below(format!("{name} base"), coarse.residual, 1e-6));
    let bound = if coarse.residual <= ROUNDOFF_FLOOR { ROUNDOFF_FLOOR } else { coarse.residual / 10.0 };
    out.push(at_most(format!("{name} doubled"), fine.residual, bound));
}

fn brackets(_seed: u64) -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    let periodic: [&dyn Fn(&[f64], f64) -> C; 2] = [&field_a, &field_b];
    let all: [&dyn Fn(&[f64], f64) -> C; 3] = [&field_a, &field_b, &field_c];
    let planar = [
        ("flat torus", make_flat_torus(&tau(2), 16)?, &periodic[..], (32, 48)),
        ("conformal torus", conformal_torus()?, &periodic[..], (32, 48)),
        ("half-plane", half_plane()?, &all[..], (18, 48)),
    ];
    for (name, chart, fields, (n, nt)) in &planar {
        let rep = bracket_residuals(chart, fields, *n, *nt)?;
        let half = rep.len() / 2;
        for (c, f) in rep[..half].iter().zip(&rep[half..]) {
            convergence(&mut out, name, c, f);
        }
    }
    let chart = warped_three_torus(16)?;
    let rep = bracket_residuals_nd(&chart, &[nd_field(3)], 0.01, 2)?;
    let half = rep.len() / 2;
    for (c, f) in rep[..half].iter().zip(&rep[half..]) {
        convergence(&mut out, "warped 3-torus", c, f);
    }
    Ok(out)
}

/// Trigonometric polynomial with modes `|k|_inf <= 2` on the `2 pi` torus.
pub fn random_psi(rng: &mut ChaCha8Rng, amp: f64) -> TrigSeries {
    let mut t = TrigSeries::zero(&tau(2));
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

/// `psi` and `f = -<d psi, theta#>`, so that `u = e^{i psi}` solves `H u + i f u = 0`.
pub fn manufactured(rng: &mut ChaCha8Rng, amp: f64) -> (TrigSeries, AffineFiberFunction) {
    let psi = random_psi(rng, amp);
    let f1 = (0..2).map(|k| ScalarField::Trig(psi.derivative(k).scaled(-1.0))).collect();
    (psi, AffineFiberFunction::one_form(f1))
}

fn pestov(seed: u64) -> Result<Vec<Measurement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let charts = [
        ("flat torus", make_flat_torus(&tau(2), 16)?),
        ("conformal torus", conformal_torus()?),
        ("half-plane", half_plane()?),
    ];
    let mut out = Vec::new();
    let mut count = 0;
    for (name, chart) in &charts {
        let grid = crate::cosphere::CosphereGrid::new(chart, 48, 16)?;
        let (mut rearranged, mut beta): (f64, f64) = (0.0, 0.0);
        for _ in 0..7 {
            let (psi, f) = manufactured(&mut rng, 0.3);
            let u = grid.sample(&|x, _| C::new(0.0, psi.eval(x)).exp());
            let rep = pestov_residual(&grid, &u, &f)?;
            rearranged = rearranged.max(rep.rearranged_residual);
            beta = beta.max(rep.beta_norm);
            count += 1;
        }
        out.push(below(format!("{name} rearranged residual"), rearranged, 1e-6));
        out.push(below(format!("{name} beta norm"), beta, 1e-8));
    }
    out.push(at_least("manufactured solutions", count as f64, 20.0));
    Ok(out)
}

fn special_forms(seed: u64) -> Result<Vec<Measurement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for chart in [conformal_torus()?, warped_three_torus(16)?] {
        let n = chart.dim;
        let periods = tau(n);
        let calc = FiberCalculus::new(&chart, 0.01)?;
        let pts = cosphere_quadrature(&chart, 3, 16)?;
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
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
            let nm = special_form_norms(&calc, &AffineFiberFunction::new(f0, f1), &pts)?;
            worst = worst.max((nm.vf_sq / nm.f1_sq - (n as f64 - 1.0)).abs());
        }
        out.push(below(format!("n = {n} |ratio - (n - 1)| over 50 forms"), worst, 1e-6));
    }
    Ok(out)
}

/// Up to four random modes with `|k_j| <= max_mode`, no constant term.
pub fn random_trig(rng: &mut ChaCha8Rng, periods: &[f64], max_mode: i32, amp: f64) -> TrigSeries {
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

fn random_potential(rng: &mut ChaCha8Rng, chart: &MetricChart, amp: f64) -> Result<PotentialData> {
    let p = chart.periods.clone();
    let a = (0..chart.dim).map(|_| ScalarField::Trig(random_trig(rng, &p, 2, amp))).collect();
    PotentialData::new(chart.clone(), a, ScalarField::Trig(random_trig(rng, &p, 2, amp)))
}

fn trig_part(f: &ScalarField) -> Result<&TrigSeries> {
    match f {
        ScalarField::Trig(t) => Ok(t),
        _ => Err(LabError::Mismatch("expected a trigonometric potential".into())),
    }
}

fn spectrum(pot: &PotentialData, cutoff: usize, count: usize) -> Result<Vec<f64>> {
    eigenvalues_only(&assemble_schrodinger(pot, cutoff)?.matrix, count)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn isospectrality(seed: u64) -> Result<Vec<Measurement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    // the circle basis at cutoff 16 has 33 modes; its lowest 12 are resolved
    for (name, dim, count) in [("circle", 1, 12), ("2-torus", 2, 50)] {
        let chart = make_flat_torus(&tau(dim), 16)?;
        let (mut gap, mut control): (f64, f64) = (0.0, f64::INFINITY);
        for _ in 0..10 {
            let pot = random_potential(&mut rng, &chart, 0.3)?;
            let winding = (0..dim).map(|_| rng.random_range(-1..=1)).collect();
            let gauge = GaugeFunction::new(winding, random_trig(&mut rng, &chart.periods, 2, 0.2))?;
            let base = spectrum(&pot, 16, count)?;
            gap = gap.max(max_gap(&base, &spectrum(&gauge_conjugate(&pot, &gauge)?, 16, count)?));
            let mut shifted = pot.clone();
            let c = rng.random_range(0.2..0.8);
            shifted.a[0] = ScalarField::Trig(trig_part(&pot.a[0])?.plus(&TrigSeries::constant(&chart.periods, c)));
            control = control.min(max_gap(&base, &spectrum(&shifted, 16, count)?));
        }
        out.push(below(format!("{name} gauge gap over lowest {count}"), gap, 1e-8));
        out.push(above(format!("{name} non-quantized control gap"), control, 1e-3));
    }
    Ok(out)
}

fn flux_decision(seed: u64) -> Result<Vec<Measurement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = vec![2.0 * PI, 3.0];
    let chart = make_flat_torus(&p, 16)?;
    let lines: Vec<ClosedGeodesic> = [[1, 0], [0, 1], [1, 1], [1, -1], [2, 1]]
        .iter()
        .map(|w| ClosedGeodesic::torus_line(&[0.3, 0.7], w, &p))
        .collect();
    let opts = DecisionOptions { tol: 1e-6, ..Default::default() };
    let (mut errors, mut trials) = (0usize, 0usize);
    for trial in 0..100 {
        let pot = random_potential(&mut rng, &chart, 0.8)?;
        let (other, expect) = match trial % 3 {
            0 => {
                let w = vec![rng.random_range(-3..=3), rng.random_range(-3..=3)];
                let g = GaugeFunction::new(w, random_trig(&mut rng, &p, 3, 1.0))?;
                (gauge_conjugate(&pot, &g)?, Verdict::Equivalent)
            }
            1 => {
                // a + d phi with single-valued phi, built without the gauge code
                let phi = random_trig(&mut rng, &p, 3, 1.0);
                let mut o = pot.clone();
                for j in 0..2 {
                    o.a[j] = ScalarField::Trig(trig_part(&pot.a[j])?.plus(&phi.derivative(j)));
                }
                (o, Verdict::Equivalent)
            }
            _ => {
                // flux per loop 2 pi (m + s) with s at least 0.1 away from the lattice
                let j = rng.random_range(0..2usize);
                let s = rng.random_range(0.1..0.9) + rng.random_range(-2..=2) as f64;
                let mut o = pot.clone();
                o.a[j] = ScalarField::Trig(trig_part(&pot.a[j])?.plus(&TrigSeries::constant(&p, 2.0 * PI * s / p[j])));
                (o, Verdict::NotEquivalent)
            }
        };
        let d = gauge_equivalence_decision(&pot, &other, &lines, opts)?;
        trials += 1;
        if d.verdict != expect {
            errors += 1;
        }
    }
    Ok(vec![at_least("trials", trials as f64, 100.0), at_most("misclassified", errors as f64, 0.0)])
}

fn axis_matrix(g: &ClosedGeodesic) -> Result<Mat2> {
    match &g.representative {
        Representative::HyperbolicAxis { matrix } => Ok(*matrix),
        _ => Err(LabError::Mismatch("expected a hyperbolic axis".into())),
    }
}

/// Shortest translation length over all reduced words up to `depth` letters.
fn brute_force_systole(gens: &[Mat2], depth: usize) -> f64 {
    let letters: Vec<Mat2> = gens.iter().flat_map(|g| [*g, mobius::inverse(g)]).collect();
    fn rec(letters: &[Mat2], m: Mat2, last: Option<usize>, depth: usize, best: &mut f64) {
        for (i, l) in letters.iter().enumerate() {
            if last.is_some_and(|j| j ^ 1 == i) {
                continue;
            }
            let next = mobius::mul(&m, l);
            let t = mobius::trace(&next).abs();
            if t > 2.0 + 1e-9 {
                *best = best.min(2.0 * (t / 2.0).acosh());
            }
            if depth > 1 {
                rec(letters, next, Some(i), depth - 1, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(&letters, mobius::IDENTITY, None, depth, &mut best);
    best
}

fn length_spectrum(seed: u64) -> Result<Vec<Measurement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group = build_genus2_group();
    let systole = brute_force_systole(&group.generators, 6);
    let spec = enumerate_closed_geodesics(&group, 2.0 * systole)?;
    let shortest = spec.entries.first().map_or(f64::INFINITY, |e| e.length);
    let multiplicity = spec.entries.iter().filter(|e| (e.length - systole).abs() < 1e-9).count();
    let (mut conj, mut pdet): (f64, f64) = (0.0, 0.0);
    for e in &spec.entries {
        let m = axis_matrix(e)?;
        let len = geodesic_length(&m)?;
        let a: f64 = rng.random_range(0.5..2.0);
        let (b, c) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let mut conjugators = vec![[[a, b], [c, (1.0 + b * c) / a]]];
        conjugators.extend(group.generators.iter().copied());
        for h in &conjugators {
            conj = conj.max((geodesic_length(&mobius::conj(h, &m))? - len).abs());
        }
        if e.iterate == 1 {
            let tr = mobius::trace(&m);
            pdet = pdet.max((e.poincare_det - (tr * tr - 4.0)).abs());
        }
    }
    Ok(vec![
        at_least("certified radius / (2 systole)", spec.certified_radius / (2.0 * systole), 1.0),
        below("|shortest - brute-force systole|", (shortest - systole).abs(), 1e-9),
        at_least("systolic classes", multiplicity as f64, 1.0),
        below("conjugation length change", conj, 1e-12),
        below("|pdet - (tr^2 - 4)| on primitives", pdet, 1e-9),
    ])
}

fn trace_shifts(seed: u64) -> Result<Vec<Measurement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group = build_genus2_group();
    let systole = brute_force_systole(&group.generators, 6);
    let spec = enumerate_closed_geodesics(&group, 2.0 * systole)?;
    let mut worst: f64 = 0.0;
    for e in &spec.entries {
        let sub = rng.random_range(-10.0..10.0);
        let maslov = rng.random_range(-4..4);
        let base = trace_invariant(e, sub, maslov)?;
        for k in -3..=3 {
            let shifted = trace_invariant(e, sub + 2.0 * PI * k as f64, maslov)?;
            worst = worst.max((shifted.value - base.value).norm());
        }
    }
    Ok(vec![at_least("geodesics", spec.entries.len() as f64, 1.0), below("max |c(s + 2 pi k) - c(s)|", worst, 1e-12)])
}

fn dn_oracle(_seed: u64) -> Result<Vec<Measurement>> {
    let opts = OracleOptions::default();
    let mut out = Vec::new();
    let mut trivial: f64 = 0.0;
    for k in -64..=64 {
        trivial = trivial.max((disk_dn_oracle(&[], &[], k, opts)?.sigma - k.abs() as f64).abs());
    }
    out.push(below("a = q = 0: |sigma_k - |k||, |k| <= 64", trivial, 1e-10));
    for q in [0.5, 1.0] {
        let values: Vec<(i32, f64)> =
            (16..=64).map(|k| disk_dn_oracle(&[], &[q], k, opts).map(|v| (k, v.sigma))).collect::<Result<_>>()?;
        let sym = symbol_factorize(&BoundaryJets::disk(&[], &[q], 4), 4, SymbolOptions { grid: 1, fiber_samples: 64 })?;
        let p1 = sym.eval(-1, 0, &[1.0])?.re;
        let lead = asymptotic_match(&values, &sym, 0)?;
        out.push(below(format!("q = {q}: |fit / p_-1 - 1|"), (lead.coefficient / p1 - 1.0).abs(), 0.02));
        let next = asymptotic_match(&values, &sym, 1)?;
        out.push(at_least(format!("q = {q}: residual order"), next.order.unwrap_or(0.0), 1.9));
    }
    Ok(out)
}

/// Curved metric jets with band-limited potentials on a boundary torus.
pub fn demo_boundary_jets(order: usize) -> BoundaryJets {
    let p = [1.0, 1.5];
    let mut j = BoundaryJets::flat(&p, order);
    let off = TrigSeries::constant(&p, 0.1).with_term(&[0, 1], 0.04, 0.0);
    j.g_inv[0] = vec![
        TrigSeries::constant(&p, 1.2).with_term(&[1, 0], 0.1, 0.05),
        off.clone(),
        off,
        TrigSeries::constant(&p, 0.9).with_term(&[1, 1], 0.0, 0.05),
    ];
    j.g_inv[1][0] = TrigSeries::constant(&p, 0.3).with_term(&[0, 1], 0.1, 0.0);
    j.g_inv[1][3] = TrigSeries::constant(&p, -0.2).with_term(&[1, 0], 0.0, 0.1);
    j.g_inv[2][3] = TrigSeries::constant(&p, -0.4).with_term(&[1, 0], 0.1, 0.0);
    j.a[0][0] = TrigSeries::constant(&p, 0.2).with_term(&[1, 0], 0.1, 0.3);
    j.a[0][1] = TrigSeries::constant(&p, -0.1).with_term(&[1, 1], 0.2, 0.0);
    j.a[1][1] = TrigSeries::constant(&p, 0.5).with_term(&[0, 1], 0.1, 0.3);
    j.q[0] = TrigSeries::constant(&p, 0.5).with_term(&[1, 1], 0.1, 0.3);
    if order > 1 {
        j.g_inv[3][0] = TrigSeries::constant(&p, 0.5);
        j.a[2][0] = TrigSeries::zero(&p).with_term(&[1, 0], 0.0, 0.2);
        j.q[1] = TrigSeries::constant(&p, -0.3).with_term(&[0, 1], 0.0, 0.2);
    }
    j
}

fn random_boundary_form(rng: &mut ChaCha8Rng, periods: &[f64]) -> Vec<TrigSeries> {
    (0..periods.len())
        .map(|_| {
            let mut t = TrigSeries::constant(periods, rng.random_range(-0.5..0.5));
            for _ in 0..2 {
                let k: Vec<i32> = (0..periods.len()).map(|_| rng.random_range(-1..=1)).collect();
                t = t.with_term(&k, rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            }
            t
        })
        .collect()
}

/// `max |s_B - s_A - <w, xi#>|` over the symbol samples, with the pairing
/// evaluated from the metric jets directly.
fn lift_gap(sa: &PhgSymbol, sub_b: &[Vec<C>], w: &[TrigSeries]) -> Result<f64> {
    let m = sa.dim();
    let mut worst: f64 = 0.0;
    for (p, x) in sa.points.iter().enumerate() {
        for k in 0..sa.fiber_samples {
            let xi = sa.covector(p, k)?;
            let mut pair = 0.0;
            for a in 0..m {
                for b in 0..m {
                    pair += w[a].eval(x) * sa.jets.g_inv[0][a * m + b].eval(x) * xi[b];
                }
            }
            worst = worst.max((sub_b[p][k] - sa.subprincipal[p][k] - pair).norm());
        }
    }
    Ok(worst)
}

fn degree_zero(seed: u64) -> Result<Vec<Measurement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SymbolOptions { grid: 4, fiber_samples: 64 };
    let mut flat = BoundaryJets::flat(&[2.0 * PI, 2.0 * PI], 2);
    flat.a[0][0] = TrigSeries::constant(&flat.periods, 0.4).with_term(&[1, 0], 0.0, 0.2);
    flat.q[0] = TrigSeries::constant(&flat.periods, 0.8).with_term(&[0, 1], 0.1, 0.0);
    let mut out = Vec::new();
    for (name, base) in [("curved pair", demo_boundary_jets(2)), ("flat pair", flat)] {
        let w = random_boundary_form(&mut rng, &base.periods);
        let mut other = base.clone();
        for (al, f) in w.iter().enumerate() {
            other.a[0][al] = other.a[0][al].plus(f);
        }
        let (sa, sb) = (symbol_factorize(&base, 2, opts)?, symbol_factorize(&other, 2, opts)?);
        out.push(below(format!("{name}: |sub difference - lift of da|"), lift_gap(&sa, &sb.subprincipal, &w)?, 1e-8));
        let winding = vec![1, -1];
        let gauge = GaugeFunction::new(winding.clone(), random_trig(&mut rng, &base.periods, 1, 0.05))?;
        let shifted = gauge_shift_subprincipal(&sa, &gauge)?;
        let form = gauge.gauge_form();
        out.push(below(format!("{name}: |winding gauge shift - lift of its form|"), lift_gap(&sa, &shifted.subprincipal, &form)?, 1e-8));
        let mut flux: f64 = 0.0;
        for (ax, f) in form.iter().enumerate() {
            let n = 64;
            let integral: f64 = (0..n)
                .map(|i| {
                    let mut x = vec![0.2; base.dim()];
                    x[ax] = base.periods[ax] * i as f64 / n as f64;
                    f.eval(&x) * base.periods[ax] / n as f64
                })
                .sum();
            flux = flux.max((integral - 2.0 * PI * winding[ax] as f64).abs());
        }
        out.push(below(format!("{name}: gauge form flux - 2 pi winding"), flux, 1e-10));
    }
    Ok(out)
}

/// Jets of `a` after a winding boundary gauge `theta_0` and exact normal
/// shifts `d beta_l` at orders `1..=J`; returns the partner, `theta_0` and the
/// `beta_l`.
pub fn gauge_jet_partner(base: &BoundaryJets, rng: &mut ChaCha8Rng) -> Result<(BoundaryJets, GaugeFunction, Vec<TrigSeries>)> {
    let p = &base.periods;
    let winding = (0..p.len()).map(|j| if j.is_multiple_of(2) { 1 } else { -1 }).collect();
    let theta = GaugeFunction::new(winding, random_trig(rng, p, 1, 0.05))?;
    let betas: Vec<TrigSeries> = (1..base.a.len()).map(|_| random_trig(rng, p, 1, 0.1)).collect();
    let mut partner = base.clone();
    for (al, f) in theta.gauge_form().iter().enumerate() {
        partner.a[0][al] = partner.a[0][al].plus(f);
    }
    for (l, b) in betas.iter().enumerate() {
        for al in 0..p.len() {
            partner.a[l + 1][al] = partner.a[l + 1][al].plus(&b.derivative(al));
        }
    }
    Ok((partner, theta, betas))
}

fn recovery(seed: u64) -> Result<Vec<Measurement>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = 4;
    let opts = SymbolOptions { grid: 6, fiber_samples: 64 };
    let base = demo_boundary_jets(order);
    let p = base.periods.clone();
    let (partner, _, betas) = gauge_jet_partner(&base, &mut rng)?;
    let sa = symbol_factorize(&base, order, opts)?;
    let sb = symbol_factorize(&partner, order, opts)?;
    let ropts = RecoveryOptions { order, ..Default::default() };
    let st = jet_recovery(&sa, &sb, ropts)?;
    let mut out = vec![at_most("obstructions", st.obstruction.is_some() as u8 as f64, 0.0)];
    out.push(at_least("steps completed", st.steps.len() as f64, order as f64));
    out.push(below("degree-zero drop", st.degree_zero_drop, 1e-8));
    let (mut dq, mut curl, mut drop, mut beta): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for (step, b) in st.steps.iter().zip(&betas) {
        dq = dq.max(step.delta_q.iter().fold(0.0, |m, v| m.max(v.abs())));
        curl = curl.max(step.curl);
        drop = drop.max(step.degree_drop);
        let x0 = vec![0.0; 2];
        let off = b.eval(&x0) - step.beta.eval(&x0);
        for x in &sa.points {
            beta = beta.max((b.eval(x) - step.beta.eval(x) - off).abs());
        }
    }
    out.push(below("max recovered dq jet", dq, 1e-6));
    out.push(below("max recovered d(da) jet", curl, 1e-6));
    out.push(below("max degree drop", drop, 1e-8));
    out.push(below("ledger beta error up to constants", beta, 1e-6));
    let replay = symbol_factorize(&apply_ledger(&base, &st)?, order, opts)?;
    out.push(below("ledger replay symbol gap", replay.max_difference(&sb)?.into_iter().fold(0.0, f64::max), 1e-8));
    // genuine scalar difference at normal order 2
    let dq_in = random_trig(&mut rng, &p, 1, 0.2).plus(&TrigSeries::constant(&p, 0.15));
    let mut changed = base.clone();
    changed.q[2] = changed.q[2].plus(&dq_in);
    let sc = symbol_factorize(&changed, order, opts)?;
    let st = jet_recovery(&sa, &sc, ropts)?;
    let step = st.steps.iter().find(|s| s.j == 3).ok_or_else(|| LabError::Convergence("recovery stopped before order 2".into()))?;
    let err = sa.points.iter().zip(&step.delta_q).fold(0.0f64, |m, (x, v)| m.max((v - dq_in.eval(x)).abs()));
    out.push(below("injected order-2 dq error", err, 1e-6));
    Ok(out)
}
