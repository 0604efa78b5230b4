//! One function per subcommand. Each writes its tables into the run directory
//! and returns notes for the manifest.

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{Cell, RunDir};
use maglab_core::affine::AffineFiberFunction;
use maglab_core::checks::{self, bracket_test_fields, conformal_torus, demo_boundary_jets, gauge_jet_partner, half_plane, manufactured, nd_field};
use maglab_core::cosphere::{bracket_residuals, converges, pestov_residual, CosphereGrid};
use maglab_core::cosphere_nd::bracket_residuals_nd;
use maglab_core::disk::{asymptotic_match, disk_dn_oracle, OracleOptions};
use maglab_core::field::{ScalarField, TrigSeries};
use maglab_core::geodesic::ClosedGeodesic;
use maglab_core::geometry::{make_flat_torus, warped_three_torus, MetricChart};
use maglab_core::hyperbolic::{build_genus2_group, enumerate_with, geodesic_length, trace_invariant, EnumerationOptions};
use maglab_core::magnetic::{assemble_schrodinger, eigenvalues_only, gauge_conjugate, GaugeFunction, PotentialData};
use maglab_core::recovery::{jet_recovery, RecoveryOptions};
use maglab_core::steklov::{symbol_factorize, BoundaryJets, SymbolOptions};
use maglab_core::transport::solve_transport_on_geodesic;
use maglab_core::xray::{gauge_equivalence_decision, geodesic_label, xray_record, DecisionOptions};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::f64::consts::PI;

pub type Notes = Vec<String>;

type Field<'a> = &'a dyn Fn(&[f64], f64) -> Complex64;

fn tolerance(what: &str, measured: f64, tol: f64) -> Result<(), CliError> {
    if measured <= tol {
        Ok(())
    } else {
        Err(CliError::Tolerance { what: what.into(), measured, tol })
    }
}

/// `circle` and `torus` are the `2 pi` presets; explicit `periods` win.
fn periods(cfg: &ExperimentConfig, default_dim: usize) -> Result<Vec<f64>, CliError> {
    if let Some(p) = &cfg.periods {
        return Ok(p.clone());
    }
    match cfg.chart.as_deref() {
        None => Ok(vec![2.0 * PI; default_dim]),
        Some("circle") => Ok(vec![2.0 * PI]),
        Some("torus") => Ok(vec![2.0 * PI; 2]),
        Some(other) => Err(CliError::Config(format!("chart {other:?} is not a flat torus preset (circle, torus)"))),
    }
}

fn as_int(v: f64, key: &str) -> Result<i32, CliError> {
    if v.fract() != 0.0 || v.abs() > 1e6 {
        return Err(CliError::Config(format!("{key}: expected an integer, got {v}")));
    }
    Ok(v as i32)
}

/// `constant + sum of rows [k_1 .. k_d, cos, sin]`.
fn series(periods: &[f64], constant: f64, rows: &[Vec<f64>], key: &str) -> Result<TrigSeries, CliError> {
    let d = periods.len();
    let mut t = TrigSeries::constant(periods, constant);
    for row in rows {
        if row.len() != d + 2 {
            return Err(CliError::Config(format!("{key}: row {row:?} needs {} entries", d + 2)));
        }
        let k = row[..d].iter().map(|v| as_int(*v, key)).collect::<Result<Vec<_>, _>>()?;
        t = t.with_term(&k, row[d], row[d + 1]);
    }
    Ok(t.canonical())
}

fn one_form(cfg: &ExperimentConfig, periods: &[f64]) -> Result<Vec<TrigSeries>, CliError> {
    let d = periods.len();
    let consts = cfg.a.clone().unwrap_or_else(|| vec![0.0; d]);
    if consts.len() != d {
        return Err(CliError::Config(format!("a has {} components on a {d}-torus", consts.len())));
    }
    let rows = cfg.a_terms.clone().unwrap_or_default();
    (0..d)
        .map(|j| {
            let mine: Vec<Vec<f64>> = rows
                .iter()
                .filter(|r| r.first().map(|c| *c as usize) == Some(j))
                .map(|r| r[1..].to_vec())
                .collect();
            if let Some(bad) = rows.iter().find(|r| r.is_empty() || as_int(r[0], "a_terms").map_or(true, |c| c < 0 || c as usize >= d)) {
                return Err(CliError::Config(format!("a_terms: bad component in {bad:?}")));
            }
            series(periods, consts[j], &mine, "a_terms")
        })
        .collect()
}

fn potential(cfg: &ExperimentConfig, periods: &[f64]) -> Result<PotentialData, CliError> {
    let resolution = cfg.resolution.unwrap_or(16);
    let chart = make_flat_torus(periods, resolution)?;
    let a = one_form(cfg, periods)?.into_iter().map(ScalarField::Trig).collect();
    let q = series(periods, cfg.q.unwrap_or(0.0), cfg.q_terms.as_deref().unwrap_or(&[]), "q_terms")?;
    Ok(PotentialData::new(chart, a, ScalarField::Trig(q))?)
}

fn gauge(cfg: &ExperimentConfig, periods: &[f64]) -> Result<Option<GaugeFunction>, CliError> {
    if cfg.winding.is_none() && cfg.psi_terms.is_none() {
        return Ok(None);
    }
    let winding = cfg.winding.clone().unwrap_or_else(|| vec![0; periods.len()]);
    let psi = series(periods, 0.0, cfg.psi_terms.as_deref().unwrap_or(&[]), "psi_terms")?;
    Ok(Some(GaugeFunction::new(winding, psi)?))
}

fn lines(cfg: &ExperimentConfig, periods: &[f64], default: &[&[i32]]) -> Result<Vec<ClosedGeodesic>, CliError> {
    let windings: Vec<Vec<i32>> = cfg.lines.clone().unwrap_or_else(|| default.iter().map(|w| w.to_vec()).collect());
    let start = vec![0.3; periods.len()];
    windings
        .iter()
        .map(|w| {
            if w.len() != periods.len() || w.iter().all(|&m| m == 0) {
                Err(CliError::Config(format!("line winding {w:?} does not fit a {}-torus", periods.len())))
            } else {
                Ok(ClosedGeodesic::torus_line(&start, w, periods))
            }
        })
        .collect()
}

pub fn lengths(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<Notes, CliError> {
    let group = build_genus2_group();
    let systole = group.generators.iter().map(geodesic_length).collect::<Result<Vec<_>, _>>()?.into_iter().fold(f64::INFINITY, f64::min);
    let l_max = cfg.l_max.unwrap_or(2.0 * systole);
    let opts = EnumerationOptions { word_budget: cfg.word_budget.unwrap_or(12), tol: cfg.tol.unwrap_or(1e-7) };
    let spectrum = enumerate_with(&group, l_max, opts)?;
    let mut rows = Vec::new();
    for (i, e) in spectrum.entries.iter().enumerate() {
        let c = trace_invariant(e, 0.0, 0)?;
        rows.push(vec![
            i.into(),
            e.word.clone().unwrap_or_default().into(),
            e.length.into(),
            e.primitive_period.into(),
            (e.iterate as usize).into(),
            e.poincare_det.into(),
            c.modulus.into(),
        ]);
    }
    run.table("lengths.csv", &["index", "word", "length", "primitive_period", "iterate", "poincare_det", "trace_modulus"], rows)?;
    run.json(
        "spectrum.json",
        json!({
            "l_max": l_max,
            "systole": systole,
            "classes": spectrum.entries.len(),
            "simple": spectrum.simple,
            "min_gap": spectrum.min_gap,
            "tolerance": spectrum.tolerance,
            "certified_radius": spectrum.certified_radius,
            "word_budget": spectrum.word_budget,
            "elements_visited": spectrum.elements_visited,
        }),
    )?;
    Ok(vec![format!("{} classes up to length {l_max:.6}", spectrum.entries.len())])
}

pub fn brackets(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<Notes, CliError> {
    let name = cfg.chart.clone().unwrap_or_else(|| "flat".into());
    let tol = cfg.tol.unwrap_or(1e-6);
    let fields = bracket_test_fields();
    let refs: Vec<Field> = fields.iter().map(|f| f as Field).collect();
    let rep = match name.as_str() {
        "flat" => bracket_residuals(&make_flat_torus(&[2.0 * PI; 2], 16)?, &refs[..2], cfg.resolution.unwrap_or(32), cfg.fiber.unwrap_or(48))?,
        "conformal" => bracket_residuals(&conformal_torus()?, &refs[..2], cfg.resolution.unwrap_or(32), cfg.fiber.unwrap_or(48))?,
        "half-plane" => bracket_residuals(&half_plane()?, &refs, cfg.resolution.unwrap_or(18), cfg.fiber.unwrap_or(48))?,
        "warped" => bracket_residuals_nd(&warped_three_torus(16)?, &[nd_field(3)], 0.01, cfg.resolution.unwrap_or(2))?,
        other => return Err(CliError::Config(format!("chart {other:?}: expected flat, conformal, half-plane or warped"))),
    };
    let rows = rep
        .iter()
        .map(|r| vec![name.as_str().into(), r.identity_name.as_str().into(), r.resolution.into(), r.residual.into(), r.convergence_order.into()])
        .collect();
    run.table("brackets.csv", &["chart", "identity", "resolution", "residual", "convergence_order"], rows)?;
    let half = rep.len() / 2;
    for (c, f) in rep[..half].iter().zip(&rep[half..]) {
        tolerance(&format!("{} base residual", c.identity_name), c.residual, tol)?;
        if !converges(c.residual, f.residual, tol) {
            return Err(CliError::Tolerance { what: format!("{} refined residual (tenfold drop)", c.identity_name), measured: f.residual, tol: c.residual / 10.0 });
        }
    }
    Ok(Vec::new())
}

fn cosphere_chart(cfg: &ExperimentConfig) -> Result<(String, MetricChart), CliError> {
    let name = cfg.chart.clone().unwrap_or_else(|| "conformal".into());
    let chart = match name.as_str() {
        "flat" => make_flat_torus(&[2.0 * PI; 2], 16)?,
        "conformal" => conformal_torus()?,
        "half-plane" => half_plane()?,
        other => return Err(CliError::Config(format!("chart {other:?}: expected flat, conformal or half-plane"))),
    };
    Ok((name, chart))
}

pub fn pestov(cfg: &ExperimentConfig, run: &mut RunDir, seed: u64) -> Result<Notes, CliError> {
    let (name, chart) = cosphere_chart(cfg)?;
    let tol = cfg.tol.unwrap_or(1e-6);
    let grid = CosphereGrid::new(&chart, cfg.resolution.unwrap_or(48), cfg.fiber.unwrap_or(16))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for trial in 0..cfg.samples.unwrap_or(7) {
        let (psi, f) = manufactured(&mut rng, 0.3);
        let u = grid.sample(&|x, _| Complex64::new(0.0, psi.eval(x)).exp());
        let r = pestov_residual(&grid, &u, &f)?;
        worst = worst.max(r.rearranged_residual);
        rows.push(vec![
            name.as_str().into(),
            trial.into(),
            r.identity_residual.into(),
            r.rearranged_residual.into(),
            r.beta_norm.into(),
            r.f_sq.into(),
            r.vf_sq.into(),
        ]);
    }
    run.table("pestov.csv", &["chart", "trial", "identity_residual", "rearranged_residual", "beta_norm", "f_sq", "vf_sq"], rows)?;
    tolerance("rearranged Pestov residual", worst, tol)?;
    Ok(Vec::new())
}

pub fn transport(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<Notes, CliError> {
    let p = periods(cfg, 2)?;
    let a = one_form(cfg, &p)?;
    let f = AffineFiberFunction::one_form(a.into_iter().map(ScalarField::Trig).collect());
    let mut rows = Vec::new();
    for geo in lines(cfg, &p, &[&[1, 0], &[0, 1], &[1, 1]])? {
        let sol = solve_transport_on_geodesic(&geo, &f, cfg.samples.unwrap_or(256))?;
        rows.push(vec![geodesic_label(&geo).into(), geo.length.into(), sol.line_integral.into(), sol.defect.into(), sol.lattice_distance.into()]);
    }
    run.table("transport.csv", &["line", "length", "line_integral", "defect", "lattice_distance"], rows)?;
    Ok(Vec::new())
}

pub fn schrodinger(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<Notes, CliError> {
    let p = periods(cfg, 1)?;
    let pot = potential(cfg, &p)?;
    let cutoff = cfg.cutoff.unwrap_or(16);
    let count = cfg.count.unwrap_or(20);
    let m = assemble_schrodinger(&pot, cutoff)?;
    let mut notes = m.warnings.clone();
    let base = eigenvalues_only(&m.matrix, count)?;
    run.table("eigenvalues.csv", &["index", "eigenvalue"], base.iter().enumerate().map(|(i, v)| vec![i.into(), (*v).into()]).collect())?;
    if let Some(g) = gauge(cfg, &p)? {
        let other = gauge_conjugate(&pot, &g)?;
        let mg = assemble_schrodinger(&other, cutoff)?;
        notes.extend(mg.warnings.iter().map(|w| format!("gauged: {w}")));
        let gauged = eigenvalues_only(&mg.matrix, count)?;
        let mut worst: f64 = 0.0;
        let rows = base
            .iter()
            .zip(&gauged)
            .enumerate()
            .map(|(i, (a, b))| {
                worst = worst.max((a - b).abs());
                vec![i.into(), (*a).into(), (*b).into(), (a - b).abs().into()]
            })
            .collect();
        run.table("isospectrality.csv", &["index", "eigenvalue", "gauged", "gap"], rows)?;
        notes.push(format!("max gauge gap {worst:e}"));
        tolerance("gauge eigenvalue gap", worst, cfg.tol.unwrap_or(1e-8))?;
    }
    Ok(notes)
}

fn partner(cfg: &ExperimentConfig, pot: &PotentialData, p: &[f64]) -> Result<PotentialData, CliError> {
    let g = gauge(cfg, p)?.map_or_else(|| GaugeFunction::new(vec![0; p.len()], TrigSeries::zero(p)), Ok)?;
    let mut other = gauge_conjugate(pot, &g)?;
    if let Some(shift) = &cfg.shift {
        if shift.len() != p.len() {
            return Err(CliError::Config(format!("shift has {} components on a {}-torus", shift.len(), p.len())));
        }
        for (j, s) in shift.iter().enumerate() {
            let ScalarField::Trig(t) = &other.a[j] else { unreachable!("flat torus potentials are trigonometric") };
            other.a[j] = ScalarField::Trig(t.plus(&TrigSeries::constant(p, *s)));
        }
    }
    Ok(other)
}

const TEST_LINES: [&[i32]; 5] = [&[1, 0], &[0, 1], &[1, 1], &[1, -1], &[2, 1]];

pub fn gauge_cmd(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<Notes, CliError> {
    let p = periods(cfg, 2)?;
    let pot = potential(cfg, &p)?;
    let other = partner(cfg, &pot, &p)?;
    let default: Vec<&[i32]> = if p.len() == 1 { vec![&[1]] } else { TEST_LINES.to_vec() };
    let geos = lines(cfg, &p, &default)?;
    let opts = DecisionOptions { tol: cfg.tol.unwrap_or(1e-6), ..Default::default() };
    let d = gauge_equivalence_decision(&pot, &other, &geos, opts)?;
    let rows = d.fluxes.iter().map(|f| vec![f.label.as_str().into(), f.flux.into(), f.lattice_distance.into()]).collect();
    run.table("fluxes.csv", &["line", "flux", "lattice_distance"], rows)?;
    let verdict = serde_json::to_value(d.verdict)?;
    run.json("decision.json", serde_json::to_value(&d)?)?;
    Ok(vec![format!("verdict {}", verdict.as_str().unwrap_or_default())])
}

pub fn xray(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<Notes, CliError> {
    let p = periods(cfg, 2)?;
    let pot = potential(cfg, &p)?;
    let default: Vec<&[i32]> = if p.len() == 1 { vec![&[1]] } else { TEST_LINES.to_vec() };
    let mut rows = Vec::new();
    for geo in lines(cfg, &p, &default)? {
        let r = xray_record(&pot.q, &pot.a, &geo)?;
        rows.push(vec![r.label.into(), r.length.into(), r.value_f0.into(), r.value_f1.into(), r.combined.into()]);
    }
    run.table("xray.csv", &["line", "length", "function", "one_form", "combined"], rows)?;
    Ok(Vec::new())
}

fn boundary_jets(cfg: &ExperimentConfig, order: usize) -> Result<BoundaryJets, CliError> {
    match cfg.jets.as_deref().unwrap_or("torus-demo") {
        "torus-demo" => Ok(demo_boundary_jets(order)),
        "disk" => Ok(BoundaryJets::disk(cfg.a_theta.as_deref().unwrap_or(&[]), cfg.q_radial.as_deref().unwrap_or(&[]), order)),
        "flat" => {
            let p = periods(cfg, 2)?;
            let mut j = BoundaryJets::flat(&p, order);
            for (al, t) in one_form(cfg, &p)?.into_iter().enumerate() {
                j.a[0][al] = t;
            }
            j.q[0] = series(&p, cfg.q.unwrap_or(0.0), cfg.q_terms.as_deref().unwrap_or(&[]), "q_terms")?;
            Ok(j)
        }
        other => Err(CliError::Config(format!("jets {other:?}: expected torus-demo, disk or flat"))),
    }
}

fn symbol_options(cfg: &ExperimentConfig, grid: usize, fiber: usize) -> SymbolOptions {
    SymbolOptions { grid: cfg.grid.unwrap_or(grid), fiber_samples: cfg.fiber_samples.unwrap_or(fiber) }
}

pub fn steklov_symbol(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<Notes, CliError> {
    let order = cfg.order.unwrap_or(4);
    let sym = symbol_factorize(&boundary_jets(cfg, order)?, order, symbol_options(cfg, 8, 128))?;
    let mut rows = Vec::new();
    for (d, term) in sym.degrees.iter().zip(&sym.terms) {
        for (p, samples) in term.iter().enumerate() {
            for (k, v) in samples.iter().enumerate() {
                rows.push(vec![(*d).into(), p.into(), k.into(), v.re.into(), v.im.into()]);
            }
        }
    }
    run.table("terms.csv", &["degree", "point", "sample", "re", "im"], rows)?;
    let rows = sym
        .subprincipal
        .iter()
        .enumerate()
        .flat_map(|(p, s)| s.iter().enumerate().map(move |(k, v)| vec![p.into(), k.into(), v.re.into(), v.im.into()]))
        .collect();
    run.table("subprincipal.csv", &["point", "sample", "re", "im"], rows)?;
    run.json("symbol.json", sym.to_json())?;
    Ok(vec![format!("degrees {:?}", sym.degrees)])
}

pub fn steklov_oracle(cfg: &ExperimentConfig, run: &mut RunDir) -> Result<Notes, CliError> {
    let a = cfg.a_theta.clone().unwrap_or_default();
    let q = cfg.q_radial.clone().unwrap_or_else(|| vec![0.5]);
    let (k_min, k_max) = (cfg.k_min.unwrap_or(16), cfg.k_max.unwrap_or(64));
    if k_min > k_max {
        return Err(CliError::Config(format!("k_min {k_min} > k_max {k_max}")));
    }
    let order = cfg.order.unwrap_or(4);
    let truncation = cfg.truncation.unwrap_or(1);
    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut worst_step: f64 = 0.0;
    for k in (k_min..=k_max).filter(|k| *k != 0) {
        let v = disk_dn_oracle(&a, &q, k, OracleOptions::default())?;
        worst_step = worst_step.max(v.step_change);
        rows.push(vec![k.into(), v.fine.into(), v.step_change.into(), v.sigma.into()]);
        values.push((k, v.sigma));
    }
    run.table("oracle.csv", &["k", "sigma_k", "step", "extrapolated"], rows)?;
    let sym = symbol_factorize(&BoundaryJets::disk(&a, &q, order), order, symbol_options(cfg, 1, 64))?;
    let fit = asymptotic_match(&values, &sym, truncation)?;
    run.table("residuals.csv", &["k", "residual"], fit.residuals.iter().map(|(k, r)| vec![(*k).into(), (*r).into()]).collect())?;
    let p_next = sym.eval(-(truncation as i32) - 1, 0, &[1.0]).map(|v| v.re).ok();
    let mut doc = serde_json::to_value(&fit)?;
    doc["symbol_next_term"] = json!(p_next);
    run.json("fit.json", doc)?;
    tolerance("oracle step-halving change", worst_step, cfg.tol.unwrap_or(1e-6))?;
    Ok(vec![format!("residual order {:?}", fit.order)])
}

pub fn recover_jets(cfg: &ExperimentConfig, run: &mut RunDir, seed: u64) -> Result<Notes, CliError> {
    let order = cfg.order.unwrap_or(4);
    let tol = cfg.tol.unwrap_or(1e-6);
    let opts = symbol_options(cfg, 6, 64);
    let base = boundary_jets(cfg, order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut other, theta, betas) = gauge_jet_partner(&base, &mut rng)?;
    if let Some(dq) = cfg.dq {
        let l = cfg.dq_order.unwrap_or(2);
        if l >= other.q.len() {
            return Err(CliError::Config(format!("dq_order {l} needs order >= {}", l + 1)));
        }
        other.q[l] = other.q[l].plus(&TrigSeries::constant(&other.periods, dq));
    }
    let sa = symbol_factorize(&base, order, opts)?;
    let sb = symbol_factorize(&other, order, opts)?;
    let st = jet_recovery(&sa, &sb, RecoveryOptions { order, ..Default::default() })?;
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rows = st
        .steps
        .iter()
        .map(|s| {
            vec![
                s.j.into(),
                max_abs(&s.delta_q).into(),
                s.curl.into(),
                max_abs(&s.harmonic).into(),
                s.coexact.into(),
                s.parity_residual.into(),
                s.degree_drop.into(),
            ]
        })
        .collect();
    run.table("recovery.csv", &["j", "max_abs_delta_q", "curl", "harmonic", "coexact", "parity_residual", "degree_drop"], rows)?;
    let steps: Vec<_> = st
        .steps
        .iter()
        .map(|s| {
            json!({
                "j": s.j,
                "beta": s.beta,
                "delta_q": s.delta_q,
                "curl": s.curl,
                "harmonic": s.harmonic,
                "coexact": s.coexact,
                "degree_drop": s.degree_drop,
            })
        })
        .collect();
    run.json(
        "ledger.json",
        json!({
            "order": order,
            "points": sa.points,
            "theta0": st.theta0,
            "theta0_flux_defect": st.theta0_flux_defect,
            "degree_zero_drop": st.degree_zero_drop,
            "steps": steps,
            "obstruction": st.obstruction,
            "cutoff": st.cutoff,
            "injected": { "theta0": theta, "betas": betas, "dq": cfg.dq, "dq_order": cfg.dq.map(|_| cfg.dq_order.unwrap_or(2)) },
        }),
    )?;
    if let Some(ob) = &st.obstruction {
        return Err(CliError::Tolerance { what: format!("exactness at step {}", ob.step), measured: ob.curl.max(ob.coexact), tol });
    }
    let drop = st.steps.iter().map(|s| s.degree_drop).fold(st.degree_zero_drop, f64::max);
    let curl = st.steps.iter().map(|s| s.curl).fold(0.0, f64::max);
    tolerance("degree drop", drop, tol)?;
    tolerance("curl of recovered jets", curl, tol)?;
    Ok(vec![format!("{} steps", st.steps.len())])
}

/// Full acceptance suite; tables go next to the subcommand output.
pub fn check(run: &mut RunDir, seed: u64) -> Result<(Vec<checks::CheckOutcome>, Notes), CliError> {
    let outcomes = checks::run_all(seed);
    let rows = outcomes
        .iter()
        .map(|o| {
            vec![
                o.id.as_str().into(),
                o.title.as_str().into(),
                (if o.passed { "pass" } else { "fail" }).into(),
                o.seconds.into(),
                o.budget.into(),
                o.error.clone().unwrap_or_default().into(),
            ]
        })
        .collect();
    run.table("checks.csv", &["id", "title", "status", "seconds", "budget", "error"], rows)?;
    let rows = outcomes
        .iter()
        .flat_map(|o| {
            o.measurements.iter().map(move |m| {
                let r: Vec<Cell> = vec![
                    o.id.as_str().into(),
                    m.name.as_str().into(),
                    m.value.into(),
                    m.relation.symbol().into(),
                    m.bound.into(),
                    (if m.passed { "pass" } else { "fail" }).into(),
                ];
                r
            })
        })
        .collect();
    run.table("measurements.csv", &["id", "name", "value", "relation", "bound", "status"], rows)?;
    let notes = outcomes.iter().map(|o| o.line()).collect();
    Ok((outcomes, notes))
}
