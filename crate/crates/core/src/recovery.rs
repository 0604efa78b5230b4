//! Difference structure of DN symbols and inductive recovery of normal jets.
//!
//! For two data sets on the same metric, the degree `-j` terms differ by
//! `SIGN 2^{-j} (pi_0^* d_n^{j-1}(q - q~) + pi_1^* d_n^j(a - a~)) + T_j`, with
//! `T_j` built from lower jets only. The recovery peels one normal order at
//! a time, absorbing exact one-form differences into a boundary gauge.

use crate::error::{LabError, Result};
use crate::field::{TrigSeries, TrigTerm};
use crate::magnetic::GaugeFunction;
use crate::phg::C;
use crate::steklov::{max_abs_diff, symbol_factorize, BoundaryJets, PhgSymbol, SymbolOptions};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Global sign of the structure identity under the outward-normal DN map
/// `Lambda = -d_n` (`x_n` inward). Calibrated by the half-space oracle: the
/// constant-`q` symbol `sqrt(|xi|^2 + q)` has `p_{-1} = +q/2`.
pub const DIFFERENCE_SIGN: f64 = 1.0;

/// Even part mean, odd linear part and what is left over at one point.
struct FiberFit {
    mean: C,
    /// One-form `w` with odd part `<w, xi#>`.
    form: Vec<f64>,
    /// Largest deviation from `mean + <w, xi#>`, plus imaginary leftovers.
    residual: f64,
}

fn fit_point(sym: &PhgSymbol, point: usize, diff: &[C]) -> Result<FiberFit> {
    let ctx = sym.fiber_ctx(point)?;
    let m = sym.dim();
    let ns = diff.len();
    let mean = diff.iter().sum::<C>() / ns as f64;
    let c = ctx.linear_coefficients(diff);
    let mut residual: f64 = 0.0;
    for k in 0..ns {
        let model = mean + (0..m).map(|b| c[b] * ctx.eta[b][k]).sum::<C>();
        residual = residual.max((diff[k] - model).norm());
    }
    residual = residual.max(mean.im.abs());
    for cb in &c {
        residual = residual.max(cb.im.abs());
    }
    // odd part = sum_b (S w)_b eta_b
    let form = (0..m).map(|a| (0..m).map(|b| ctx.sinv[a * m + b] * c[b].re).sum()).collect();
    Ok(FiberFit { mean, form, residual })
}

/// `<w, xi#>` at every sample of a point.
fn pullback_one_form(sym: &PhgSymbol, point: usize, w: &[f64]) -> Result<Vec<f64>> {
    let ctx = sym.fiber_ctx(point)?;
    let m = sym.dim();
    let sw: Vec<f64> = (0..m).map(|b| (0..m).map(|a| ctx.s[b * m + a] * w[a]).sum()).collect();
    Ok((0..ctx.ns).map(|k| (0..m).map(|b| sw[b] * ctx.eta[b][k]).sum()).collect())
}

fn max_series_gap(a: &TrigSeries, b: &TrigSeries, points: &[Vec<f64>]) -> f64 {
    points.iter().map(|x| (a.eval(x) - b.eval(x)).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceStructure {
    pub j: usize,
    /// Extracted `d_n^{j-1}(q_A - q_B)` on the grid.
    pub delta_q: Vec<f64>,
    /// Extracted `d_n^j(a_A - a_B)` on the grid, `[point][alpha]`.
    pub delta_a: Vec<Vec<f64>>,
    /// The same differences read off the jets.
    pub jet_delta_q: Vec<f64>,
    pub jet_delta_a: Vec<Vec<f64>>,
    /// `max |T_j|` after subtracting the leading part predicted by the jets.
    pub residual: f64,
    /// Part of the difference that is neither fiber-constant nor linear.
    pub parity_residual: f64,
    /// Metric jets, `q` jets below `j - 1` and `a` jets below `j` coincide.
    pub lower_jets_agree: bool,
}

/// Split the degree `-j` difference of two symbols into the scalar and
/// one-form parts and the remainder `T_j`.
pub fn symbol_difference_structure(sym_a: &PhgSymbol, sym_b: &PhgSymbol, j: usize, tol: f64) -> Result<DifferenceStructure> {
    sym_a.compatible(sym_b)?;
    if j < 1 || j > sym_a.order {
        return Err(LabError::InvalidArgument(format!("structure order {j} outside 1..={}", sym_a.order)));
    }
    let (ja, jb) = (&sym_a.jets, &sym_b.jets);
    if ja.periods != jb.periods {
        return Err(LabError::Mismatch("symbols on different boundary tori".into()));
    }
    let m = sym_a.dim();
    let pts = &sym_a.points;
    let gap = |u: &[TrigSeries], v: &[TrigSeries]| u.iter().zip(v).map(|(s, t)| max_series_gap(s, t, pts)).fold(0.0, f64::max);
    let metric_gap = ja.g_inv.iter().zip(&jb.g_inv).map(|(u, v)| gap(u, v)).fold(0.0, f64::max);
    let q_gap = gap(&ja.q[..j - 1], &jb.q[..j - 1]);
    let a_gap = ja.a[..j].iter().zip(&jb.a[..j]).map(|(u, v)| gap(u, v)).fold(0.0, f64::max);
    let lower_jets_agree = metric_gap.max(q_gap).max(a_gap) <= 1e-12;

    let d = -(j as i32);
    let (ta, tb) = (sym_a.term(d).expect("stored degree"), sym_b.term(d).expect("stored degree"));
    let scale = 2f64.powi(j as i32) / DIFFERENCE_SIGN;
    let mut out = DifferenceStructure {
        j,
        delta_q: Vec::new(),
        delta_a: Vec::new(),
        jet_delta_q: Vec::new(),
        jet_delta_a: Vec::new(),
        residual: 0.0,
        parity_residual: 0.0,
        lower_jets_agree,
    };
    for (p, x) in pts.iter().enumerate() {
        let diff: Vec<C> = ta[p].iter().zip(&tb[p]).map(|(u, v)| u - v).collect();
        let fit = fit_point(sym_a, p, &diff)?;
        out.delta_q.push(fit.mean.re * scale);
        out.delta_a.push(fit.form.iter().map(|w| w * scale).collect());
        out.parity_residual = out.parity_residual.max(fit.residual);
        let jq = ja.q[j - 1].eval(x) - jb.q[j - 1].eval(x);
        let jw: Vec<f64> = (0..m).map(|al| ja.a[j][al].eval(x) - jb.a[j][al].eval(x)).collect();
        let lead = pullback_one_form(sym_a, p, &jw)?;
        for (k, dv) in diff.iter().enumerate() {
            let predicted = DIFFERENCE_SIGN * (jq + lead[k]) / 2f64.powi(j as i32);
            out.residual = out.residual.max((dv - predicted).norm());
        }
        out.jet_delta_q.push(jq);
        out.jet_delta_a.push(jw);
    }
    if lower_jets_agree && out.parity_residual > tol {
        return Err(LabError::StructureViolation { residual: out.parity_residual, tol });
    }
    Ok(out)
}

/// Fourier analysis of fields sampled on the boundary grid (axis 0 slowest).
struct GridFourier {
    n: usize,
    m: usize,
    periods: Vec<f64>,
}

impl GridFourier {
    fn new(periods: &[f64], n: usize) -> Self {
        GridFourier { n, m: periods.len(), periods: periods.to_vec() }
    }

    fn len(&self) -> usize {
        self.n.pow(self.m as u32)
    }

    /// Signed wavenumbers of a flat index; the Nyquist entry is `+n/2`.
    fn modes(&self, mut idx: usize) -> Vec<i64> {
        let mut k = vec![0; self.m];
        for a in (0..self.m).rev() {
            let v = (idx % self.n) as i64;
            k[a] = if v > self.n as i64 / 2 { v - self.n as i64 } else { v };
            idx /= self.n;
        }
        k
    }

    fn omega(&self, k: &[i64]) -> Vec<f64> {
        k.iter().zip(&self.periods).map(|(&v, &p)| 2.0 * PI * v as f64 / p).collect()
    }

    fn is_nyquist(&self, k: &[i64]) -> bool {
        self.n.is_multiple_of(2) && k.contains(&(self.n as i64 / 2))
    }

    fn transform(&self, vals: &[C], inverse: bool) -> Vec<C> {
        let n = self.n;
        let mut planner = FftPlanner::new();
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut buf = vals.to_vec();
        let stride_sets: Vec<(usize, usize)> = match self.m {
            1 => vec![(1, 1)],
            _ => vec![(1, n), (n, 1)],
        };
        // (stride within a line, stride between lines)
        for (inner, outer) in stride_sets {
            for line in 0..self.len() / n {
                let base = line * outer;
                let mut tmp: Vec<C> = (0..n).map(|i| buf[base + i * inner]).collect();
                fft.process(&mut tmp);
                for (i, v) in tmp.into_iter().enumerate() {
                    buf[base + i * inner] = v;
                }
            }
        }
        if !inverse {
            let s = 1.0 / self.len() as f64;
            buf.iter_mut().for_each(|v| *v *= s);
        }
        buf
    }

    fn forward(&self, vals: &[f64]) -> Vec<C> {
        self.transform(&vals.iter().map(|&v| C::new(v, 0.0)).collect::<Vec<_>>(), false)
    }

    /// Real trigonometric series with the given grid coefficients; modes at
    /// the Nyquist frequency are dropped.
    fn series(&self, coefs: &[C]) -> TrigSeries {
        let mut terms = Vec::new();
        for (idx, c) in coefs.iter().enumerate() {
            let k = self.modes(idx);
            if self.is_nyquist(&k) {
                continue;
            }
            let first = k.iter().find(|&&v| v != 0).copied();
            match first {
                None => terms.push(TrigTerm { k: vec![0; self.m], c: c.re, s: 0.0 }),
                Some(f) if f > 0 => terms.push(TrigTerm {
                    k: k.iter().map(|&v| v as i32).collect(),
                    c: 2.0 * c.re,
                    s: -2.0 * c.im,
                }),
                _ => {}
            }
        }
        TrigSeries { periods: self.periods.clone(), terms }.canonical()
    }
}

/// Hodge split of a one-form sampled on the grid: `f = d beta + h + coexact`.
#[derive(Debug, Clone)]
struct HodgeSplit {
    beta: TrigSeries,
    harmonic: Vec<f64>,
    /// Sup bound of the coexact part.
    coexact: f64,
    /// Sup bound of `df`.
    curl: f64,
}

fn hodge_split(gf: &GridFourier, form: &[Vec<f64>]) -> HodgeSplit {
    let m = gf.m;
    let hats: Vec<Vec<C>> = (0..m).map(|a| gf.forward(&form.iter().map(|w| w[a]).collect::<Vec<_>>())).collect();
    let mut beta_hat = vec![C::new(0.0, 0.0); gf.len()];
    let mut coexact: f64 = 0.0;
    let mut curl: f64 = 0.0;
    for idx in 0..gf.len() {
        let k = gf.modes(idx);
        if k.iter().all(|&v| v == 0) {
            continue;
        }
        let w = gf.omega(&k);
        let w2: f64 = w.iter().map(|v| v * v).sum();
        let div: C = (0..m).map(|a| hats[a][idx] * w[a]).sum();
        beta_hat[idx] = C::new(0.0, -1.0) * div / w2;
        let mut co: f64 = 0.0;
        for a in 0..m {
            co = co.max((hats[a][idx] - div * (w[a] / w2)).norm());
        }
        coexact += co;
        if m == 2 {
            curl += (hats[1][idx] * w[0] - hats[0][idx] * w[1]).norm();
        }
    }
    HodgeSplit {
        beta: gf.series(&beta_hat),
        harmonic: hats.iter().map(|h| h[0].re).collect(),
        coexact,
        curl,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub order: usize,
    /// Closedness and flux quantization of the degree-0 difference.
    pub closed_tol: f64,
    /// Harmonic and coexact parts of each normal one-form difference.
    pub exact_tol: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions { order: 4, closed_tol: 1e-8, exact_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryStep {
    pub j: usize,
    /// `d_n^{j-1}(q~ - q)` on the grid.
    pub delta_q: Vec<f64>,
    /// `d_n^j(a~ - a)` on the grid, `[point][alpha]`.
    pub delta_a: Vec<Vec<f64>>,
    /// Sup bound of `d(delta_a)`.
    pub curl: f64,
    pub harmonic: Vec<f64>,
    pub coexact: f64,
    /// Non-structural part of the degree `-j` difference.
    pub parity_residual: f64,
    /// Potential with `d beta_j` the exact part of `delta_a`.
    pub beta: TrigSeries,
    /// `max |p_d - p~_d|` over degrees `>= -j` after absorbing this step.
    pub degree_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstruction {
    /// Step at which exactness failed (0 for the boundary one-form).
    pub step: usize,
    pub harmonic: Vec<f64>,
    pub coexact: f64,
    pub curl: f64,
    pub parity_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetRecoveryState {
    /// Last completed step.
    pub step: usize,
    /// Boundary gauge matching the degree-0 terms.
    pub theta0: GaugeFunction,
    pub theta0_curl: f64,
    /// Distance of the boundary fluxes to `2 pi Z`, per axis.
    pub theta0_flux_defect: Vec<f64>,
    /// `max |p_d - p~_d|` over degrees `>= 0` after applying `theta0`.
    pub degree_zero_drop: f64,
    pub steps: Vec<RecoveryStep>,
    pub obstruction: Option<Obstruction>,
    pub cutoff: String,
    /// Jets of the first data set with the ledger applied.
    pub jets: BoundaryJets,
}

const CUTOFF: &str = "chi = 1 on a collar of the boundary and flat there (every normal derivative \
of chi vanishes at x_n = 0), so alpha_j = sum_l chi beta_l x_n^l / l! only shifts the jets d_n^l a, l = 1..j";

/// Add the ledger to a set of jets: the boundary gauge at order 0, the exact
/// forms `d beta_j` at order `j`, and the scalar differences at order `j - 1`.
pub fn apply_ledger(jets: &BoundaryJets, state: &JetRecoveryState) -> Result<BoundaryJets> {
    let mut out = jets.clone();
    let m = jets.dim();
    let gf = grid_for(jets, state)?;
    for (al, f) in state.theta0.gauge_form().iter().enumerate() {
        out.a[0][al] = out.a[0][al].plus(f);
    }
    for st in &state.steps {
        for al in 0..m {
            out.a[st.j][al] = out.a[st.j][al].plus(&st.beta.derivative(al));
        }
        out.q[st.j - 1] = out.q[st.j - 1].plus(&gf.series(&gf.forward(&st.delta_q)));
    }
    Ok(out)
}

fn grid_for(jets: &BoundaryJets, state: &JetRecoveryState) -> Result<GridFourier> {
    let len = state.steps.first().map_or(0, |s| s.delta_q.len());
    let m = jets.dim();
    let n = (len as f64).powf(1.0 / m as f64).round() as usize;
    if len > 0 && n.pow(m as u32) != len {
        return Err(LabError::Mismatch("ledger grid does not match the boundary dimension".into()));
    }
    Ok(GridFourier::new(&jets.periods, n.max(1)))
}

/// Inductive recovery of `d_n^{j-1}(q~ - q)` and `d_n^j(a~ - a)` for
/// `j = 1..=order` from the symbols of two data sets on one metric.
/// `sym_a` must carry its jets; `sym_b` is used through its values only.
pub fn jet_recovery(sym_a: &PhgSymbol, sym_b: &PhgSymbol, opts: RecoveryOptions) -> Result<JetRecoveryState> {
    sym_a.compatible(sym_b)?;
    let order = opts.order;
    if order < 1 || order > sym_a.order {
        return Err(LabError::InvalidArgument(format!("recovery order {order} outside 1..={}", sym_a.order)));
    }
    let m = sym_a.dim();
    let periods = sym_a.jets.periods.clone();
    let gf = GridFourier::new(&periods, sym_a.grid);
    let sym_opts = SymbolOptions { grid: sym_a.grid, fiber_samples: sym_a.fiber_samples };

    // degree 0: a~ - a on the boundary
    let mut w = Vec::with_capacity(sym_a.points.len());
    let mut parity0: f64 = 0.0;
    for p in 0..sym_a.points.len() {
        let diff: Vec<C> = sym_b.subprincipal[p].iter().zip(&sym_a.subprincipal[p]).map(|(u, v)| u - v).collect();
        let fit = fit_point(sym_a, p, &diff)?;
        parity0 = parity0.max(fit.residual).max(fit.mean.norm());
        w.push(fit.form);
    }
    let split = hodge_split(&gf, &w);
    let mut winding = Vec::with_capacity(m);
    let mut flux_defect = Vec::with_capacity(m);
    for (al, h) in split.harmonic.iter().enumerate() {
        let turns = h * periods[al] / (2.0 * PI);
        winding.push(turns.round() as i32);
        flux_defect.push(2.0 * PI * (turns - turns.round()).abs());
    }
    let psi = split.beta.clone();
    let theta0 = GaugeFunction::new(winding, psi)?;
    let worst_flux = flux_defect.iter().copied().fold(0.0, f64::max);
    let mut state = JetRecoveryState {
        step: 0,
        theta0: theta0.clone(),
        theta0_curl: split.curl,
        theta0_flux_defect: flux_defect,
        degree_zero_drop: f64::NAN,
        steps: Vec::new(),
        obstruction: None,
        cutoff: CUTOFF.into(),
        jets: sym_a.jets.clone(),
    };
    if split.curl.max(split.coexact).max(worst_flux).max(parity0) > opts.closed_tol {
        state.obstruction = Some(Obstruction {
            step: 0,
            harmonic: split.harmonic,
            coexact: split.coexact,
            curl: split.curl,
            parity_residual: parity0,
        });
        return Ok(state);
    }
    let mut jets = sym_a.jets.clone();
    for (al, f) in theta0.gauge_form().iter().enumerate() {
        jets.a[0][al] = jets.a[0][al].plus(f);
    }
    let mut cur = symbol_factorize(&jets, sym_a.order, sym_opts)?;
    state.degree_zero_drop = drop_through(&cur, sym_b, 0);

    let scale_unit = 1.0 / DIFFERENCE_SIGN;
    for j in 1..=order {
        let d = -(j as i32);
        let (tb, tc) = (sym_b.term(d).expect("stored degree"), cur.term(d).expect("stored degree"));
        let scale = 2f64.powi(j as i32) * scale_unit;
        let mut delta_q = Vec::with_capacity(tb.len());
        let mut delta_a = Vec::with_capacity(tb.len());
        let mut parity: f64 = 0.0;
        for p in 0..tb.len() {
            let diff: Vec<C> = tb[p].iter().zip(&tc[p]).map(|(u, v)| u - v).collect();
            let fit = fit_point(&cur, p, &diff)?;
            parity = parity.max(fit.residual);
            delta_q.push(fit.mean.re * scale);
            delta_a.push(fit.form.iter().map(|v| v * scale).collect::<Vec<f64>>());
        }
        let split = hodge_split(&gf, &delta_a);
        let exact_defect = split.harmonic.iter().fold(split.coexact, |acc, h| acc.max(h.abs()));
        if exact_defect > opts.exact_tol || parity > opts.exact_tol {
            state.obstruction = Some(Obstruction {
                step: j,
                harmonic: split.harmonic,
                coexact: split.coexact,
                curl: split.curl,
                parity_residual: parity,
            });
            break;
        }
        for al in 0..m {
            jets.a[j][al] = jets.a[j][al].plus(&split.beta.derivative(al));
        }
        jets.q[j - 1] = jets.q[j - 1].plus(&gf.series(&gf.forward(&delta_q)));
        cur = symbol_factorize(&jets, sym_a.order, sym_opts)?;
        state.steps.push(RecoveryStep {
            j,
            delta_q,
            delta_a,
            curl: split.curl,
            harmonic: split.harmonic,
            coexact: split.coexact,
            parity_residual: parity,
            beta: split.beta,
            degree_drop: drop_through(&cur, sym_b, j),
        });
        state.step = j;
    }
    state.jets = jets;
    Ok(state)
}

/// `max |p_d - p~_d|` over degrees `d >= -j`.
fn drop_through(a: &PhgSymbol, b: &PhgSymbol, j: usize) -> f64 {
    a.terms
        .iter()
        .zip(&b.terms)
        .take(j + 2)
        .map(|(u, v)| max_abs_diff(u, v))
        .fold(0.0, f64::max)
}
