//! Full symbol of the magnetic DN map in boundary normal coordinates.
//!
//! With `g = g_ab dx^a dx^b + dx_n^2`, `a_n = 0` and `x_n` the inward
//! distance to the boundary, the operator factors as
//! `P = (D_n - iE - iB)(D_n + iB)` modulo smoothing, where `E = d_n log delta`,
//! `delta = sqrt(det g_ab)` and `B(x_n)` is a tangential pseudodifferential
//! family solving `B^2 + EB + d_n B = Q`. The DN map is `-B` at `x_n = 0`.
//! The symbols `b_1, b_0, b_{-1}, ...` follow degree by degree from the
//! composition formula; see `phg` for the series algebra.

use crate::error::{LabError, Result};
use crate::field::TrigSeries;
use crate::magnetic::GaugeFunction;
use crate::phg::{binomial_series, factorial, mfact, FTps, FiberCtx, RTps, Space, C};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Normal jets of the metric and potentials at the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryJets {
    /// Periods of the boundary torus (length `m = n - 1`).
    pub periods: Vec<f64>,
    /// `d_n^l g^{ab}|_{x_n=0}`, row-major `m x m`, `l = 0, 1, ...`.
    pub g_inv: Vec<Vec<TrigSeries>>,
    /// `d_n^l a_alpha|_{x_n=0}` for the tangential components (`a_n = 0`).
    pub a: Vec<Vec<TrigSeries>>,
    /// `d_n^l q|_{x_n=0}`.
    pub q: Vec<TrigSeries>,
}

impl BoundaryJets {
    /// Flat half-space jets carrying enough orders for truncation `order`.
    pub fn flat(periods: &[f64], order: usize) -> Self {
        let m = periods.len();
        let zero = TrigSeries::zero(periods);
        let mut g_inv = vec![vec![zero.clone(); m * m]; order + 2];
        for a in 0..m {
            g_inv[0][a * m + a] = TrigSeries::constant(periods, 1.0);
        }
        BoundaryJets {
            periods: periods.to_vec(),
            g_inv,
            a: vec![vec![zero.clone(); m]; order + 1],
            q: vec![zero; order],
        }
    }

    /// Unit disk in boundary normal coordinates `x' = theta`, `x_n = 1 - r`,
    /// with `a = a_theta(r) d theta` and `q(r)` given by polynomial
    /// coefficients in `r`.
    pub fn disk(a_theta: &[f64], q: &[f64], order: usize) -> Self {
        let p = [2.0 * PI];
        let c = |v: f64| TrigSeries::constant(&p, v);
        // d_n^l p(1 - x_n) = (-1)^l p^(l)(1)
        let jet = |coef: &[f64], l: usize| {
            let v: f64 = coef
                .iter()
                .enumerate()
                .skip(l)
                .map(|(i, ci)| ci * factorial(i) / factorial(i - l))
                .sum();
            if l.is_multiple_of(2) {
                v
            } else {
                -v
            }
        };
        BoundaryJets {
            periods: p.to_vec(),
            // g^{theta theta} = (1 - x_n)^{-2}
            g_inv: (0..order + 2).map(|l| vec![c(factorial(l + 1))]).collect(),
            a: (0..order + 1).map(|l| vec![c(jet(a_theta, l))]).collect(),
            q: (0..order).map(|l| c(jet(q, l))).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    /// Orders available for the metric, `a` and `q` jets.
    fn check(&self, order: usize) -> Result<()> {
        let m = self.dim();
        if !(1..=2).contains(&m) {
            return Err(LabError::Mismatch(format!("boundary dimension {m}: supported are 1 and 2")));
        }
        if self.g_inv.len() < order + 2 || self.a.len() < order + 1 || self.q.len() < order {
            return Err(LabError::InvalidArgument(format!(
                "truncation {order} needs {} metric, {} potential and {} scalar jets (have {}, {}, {})",
                order + 2,
                order + 1,
                order,
                self.g_inv.len(),
                self.a.len(),
                self.q.len()
            )));
        }
        let all = self.g_inv.iter().flatten().chain(self.a.iter().flatten()).chain(self.q.iter());
        for (l, row) in self.g_inv.iter().enumerate() {
            if row.len() != m * m {
                return Err(LabError::Mismatch(format!("metric jet {l} has {} entries", row.len())));
            }
        }
        if self.a.iter().any(|row| row.len() != m) {
            return Err(LabError::Mismatch("potential jet with wrong component count".into()));
        }
        for s in all {
            if s.periods != self.periods {
                return Err(LabError::Mismatch("jet periods differ from the boundary torus".into()));
            }
        }
        Ok(())
    }

    /// Equispaced boundary grid, axis 0 slowest.
    pub fn grid_points(&self, n: usize) -> Vec<Vec<f64>> {
        grid_points(&self.periods, n)
    }
}

pub(crate) fn grid_points(periods: &[f64], n: usize) -> Vec<Vec<f64>> {
    let m = periods.len();
    let total = n.pow(m as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; m];
            for a in (0..m).rev() {
                x[a] = periods[a] * (idx % n) as f64 / n as f64;
                idx /= n;
            }
            x
        })
        .collect()
}

/// Kill the normal component order by order: the gauge `alpha` with
/// `d_n alpha = -a_n`, `alpha|_{x_n=0} = 0` shifts the tangential jets by
/// `d_n^l a_alpha -= d_alpha d_n^{l-1} a_n`. Returns the normalized jets
/// together with the gauge jets `d_n^l alpha`.
pub fn normalize_normal_component(
    jets: &BoundaryJets,
    a_normal: &[TrigSeries],
) -> Result<(BoundaryJets, Vec<TrigSeries>)> {
    let m = jets.dim();
    if a_normal.iter().any(|s| s.periods != jets.periods) {
        return Err(LabError::Mismatch("normal component periods differ from the boundary torus".into()));
    }
    let mut out = jets.clone();
    let mut gauge = vec![TrigSeries::zero(&jets.periods)];
    for l in 1..out.a.len() {
        let an = a_normal.get(l - 1).cloned().unwrap_or_else(|| TrigSeries::zero(&jets.periods));
        for al in 0..m {
            out.a[l][al] = out.a[l][al].plus(&an.derivative(al).scaled(-1.0));
        }
        gauge.push(an.scaled(-1.0));
    }
    Ok((out, gauge))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolOptions {
    /// Boundary grid points per axis.
    pub grid: usize,
    /// Fiber samples on a 2-dimensional boundary.
    pub fiber_samples: usize,
}

impl Default for SymbolOptions {
    fn default() -> Self {
        SymbolOptions { grid: 8, fiber_samples: 128 }
    }
}

/// Homogeneous terms `p_1, p_0, ..., p_{-J}` of the DN symbol sampled on the
/// unit cosphere over a boundary grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhgSymbol {
    pub order: usize,
    /// `1, 0, -1, ..., -order`.
    pub degrees: Vec<i32>,
    pub grid: usize,
    pub fiber_samples: usize,
    pub points: Vec<Vec<f64>>,
    /// `S = (g^{ab}(x))^{1/2}` per point; sample `k` sits at `xi = S^{-1} eta_k`.
    pub frames: Vec<Vec<f64>>,
    /// `terms[i][point][sample]` for degree `degrees[i]`.
    pub terms: Vec<Vec<Vec<C>>>,
    /// Bound on the fiber Fourier bandwidth of each term.
    pub bandwidth: Vec<usize>,
    /// Half-density subprincipal symbol per point and sample.
    pub subprincipal: Vec<Vec<C>>,
    pub jets: BoundaryJets,
    /// Boundary gauges applied after factorization, in order.
    pub gauges: Vec<GaugeFunction>,
}

impl PhgSymbol {
    pub fn dim(&self) -> usize {
        self.jets.dim()
    }

    /// Samples of `p_d`, indexed `[point][sample]`.
    pub fn term(&self, d: i32) -> Option<&Vec<Vec<C>>> {
        let i = 1 - d;
        if i < 0 {
            None
        } else {
            self.terms.get(i as usize)
        }
    }

    pub(crate) fn fiber_ctx(&self, point: usize) -> Result<FiberCtx> {
        let mut ctx = FiberCtx::new(self.dim(), self.fiber_samples)?;
        ctx.set_frame(&self.frames[point])?;
        Ok(ctx)
    }

    /// Unit covector of sample `k` at a grid point.
    pub fn covector(&self, point: usize, k: usize) -> Result<Vec<f64>> {
        let ctx = self.fiber_ctx(point)?;
        Ok((0..self.dim()).map(|b| ctx.xi[b][k]).collect())
    }

    /// `p_d(x, xi)` at a grid point for any nonzero covector, by homogeneity
    /// and trigonometric interpolation in the fiber angle.
    pub fn eval(&self, d: i32, point: usize, xi: &[f64]) -> Result<C> {
        let f = self.term(d).ok_or_else(|| LabError::InvalidArgument(format!("degree {d} not stored")))?;
        let f = &f[point];
        let s = &self.frames[point];
        let m = self.dim();
        if xi.len() != m {
            return Err(LabError::Mismatch("covector dimension".into()));
        }
        let eta: Vec<f64> = (0..m).map(|a| (0..m).map(|b| s[a * m + b] * xi[b]).sum()).collect();
        let r = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(r > 0.0) {
            return Err(LabError::InvalidArgument("zero covector".into()));
        }
        let v = if m == 1 {
            if eta[0] > 0.0 {
                f[0]
            } else {
                f[1]
            }
        } else {
            let phi = eta[1].atan2(eta[0]);
            trig_interpolate(f, phi)
        };
        Ok(v * r.powi(d))
    }

    /// Per degree and point, the fiber Fourier coefficients of the samples.
    pub fn to_json(&self) -> serde_json::Value {
        let ns = self.fiber_samples_actual();
        let dft = |f: &[C]| -> Vec<[f64; 2]> {
            (0..ns)
                .map(|k| {
                    let s: C = f
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v * C::from_polar(1.0, -2.0 * PI * (j * k) as f64 / ns as f64))
                        .sum::<C>()
                        / ns as f64;
                    [s.re, s.im]
                })
                .collect()
        };
        serde_json::json!({
            "order": self.order,
            "dim": self.dim(),
            "grid": self.grid,
            "fiber_samples": ns,
            "points": self.points,
            "frames": self.frames,
            "terms": self.degrees.iter().zip(&self.terms).map(|(d, t)| serde_json::json!({
                "degree": d,
                "fiber_fourier": t.iter().map(|f| dft(f)).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "subprincipal_fiber_fourier": self.subprincipal.iter().map(|f| dft(f)).collect::<Vec<_>>(),
        })
    }

    fn fiber_samples_actual(&self) -> usize {
        self.terms.first().and_then(|t| t.first()).map_or(0, |f| f.len())
    }

    /// `max |p_d - p~_d|` for each stored degree.
    pub fn max_difference(&self, other: &PhgSymbol) -> Result<Vec<f64>> {
        self.compatible(other)?;
        Ok(self
            .terms
            .iter()
            .zip(&other.terms)
            .map(|(a, b)| max_abs_diff(a, b))
            .collect())
    }

    pub(crate) fn compatible(&self, other: &PhgSymbol) -> Result<()> {
        if self.points != other.points || self.fiber_samples_actual() != other.fiber_samples_actual() {
            return Err(LabError::Mismatch("symbols sampled on different grids".into()));
        }
        if self.terms.len() != other.terms.len() {
            return Err(LabError::Mismatch("symbols truncated at different orders".into()));
        }
        Ok(())
    }
}

pub(crate) fn max_abs_diff(a: &[Vec<C>], b: &[Vec<C>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max)
}

fn trig_interpolate(f: &[C], phi: f64) -> C {
    let n = f.len();
    let mut acc = C::new(0.0, 0.0);
    for k in 0..n {
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let coef: C = f
            .iter()
            .enumerate()
            .map(|(j, v)| v * C::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64))
            .sum::<C>()
            / n as f64;
        let w = if k == n / 2 { (kk * phi).cos() } else { 1.0 };
        acc += if k == n / 2 { coef * w } else { coef * C::from_polar(1.0, kk * phi) };
    }
    acc
}

/// Jet series of one field at `x0`: the coefficient of `y'^alpha x_n^l` is
/// `d^alpha (d_n^l f)(x0) / (alpha! l!)`. Valid through total degree
/// `jets.len() - 1`.
fn jet_series(sp: &Space, jets: &[&TrigSeries], x0: &[f64]) -> RTps {
    let m = x0.len();
    let mut out = RTps::zero(sp, jets.len() as isize - 1);
    for (i, mono) in sp.mono.iter().enumerate() {
        let l = mono[m] as usize;
        if l >= jets.len() {
            continue;
        }
        let alpha: Vec<usize> = mono[..m].iter().map(|&e| e as usize).collect();
        out.c[i] = jets[l].deriv(x0, &alpha) / (mfact(&mono[..m]) * factorial(l));
    }
    out
}

fn unit(sp: &Space, v: usize) -> usize {
    let mut e = vec![0u8; sp.nv];
    e[v] = 1;
    sp.idx(&e)
}

/// Multi-indices in `m` variables of total degree `g`.
fn multi_indices(m: usize, g: usize) -> Vec<Vec<u8>> {
    if m == 1 {
        return vec![vec![g as u8]];
    }
    (0..=g).rev().map(|a| vec![a as u8, (g - a) as u8]).collect()
}

struct PointSymbol {
    frame: Vec<f64>,
    terms: Vec<Vec<C>>,
    sub: Vec<C>,
    bandwidth: Vec<usize>,
}

/// The factorization at one boundary point.
fn factorize_point(jets: &BoundaryJets, x0: &[f64], order: usize, sp: &Space, ctx: &mut FiberCtx) -> Result<PointSymbol> {
    let m = jets.dim();
    let i = C::new(0.0, 1.0);
    let kk = order + 1;
    let g: Vec<RTps> = (0..m * m)
        .map(|e| jet_series(sp, &jets.g_inv[..=kk].iter().map(|row| &row[e]).collect::<Vec<_>>(), x0))
        .collect();
    let a: Vec<RTps> = (0..m)
        .map(|e| jet_series(sp, &jets.a[..kk].iter().map(|row| &row[e]).collect::<Vec<_>>(), x0))
        .collect();
    let q = jet_series(sp, &jets.q[..kk - 1].iter().collect::<Vec<_>>(), x0);

    let det = if m == 1 { g[0].clone() } else { g[0].mul(sp, &g[3]).sub(&g[1].mul(sp, &g[2])) };
    let log_delta = det.log(sp)?.scale(-0.5);
    let e_n = log_delta.deriv(sp, m);
    let dlog: Vec<RTps> = (0..m).map(|al| log_delta.deriv(sp, al)).collect();
    let h: Vec<RTps> = (0..m)
        .map(|b| {
            (0..m).fold(RTps::zero(sp, kk as isize), |acc, al| {
                let gab = &g[al * m + b];
                acc.add(&gab.deriv(sp, al)).add(&gab.mul(sp, &dlog[al]))
            })
        })
        .collect();

    let g0: Vec<f64> = g.iter().map(|t| t.c[0]).collect();
    ctx.set_frame_from_inverse_metric(&g0)?;

    let q2 = ctx.lift_quadratic(sp, &g);
    let mut u = q2.clone().with_degree(0);
    let dev = u.coef(0).iter().map(|v| (v - 1.0).norm()).fold(0.0, f64::max);
    if dev > 1e-10 {
        return Err(LabError::NumericalDegeneracy(format!("frame normalization off by {dev:e}")));
    }
    u.coef_mut(0).iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
    let series = |alpha: f64| -> Vec<C> { binomial_series(alpha, kk).into_iter().map(|v| C::new(v, 0.0)).collect() };
    let b1 = u.compose(sp, &series(0.5)).with_degree(1).scale(C::new(-1.0, 0.0));
    let half_inv = u.compose(sp, &series(-0.5)).with_degree(-1).scale(C::new(-0.5, 0.0));

    let ga: Vec<RTps> = (0..m)
        .map(|b| (0..m).fold(RTps::zero(sp, kk as isize), |acc, al| acc.add(&g[al * m + b].mul(sp, &a[al]))))
        .collect();
    let q1 = ctx
        .lift_linear(sp, &ga.iter().map(|t| t.scale(2.0)).collect::<Vec<_>>())
        .add(&ctx.lift_linear(sp, &h).scale(-i));
    let mut real0 = q.clone();
    let mut imag0 = RTps::zero(sp, kk as isize);
    for b in 0..m {
        real0 = real0.add(&ga[b].mul(sp, &a[b]));
        imag0 = imag0.add(&h[b].mul(sp, &a[b]));
        for al in 0..m {
            imag0 = imag0.add(&g[al * m + b].mul(sp, &a[b].deriv(sp, al)));
        }
    }
    let q0 = ctx.lift_const(sp, &real0, 0).add(&ctx.lift_const(sp, &imag0, 0).scale(-i));

    // b[idx] holds b_{1 - idx}
    let mut b: Vec<FTps> = vec![b1];
    let mut dxi_cache: HashMap<(usize, Vec<u8>), FTps> = HashMap::new();
    for d in (1 - order as i32..=1).rev() {
        let bd = &b[(1 - d) as usize];
        let mut rhs = match d {
            1 => q1.clone(),
            0 => q0.clone(),
            _ => FTps::zero(sp, ctx.ns, d, sp.order as isize),
        };
        rhs = rhs.sub(&bd.mul_real(sp, &e_n)).sub(&bd.deriv(sp, m));
        for j in d..=1 {
            for k in d..=1 {
                let gdeg = j + k - d;
                if gdeg < 0 {
                    continue;
                }
                let bk = b[(1 - k) as usize].clone();
                for gamma in multi_indices(m, gdeg as usize) {
                    let dj = dxi_power(sp, ctx, &b, &mut dxi_cache, (1 - j) as usize, &gamma);
                    let mut dk = bk.clone();
                    for (al, &e) in gamma.iter().enumerate() {
                        for _ in 0..e {
                            dk = dk.deriv(sp, al);
                        }
                    }
                    let w = i.powi(-gdeg) / mfact(&gamma);
                    rhs = rhs.sub(&dj.mul(sp, &dk).scale(w));
                }
            }
        }
        let mut next = rhs.mul(sp, &half_inv);
        next.truncate(sp);
        b.push(next);
    }
    let last = b.last().expect("at least b_1");
    if last.ord < 0 {
        return Err(LabError::InsufficientData(format!("series order exhausted at degree {}", last.d)));
    }

    if m == 2 {
        let widest = b.iter().flat_map(|t| t.bw.iter().take(t.ord.max(0) as usize + 1)).copied().max().unwrap_or(0);
        if widest as usize >= ctx.ns / 2 {
            return Err(LabError::InvalidArgument(format!(
                "{} fiber samples cannot resolve angular bandwidth {widest}",
                ctx.ns
            )));
        }
    }
    let terms: Vec<Vec<C>> = b
        .iter()
        .map(|t| ctx.lowpass(t.coef(0), t.bw[0].max(0) as usize).iter().map(|v| -v).collect())
        .collect();
    let p1 = &terms[0];
    let mut sub = terms[1].clone();
    for al in 0..m {
        let dx_p1: Vec<C> = b[0].coef(unit(sp, al)).iter().map(|v| -v).collect();
        let corr = ctx.dxi(&dx_p1, 1, al, b[0].bw[1].max(0) as usize);
        let half = ctx.dxi(p1, 1, al, b[0].bw[0].max(0) as usize);
        let dl = log_delta.c[unit(sp, al)];
        for (s, (c1, c2)) in sub.iter_mut().zip(corr.iter().zip(&half)) {
            *s += i * 0.5 * (c1 + c2 * dl);
        }
    }
    let bandwidth = b.iter().map(|t| t.bw[0].max(0) as usize).collect();
    Ok(PointSymbol { frame: ctx.s.clone(), terms, sub, bandwidth })
}

/// `d_xi^gamma b_{1 - idx}`, memoized.
fn dxi_power(
    sp: &Space,
    ctx: &FiberCtx,
    b: &[FTps],
    cache: &mut HashMap<(usize, Vec<u8>), FTps>,
    idx: usize,
    gamma: &[u8],
) -> FTps {
    if gamma.iter().all(|&e| e == 0) {
        return b[idx].clone();
    }
    if let Some(v) = cache.get(&(idx, gamma.to_vec())) {
        return v.clone();
    }
    let al = gamma.iter().position(|&e| e > 0).expect("nonzero multi-index");
    let mut lower = gamma.to_vec();
    lower[al] -= 1;
    let base = dxi_power(sp, ctx, b, cache, idx, &lower);
    let out = ctx.dxi_series(sp, &base, al);
    cache.insert((idx, gamma.to_vec()), out.clone());
    out
}

/// Homogeneous terms of the DN symbol down to degree `-order` on a boundary
/// grid.
pub fn symbol_factorize(jets: &BoundaryJets, order: usize, opts: SymbolOptions) -> Result<PhgSymbol> {
    if order < 1 {
        return Err(LabError::InvalidArgument("truncation order must be at least 1".into()));
    }
    if opts.grid < 1 {
        return Err(LabError::InvalidArgument("empty boundary grid".into()));
    }
    jets.check(order)?;
    let m = jets.dim();
    let sp = Space::new(m + 1, order + 1);
    let mut ctx = FiberCtx::new(m, opts.fiber_samples)?;
    let points = jets.grid_points(opts.grid);
    let mut frames = Vec::with_capacity(points.len());
    let mut terms = vec![Vec::with_capacity(points.len()); order + 2];
    let mut subprincipal = Vec::with_capacity(points.len());
    let mut bandwidth = vec![0; order + 2];
    for x in &points {
        let ps = factorize_point(jets, x, order, &sp, &mut ctx)?;
        bandwidth = ps.bandwidth;
        frames.push(ps.frame);
        for (slot, t) in terms.iter_mut().zip(ps.terms) {
            slot.push(t);
        }
        subprincipal.push(ps.sub);
    }
    Ok(PhgSymbol {
        order,
        degrees: (0..=order as i32 + 1).map(|k| 1 - k).collect(),
        grid: opts.grid,
        fiber_samples: ctx.ns,
        points,
        frames,
        bandwidth,
        terms,
        subprincipal,
        jets: jets.clone(),
        gauges: Vec::new(),
    })
}

/// Taylor coefficients of `exp(i (phase(x) - phase(x0)))` in `x'`.
fn gauge_exponential(sp: &Space, gauge: &GaugeFunction, x0: &[f64]) -> FTps {
    let m = x0.len();
    let mut ph = FTps::zero(sp, 1, 0, sp.order as isize);
    for (idx, mono) in sp.mono.iter().enumerate().skip(1) {
        let alpha: Vec<usize> = mono.iter().map(|&e| e as usize).collect();
        let mut v = gauge.psi.deriv(x0, &alpha);
        if alpha.iter().sum::<usize>() == 1 {
            let al = alpha.iter().position(|&e| e == 1).expect("unit index");
            v += 2.0 * PI * gauge.winding[al] as f64 / gauge.periods()[al];
        }
        ph.coef_mut(idx)[0] = C::new(0.0, v / mfact(mono));
    }
    debug_assert_eq!(sp.nv, m);
    let s: Vec<C> = (0..=sp.order).map(|k| C::new(1.0 / factorial(k), 0.0)).collect();
    ph.compose(sp, &s)
}

/// Symbol of `conj(t) Lambda t` by the composition formula
/// `sum_gamma d_xi^gamma p (-i)^|gamma| coef_gamma(exp(i(phase - phase(x0))))`,
/// truncated at the stored order. The jets record the equivalent boundary
/// shift `a -> a + d(phase)`.
pub fn gauge_shift_subprincipal(sym: &PhgSymbol, gauge: &GaugeFunction) -> Result<PhgSymbol> {
    if gauge.periods() != sym.jets.periods.as_slice() {
        return Err(LabError::Mismatch("gauge lives on a different boundary torus".into()));
    }
    let m = sym.dim();
    let order = sym.order;
    let sp = Space::new(m, order + 1);
    let mut out = sym.clone();
    let i = C::new(0.0, 1.0);
    for (p, x0) in sym.points.iter().enumerate() {
        let ctx = sym.fiber_ctx(p)?;
        let ex = gauge_exponential(&sp, gauge, x0);
        let ns = ctx.ns;
        for (ti, &dp) in sym.degrees.iter().enumerate() {
            let mut acc = vec![C::new(0.0, 0.0); ns];
            for (si, &d) in sym.degrees.iter().enumerate().take(ti + 1) {
                let g = (d - dp) as usize;
                for gamma in multi_indices(m, g) {
                    let coef = ex.coef(sp.idx(&gamma))[0] * i.powi(-(g as i32));
                    if coef == C::new(0.0, 0.0) {
                        continue;
                    }
                    let mut f = sym.terms[si][p].clone();
                    let mut deg = d;
                    for (al, &e) in gamma.iter().enumerate() {
                        for _ in 0..e {
                            f = ctx.dxi(&f, deg, al, sym.bandwidth[si] + (d - deg) as usize);
                            deg -= 1;
                        }
                    }
                    for (a, v) in acc.iter_mut().zip(&f) {
                        *a += v * coef;
                    }
                }
            }
            out.terms[ti][p] = acc;
        }
        for (s, (new0, old0)) in out.subprincipal[p].iter_mut().zip(out.terms[1][p].iter().zip(&sym.terms[1][p])) {
            *s += new0 - old0;
        }
    }
    let form = gauge.gauge_form();
    for (al, f) in form.iter().enumerate() {
        out.jets.a[0][al] = out.jets.a[0][al].plus(f);
    }
    out.gauges.push(gauge.clone());
    Ok(out)
}
