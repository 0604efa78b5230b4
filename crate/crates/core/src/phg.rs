//! Truncated Taylor series in the boundary normal variables `(x', x_n)`.
//!
//! Real series carry metric and potential jets. Fiber series carry symbols:
//! every Taylor coefficient is a function of `xi`, homogeneous of a common
//! degree `d`, stored as samples on the unit circle of `eta = S xi` (two
//! points `eta = +-1` on a 1-dimensional boundary). Products are pointwise
//! in the samples and `xi`-derivatives use the homogeneity plus an FFT in the
//! angle, so both are exact for the trigonometric polynomials that arise.

use crate::error::{LabError, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

pub(crate) type C = Complex64;

/// Monomials in `nv` variables up to total degree `order`, graded so that
/// every degree bound is a prefix.
#[derive(Debug, Clone)]
pub(crate) struct Space {
    pub nv: usize,
    pub order: usize,
    pub mono: Vec<Vec<u8>>,
    /// Number of monomials of degree `<= o`.
    count_le: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    /// `(i, j, k)` with `mono[i] + mono[j] = mono[k]`, sorted by `deg(k)`.
    table: Vec<(u32, u32, u32)>,
    table_le: Vec<usize>,
    /// `d/dx_v x^src = factor x^dst`.
    deriv: Vec<Vec<(usize, usize, f64)>>,
}

fn exponents(nv: usize, deg: usize) -> Vec<Vec<u8>> {
    if nv == 1 {
        return vec![vec![deg as u8]];
    }
    let mut out = Vec::new();
    for first in (0..=deg).rev() {
        for mut rest in exponents(nv - 1, deg - first) {
            rest.insert(0, first as u8);
            out.push(rest);
        }
    }
    out
}

impl Space {
    pub fn new(nv: usize, order: usize) -> Self {
        let mut mono = Vec::new();
        let mut count_le = Vec::new();
        for d in 0..=order {
            mono.extend(exponents(nv, d));
            count_le.push(mono.len());
        }
        let index: HashMap<Vec<u8>, usize> = mono.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let deg = |m: &[u8]| m.iter().map(|&e| e as usize).sum::<usize>();
        let mut table = Vec::new();
        for (i, mi) in mono.iter().enumerate() {
            for (j, mj) in mono.iter().enumerate() {
                if deg(mi) + deg(mj) > order {
                    continue;
                }
                let s: Vec<u8> = mi.iter().zip(mj).map(|(a, b)| a + b).collect();
                table.push((i as u32, j as u32, index[&s] as u32));
            }
        }
        table.sort_by_key(|&(_, _, k)| k);
        let table_le = (0..=order)
            .map(|o| table.iter().take_while(|&&(_, _, k)| (k as usize) < count_le[o]).count())
            .collect();
        let deriv = (0..nv)
            .map(|v| {
                mono.iter()
                    .enumerate()
                    .filter(|(_, m)| m[v] > 0)
                    .map(|(src, m)| {
                        let mut t = m.clone();
                        t[v] -= 1;
                        (src, index[&t], m[v] as f64)
                    })
                    .collect()
            })
            .collect();
        Space { nv, order, mono, count_le, index, table, table_le, deriv }
    }

    pub fn len(&self) -> usize {
        self.mono.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.count_le.iter().position(|&c| i < c).expect("monomial index in range")
    }

    pub fn idx(&self, m: &[u8]) -> usize {
        self.index[m]
    }

    /// Number of coefficients valid at truncation order `ord`.
    fn prefix(&self, ord: isize) -> usize {
        if ord < 0 {
            0
        } else {
            self.count_le[(ord as usize).min(self.order)]
        }
    }

    fn pairs(&self, ord: isize) -> &[(u32, u32, u32)] {
        if ord < 0 {
            &[]
        } else {
            &self.table[..self.table_le[(ord as usize).min(self.order)]]
        }
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Multi-index factorial.
pub(crate) fn mfact(m: &[u8]) -> f64 {
    m.iter().map(|&e| factorial(e as usize)).product()
}

/// Generalized binomial coefficients of `(1 + u)^alpha` up to `u^n`.
pub(crate) fn binomial_series(alpha: f64, n: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for k in 1..=n {
        let prev = out[k - 1];
        out.push(prev * (alpha - (k - 1) as f64) / k as f64);
    }
    out
}

/// Real series; `ord` is the highest trustworthy total degree (negative when
/// nothing is valid).
#[derive(Debug, Clone)]
pub(crate) struct RTps {
    pub ord: isize,
    pub c: Vec<f64>,
}

impl RTps {
    pub fn zero(sp: &Space, ord: isize) -> Self {
        RTps { ord, c: vec![0.0; sp.len()] }
    }

    pub fn constant(sp: &Space, v: f64) -> Self {
        let mut t = Self::zero(sp, sp.order as isize);
        t.c[0] = v;
        t
    }

    pub fn add(&self, o: &RTps) -> RTps {
        RTps { ord: self.ord.min(o.ord), c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &RTps) -> RTps {
        RTps { ord: self.ord.min(o.ord), c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> RTps {
        RTps { ord: self.ord, c: self.c.iter().map(|a| a * s).collect() }
    }

    pub fn mul(&self, sp: &Space, o: &RTps) -> RTps {
        let ord = self.ord.min(o.ord);
        let mut out = Self::zero(sp, ord);
        for &(i, j, k) in sp.pairs(ord) {
            out.c[k as usize] += self.c[i as usize] * o.c[j as usize];
        }
        out
    }

    pub fn deriv(&self, sp: &Space, v: usize) -> RTps {
        let mut out = Self::zero(sp, self.ord - 1);
        for &(src, dst, f) in &sp.deriv[v] {
            out.c[dst] = f * self.c[src];
        }
        out
    }

    /// `sum_k s_k u^k` for `u = self - self(0)`, i.e. composition of a series
    /// in powers of the nilpotent part.
    pub fn compose(&self, sp: &Space, s: &[f64]) -> RTps {
        let mut u = self.clone();
        u.c[0] = 0.0;
        let mut out = RTps::constant(sp, s[0]);
        out.ord = self.ord;
        let mut pow = RTps::constant(sp, 1.0);
        for &sk in s.iter().skip(1) {
            pow = pow.mul(sp, &u);
            out = out.add(&pow.scale(sk));
        }
        out
    }

    /// `log(self)` for a positive constant term.
    pub fn log(&self, sp: &Space) -> Result<RTps> {
        let c0 = self.c[0];
        if !(c0 > 0.0) {
            return Err(LabError::NumericalDegeneracy(format!("log of series with constant term {c0}")));
        }
        let n = sp.order;
        let mut s = vec![c0.ln()];
        // log(c0 (1 + u/c0)) = log c0 + sum (-1)^{k+1} (u/c0)^k / k
        for k in 1..=n {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            s.push(sign / (k as f64 * c0.powi(k as i32)));
        }
        Ok(self.compose(sp, &s))
    }
}

/// Series whose coefficients are sampled fiber functions of common degree `d`.
/// `ns` samples per coefficient (1 for plain complex series).
#[derive(Debug, Clone)]
pub(crate) struct FTps {
    pub d: i32,
    pub ord: isize,
    pub ns: usize,
    /// Bound on the angular Fourier bandwidth of the coefficients of each
    /// total degree; `-1` marks coefficients known to vanish.
    pub bw: Vec<i32>,
    pub c: Vec<C>,
}

impl FTps {
    pub fn zero(sp: &Space, ns: usize, d: i32, ord: isize) -> Self {
        FTps { d, ord, ns, bw: vec![-1; sp.order + 1], c: vec![C::new(0.0, 0.0); sp.len() * ns] }
    }

    pub fn coef(&self, i: usize) -> &[C] {
        &self.c[i * self.ns..(i + 1) * self.ns]
    }

    pub fn coef_mut(&mut self, i: usize) -> &mut [C] {
        let ns = self.ns;
        &mut self.c[i * ns..(i + 1) * ns]
    }

    pub fn with_degree(mut self, d: i32) -> Self {
        self.d = d;
        self
    }

    fn check(&self, o: &FTps) {
        debug_assert_eq!(self.ns, o.ns);
        debug_assert_eq!(self.d, o.d, "adding fiber series of different degrees");
    }

    pub fn add(&self, o: &FTps) -> FTps {
        self.check(o);
        FTps {
            d: self.d,
            ord: self.ord.min(o.ord),
            ns: self.ns,
            bw: self.bw.iter().zip(&o.bw).map(|(a, b)| *a.max(b)).collect(),
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &FTps) -> FTps {
        self.check(o);
        FTps {
            d: self.d,
            ord: self.ord.min(o.ord),
            ns: self.ns,
            bw: self.bw.iter().zip(&o.bw).map(|(a, b)| *a.max(b)).collect(),
            c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: C) -> FTps {
        FTps { d: self.d, ord: self.ord, ns: self.ns, bw: self.bw.clone(), c: self.c.iter().map(|a| a * s).collect() }
    }

    pub fn mul(&self, sp: &Space, o: &FTps) -> FTps {
        debug_assert_eq!(self.ns, o.ns);
        let ord = self.ord.min(o.ord);
        let ns = self.ns;
        let mut out = Self::zero(sp, ns, self.d + o.d, ord);
        for (k, w) in out.bw.iter_mut().enumerate() {
            *w = (0..=k)
                .filter(|&i| self.bw[i] >= 0 && o.bw[k - i] >= 0)
                .map(|i| self.bw[i] + o.bw[k - i])
                .max()
                .unwrap_or(-1);
        }
        for &(i, j, k) in sp.pairs(ord) {
            let (i, j, k) = (i as usize * ns, j as usize * ns, k as usize * ns);
            for s in 0..ns {
                out.c[k + s] += self.c[i + s] * o.c[j + s];
            }
        }
        out
    }

    pub fn mul_real(&self, sp: &Space, r: &RTps) -> FTps {
        let ord = self.ord.min(r.ord);
        let ns = self.ns;
        let mut out = Self::zero(sp, ns, self.d, ord);
        out.bw = self.bw.clone();
        for &(i, j, k) in sp.pairs(ord) {
            let rv = r.c[j as usize];
            if rv == 0.0 {
                continue;
            }
            let (i, k) = (i as usize * ns, k as usize * ns);
            for s in 0..ns {
                out.c[k + s] += self.c[i + s] * rv;
            }
        }
        out
    }

    pub fn deriv(&self, sp: &Space, v: usize) -> FTps {
        let ns = self.ns;
        let mut out = Self::zero(sp, ns, self.d, self.ord - 1);
        out.bw = self.bw.iter().skip(1).copied().chain([-1]).collect();
        for &(src, dst, f) in &sp.deriv[v] {
            for s in 0..ns {
                out.c[dst * ns + s] = self.c[src * ns + s] * f;
            }
        }
        out
    }

    /// `sum_k s_k u^k` with `u` the part of `self` above the constant term.
    pub fn compose(&self, sp: &Space, s: &[C]) -> FTps {
        let mut u = self.clone();
        u.coef_mut(0).iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
        u.bw[0] = -1;
        let mut out = Self::zero(sp, self.ns, self.d, self.ord);
        out.coef_mut(0).iter_mut().for_each(|v| *v = s[0]);
        out.bw[0] = 0;
        let mut pow = Self::zero(sp, self.ns, self.d, self.ord);
        pow.coef_mut(0).iter_mut().for_each(|v| *v = C::new(1.0, 0.0));
        pow.bw[0] = 0;
        for &sk in s.iter().skip(1) {
            pow = pow.mul(sp, &u).with_degree(self.d);
            out = out.add(&pow.scale(sk));
        }
        out
    }

    /// Drop every coefficient beyond the valid prefix (keeps tables honest).
    pub fn truncate(&mut self, sp: &Space) {
        let keep = sp.prefix(self.ord) * self.ns;
        for v in &mut self.c[keep..] {
            *v = C::new(0.0, 0.0);
        }
    }
}

/// Sampling of the fiber circle plus the linear frame `eta = S xi` at one
/// base point.
pub(crate) struct FiberCtx {
    pub m: usize,
    pub ns: usize,
    /// `S` and `S^{-1}`, row-major `m x m`.
    pub s: Vec<f64>,
    pub sinv: Vec<f64>,
    /// `eta` at each sample, `[beta][sample]`.
    pub eta: Vec<Vec<f64>>,
    /// `(S^{-1} eta)_beta` at each sample, i.e. the sampled covector.
    pub xi: Vec<Vec<f64>>,
    fwd: Option<Arc<dyn Fft<f64>>>,
    inv: Option<Arc<dyn Fft<f64>>>,
}

impl FiberCtx {
    pub fn new(m: usize, samples: usize) -> Result<Self> {
        let ns = match m {
            1 => 2,
            2 => {
                if samples < 8 || !samples.is_multiple_of(2) {
                    return Err(LabError::InvalidArgument(format!("fiber samples {samples}: need an even count >= 8")));
                }
                samples
            }
            _ => return Err(LabError::Mismatch(format!("symbol engine supports boundaries of dimension 1 or 2, got {m}"))),
        };
        let eta = if m == 1 {
            vec![vec![1.0, -1.0]]
        } else {
            let phi: Vec<f64> = (0..ns).map(|k| 2.0 * PI * k as f64 / ns as f64).collect();
            vec![phi.iter().map(|t| t.cos()).collect(), phi.iter().map(|t| t.sin()).collect()]
        };
        let (fwd, inv) = if m == 2 {
            let mut planner = FftPlanner::new();
            (Some(planner.plan_fft_forward(ns)), Some(planner.plan_fft_inverse(ns)))
        } else {
            (None, None)
        };
        let mut ctx = FiberCtx { m, ns, s: vec![], sinv: vec![], eta, xi: vec![], fwd, inv };
        let id: Vec<f64> = (0..m * m).map(|k| if k % (m + 1) == 0 { 1.0 } else { 0.0 }).collect();
        ctx.set_frame(&id)?;
        Ok(ctx)
    }

    /// Frame `S = G0^{1/2}` for the inverse metric `G0 = g^{ab}(x0)`, so that
    /// `|xi|_g = |eta|`.
    pub fn set_frame_from_inverse_metric(&mut self, g0: &[f64]) -> Result<()> {
        let s = spd_sqrt(g0, self.m)?;
        self.set_frame(&s)
    }

    pub fn set_frame(&mut self, s: &[f64]) -> Result<()> {
        let m = self.m;
        let sinv = match m {
            1 => vec![1.0 / s[0]],
            _ => {
                let det = s[0] * s[3] - s[1] * s[2];
                vec![s[3] / det, -s[1] / det, -s[2] / det, s[0] / det]
            }
        };
        self.xi = (0..m)
            .map(|b| (0..self.ns).map(|k| (0..m).map(|g| sinv[b * m + g] * self.eta[g][k]).sum()).collect())
            .collect();
        self.s = s.to_vec();
        self.sinv = sinv;
        Ok(())
    }

    /// `d/d eta_beta` of a degree-`d` homogeneous function given by samples.
    pub fn deta(&self, f: &[C], d: i32, beta: usize, bw: usize) -> Vec<C> {
        let df = d as f64;
        if self.m == 1 {
            return f.iter().zip(&self.eta[0]).map(|(v, u)| v * (df * u)).collect();
        }
        let fp = self.dphi(f, bw);
        let (c, s) = (&self.eta[0], &self.eta[1]);
        (0..self.ns)
            .map(|k| {
                if beta == 0 {
                    f[k] * (df * c[k]) - fp[k] * s[k]
                } else {
                    f[k] * (df * s[k]) + fp[k] * c[k]
                }
            })
            .collect()
    }

    /// Angular derivative by FFT. Modes above the known bandwidth `bw` carry
    /// only round-off, which repeated differentiation would amplify, so they
    /// are dropped together with the Nyquist mode.
    fn dphi(&self, f: &[C], bw: usize) -> Vec<C> {
        let n = self.ns;
        let mut buf = f.to_vec();
        self.fwd.as_ref().expect("circle fiber").process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let signed = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
            let kk = if k == n / 2 || signed.unsigned_abs() as usize > bw { 0.0 } else { signed as f64 };
            *v *= C::new(0.0, kk / n as f64);
        }
        self.inv.as_ref().expect("circle fiber").process(&mut buf);
        buf
    }

    /// Drop angular modes above `bw` (round-off only for band-limited data).
    pub fn lowpass(&self, f: &[C], bw: usize) -> Vec<C> {
        if self.m == 1 {
            return f.to_vec();
        }
        let n = self.ns;
        let mut buf = f.to_vec();
        self.fwd.as_ref().expect("circle fiber").process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let signed = if k <= n / 2 { k } else { n - k };
            *v = if signed > bw || k == n / 2 { C::new(0.0, 0.0) } else { *v / n as f64 };
        }
        self.inv.as_ref().expect("circle fiber").process(&mut buf);
        buf
    }

    /// `d/d xi_alpha = sum_beta S_{beta alpha} d/d eta_beta`.
    pub fn dxi(&self, f: &[C], d: i32, alpha: usize, bw: usize) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); self.ns];
        for beta in 0..self.m {
            let w = self.s[beta * self.m + alpha];
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.deta(f, d, beta, bw)) {
                *o += v * w;
            }
        }
        out
    }

    /// Apply `d/d xi_alpha` to every coefficient of a series.
    pub fn dxi_series(&self, sp: &Space, f: &FTps, alpha: usize) -> FTps {
        let mut out = FTps::zero(sp, self.ns, f.d - 1, f.ord);
        out.bw = f.bw.iter().map(|&w| if w >= 0 { w + 1 } else { w }).collect();
        for i in 0..sp.prefix(f.ord) {
            let v = self.dxi(f.coef(i), f.d, alpha, f.bw[sp.degree(i)].max(0) as usize);
            out.coef_mut(i).copy_from_slice(&v);
        }
        out
    }

    /// Real series times a constant fiber function.
    pub fn lift_const(&self, sp: &Space, r: &RTps, d: i32) -> FTps {
        let mut out = FTps::zero(sp, self.ns, d, r.ord);
        out.bw.iter_mut().for_each(|w| *w = 0);
        for i in 0..sp.len() {
            let v = C::new(r.c[i], 0.0);
            out.coef_mut(i).iter_mut().for_each(|x| *x = v);
        }
        out
    }

    /// `v^beta(x) xi_beta`.
    pub fn lift_linear(&self, sp: &Space, v: &[RTps]) -> FTps {
        let ord = v.iter().map(|t| t.ord).min().unwrap_or(0);
        let mut out = FTps::zero(sp, self.ns, 1, ord);
        out.bw.iter_mut().for_each(|w| *w = 1);
        for i in 0..sp.len() {
            for (k, x) in out.coef_mut(i).iter_mut().enumerate() {
                *x = C::new((0..self.m).map(|b| v[b].c[i] * self.xi[b][k]).sum(), 0.0);
            }
        }
        out
    }

    /// `G^{ab}(x) xi_a xi_b`, `g` row-major.
    pub fn lift_quadratic(&self, sp: &Space, g: &[RTps]) -> FTps {
        let m = self.m;
        let ord = g.iter().map(|t| t.ord).min().unwrap_or(0);
        let mut out = FTps::zero(sp, self.ns, 2, ord);
        out.bw.iter_mut().for_each(|w| *w = 2);
        for i in 0..sp.len() {
            for (k, x) in out.coef_mut(i).iter_mut().enumerate() {
                let mut acc = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        acc += g[a * m + b].c[i] * self.xi[a][k] * self.xi[b][k];
                    }
                }
                *x = C::new(acc, 0.0);
            }
        }
        out
    }

    /// Least-squares coefficients `c` of `sum_beta c_beta eta_beta`.
    pub fn linear_coefficients(&self, f: &[C]) -> Vec<C> {
        (0..self.m)
            .map(|b| {
                let norm: f64 = self.eta[b].iter().map(|e| e * e).sum();
                f.iter().zip(&self.eta[b]).map(|(v, e)| v * *e).sum::<C>() / norm
            })
            .collect()
    }
}

/// Square root of a symmetric positive definite `1 x 1` or `2 x 2` matrix.
pub(crate) fn spd_sqrt(g: &[f64], m: usize) -> Result<Vec<f64>> {
    let degenerate = |what: String| Err(LabError::NumericalDegeneracy(what));
    if m == 1 {
        if !(g[0] > 0.0) || !g[0].is_finite() {
            return degenerate(format!("inverse metric {} not positive", g[0]));
        }
        return Ok(vec![g[0].sqrt()]);
    }
    if (g[1] - g[2]).abs() > 1e-12 * (g[0].abs() + g[3].abs()) {
        return degenerate("inverse metric not symmetric".into());
    }
    let (tr, det) = (g[0] + g[3], g[0] * g[3] - g[1] * g[2]);
    let disc = ((g[0] - g[3]).powi(2) + 4.0 * g[1] * g[2]).max(0.0).sqrt();
    let (lmax, lmin) = (0.5 * (tr + disc), 0.5 * (tr - disc));
    if !(lmin > 0.0) || !(lmax / lmin < 1e12) {
        return degenerate(format!("inverse metric eigenvalues {lmin:e}, {lmax:e}"));
    }
    let sd = det.sqrt();
    let t = (tr + 2.0 * sd).sqrt();
    Ok(vec![(g[0] + sd) / t, g[1] / t, g[2] / t, (g[3] + sd) / t])
}
