//! Vector fields `H`, `H_perp`, `V` on the cosphere bundle of an isothermal
//! surface chart, sampled on an `(x1, x2, theta)` grid.
//!
//! Periodic axes and the fiber angle are differentiated by FFT; patch axes
//! use Chebyshev-Lobatto collocation with Clenshaw-Curtis weights.

use crate::affine::AffineFiberFunction;
use crate::error::{LabError, Result};
use crate::geometry::{ChartKind, MetricChart};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Scalar,
    HorizontalVector,
    VerticalVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosphereField {
    pub values: Vec<C>,
    pub kind: ValueKind,
    pub circle_valued: bool,
}

impl CosphereField {
    pub fn scalar(values: Vec<C>) -> Self {
        CosphereField { values, kind: ValueKind::Scalar, circle_valued: false }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}

/// One line of a residual report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub identity_name: String,
    pub resolution: usize,
    pub residual: f64,
    /// `log2(previous / this)` against the next coarser resolution.
    pub convergence_order: Option<f64>,
}

/// Below this both residuals are at round-off and convergence is not observable.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;

/// `coarse < bound` and either a tenfold drop on refinement or both at the floor.
pub fn converges(coarse: f64, fine: f64, bound: f64) -> bool {
    coarse < bound && (fine * 10.0 <= coarse || coarse.max(fine) <= ROUNDOFF_FLOOR)
}

enum AxisDiff {
    Spectral { fwd: Arc<dyn Fft<f64>>, inv: Arc<dyn Fft<f64>>, period: f64 },
    Matrix { d: Vec<f64> },
}

impl AxisDiff {
    fn apply(&self, line: &mut [C]) {
        let m = line.len();
        match self {
            AxisDiff::Spectral { fwd, inv, period } => {
                fwd.process(line);
                for (k, v) in line.iter_mut().enumerate() {
                    let kk = if 2 * k < m {
                        k as f64
                    } else if 2 * k == m {
                        0.0
                    } else {
                        k as f64 - m as f64
                    };
                    *v *= C::new(0.0, 2.0 * PI * kk / period) / m as f64;
                }
                inv.process(line);
            }
            AxisDiff::Matrix { d } => {
                let src = line.to_vec();
                for (i, v) in line.iter_mut().enumerate() {
                    *v = d[i * m..(i + 1) * m].iter().zip(&src).map(|(a, b)| b * a).sum();
                }
            }
        }
    }
}

/// Chebyshev-Lobatto nodes mapped increasingly onto `[a, b]`, the
/// differentiation matrix (row-major) and Clenshaw-Curtis weights.
pub fn chebyshev_axis(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nn = n - 1;
    let xs: Vec<f64> = (0..n).map(|j| (PI * j as f64 / nn as f64).cos()).collect();
    let c = |j: usize| -> f64 {
        let e = if j == 0 || j == nn { 2.0 } else { 1.0 };
        if j.is_multiple_of(2) { e } else { -e }
    };
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = c(i) / c(j) / (xs[i] - xs[j]);
                d[i * n + j] = v;
                diag -= v;
            }
        }
        d[i * n + i] = diag;
    }
    // y = a + (b - a)(1 - x)/2, so d/dy = -2/(b - a) d/dx.
    let scale = -2.0 / (b - a);
    d.iter_mut().for_each(|v| *v *= scale);
    let mut w = vec![0.0; n];
    let nf = nn as f64;
    if nn.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
    } else {
        w[0] = 1.0 / (nf * nf);
    }
    w[nn] = w[0];
    for (i, wi) in w.iter_mut().enumerate().take(nn).skip(1) {
        let th = PI * i as f64 / nf;
        let mut v = 1.0;
        for k in 1..=(nn - 1) / 2 {
            v -= 2.0 * (2.0 * k as f64 * th).cos() / (4.0 * (k * k) as f64 - 1.0);
        }
        if nn.is_multiple_of(2) {
            v -= (nf * th).cos() / (nf * nf - 1.0);
        }
        *wi = 2.0 * v / nf;
    }
    let half = (b - a) / 2.0;
    let ys = xs.iter().map(|x| a + half * (1.0 - x)).collect();
    (ys, d, w.into_iter().map(|v| v * half).collect())
}

pub struct CosphereGrid {
    pub chart: MetricChart,
    pub n: [usize; 2],
    pub nt: usize,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub theta: Vec<f64>,
    /// Per base node: `e^{-phi}`, `d1 phi`, `d2 phi`, `K`, quadrature weight incl. `e^{2 phi}`.
    emphi: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
    curv: Vec<f64>,
    weight: Vec<f64>,
    diff: [AxisDiff; 3],
}

impl CosphereGrid {
    /// `n` base nodes per axis, `nt` fiber angles.
    pub fn new(chart: &MetricChart, n: usize, nt: usize) -> Result<CosphereGrid> {
        if chart.dim != 2 || !matches!(chart.kind, ChartKind::FlatTorus | ChartKind::Isothermal2d) {
            return Err(LabError::Mismatch("cosphere grid needs an isothermal surface chart".into()));
        }
        if n < 6 || nt < 4 {
            return Err(LabError::InvalidArgument("grid needs n >= 6 and nt >= 4".into()));
        }
        let periodic = chart.is_periodic();
        let mut planner = FftPlanner::new();
        let mut axes = Vec::new();
        for ax in 0..2 {
            let [a, b] = chart.domain[ax];
            if periodic {
                let h = (b - a) / n as f64;
                let diff = AxisDiff::Spectral {
                    fwd: planner.plan_fft_forward(n),
                    inv: planner.plan_fft_inverse(n),
                    period: b - a,
                };
                axes.push(((0..n).map(|i| a + h * i as f64).collect::<Vec<_>>(), vec![h; n], diff));
            } else {
                let (nodes, d, w) = chebyshev_axis(n, a, b);
                axes.push((nodes, w, AxisDiff::Matrix { d }));
            }
        }
        let (x2, w2, d2) = axes.pop().unwrap();
        let (x1, w1, d1) = axes.pop().unwrap();
        let dt = AxisDiff::Spectral {
            fwd: planner.plan_fft_forward(nt),
            inv: planner.plan_fft_inverse(nt),
            period: 2.0 * PI,
        };
        let mut emphi = Vec::with_capacity(n * n);
        let mut phi1 = Vec::with_capacity(n * n);
        let mut phi2 = Vec::with_capacity(n * n);
        let mut curv = Vec::with_capacity(n * n);
        let mut weight = Vec::with_capacity(n * n);
        for (i, j) in (0..n).flat_map(|i| (0..n).map(move |j| (i, j))) {
            let x = &[x1[i], x2[j]][..];
            let w = w1[i] * w2[j];
            let (phi, g) = match &chart.conformal_factor {
                Some(f) => (f.eval(x), f.grad(x)),
                None => (0.0, vec![0.0, 0.0]),
            };
            emphi.push((-phi).exp());
            phi1.push(g[0]);
            phi2.push(g[1]);
            curv.push(chart.gauss_curvature(x)?);
            weight.push(w * (2.0 * phi).exp() * 2.0 * PI / nt as f64);
        }
        Ok(CosphereGrid {
            chart: chart.clone(),
            n: [n, n],
            nt,
            x1,
            x2,
            theta: (0..nt).map(|t| 2.0 * PI * t as f64 / nt as f64).collect(),
            emphi,
            phi1,
            phi2,
            curv,
            weight,
            diff: [d1, d2, dt],
        })
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, t: usize) -> usize {
        (i * self.n[1] + j) * self.nt + t
    }

    pub fn sample(&self, u: &dyn Fn(&[f64], f64) -> C) -> CosphereField {
        let mut v = Vec::with_capacity(self.len());
        for &a in &self.x1 {
            for &b in &self.x2 {
                for &t in &self.theta {
                    v.push(u(&[a, b], t));
                }
            }
        }
        CosphereField::scalar(v)
    }

    /// `f0 + e^{-phi}(a1 cos t + a2 sin t)`.
    pub fn sample_affine(&self, f: &AffineFiberFunction) -> CosphereField {
        let mut v = Vec::with_capacity(self.len());
        for (i, &a) in self.x1.iter().enumerate() {
            for (j, &b) in self.x2.iter().enumerate() {
                let x = [a, b];
                let e = self.emphi[i * self.n[1] + j];
                let (f0, a1, a2) = (f.f0.eval(&x), f.f1[0].eval(&x), f.f1[1].eval(&x));
                for &t in &self.theta {
                    v.push(C::new(f0 + e * (a1 * t.cos() + a2 * t.sin()), 0.0));
                }
            }
        }
        CosphereField::scalar(v)
    }

    fn diff_axis(&self, u: &[C], axis: usize) -> Vec<C> {
        let [n1, n2] = self.n;
        let nt = self.nt;
        let mut out = u.to_vec();
        match axis {
            2 => {
                for line in out.chunks_mut(nt) {
                    self.diff[2].apply(line);
                }
            }
            _ => {
                let (outer, len) = if axis == 0 { (n2, n1) } else { (n1, n2) };
                let mut line = vec![C::new(0.0, 0.0); len];
                for o in 0..outer {
                    for t in 0..nt {
                        for (k, slot) in line.iter_mut().enumerate() {
                            let (i, j) = if axis == 0 { (k, o) } else { (o, k) };
                            *slot = u[self.idx(i, j, t)];
                        }
                        self.diff[axis].apply(&mut line);
                        for (k, v) in line.iter().enumerate() {
                            let (i, j) = if axis == 0 { (k, o) } else { (o, k) };
                            out[self.idx(i, j, t)] = *v;
                        }
                    }
                }
            }
        }
        out
    }

    fn check_scalar(&self, u: &CosphereField) -> Result<()> {
        if u.kind != ValueKind::Scalar {
            return Err(LabError::Mismatch(format!("operator needs a scalar field, got {:?}", u.kind)));
        }
        if u.values.len() != self.len() {
            return Err(LabError::Mismatch("field sampled on a different grid".into()));
        }
        Ok(())
    }

    /// `c1 D1 + c2 D2 + c3 Dtheta` with coefficients given per node.
    fn combine(&self, u: &[C], coef: impl Fn(usize, f64) -> (f64, f64, f64)) -> Vec<C> {
        let d1 = self.diff_axis(u, 0);
        let d2 = self.diff_axis(u, 1);
        let dt = self.diff_axis(u, 2);
        let mut out = vec![C::new(0.0, 0.0); u.len()];
        for b in 0..self.n[0] * self.n[1] {
            for (t, &th) in self.theta.iter().enumerate() {
                let k = b * self.nt + t;
                let (c1, c2, c3) = coef(b, th);
                out[k] = d1[k] * c1 + d2[k] * c2 + dt[k] * c3;
            }
        }
        out
    }

    pub fn apply_h(&self, u: &CosphereField) -> Result<CosphereField> {
        self.check_scalar(u)?;
        let v = self.combine(&u.values, |b, t| {
            let (s, c) = t.sin_cos();
            let a = -s * self.phi1[b] + c * self.phi2[b];
            let e = self.emphi[b];
            (e * c, e * s, e * a)
        });
        Ok(CosphereField::scalar(v))
    }

    pub fn apply_hperp(&self, u: &CosphereField) -> Result<CosphereField> {
        self.check_scalar(u)?;
        let v = self.combine(&u.values, |b, t| {
            let (s, c) = t.sin_cos();
            let bb = c * self.phi1[b] + s * self.phi2[b];
            let e = self.emphi[b];
            (e * s, -e * c, e * bb)
        });
        Ok(CosphereField::scalar(v))
    }

    pub fn apply_v(&self, u: &CosphereField) -> Result<CosphereField> {
        self.check_scalar(u)?;
        Ok(CosphereField::scalar(self.diff_axis(&u.values, 2)))
    }

    pub fn mul_curvature(&self, u: &CosphereField) -> CosphereField {
        let mut v = u.values.clone();
        for (k, x) in v.iter_mut().enumerate() {
            *x *= self.curv[k / self.nt];
        }
        CosphereField { values: v, kind: u.kind, circle_valued: false }
    }

    /// Sup over all nodes.
    pub fn sup_diff(&self, a: &CosphereField, b: &CosphereField) -> f64 {
        a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// `(a|b)` with the Liouville measure `e^{2 phi} dx dtheta`.
    pub fn inner(&self, a: &CosphereField, b: &CosphereField) -> C {
        let mut s = C::new(0.0, 0.0);
        for (k, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
            s += x * y.conj() * self.weight[k / self.nt];
        }
        s
    }

    pub fn norm_sq(&self, a: &CosphereField) -> f64 {
        self.inner(a, a).re
    }
}

fn sub(a: &CosphereField, b: &CosphereField) -> CosphereField {
    CosphereField::scalar(a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect())
}

/// `[V,H_perp] = H`, `[H_perp,H] = K V` and `[H,V] = H_perp` on one grid.
pub fn bracket_residuals_on(grid: &CosphereGrid, u: &CosphereField) -> Result<Vec<(String, f64)>> {
    let h = grid.apply_h(u)?;
    let hp = grid.apply_hperp(u)?;
    let v = grid.apply_v(u)?;
    let v_hp = grid.apply_v(&hp)?;
    let hp_v = grid.apply_hperp(&v)?;
    let hp_h = grid.apply_hperp(&h)?;
    let h_hp = grid.apply_h(&hp)?;
    let h_v = grid.apply_h(&v)?;
    let v_h = grid.apply_v(&h)?;
    let kv = grid.mul_curvature(&v);
    Ok(vec![
        ("[V,Hperp]=H".to_string(), grid.sup_diff(&sub(&v_hp, &hp_v), &h)),
        ("[Hperp,H]=KV".to_string(), grid.sup_diff(&sub(&hp_h, &h_hp), &kv)),
        ("[H,V]=Hperp".to_string(), grid.sup_diff(&sub(&h_v, &v_h), &hp)),
    ])
}

/// Worst residual over `test_fields` at `(n, nt)` and `(2n, 2nt)`.
pub fn bracket_residuals(
    chart: &MetricChart,
    test_fields: &[&dyn Fn(&[f64], f64) -> C],
    n: usize,
    nt: usize,
) -> Result<Vec<ResidualRecord>> {
    let mut out = Vec::new();
    let mut coarse: Vec<(String, f64)> = Vec::new();
    for (level, (nn, ntt)) in [(n, nt), (2 * n, 2 * nt)].into_iter().enumerate() {
        let grid = CosphereGrid::new(chart, nn, ntt)?;
        let mut worst: Vec<(String, f64)> = Vec::new();
        for f in test_fields {
            let u = grid.sample(f);
            for (i, (name, r)) in bracket_residuals_on(&grid, &u)?.into_iter().enumerate() {
                if worst.len() <= i {
                    worst.push((name, r));
                } else {
                    worst[i].1 = worst[i].1.max(r);
                }
            }
        }
        for (i, (name, r)) in worst.iter().enumerate() {
            out.push(ResidualRecord {
                identity_name: name.clone(),
                resolution: nn,
                residual: *r,
                convergence_order: if level == 1 { Some((coarse[i].1 / r).log2()) } else { None },
            });
        }
        coarse = worst;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBeta {
    pub alpha: CosphereField,
    pub beta: CosphereField,
    /// `f = i conj(u) H u`, the potential for which `u` solves the transport equation.
    pub f: CosphereField,
    pub max_imag: f64,
}

fn check_unimodular(u: &CosphereField, tol: f64) -> Result<()> {
    let dev = u.values.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    if dev > tol {
        return Err(LabError::NonUnimodular { deviation: dev });
    }
    Ok(())
}

/// `alpha = i conj(u) H_perp u`, `beta = i conj(u) V u`; real parts are returned.
pub fn build_alpha_beta(grid: &CosphereGrid, u: &CosphereField) -> Result<AlphaBeta> {
    check_unimodular(u, 1e-10)?;
    let prod = |w: &CosphereField| -> Vec<C> {
        u.values.iter().zip(&w.values).map(|(a, b)| C::i() * a.conj() * b).collect()
    };
    let a = prod(&grid.apply_hperp(u)?);
    let b = prod(&grid.apply_v(u)?);
    let f = prod(&grid.apply_h(u)?);
    let max_imag = a.iter().chain(&b).chain(&f).map(|z| z.im.abs()).fold(0.0, f64::max);
    let real = |v: Vec<C>, kind| CosphereField {
        values: v.into_iter().map(|z| C::new(z.re, 0.0)).collect(),
        kind,
        circle_valued: false,
    };
    Ok(AlphaBeta {
        alpha: real(a, ValueKind::HorizontalVector),
        beta: real(b, ValueKind::VerticalVector),
        f: real(f, ValueKind::Scalar),
        max_imag,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PestovReport {
    pub h_beta_sq: f64,
    pub curvature_term: f64,
    pub vf_sq: f64,
    pub f_sq: f64,
    pub f0_sq: f64,
    pub beta_norm: f64,
    /// `-|H beta|^2 + (K beta|beta) + |Vf|^2 - |f|^2`.
    pub identity_residual: f64,
    /// `|f0|^2 -(-|H beta|^2 + (K beta|beta))`.
    pub rearranged_residual: f64,
    /// `max |Hu + i f u|`.
    pub transport_violation: f64,
}

/// Pestov identity for a transport solution `(u, f)`; errors if `Hu + ifu`
/// exceeds `1e-8` anywhere on the measured nodes.
pub fn pestov_residual(grid: &CosphereGrid, u: &CosphereField, f: &AffineFiberFunction) -> Result<PestovReport> {
    let rep = pestov_residual_unchecked(grid, u, f)?;
    if rep.transport_violation > 1e-8 {
        return Err(LabError::Precondition {
            what: "Hu + i f u = 0".into(),
            measured: rep.transport_violation,
        });
    }
    Ok(rep)
}

/// Same quadrature pipeline without the transport precondition.
pub fn pestov_residual_unchecked(
    grid: &CosphereGrid,
    u: &CosphereField,
    f: &AffineFiberFunction,
) -> Result<PestovReport> {
    check_unimodular(u, 1e-10)?;
    let fs = grid.sample_affine(f);
    let hu = grid.apply_h(u)?;
    let transport = CosphereField::scalar(
        hu.values.iter().zip(&u.values).zip(&fs.values).map(|((h, u), f)| h + C::i() * f * u).collect(),
    );
    let zero = CosphereField::scalar(vec![C::new(0.0, 0.0); grid.len()]);
    let transport_violation = grid.sup_diff(&transport, &zero);
    let ab = build_alpha_beta(grid, u)?;
    let beta = CosphereField::scalar(ab.beta.values.clone());
    let h_beta_sq = grid.norm_sq(&grid.apply_h(&beta)?);
    let curvature_term = grid.inner(&grid.mul_curvature(&beta), &beta).re;
    let vf_sq = grid.norm_sq(&grid.apply_v(&fs)?);
    let f_sq = grid.norm_sq(&fs);
    let f0 = grid.sample(&|x: &[f64], _t| C::new(f.f0.eval(x), 0.0));
    let f0_sq = grid.norm_sq(&f0);
    let beta_norm = grid.norm_sq(&beta).sqrt();
    Ok(PestovReport {
        h_beta_sq,
        curvature_term,
        vf_sq,
        f_sq,
        f0_sq,
        beta_norm,
        identity_residual: (-h_beta_sq + curvature_term + vf_sq - f_sq).abs(),
        rearranged_residual: (f0_sq - (-h_beta_sq + curvature_term)).abs(),
        transport_violation,
    })
}

/// `max |H U0 - (1/2) H_p U0|` over measured nodes, where `U0` is the degree-0
/// extension of `big_f(x, xi)`, `p = |xi|^2_x`, and `H_p` is differentiated
/// by central differences with step `h`.
pub fn hamiltonian_residual(grid: &CosphereGrid, big_f: &dyn Fn(&[f64], &[f64]) -> C, h: f64) -> Result<f64> {
    let chart = &grid.chart;
    let u0 = |x: &[f64], xi: &[f64]| -> C {
        let Ok(gi) = chart.inverse_metric(x) else { return C::new(f64::NAN, 0.0) };
        let s = (gi[(0, 0)] * xi[0] * xi[0] + 2.0 * gi[(0, 1)] * xi[0] * xi[1] + gi[(1, 1)] * xi[1] * xi[1]).sqrt();
        big_f(x, &[xi[0] / s, xi[1] / s])
    };
    let lift = |x: &[f64], t: f64| -> [f64; 2] {
        let e = chart.conformal_factor.as_ref().map_or(1.0, |f| f.eval(x).exp());
        [e * t.cos(), e * t.sin()]
    };
    let sampled = grid.sample(&|x, t| u0(x, &lift(x, t)));
    let hu = grid.apply_h(&sampled)?;
    let d = |f: &dyn Fn(f64) -> C| (f(-2.0 * h) - f(-h) * 8.0 + f(h) * 8.0 - f(2.0 * h)) / (12.0 * h);
    let mut hp = Vec::with_capacity(grid.len());
    for &a in &grid.x1 {
        for &b in &grid.x2 {
            let x = [a, b];
            let (g, dg) = chart.metric_grad(&x);
            let gi = g.try_inverse().ok_or_else(|| LabError::NumericalDegeneracy("singular metric".into()))?;
            for &t in &grid.theta {
                let xi = lift(&x, t);
                let v = [gi[(0, 0)] * xi[0] + gi[(0, 1)] * xi[1], gi[(1, 0)] * xi[0] + gi[(1, 1)] * xi[1]];
                let mut s = C::new(0.0, 0.0);
                for j in 0..2 {
                    let dxj = d(&|e| {
                        let mut y = x;
                        y[j] += e;
                        u0(&y, &xi)
                    });
                    let dxij = d(&|e| {
                        let mut z = xi;
                        z[j] += e;
                        u0(&x, &z)
                    });
                    // dp/dx_j = -v^T (d_j g) v.
                    let dp = -(0..2).map(|k| (0..2).map(|l| v[k] * dg[j][(k, l)] * v[l]).sum::<f64>()).sum::<f64>();
                    s += dxj * v[j] - dxij * (0.5 * dp);
                }
                hp.push(s);
            }
        }
    }
    let r = grid.sup_diff(&hu, &CosphereField::scalar(hp));
    if !r.is_finite() {
        return Err(LabError::NumericalDegeneracy("non-finite Hamiltonian residual".into()));
    }
    Ok(r)
}
