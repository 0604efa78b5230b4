//! Horizontal and vertical calculus on `S*M` for charts of any dimension.
//!
//! Fields are closures `F(x, xi)`; every operator first passes to the
//! degree-0 extension `U0(x, xi) = F(x, xi / |xi|_x)` and returns a field that
//! is again defined on all of `T*M \ 0`. Derivatives are fourth-order central
//! differences with step `h`.

use crate::affine::AffineFiberFunction;
use crate::cosphere::ResidualRecord;
use crate::error::{LabError, Result};
use crate::geometry::MetricChart;
use crate::quadrature::{self, SphereRule};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

type C = Complex64;

pub type FiberFn = Arc<dyn Fn(&[f64], &[f64]) -> C + Send + Sync>;

pub fn fiber_fn(f: impl Fn(&[f64], &[f64]) -> C + Send + Sync + 'static) -> FiberFn {
    Arc::new(f)
}

const NAN: C = C::new(f64::NAN, f64::NAN);

#[derive(Clone)]
pub struct FiberCalculus {
    pub chart: Arc<MetricChart>,
    pub h: f64,
}

fn raise(gi: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|k| (0..n).map(|l| gi[(k, l)] * v[l]).sum()).collect()
}

fn fd4(mut f: impl FnMut(f64) -> C, h: f64) -> C {
    (f(-2.0 * h) - f(-h) * 8.0 + f(h) * 8.0 - f(2.0 * h)) / (12.0 * h)
}

impl FiberCalculus {
    pub fn new(chart: &MetricChart, h: f64) -> Result<FiberCalculus> {
        if !(h > 0.0) || h > 0.25 {
            return Err(LabError::InvalidArgument(format!("step {h} outside (0, 0.25]")));
        }
        Ok(FiberCalculus { chart: Arc::new(chart.clone()), h })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    /// `xi / |xi|_x` and `g^{-1}(x)`; `None` if the metric is degenerate.
    fn normalize(&self, x: &[f64], xi: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
        let gi = self.chart.inverse_metric(x).ok()?;
        let r = raise(&gi, xi);
        let s: f64 = r.iter().zip(xi).map(|(a, b)| a * b).sum();
        if !(s > 0.0) {
            return None;
        }
        let s = s.sqrt();
        Some((xi.iter().map(|v| v / s).collect(), gi))
    }

    /// `U0`: the degree-0 extension of `u`.
    pub fn closure(&self, u: &FiberFn) -> FiberFn {
        let me = self.clone();
        let u = u.clone();
        Arc::new(move |x, xi| match me.normalize(x, xi) {
            Some((t, _)) => u(x, &t),
            None => NAN,
        })
    }

    /// `d F / d xi_k` at `(x, theta)` for all `k`.
    fn dxi_raw(&self, u: &FiberFn, x: &[f64], t: &[f64]) -> Vec<C> {
        let mut y = t.to_vec();
        (0..t.len())
            .map(|k| {
                let v = fd4(
                    |d| {
                        y[k] = t[k] + d;
                        u(x, &y)
                    },
                    self.h,
                );
                y[k] = t[k];
                v
            })
            .collect()
    }

    /// `d U0 / d xi_k = dF_k - theta^k (theta . dF)` at a unit covector.
    fn dxi_u0(&self, u: &FiberFn, x: &[f64], t: &[f64], gi: &DMatrix<f64>) -> Vec<C> {
        let d = self.dxi_raw(u, x, t);
        let radial: C = t.iter().zip(&d).map(|(a, b)| b * a).sum();
        let tu = raise(gi, t);
        d.iter().zip(&tu).map(|(dk, tk)| dk - radial * tk).collect()
    }

    /// `V_j u = g_{jk} dU0/dxi_k`.
    pub fn vj(&self, u: &FiberFn, j: usize) -> FiberFn {
        let me = self.clone();
        let u = u.clone();
        Arc::new(move |x, xi| {
            let Some((t, _)) = me.normalize(x, xi) else { return NAN };
            let g = me.chart.metric(x);
            let d = me.dxi_raw(&u, x, &t);
            let radial: C = t.iter().zip(&d).map(|(a, b)| b * a).sum();
            (0..t.len()).map(|k| d[k] * g[(j, k)]).sum::<C>() - radial * t[j]
        })
    }

    /// `V_j` through the degree-`d` extension `|xi|^d U0`:
    /// `V_j u = g_{jk} dU_d/dxi_k - d theta_j u`.
    pub fn vj_degree(&self, u: &FiberFn, j: usize, deg: i32) -> FiberFn {
        let me = self.clone();
        let u0 = self.closure(u);
        Arc::new(move |x, xi| {
            let Some((t, _)) = me.normalize(x, xi) else { return NAN };
            let g = me.chart.metric(x);
            let ud: FiberFn = {
                let u0 = u0.clone();
                let me = me.clone();
                Arc::new(move |x: &[f64], xi: &[f64]| {
                    let Ok(gi) = me.chart.inverse_metric(x) else { return NAN };
                    let s: f64 = raise(&gi, xi).iter().zip(xi).map(|(a, b)| a * b).sum();
                    u0(x, xi) * s.sqrt().powi(deg)
                })
            };
            let d = me.dxi_raw(&ud, x, &t);
            (0..t.len()).map(|k| d[k] * g[(j, k)]).sum::<C>() - u0(x, &t) * (deg as f64 * t[j])
        })
    }

    /// `nabla_j u = dU0/dx_j + Gamma^l_{jk} theta_l dU0/dxi_k`.
    pub fn nabla(&self, u: &FiberFn, j: usize) -> FiberFn {
        let me = self.clone();
        let u0 = self.closure(u);
        Arc::new(move |x, xi| {
            let Some((t, gi)) = me.normalize(x, xi) else { return NAN };
            let Ok(gam) = me.chart.christoffel(x) else { return NAN };
            let n = t.len();
            let mut y = x.to_vec();
            let dx = fd4(
                |d| {
                    y[j] = x[j] + d;
                    u0(&y, &t)
                },
                me.h,
            );
            let dv = me.dxi_u0(&u0, x, &t, &gi);
            let mut s = dx;
            for k in 0..n {
                let c: f64 = (0..n).map(|l| gam.get(l, j, k) * t[l]).sum();
                s += dv[k] * c;
            }
            s
        })
    }

    /// `H u = theta^j nabla_j u`.
    pub fn apply_h(&self, u: &FiberFn) -> FiberFn {
        let me = self.clone();
        let parts: Vec<FiberFn> = (0..self.dim()).map(|j| self.nabla(u, j)).collect();
        Arc::new(move |x, xi| {
            let Some((t, gi)) = me.normalize(x, xi) else { return NAN };
            let tu = raise(&gi, &t);
            parts.iter().zip(&tu).map(|(p, c)| p(x, &t) * c).sum()
        })
    }

    /// The multiplication field `theta_j = xi_j / |xi|`.
    pub fn theta(&self, j: usize) -> FiberFn {
        let me = self.clone();
        Arc::new(move |x, xi| match me.normalize(x, xi) {
            Some((t, _)) => C::new(t[j], 0.0),
            None => NAN,
        })
    }

    /// `R^l_{mjk} theta_l dU0/dxi_m`.
    pub fn curvature_operator(&self, u: &FiberFn, j: usize, k: usize) -> FiberFn {
        let me = self.clone();
        let u0 = self.closure(u);
        Arc::new(move |x, xi| {
            let Some((t, gi)) = me.normalize(x, xi) else { return NAN };
            let Ok(r) = me.chart.riemann_tensor(x) else { return NAN };
            let dv = me.dxi_u0(&u0, x, &t, &gi);
            let n = t.len();
            let mut s = C::new(0.0, 0.0);
            for m in 0..n {
                let c: f64 = (0..n).map(|l| r.get(l, m, j, k) * t[l]).sum();
                s += dv[m] * c;
            }
            s
        })
    }
}

pub fn mul(a: &FiberFn, b: &FiberFn) -> FiberFn {
    let (a, b) = (a.clone(), b.clone());
    Arc::new(move |x, xi| a(x, xi) * b(x, xi))
}

pub fn sub(a: &FiberFn, b: &FiberFn) -> FiberFn {
    let (a, b) = (a.clone(), b.clone());
    Arc::new(move |x, xi| a(x, xi) - b(x, xi))
}

/// Pullback of a function on `M`.
pub fn pullback(f: impl Fn(&[f64]) -> C + Send + Sync + 'static) -> FiberFn {
    Arc::new(move |x, _| f(x))
}

/// A base point with its unit covectors and Liouville weights.
pub struct FiberNodes {
    pub x: Vec<f64>,
    pub base_weight: f64,
    pub nodes: Vec<(Vec<f64>, f64)>,
}

/// Cell-centred base nodes (so finite differences stay inside patches)
/// times the default fiber rule.
pub fn cosphere_quadrature(chart: &MetricChart, n_base: usize, m_fiber: usize) -> Result<Vec<FiberNodes>> {
    let rule: SphereRule = quadrature::sphere_rule(chart.dim, m_fiber)?;
    let mut pts: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for ax in 0..chart.dim {
        let [a, b] = chart.domain[ax];
        let step = (b - a) / n_base as f64;
        let off = if chart.is_periodic() { 0.0 } else { 0.5 };
        let mut next = Vec::new();
        for (p, w) in &pts {
            for i in 0..n_base {
                let mut q = p.clone();
                q.push(a + step * (i as f64 + off));
                next.push((q, w * step));
            }
        }
        pts = next;
    }
    pts.into_iter()
        .map(|(x, w)| {
            let g = chart.metric(&x);
            Ok(FiberNodes { nodes: quadrature::cosphere_nodes(&g, &rule)?, x, base_weight: w })
        })
        .collect()
}

fn finite_or(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LabError::NumericalDegeneracy(format!("non-finite {what}")))
    }
}

/// Sup-norm of each identity over the quadrature nodes:
/// Euler, `[V_j,V_k]`, `[V_j,theta_k]`, and the structure equation.
pub fn identity_residuals(calc: &FiberCalculus, u: &FiberFn, pts: &[FiberNodes]) -> Result<Vec<(String, f64)>> {
    let n = calc.dim();
    let v: Vec<FiberFn> = (0..n).map(|j| calc.vj(u, j)).collect();
    let nab: Vec<FiberFn> = (0..n).map(|j| calc.nabla(u, j)).collect();
    let th: Vec<FiberFn> = (0..n).map(|j| calc.theta(j)).collect();
    let mut euler: f64 = 0.0;
    let mut vv: f64 = 0.0;
    let mut vt: f64 = 0.0;
    let mut st: f64 = 0.0;
    let mut pairs = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            pairs.push((
                j,
                k,
                calc.vj(&v[k], j),
                calc.vj(&v[j], k),
                calc.nabla(&nab[k], j),
                calc.nabla(&nab[j], k),
                calc.curvature_operator(u, j, k),
            ));
        }
    }
    let vt_ops: Vec<Vec<FiberFn>> =
        (0..n).map(|j| (0..n).map(|k| calc.vj(&mul(&th[k], u), j)).collect()).collect();
    for p in pts {
        let x = &p.x;
        let g = calc.chart.metric(x);
        let gi = calc.chart.inverse_metric(x)?;
        for (t, _) in &p.nodes {
            let uu = u(x, t);
            let vs: Vec<C> = v.iter().map(|f| f(x, t)).collect();
            let tu = raise(&gi, t);
            let e: C = vs.iter().zip(&tu).map(|(a, b)| a * b).sum();
            euler = euler.max(e.norm());
            for (j, k, vjvk, vkvj, njnk, nknj, rop) in &pairs {
                let lhs = vjvk(x, t) - vkvj(x, t);
                let rhs = vs[*k] * t[*j] - vs[*j] * t[*k];
                vv = vv.max((lhs - rhs).norm());
                let lhs = njnk(x, t) - nknj(x, t);
                st = st.max((lhs - rop(x, t)).norm());
            }
            for j in 0..n {
                for k in 0..n {
                    let lhs = vt_ops[j][k](x, t) - vs[j] * t[k];
                    let rhs = uu * (g[(j, k)] - t[j] * t[k]);
                    vt = vt.max((lhs - rhs).norm());
                }
            }
        }
    }
    Ok(vec![
        ("euler".into(), finite_or(euler, "Euler residual")?),
        ("[Vj,Vk]=thetaj Vk-thetak Vj".into(), finite_or(vv, "vertical commutator")?),
        ("[Vj,thetak]=gjk-thetaj thetak".into(), finite_or(vt, "vertical-theta commutator")?),
        ("[nablaj,nablak]=R dxi".into(), finite_or(st, "structure equation")?),
    ])
}

/// Worst residual over `test_fields` at step `h` and `h / 2`; the reported
/// resolution is `round(1 / h)`.
pub fn bracket_residuals_nd(
    chart: &MetricChart,
    test_fields: &[FiberFn],
    h: f64,
    n_base: usize,
) -> Result<Vec<ResidualRecord>> {
    let pts = cosphere_quadrature(chart, n_base, 8)?;
    let mut out = Vec::new();
    let mut coarse: Vec<f64> = Vec::new();
    for (level, step) in [h, h / 2.0].into_iter().enumerate() {
        let calc = FiberCalculus::new(chart, step)?;
        let mut worst: Vec<(String, f64)> = Vec::new();
        for u in test_fields {
            for (i, (name, r)) in identity_residuals(&calc, u, &pts)?.into_iter().enumerate() {
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
                resolution: (1.0 / step).round() as usize,
                residual: *r,
                convergence_order: if level == 1 { Some((coarse[i] / r).log2()) } else { None },
            });
        }
        coarse = worst.iter().map(|w| w.1).collect();
    }
    Ok(out)
}

/// `|int (V_j phi) conj(psi) + int phi conj(V_j psi) - (n-1) int theta_j phi conj(psi)|`
/// over the cosphere quadrature.
pub fn vertical_adjoint_residual(
    calc: &FiberCalculus,
    phi: &FiberFn,
    psi: &FiberFn,
    j: usize,
    pts: &[FiberNodes],
) -> Result<f64> {
    if j >= calc.dim() {
        return Err(LabError::InvalidArgument(format!("index {j} >= dim {}", calc.dim())));
    }
    let n1 = calc.dim() as f64 - 1.0;
    let vphi = calc.vj(phi, j);
    let vpsi = calc.vj(psi, j);
    let mut s = C::new(0.0, 0.0);
    for p in pts {
        for (t, w) in &p.nodes {
            let (a, b) = (phi(&p.x, t), psi(&p.x, t));
            let term = vphi(&p.x, t) * b.conj() + a * vpsi(&p.x, t).conj() - a * b.conj() * (n1 * t[j]);
            s += term * (w * p.base_weight);
        }
    }
    finite_or(s.norm(), "adjoint residual")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialFormNorms {
    pub f_sq: f64,
    pub f0_sq: f64,
    pub f1_sq: f64,
    pub vf_sq: f64,
    /// `max |V_k f - (a_k - f1 theta_k)|` against generic differentiation.
    pub cross_check: f64,
}

/// `||f||^2`, `||f0||^2`, `||f1||^2` and `||Vf||^2 = int g^{jk} V_j f conj(V_k f)`.
pub fn special_form_norms(calc: &FiberCalculus, f: &AffineFiberFunction, pts: &[FiberNodes]) -> Result<SpecialFormNorms> {
    let n = calc.dim();
    if f.dim() != n {
        return Err(LabError::Mismatch("one-form and chart dimensions differ".into()));
    }
    let ff = affine_fn(calc, f);
    let vgen: Vec<FiberFn> = (0..n).map(|k| calc.vj(&ff, k)).collect();
    let mut out = SpecialFormNorms { f_sq: 0.0, f0_sq: 0.0, f1_sq: 0.0, vf_sq: 0.0, cross_check: 0.0 };
    for p in pts {
        let x = &p.x;
        let gi = calc.chart.inverse_metric(x)?;
        let a = f.form_at(x);
        let f0 = f.f0.eval(x);
        for (t, w) in &p.nodes {
            let w = w * p.base_weight;
            let tu = raise(&gi, t);
            let f1: f64 = a.iter().zip(&tu).map(|(a, b)| a * b).sum();
            let vf: Vec<f64> = (0..n).map(|k| a[k] - f1 * t[k]).collect();
            let mut vsq = 0.0;
            for j in 0..n {
                for k in 0..n {
                    vsq += gi[(j, k)] * vf[j] * vf[k];
                }
            }
            for k in 0..n {
                out.cross_check = out.cross_check.max((vgen[k](x, t) - vf[k]).norm());
            }
            out.f_sq += w * (f0 + f1).powi(2);
            out.f0_sq += w * f0 * f0;
            out.f1_sq += w * f1 * f1;
            out.vf_sq += w * vsq;
        }
    }
    finite_or(out.f_sq + out.vf_sq + out.cross_check, "special-form norms")?;
    Ok(out)
}

/// The affine function as a fiber closure `f0 + a_k theta^k`.
pub fn affine_fn(calc: &FiberCalculus, f: &AffineFiberFunction) -> FiberFn {
    let chart = calc.chart.clone();
    let f = f.clone();
    Arc::new(move |x, t| match f.eval_covector(&chart, x, t) {
        Ok(v) => C::new(v, 0.0),
        Err(_) => NAN,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBetaSample {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub f: f64,
    pub max_imag: f64,
    /// `theta^j alpha_j + f`; vanishes identically.
    pub contraction: f64,
}

/// `alpha_j = -i conj(u) nabla_j u`, `beta_j = i conj(u) V_j u`, `f = i conj(u) H u`
/// at one node. The sign of `alpha` makes `<theta, alpha> = -f`.
pub fn alpha_beta_at(calc: &FiberCalculus, u: &FiberFn, x: &[f64], t: &[f64]) -> Result<AlphaBetaSample> {
    let n = calc.dim();
    let (t, gi) = calc
        .normalize(x, t)
        .ok_or_else(|| LabError::Domain(format!("no unit covector at {x:?}")))?;
    let t = &t[..];
    let uu = u(x, t);
    let dev = (uu.norm() - 1.0).abs();
    if !(dev <= 1e-10) {
        return Err(LabError::NonUnimodular { deviation: dev });
    }
    let ic = C::i() * uu.conj();
    let a: Vec<C> = (0..n).map(|j| -ic * calc.nabla(u, j)(x, t)).collect();
    let b: Vec<C> = (0..n).map(|j| ic * calc.vj(u, j)(x, t)).collect();
    let f = ic * calc.apply_h(u)(x, t);
    let max_imag = a.iter().chain(&b).chain([&f]).map(|z| z.im.abs()).fold(0.0, f64::max);
    let tu = raise(&gi, t);
    let contraction: f64 = a.iter().zip(&tu).map(|(a, c)| a.re * c).sum::<f64>() + f.re;
    finite_or(max_imag + contraction, "alpha/beta")?;
    Ok(AlphaBetaSample {
        alpha: a.iter().map(|z| z.re).collect(),
        beta: b.iter().map(|z| z.re).collect(),
        f: f.re,
        max_imag,
        contraction: contraction.abs(),
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PestovNdReport {
    pub h_beta_sq: f64,
    pub curvature_term: f64,
    pub vf_sq: f64,
    pub f_sq: f64,
    pub f0_sq: f64,
    pub beta_norm: f64,
    /// `-|H beta|^2 + (R beta|beta) + |Vf|^2 - (n-1)|f|^2`.
    pub identity_residual: f64,
    /// `(n-1)|f0|^2 - (-|H beta|^2 + (R beta|beta))`.
    pub rearranged_residual: f64,
    pub transport_violation: f64,
}

/// Pestov identity on a chart of any dimension. `beta_k = i conj(u) V_k u`,
/// `(H beta)_k = theta^j (nabla_j beta_k - Gamma^l_{jk} beta_l)` and
/// `(R beta|beta) = int R(theta#, beta#, theta#, beta#)`.
pub fn pestov_nd(calc: &FiberCalculus, u: &FiberFn, f: &AffineFiberFunction, pts: &[FiberNodes]) -> Result<PestovNdReport> {
    let rep = pestov_nd_unchecked(calc, u, f, pts)?;
    if rep.transport_violation > 1e-8 {
        return Err(LabError::Precondition { what: "Hu + i f u = 0".into(), measured: rep.transport_violation });
    }
    Ok(rep)
}

pub fn pestov_nd_unchecked(
    calc: &FiberCalculus,
    u: &FiberFn,
    f: &AffineFiberFunction,
    pts: &[FiberNodes],
) -> Result<PestovNdReport> {
    let n = calc.dim();
    let hu = calc.apply_h(u);
    let ff = affine_fn(calc, f);
    let beta: Vec<FiberFn> = (0..n)
        .map(|k| {
            let vk = calc.vj(u, k);
            let u = u.clone();
            let b: FiberFn = Arc::new(move |x: &[f64], t: &[f64]| C::new((C::i() * u(x, t).conj() * vk(x, t)).re, 0.0));
            b
        })
        .collect();
    let nab_beta: Vec<Vec<FiberFn>> =
        (0..n).map(|j| (0..n).map(|k| calc.nabla(&beta[k], j)).collect()).collect();
    let (mut hb, mut curv, mut bn, mut viol) = (0.0, 0.0, 0.0, 0.0f64);
    for p in pts {
        let x = &p.x;
        let gi = calc.chart.inverse_metric(x)?;
        let gam = calc.chart.christoffel(x)?;
        for (t, w) in &p.nodes {
            let w = w * p.base_weight;
            let uu = u(x, t);
            let dev = (uu.norm() - 1.0).abs();
            if !(dev <= 1e-10) {
                return Err(LabError::NonUnimodular { deviation: dev });
            }
            viol = viol.max((hu(x, t) + C::i() * ff(x, t) * uu).norm());
            let tu = raise(&gi, t);
            let b: Vec<f64> = beta.iter().map(|bk| bk(x, t).re).collect();
            let hbk: Vec<f64> = (0..n)
                .map(|k| {
                    (0..n)
                        .map(|j| {
                            let conn: f64 = (0..n).map(|l| gam.get(l, j, k) * b[l]).sum();
                            tu[j] * (nab_beta[j][k](x, t).re - conn)
                        })
                        .sum()
                })
                .collect();
            let bu = raise(&gi, &b);
            let q = |v: &[f64]| -> f64 {
                let vu = raise(&gi, v);
                v.iter().zip(&vu).map(|(a, b)| a * b).sum()
            };
            hb += w * q(&hbk);
            bn += w * q(&b);
            curv += w * calc.chart.curvature_form(x, &tu, &bu)?;
        }
    }
    let norms = special_form_norms(calc, f, pts)?;
    let n1 = n as f64 - 1.0;
    let rep = PestovNdReport {
        h_beta_sq: hb,
        curvature_term: curv,
        vf_sq: norms.vf_sq,
        f_sq: norms.f_sq,
        f0_sq: norms.f0_sq,
        beta_norm: bn.sqrt(),
        identity_residual: (-hb + curv + norms.vf_sq - n1 * norms.f_sq).abs(),
        rearranged_residual: (n1 * norms.f0_sq - (-hb + curv)).abs(),
        transport_violation: viol,
    };
    finite_or(rep.identity_residual + rep.transport_violation, "Pestov terms")?;
    Ok(rep)
}
