//! Magnetic Schrodinger operators `(D + a)^* (D + a) + q` on flat tori.
//!
//! Assembly is Fourier-Galerkin on the modes `|k|_inf <= cutoff`; every matrix
//! entry is exact because the coefficients are trigonometric polynomials.

use crate::error::{LabError, Result};
use crate::field::{Preset, ScalarField, TrigSeries};
use crate::geometry::{ChartKind, MetricChart};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

type C = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialData {
    pub chart: MetricChart,
    /// Components `a_j` of the real one-form `a = a_j dx^j`.
    pub a: Vec<ScalarField>,
    pub q: ScalarField,
}

impl PotentialData {
    pub fn new(chart: MetricChart, a: Vec<ScalarField>, q: ScalarField) -> Result<Self> {
        if a.len() != chart.dim {
            return Err(LabError::Mismatch(format!("{} one-form components on a {}-d chart", a.len(), chart.dim)));
        }
        Ok(PotentialData { chart, a, q })
    }

    pub fn zero(chart: MetricChart) -> Self {
        let n = chart.dim;
        PotentialData { chart, a: vec![ScalarField::constant(0.0); n], q: ScalarField::constant(0.0) }
    }

    pub fn a_at(&self, x: &[f64]) -> Vec<f64> {
        self.a.iter().map(|f| f.eval(x)).collect()
    }

    /// Magnetic field `b_jk = d_j a_k - d_k a_j`, row-major.
    pub fn magnetic_field(&self, x: &[f64]) -> Vec<f64> {
        let n = self.a.len();
        let grads: Vec<Vec<f64>> = self.a.iter().map(|f| f.grad(x)).collect();
        let mut b = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                b[j * n + k] = grads[k][j] - grads[j][k];
            }
        }
        b
    }
}

/// Circle-valued `exp(i (<w, x> 2 pi / P + psi(x)))`, winding stored explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeFunction {
    pub winding: Vec<i32>,
    pub psi: TrigSeries,
}

impl GaugeFunction {
    pub fn new(winding: Vec<i32>, psi: TrigSeries) -> Result<Self> {
        if winding.len() != psi.dim() {
            return Err(LabError::Mismatch("winding and phase dimensions differ".into()));
        }
        Ok(GaugeFunction { winding, psi })
    }

    pub fn periods(&self) -> &[f64] {
        &self.psi.periods
    }

    pub fn phase(&self, x: &[f64]) -> f64 {
        self.winding
            .iter()
            .zip(self.periods())
            .zip(x)
            .map(|((&w, &p), &xj)| 2.0 * PI * w as f64 * xj / p)
            .sum::<f64>()
            + self.psi.eval(x)
    }

    pub fn eval(&self, x: &[f64]) -> C {
        C::from_polar(1.0, self.phase(x))
    }

    /// Components of the real closed form `-i conj(t) dt = d(phase)`.
    pub fn gauge_form(&self) -> Vec<TrigSeries> {
        let p = self.periods().to_vec();
        (0..p.len())
            .map(|j| {
                TrigSeries::constant(&p, 2.0 * PI * self.winding[j] as f64 / p[j])
                    .plus(&self.psi.derivative(j))
            })
            .collect()
    }
}

/// Trigonometric form of a periodic field; constants are accepted.
pub(crate) fn as_trig(f: &ScalarField, periods: &[f64]) -> Result<TrigSeries> {
    match f {
        ScalarField::Trig(t) if t.periods == periods => Ok(t.clone()),
        ScalarField::Trig(_) => Err(LabError::Mismatch("field periods differ from the chart".into())),
        ScalarField::Preset(Preset::Const { value }) => Ok(TrigSeries::constant(periods, *value)),
        ScalarField::Preset(_) => Err(LabError::Mismatch("non-periodic field on a torus".into())),
    }
}

/// `a - i conj(t) dt`; `q` is unchanged.
pub fn gauge_conjugate(pot: &PotentialData, gauge: &GaugeFunction) -> Result<PotentialData> {
    if pot.chart.kind != ChartKind::FlatTorus || gauge.periods() != pot.chart.periods.as_slice() {
        return Err(LabError::Mismatch("gauge and potential live on different tori".into()));
    }
    let form = gauge.gauge_form();
    let a = pot
        .a
        .iter()
        .zip(&form)
        .map(|(aj, fj)| Ok(ScalarField::Trig(as_trig(aj, &pot.chart.periods)?.plus(fj))))
        .collect::<Result<Vec<_>>>()?;
    Ok(PotentialData { chart: pot.chart.clone(), a, q: pot.q.clone() })
}

/// Trapezoid flux of `a` around the basis loop along `axis` through `base`.
pub fn loop_flux(pot: &PotentialData, base: &[f64], axis: usize, samples: usize) -> f64 {
    let p = pot.chart.periods[axis];
    let h = p / samples as f64;
    let mut x = base.to_vec();
    (0..samples)
        .map(|s| {
            x[axis] = base[axis] + h * s as f64;
            pot.a[axis].eval(&x)
        })
        .sum::<f64>()
        * h
}

/// Complex Fourier coefficients of a trigonometric polynomial.
fn fourier_map(t: &TrigSeries) -> HashMap<Vec<i32>, C> {
    let mut out: HashMap<Vec<i32>, C> = HashMap::new();
    for term in &t.terms {
        if term.k.iter().all(|&v| v == 0) {
            *out.entry(term.k.clone()).or_default() += term.c;
        } else {
            let neg: Vec<i32> = term.k.iter().map(|v| -v).collect();
            *out.entry(term.k.clone()).or_default() += C::new(term.c / 2.0, -term.s / 2.0);
            *out.entry(neg).or_default() += C::new(term.c / 2.0, term.s / 2.0);
        }
    }
    out.retain(|_, v| *v != C::new(0.0, 0.0));
    out
}

fn convolve(a: &HashMap<Vec<i32>, C>, b: &HashMap<Vec<i32>, C>) -> HashMap<Vec<i32>, C> {
    let mut out: HashMap<Vec<i32>, C> = HashMap::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k: Vec<i32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            *out.entry(k).or_default() += va * vb;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SchrodingerMatrix {
    pub matrix: DMatrix<C>,
    /// Mode of each basis function, in row order.
    pub modes: Vec<Vec<i32>>,
    pub cutoff: usize,
    /// `max |M - M^*|` over entries.
    pub hermitian_defect: f64,
    pub warnings: Vec<String>,
}

/// Galerkin matrix `<e_k, P e_l>` in the orthonormal Fourier basis:
/// `|w_k|^2 delta + sum_j (w_k + w_l)_j a_j^(k-l) + (|a|^2 + q)^(k-l)`.
pub fn assemble_schrodinger(pot: &PotentialData, cutoff: usize) -> Result<SchrodingerMatrix> {
    let chart = &pot.chart;
    if chart.kind != ChartKind::FlatTorus {
        return Err(LabError::Mismatch("Galerkin assembly needs a flat torus".into()));
    }
    if cutoff < 1 {
        return Err(LabError::InvalidArgument("cutoff must be at least 1".into()));
    }
    let d = chart.dim;
    let periods = &chart.periods;
    let a: Vec<TrigSeries> = pot.a.iter().map(|f| as_trig(f, periods)).collect::<Result<_>>()?;
    let q = as_trig(&pot.q, periods)?;
    let mut warnings = Vec::new();
    let band = a.iter().map(|t| t.max_mode()).chain([q.max_mode()]).max().unwrap_or(0);
    if band as usize > cutoff {
        warnings.push(format!("cutoff {cutoff} below coefficient bandwidth {band}"));
    }
    let a_hat: Vec<HashMap<Vec<i32>, C>> = a.iter().map(fourier_map).collect();
    let mut zeroth = fourier_map(&q);
    for ah in &a_hat {
        for (k, v) in convolve(ah, ah) {
            *zeroth.entry(k).or_default() += v;
        }
    }
    let c = cutoff as i32;
    let side = 2 * cutoff + 1;
    let size = side.pow(d as u32);
    let modes: Vec<Vec<i32>> = (0..size)
        .map(|mut i| {
            let mut k = vec![0; d];
            for j in (0..d).rev() {
                k[j] = (i % side) as i32 - c;
                i /= side;
            }
            k
        })
        .collect();
    let index = |k: &[i32]| -> Option<usize> {
        let mut i = 0usize;
        for &v in k {
            if v.abs() > c {
                return None;
            }
            i = i * side + (v + c) as usize;
        }
        Some(i)
    };
    let omega = |k: &[i32], j: usize| 2.0 * PI * k[j] as f64 / periods[j];
    let mut m = DMatrix::<C>::zeros(size, size);
    for (col, l) in modes.iter().enumerate() {
        let w2: f64 = (0..d).map(|j| omega(l, j).powi(2)).sum();
        m[(col, col)] += w2;
        let shifted = |s: &[i32]| -> Option<(usize, Vec<i32>)> {
            let k: Vec<i32> = l.iter().zip(s).map(|(x, y)| x + y).collect();
            index(&k).map(|r| (r, k))
        };
        for (s, v) in &zeroth {
            if let Some((row, _)) = shifted(s) {
                m[(row, col)] += v;
            }
        }
        for (j, ah) in a_hat.iter().enumerate() {
            for (s, v) in ah {
                if let Some((row, k)) = shifted(s) {
                    m[(row, col)] += v * (omega(&k, j) + omega(l, j));
                }
            }
        }
    }
    let hermitian_defect = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(SchrodingerMatrix { matrix: m, modes, cutoff, hermitian_defect, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// `||P v - lambda v||` per eigenpair, unit `v`.
    pub residuals: Vec<f64>,
    /// Frobenius norm of the matrix.
    pub operator_norm: f64,
}

fn check_input(m: &DMatrix<C>, count: usize) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(LabError::InvalidArgument("need a non-empty square matrix".into()));
    }
    if count > m.nrows() {
        return Err(LabError::InvalidArgument(format!("{count} eigenvalues requested from a {}-mode basis", m.nrows())));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LabError::Convergence("non-finite matrix entry".into()));
    }
    Ok(())
}

/// Lowest `count` eigenvalues with eigenpair residuals (dense Hermitian solve).
pub fn eigenvalues(m: &DMatrix<C>, count: usize) -> Result<Spectrum> {
    check_input(m, count)?;
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| LabError::Convergence("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut values = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for &i in order.iter().take(count) {
        let lam = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i);
        let r = m * v - v * C::from(lam);
        values.push(lam);
        residuals.push(r.norm() / v.norm());
    }
    Ok(Spectrum { values, residuals, operator_norm: m.norm() })
}

/// Lowest `count` eigenvalues without eigenvectors.
pub fn eigenvalues_only(m: &DMatrix<C>, count: usize) -> Result<Vec<f64>> {
    check_input(m, count)?;
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Convergence("non-finite eigenvalue".into()));
    }
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    Ok(v)
}

/// Group sorted eigenvalues into clusters closer than `tol`: `(mean, multiplicity)`.
pub fn multiplicities(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for &v in values {
        match out.last_mut() {
            Some((mean, n)) if v - last <= tol => {
                *mean = (*mean * *n as f64 + v) / (*n + 1) as f64;
                *n += 1;
            }
            _ => out.push((v, 1)),
        }
        last = v;
    }
    out
}

/// `2 <a(x), xi>` for a unit covector `xi`.
pub fn subprincipal(pot: &PotentialData, x: &[f64], xi: &[f64]) -> Result<f64> {
    let n = pot.chart.dim;
    if x.len() != n || xi.len() != n {
        return Err(LabError::Mismatch("point or covector has the wrong dimension".into()));
    }
    let gi = pot.chart.inverse_metric(x)?;
    let a = pot.a_at(x);
    let mut pair = 0.0;
    let mut norm = 0.0;
    for j in 0..n {
        for k in 0..n {
            pair += gi[(j, k)] * a[j] * xi[k];
            norm += gi[(j, k)] * xi[j] * xi[k];
        }
    }
    if (norm - 1.0).abs() > 1e-10 {
        return Err(LabError::Precondition { what: "|xi|_g = 1".into(), measured: norm.sqrt() });
    }
    Ok(2.0 * pair)
}

/// Largest gap between the lowest `count` eigenvalues of `P_{a,q}` and its
/// gauge conjugate.
pub fn isospectrality_check(pot: &PotentialData, gauge: &GaugeFunction, cutoff: usize, count: usize) -> Result<f64> {
    let other = gauge_conjugate(pot, gauge)?;
    spectral_gap(pot, &other, cutoff, count)
}

/// Largest gap between the lowest `count` eigenvalues of two operators.
pub fn spectral_gap(p1: &PotentialData, p2: &PotentialData, cutoff: usize, count: usize) -> Result<f64> {
    let l1 = eigenvalues_only(&assemble_schrodinger(p1, cutoff)?.matrix, count)?;
    let l2 = eigenvalues_only(&assemble_schrodinger(p2, cutoff)?.matrix, count)?;
    Ok(l1.iter().zip(&l2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}
