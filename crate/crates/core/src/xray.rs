//! X-ray transforms over closed geodesics and the flux test for gauge
//! equivalence of magnetic potentials.

use crate::affine::AffineFiberFunction;
use crate::error::{LabError, Result};
use crate::field::{ScalarField, TrigSeries, TrigTerm};
use crate::geodesic::{ClosedGeodesic, Representative};
use crate::geometry::ChartKind;
use crate::quadrature::gauss_legendre;
use crate::magnetic::{as_trig, gauge_conjugate, GaugeFunction, PotentialData};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const PANEL_ORDER: usize = 16;
const MAX_PANELS: usize = 1 << 12;

/// Composite 16-point Gauss-Legendre over one period of arc length, panels
/// doubled until two successive values agree to 1e-14 relative. Integrands
/// need not be periodic (non-invariant fields along a hyperbolic axis).
fn closed_integral(geo: &ClosedGeodesic, integrand: &dyn Fn(&[f64], &[f64]) -> f64) -> Result<f64> {
    if !(geo.length > 0.0) || !geo.length.is_finite() {
        return Err(LabError::InvalidArgument(format!("geodesic length {}", geo.length)));
    }
    let (nodes, weights) = gauss_legendre(PANEL_ORDER);
    let rule = |panels: usize| {
        let h = geo.length / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = h * (p as f64 + 0.5);
            for (t, w) in nodes.iter().zip(&weights) {
                let (x, v) = geo.curve(mid + 0.5 * h * t);
                acc += 0.5 * h * w * integrand(&x, &v);
            }
        }
        acc
    };
    let mut panels = 2;
    let mut prev = rule(panels);
    while panels < MAX_PANELS {
        panels *= 2;
        let cur = rule(panels);
        if (cur - prev).abs() <= 1e-14 * cur.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(LabError::Convergence(format!("line integral unresolved at {panels} panels")))
}

fn check_dim(geo: &ClosedGeodesic, dim: usize) -> Result<()> {
    if geo.dim() != dim {
        return Err(LabError::Mismatch(format!("{}-d field on a {}-d geodesic", dim, geo.dim())));
    }
    Ok(())
}

/// `int_gamma q ds`.
pub fn xray_function(q: &ScalarField, geo: &ClosedGeodesic) -> Result<f64> {
    closed_integral(geo, &|x, _| q.eval(x))
}

/// `int_gamma <a, gamma'> ds`.
pub fn xray_oneform(a: &[ScalarField], geo: &ClosedGeodesic) -> Result<f64> {
    check_dim(geo, a.len())?;
    closed_integral(geo, &|x, v| a.iter().zip(v).map(|(f, vk)| f.eval(x) * vk).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XRayRecord {
    /// Word of the class, or the winding vector on a torus.
    pub label: String,
    pub length: f64,
    pub value_f0: f64,
    pub value_f1: f64,
    pub combined: f64,
}

pub fn geodesic_label(geo: &ClosedGeodesic) -> String {
    match (&geo.word, &geo.representative) {
        (Some(w), _) => w.clone(),
        (None, Representative::TorusLine { winding, .. }) => {
            winding.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(":")
        }
        (None, Representative::HyperbolicAxis { .. }) => "axis".into(),
    }
}

pub fn xray_record(q: &ScalarField, a: &[ScalarField], geo: &ClosedGeodesic) -> Result<XRayRecord> {
    let value_f0 = xray_function(q, geo)?;
    let value_f1 = xray_oneform(a, geo)?;
    Ok(XRayRecord {
        label: geodesic_label(geo),
        length: geo.length,
        value_f0,
        value_f1,
        combined: value_f0 + value_f1,
    })
}

/// Distance of `v` to `2 pi Z`.
pub fn lattice_distance(v: f64) -> f64 {
    let r = v.rem_euclid(2.0 * PI);
    r.min(2.0 * PI - r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionOptions {
    /// Tolerance on `||d(a - a~)||_inf` and on the distance of fluxes to `2 pi Z`.
    pub tol: f64,
    /// Fewer tested geodesics than this gives `Inconclusive`.
    pub min_geodesics: usize,
}

impl Default for DecisionOptions {
    fn default() -> Self {
        DecisionOptions { tol: 1e-6, min_geodesics: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxResidual {
    pub label: String,
    pub flux: f64,
    pub lattice_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeDecision {
    pub verdict: Verdict,
    /// `max |d(a~ - a)|` over the chart sample points.
    pub curl_residual: f64,
    pub fluxes: Vec<FluxResidual>,
    /// Torus only: gauge with `gauge_conjugate(a, witness) = a~`.
    pub witness: Option<GaugeFunction>,
    /// `max |gauge_conjugate(a, witness) - a~|` over the sample points.
    pub witness_residual: Option<f64>,
}

/// Flux test: `a` and `a~` are gauge equivalent iff `d(a~ - a) = 0` and every
/// closed geodesic carries a flux in `2 pi Z`.
pub fn gauge_equivalence_decision(
    a: &PotentialData,
    at: &PotentialData,
    geodesics: &[ClosedGeodesic],
    opts: DecisionOptions,
) -> Result<GaugeDecision> {
    if a.chart != at.chart {
        return Err(LabError::Mismatch("potentials live on different charts".into()));
    }
    let mut curl: f64 = 0.0;
    for x in a.chart.sample_points() {
        let (b0, b1) = (a.magnetic_field(&x), at.magnetic_field(&x));
        curl = b0.iter().zip(&b1).map(|(u, v)| (u - v).abs()).fold(curl, f64::max);
    }
    let fluxes = geodesics
        .iter()
        .map(|geo| {
            let flux = xray_oneform(&at.a, geo)? - xray_oneform(&a.a, geo)?;
            Ok(FluxResidual { label: geodesic_label(geo), flux, lattice_distance: lattice_distance(flux) })
        })
        .collect::<Result<Vec<_>>>()?;
    let closed = curl < opts.tol;
    let quantized = fluxes.iter().all(|f| f.lattice_distance < opts.tol);
    let verdict = if !closed || !quantized {
        Verdict::NotEquivalent
    } else if geodesics.len() < opts.min_geodesics {
        Verdict::Inconclusive
    } else {
        Verdict::Equivalent
    };
    let (mut witness, mut witness_residual) = (None, None);
    if verdict == Verdict::Equivalent && a.chart.kind == ChartKind::FlatTorus {
        let periods = &a.chart.periods;
        let delta = a
            .a
            .iter()
            .zip(&at.a)
            .map(|(u, v)| Ok(as_trig(v, periods)?.plus(&as_trig(u, periods)?.scaled(-1.0))))
            .collect::<Result<Vec<_>>>()?;
        let w = witness_gauge(&delta, periods)?;
        let rebuilt = gauge_conjugate(a, &w)?;
        let mut res: f64 = 0.0;
        for x in a.chart.sample_points() {
            for (u, v) in rebuilt.a_at(&x).iter().zip(at.a_at(&x)) {
                res = res.max((u - v).abs());
            }
        }
        witness = Some(w);
        witness_residual = Some(res);
    }
    Ok(GaugeDecision { verdict, curl_residual: curl, fluxes, witness, witness_residual })
}

/// Gauge with form `delta` on a torus: winding from the means, phase by
/// Fourier division of the oscillating part.
fn witness_gauge(delta: &[TrigSeries], periods: &[f64]) -> Result<GaugeFunction> {
    let mut winding = Vec::with_capacity(periods.len());
    let mut psi_terms: Vec<TrigTerm> = Vec::new();
    for (j, t) in delta.iter().enumerate() {
        winding.push((t.mean() * periods[j] / (2.0 * PI)).round() as i32);
        for term in &t.terms {
            // Each mode of psi is recovered from the first axis it depends on.
            let Some(first) = term.k.iter().position(|&v| v != 0) else {
                continue;
            };
            if first != j {
                continue;
            }
            let w = 2.0 * PI * term.k[j] as f64 / periods[j];
            psi_terms.push(TrigTerm { k: term.k.clone(), c: -term.s / w, s: term.c / w });
        }
    }
    let psi = TrigSeries { periods: periods.to_vec(), terms: psi_terms }.canonical();
    GaugeFunction::new(winding, psi)
}

/// `max |int_gamma sigma|` over the supplied closed geodesics.
pub fn vanishing_integral_check(sigma: &AffineFiberFunction, geodesics: &[ClosedGeodesic]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for geo in geodesics {
        check_dim(geo, sigma.dim())?;
        let v = closed_integral(geo, &|x, v| sigma.eval_vector(x, v))?;
        worst = worst.max(v.abs());
    }
    Ok(worst)
}
