//! Transport equation `Hu + i f u = 0` along a single closed orbit.
//!
//! The solution is the exponential of the line integral, advanced by the
//! second-order Magnus step `u_{k+1} = u_k exp(-i h (f_k + f_{k+1}) / 2)`, so
//! `|u| = 1` holds to round-off.

use crate::affine::AffineFiberFunction;
use crate::error::{LabError, Result};
use crate::flow::Orbit;
use crate::geodesic::ClosedGeodesic;
use crate::geometry::MetricChart;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSolution {
    pub times: Vec<f64>,
    pub u: Vec<Complex64>,
    /// Trapezoid value of the line integral of `f` over one period.
    pub line_integral: f64,
    /// `-arg(u(T)/u(0))` in `[0, 2 pi)`; equals the line integral mod `2 pi`.
    pub defect: f64,
    /// Distance of the line integral to `2 pi Z`.
    pub lattice_distance: f64,
}

/// Magnus-2 transport from samples `f(t_k)` starting at `u(0) = 1`.
pub fn transport_from_samples(times: &[f64], fvals: &[f64]) -> Result<TransportSolution> {
    if times.len() != fvals.len() || times.len() < 2 {
        return Err(LabError::InvalidArgument("need at least two matching samples".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::InvalidArgument("times must increase".into()));
    }
    if fvals.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Domain("non-finite potential along the orbit".into()));
    }
    let mut u = Vec::with_capacity(times.len());
    let mut cur = Complex64::new(1.0, 0.0);
    let mut integral = 0.0;
    u.push(cur);
    for k in 1..times.len() {
        let step = 0.5 * (times[k] - times[k - 1]) * (fvals[k] + fvals[k - 1]);
        integral += step;
        cur *= Complex64::new(0.0, -step).exp();
        u.push(cur);
    }
    let defect = (-(cur / u[0]).arg()).rem_euclid(2.0 * PI);
    Ok(TransportSolution {
        times: times.to_vec(),
        u,
        line_integral: integral,
        defect,
        lattice_distance: defect.min(2.0 * PI - defect),
    })
}

/// Closure mismatch of an orbit, positions compared modulo the chart periods.
pub fn closure_defect(chart: &MetricChart, orbit: &Orbit) -> Result<f64> {
    let (Some(x0), Some(x1)) = (orbit.x.first(), orbit.x.last()) else {
        return Err(LabError::InvalidArgument("empty orbit".into()));
    };
    let mut d: f64 = 0.0;
    for (k, (a, b)) in x0.iter().zip(x1).enumerate() {
        let mut diff = b - a;
        if let Some(&p) = chart.periods.get(k) {
            diff -= p * (diff / p).round();
        }
        d = d.max(diff.abs());
    }
    for (a, b) in orbit.xi[0].iter().zip(orbit.xi.last().unwrap()) {
        d = d.max((b - a).abs());
    }
    Ok(d)
}

/// Transport along a flow orbit whose last sample closes up with the first
/// to within `closure_tol`.
pub fn solve_transport_along_orbit(
    chart: &MetricChart,
    orbit: &Orbit,
    f: &AffineFiberFunction,
    closure_tol: f64,
) -> Result<TransportSolution> {
    let defect = closure_defect(chart, orbit)?;
    if !(defect <= closure_tol) {
        return Err(LabError::NotClosed { defect });
    }
    let fvals = orbit
        .x
        .iter()
        .zip(&orbit.xi)
        .map(|(x, xi)| f.eval_covector(chart, x, xi))
        .collect::<Result<Vec<f64>>>()?;
    transport_from_samples(&orbit.times, &fvals)
}

/// Transport along a closed geodesic sampled at `samples` equispaced
/// arc-length points per period (the trapezoid rule is spectral here).
pub fn solve_transport_on_geodesic(
    geo: &ClosedGeodesic,
    f: &AffineFiberFunction,
    samples: usize,
) -> Result<TransportSolution> {
    if !(geo.length > 0.0) || !geo.length.is_finite() {
        return Err(LabError::NotClosed { defect: f64::INFINITY });
    }
    if samples < 2 {
        return Err(LabError::InvalidArgument("need at least two samples".into()));
    }
    if f.dim() != geo.dim() {
        return Err(LabError::Mismatch("one-form and geodesic dimensions differ".into()));
    }
    let h = geo.length / samples as f64;
    let times: Vec<f64> = (0..=samples).map(|k| h * k as f64).collect();
    let fvals: Vec<f64> = times
        .iter()
        .map(|&s| {
            let (x, v) = geo.curve(s);
            f.eval_vector(&x, &v)
        })
        .collect();
    transport_from_samples(&times, &fvals)
}
