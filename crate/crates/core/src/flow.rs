//! Cogeodesic flow on a metric chart.

use crate::error::LabError;
use crate::geometry::MetricChart;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    /// Largest `| |xi|_g^2 - 1 |` seen before renormalization.
    pub energy_drift: f64,
}

/// Failed integration: the error together with the orbit up to the failure.
#[derive(Debug, Clone)]
pub struct FlowFailure {
    pub error: LabError,
    pub partial: Orbit,
}

impl From<FlowFailure> for LabError {
    fn from(f: FlowFailure) -> LabError {
        f.error
    }
}

fn norm_sq(g_inv: &DMatrix<f64>, xi: &DVector<f64>) -> f64 {
    xi.dot(&(g_inv * xi))
}

/// Unit-speed vector field of `p/2`: `x' = g^{-1} xi`, `xi'_j = v^T (d_j g) v / 2`.
fn rhs(chart: &MetricChart, x: &[f64], xi: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>), LabError> {
    chart.check_point(x)?;
    let (g, dg) = chart.metric_grad(x);
    let g_inv = g
        .try_inverse()
        .ok_or_else(|| LabError::NumericalDegeneracy(format!("singular metric at {x:?}")))?;
    let v = &g_inv * xi;
    let dxi = DVector::from_iterator(x.len(), dg.iter().map(|d| 0.5 * v.dot(&(d * &v))));
    Ok((v, dxi))
}

/// RK4 with step `<= dt`, renormalizing to the unit cosphere after each step.
pub fn integrate_cogeodesic_flow(
    chart: &MetricChart,
    x0: &[f64],
    xi0: &[f64],
    t_final: f64,
    dt: f64,
) -> std::result::Result<Orbit, FlowFailure> {
    let mut orbit = Orbit::default();
    let fail = |error: LabError, orbit: Orbit| Err(FlowFailure { error, partial: orbit });
    if let Err(e) = chart.check_point(x0) {
        return fail(e, orbit);
    }
    if xi0.len() != chart.dim || !(dt > 0.0) || !(t_final >= 0.0) {
        return fail(LabError::InvalidArgument("bad covector, step or time".into()), orbit);
    }
    let gi0 = match chart.inverse_metric(x0) {
        Ok(m) => m,
        Err(e) => return fail(e, orbit),
    };
    let mut xi = DVector::from_column_slice(xi0);
    let e0 = norm_sq(&gi0, &xi);
    if (e0 - 1.0).abs() > 1e-10 {
        return fail(
            LabError::Precondition { what: "|xi|_g = 1".into(), measured: e0.sqrt() },
            orbit,
        );
    }
    let n = (t_final / dt).ceil().max(1.0) as usize;
    let h = t_final / n as f64;
    let mut x = DVector::from_column_slice(x0);
    orbit.times.push(0.0);
    orbit.x.push(x0.to_vec());
    orbit.xi.push(xi0.to_vec());
    for step in 0..n {
        let t = step as f64 * h;
        let eval = |x: &DVector<f64>, xi: &DVector<f64>| rhs(chart, x.as_slice(), xi);
        let stage = || -> std::result::Result<(DVector<f64>, DVector<f64>), LabError> {
            let (k1x, k1p) = eval(&x, &xi)?;
            let (k2x, k2p) = eval(&(&x + &k1x * (0.5 * h)), &(&xi + &k1p * (0.5 * h)))?;
            let (k3x, k3p) = eval(&(&x + &k2x * (0.5 * h)), &(&xi + &k2p * (0.5 * h)))?;
            let (k4x, k4p) = eval(&(&x + &k3x * h), &(&xi + &k3p * h))?;
            let nx = &x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
            let np = &xi + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
            Ok((nx, np))
        };
        let (nx, np) = match stage() {
            Ok(v) => v,
            Err(e) => {
                return fail(
                    LabError::Truncation { t_reached: t, reason: e.to_string() },
                    orbit,
                )
            }
        };
        let gi = match chart.check_point(nx.as_slice()).and_then(|_| chart.inverse_metric(nx.as_slice())) {
            Ok(m) => m,
            Err(e) => {
                return fail(
                    LabError::Truncation { t_reached: t, reason: e.to_string() },
                    orbit,
                )
            }
        };
        let e = norm_sq(&gi, &np);
        orbit.energy_drift = orbit.energy_drift.max((e - 1.0).abs());
        x = nx;
        xi = np / e.sqrt();
        orbit.times.push(t + h);
        orbit.x.push(x.as_slice().to_vec());
        orbit.xi.push(xi.as_slice().to_vec());
    }
    Ok(orbit)
}
