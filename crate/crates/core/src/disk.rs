//! Separable DN oracle on the unit disk and the asymptotic comparison with a
//! factorized symbol.
//!
//! For `a = a_theta(r) d theta` and radial `q`, the mode `u = w(r) e^{ik theta}`
//! solves `r^2 w'' + r w' = ((k + a_theta)^2 + q r^2) w`. In `s = log r` the
//! logarithmic derivative `y = r w'/w` obeys the Riccati equation
//! `y' = (k + a_theta)^2 + q r^2 - y^2`, and the DN eigenvalue is `y(1)`.

use crate::error::{LabError, Result};
use crate::steklov::PhgSymbol;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Inner radius where the regular branch `w ~ r^|k|` is imposed.
    pub r0: f64,
    pub min_steps: usize,
    /// Extra RK4 steps per unit of `|k|` (keeps `h |k|` small).
    pub steps_per_mode: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { r0: 1e-6, min_steps: 2000, steps_per_mode: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub k: i32,
    /// Richardson value `(16 y_fine - y_coarse) / 15`.
    pub sigma: f64,
    pub coarse: f64,
    pub fine: f64,
    /// Steps of the coarse run.
    pub steps: usize,
    /// `|y_fine - y_coarse|`.
    pub step_change: f64,
}

fn poly(c: &[f64], r: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * r + v)
}

/// DN eigenvalue of mode `k` for polynomial profiles `a_theta(r) = sum c_i r^i`
/// and `q(r) = sum d_i r^i`.
pub fn disk_dn_oracle(a_theta: &[f64], q: &[f64], k: i32, opts: OracleOptions) -> Result<OracleValue> {
    if a_theta.iter().take(2).any(|c| *c != 0.0) {
        return Err(LabError::InvalidArgument("a_theta must vanish to second order at the center".into()));
    }
    if !(opts.r0 > 0.0 && opts.r0 < 0.1) {
        return Err(LabError::InvalidArgument(format!("inner radius {}", opts.r0)));
    }
    let kf = k as f64;
    let ka = kf.abs();
    let rhs = |s: f64, y: f64| {
        let r = s.exp();
        let b = kf + poly(a_theta, r);
        b * b + poly(q, r) * r * r - y * y
    };
    // y = |k| + c r^2 with c from the r^2 part of the potential
    let c2 = a_theta.get(2).copied().unwrap_or(0.0);
    let q0 = q.first().copied().unwrap_or(0.0);
    let y0 = ka + (2.0 * kf * c2 + q0) * opts.r0 * opts.r0 / (2.0 * ka + 2.0);
    let s0 = opts.r0.ln();
    let run = |n: usize| -> Result<f64> {
        let h = -s0 / n as f64;
        let mut y = y0;
        for i in 0..n {
            let s = s0 + h * i as f64;
            let k1 = rhs(s, y);
            let k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1);
            let k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2);
            let k4 = rhs(s + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !y.is_finite() || y.abs() > 1e6 {
                return Err(LabError::Resonance(format!(
                    "mode {k}: the regular solution vanishes inside the disk (0 is a Dirichlet eigenvalue nearby)"
                )));
            }
        }
        Ok(y)
    };
    let steps = opts.min_steps.max(opts.steps_per_mode * k.unsigned_abs() as usize);
    let coarse = run(steps)?;
    let fine = run(2 * steps)?;
    Ok(OracleValue { k, sigma: (16.0 * fine - coarse) / 15.0, coarse, fine, steps, step_change: (fine - coarse).abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub modes: usize,
    /// Terms `p_1 .. p_{-truncation}` were subtracted.
    pub truncation: usize,
    /// Fitted `c` in `residual ~ c |k|^{-truncation-1} + c' |k|^{-truncation-2}`.
    pub coefficient: f64,
    pub nuisance: f64,
    /// Minus the log-log slope of `|residual|` against `|k|_g`; absent when
    /// the residuals sit at round-off.
    pub order: Option<f64>,
    pub max_residual: f64,
    pub residuals: Vec<(i32, f64)>,
}

/// Compare oracle values with `sum_{d >= -truncation} p_d(k/|k|) |k|^d` at the
/// first grid point of a symbol on a circle boundary.
pub fn asymptotic_match(values: &[(i32, f64)], sym: &PhgSymbol, truncation: usize) -> Result<FitReport> {
    if values.len() < 8 {
        return Err(LabError::InsufficientData(format!("{} modes, need at least 8", values.len())));
    }
    if sym.dim() != 1 {
        return Err(LabError::Mismatch("asymptotic match needs a circle boundary".into()));
    }
    if truncation > sym.order {
        return Err(LabError::InvalidArgument(format!("truncation {truncation} beyond stored order {}", sym.order)));
    }
    let mut residuals = Vec::with_capacity(values.len());
    let mut kg = Vec::with_capacity(values.len());
    for &(k, sigma) in values {
        if k == 0 {
            return Err(LabError::InvalidArgument("mode 0 has no homogeneous expansion".into()));
        }
        let xi = [k as f64];
        let mut model = 0.0;
        for d in (-(truncation as i32)..=1).rev() {
            model += sym.eval(d, 0, &xi)?.re;
        }
        residuals.push((k, sigma - model));
        kg.push(sym.frames[0][0] * (k as f64).abs());
    }
    let e = truncation as i32 + 1;
    // least squares on the two powers, columns scaled by the first mode
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&(_, r), &x) in residuals.iter().zip(&kg) {
        let (f1, f2) = (x.powi(-e), x.powi(-e - 1));
        a11 += f1 * f1;
        a12 += f1 * f2;
        a22 += f2 * f2;
        b1 += f1 * r;
        b2 += f2 * r;
    }
    let det = a11 * a22 - a12 * a12;
    let (coefficient, nuisance) = if det.abs() > 1e-300 {
        ((b1 * a22 - b2 * a12) / det, (a11 * b2 - a12 * b1) / det)
    } else {
        (b1 / a11, 0.0)
    };
    let max_residual = residuals.iter().map(|(_, r)| r.abs()).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .zip(&kg)
        .filter(|((_, r), _)| r.abs() > 1e-13)
        .map(|((_, r), &x)| (x.ln(), r.abs().ln()))
        .collect();
    let order = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
        Some(-num / den)
    } else {
        None
    };
    Ok(FitReport { modes: values.len(), truncation, coefficient, nuisance, order, max_residual, residuals })
}
