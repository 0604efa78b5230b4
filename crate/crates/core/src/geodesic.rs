//! Closed geodesics and their unit-speed representative curves.

use crate::mobius::{self, Mat2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Representative {
    /// Axis of a hyperbolic element acting on the upper half-plane;
    /// `curve(s + length) = g . curve(s)`.
    HyperbolicAxis { matrix: Mat2 },
    /// Straight line on a flat torus with integer winding vector.
    TorusLine { start: Vec<f64>, winding: Vec<i32>, periods: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedGeodesic {
    /// Reduced word over the generators (capital letter = inverse).
    pub word: Option<String>,
    pub representative: Representative,
    pub length: f64,
    pub primitive_period: f64,
    pub poincare_det: f64,
    pub iterate: u32,
}

impl ClosedGeodesic {
    /// Geodesic on a flat torus; the primitive class is `winding / gcd`.
    pub fn torus_line(start: &[f64], winding: &[i32], periods: &[f64]) -> ClosedGeodesic {
        let length = winding
            .iter()
            .zip(periods)
            .map(|(&m, &p)| (m as f64 * p).powi(2))
            .sum::<f64>()
            .sqrt();
        let g = winding.iter().fold(0i32, |acc, &m| gcd(acc, m.abs())).max(1);
        ClosedGeodesic {
            word: None,
            representative: Representative::TorusLine {
                start: start.to_vec(),
                winding: winding.to_vec(),
                periods: periods.to_vec(),
            },
            length,
            primitive_period: length / g as f64,
            // Flat tori have parabolic return maps.
            poincare_det: 0.0,
            iterate: g as u32,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.representative {
            Representative::HyperbolicAxis { .. } => 2,
            Representative::TorusLine { winding, .. } => winding.len(),
        }
    }

    /// Point and unit tangent vector at arc length `s`.
    pub fn curve(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        match &self.representative {
            Representative::TorusLine { start, winding, periods } => {
                let dir: Vec<f64> = winding
                    .iter()
                    .zip(periods)
                    .map(|(&m, &p)| m as f64 * p / self.length)
                    .collect();
                (start.iter().zip(&dir).map(|(a, d)| a + s * d).collect(), dir)
            }
            Representative::HyperbolicAxis { matrix } => {
                let (z, v) = axis_point(matrix, s);
                (vec![z.re, z.im], vec![v.re, v.im])
            }
        }
    }

    /// Orientation reversal.
    pub fn reversed(&self) -> ClosedGeodesic {
        let mut out = self.clone();
        out.representative = match &self.representative {
            Representative::TorusLine { start, winding, periods } => Representative::TorusLine {
                start: start.clone(),
                winding: winding.iter().map(|m| -m).collect(),
                periods: periods.clone(),
            },
            Representative::HyperbolicAxis { matrix } => {
                Representative::HyperbolicAxis { matrix: mobius::inverse(matrix) }
            }
        };
        out
    }
}

/// Unit-speed parametrization of the axis of `g`, oriented from the repelling
/// to the attracting fixed point, and its velocity.
pub fn axis_point(g: &Mat2, s: f64) -> (Complex64, Complex64) {
    let s_map = mobius::axis_frame(g);
    let w = Complex64::new(0.0, s.exp());
    let z = mobius::apply(&s_map, w);
    let v = mobius::derivative(&s_map, w) * w;
    (z, v)
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
