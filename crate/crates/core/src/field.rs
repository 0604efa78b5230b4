//! Scalar fields on charts.
//!
//! Periodic fields are real trigonometric polynomials; non-periodic patches
//! use closed-form presets. Both are differentiated exactly.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One real Fourier mode: `c cos(w.x) + s sin(w.x)` with `w_j = 2 pi k_j / P_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k: Vec<i32>,
    pub c: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigSeries {
    pub periods: Vec<f64>,
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn zero(periods: &[f64]) -> Self {
        TrigSeries { periods: periods.to_vec(), terms: Vec::new() }
    }

    pub fn constant(periods: &[f64], value: f64) -> Self {
        let mut t = Self::zero(periods);
        t.terms.push(TrigTerm { k: vec![0; periods.len()], c: value, s: 0.0 });
        t
    }

    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    pub fn with_term(mut self, k: &[i32], c: f64, s: f64) -> Self {
        self.terms.push(TrigTerm { k: k.to_vec(), c, s });
        self
    }

    pub fn omega(&self, k: &[i32]) -> Vec<f64> {
        k.iter()
            .zip(&self.periods)
            .map(|(&kj, &p)| 2.0 * PI * kj as f64 / p)
            .collect()
    }

    fn phase(&self, k: &[i32], x: &[f64]) -> f64 {
        k.iter()
            .zip(&self.periods)
            .zip(x)
            .map(|((&kj, &p), &xj)| 2.0 * PI * kj as f64 / p * xj)
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let ph = self.phase(&t.k, x);
                t.c * ph.cos() + t.s * ph.sin()
            })
            .sum()
    }

    /// Exact partial derivative for the multi-index `alpha`.
    pub fn deriv(&self, x: &[f64], alpha: &[usize]) -> f64 {
        let order: usize = alpha.iter().sum();
        let mut acc = 0.0;
        for t in &self.terms {
            let w = self.omega(&t.k);
            let mut fac = 1.0;
            for (j, &a) in alpha.iter().enumerate() {
                fac *= w[j].powi(a as i32);
            }
            if fac == 0.0 {
                continue;
            }
            // d/dphase maps (c, s) -> (s, -c)
            let (mut c, mut s) = (t.c, t.s);
            for _ in 0..order % 4 {
                let nc = s;
                s = -c;
                c = nc;
            }
            let ph = self.phase(&t.k, x);
            acc += fac * (c * ph.cos() + s * ph.sin());
        }
        acc
    }

    /// The derivative along `axis` as a new series.
    pub fn derivative(&self, axis: usize) -> TrigSeries {
        let mut out = TrigSeries::zero(&self.periods);
        for t in &self.terms {
            let w = self.omega(&t.k)[axis];
            if w != 0.0 {
                out.terms.push(TrigTerm { k: t.k.clone(), c: w * t.s, s: -w * t.c });
            }
        }
        out
    }

    pub fn scaled(&self, a: f64) -> TrigSeries {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.c *= a;
            t.s *= a;
        }
        out
    }

    pub fn plus(&self, other: &TrigSeries) -> TrigSeries {
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out.canonical()
    }

    /// Merge duplicate and mirrored modes so each `k` (up to sign) appears once,
    /// with the first nonzero entry of `k` positive.
    pub fn canonical(&self) -> TrigSeries {
        let mut out: Vec<TrigTerm> = Vec::new();
        for t in &self.terms {
            let mut k = t.k.clone();
            let (c, mut s) = (t.c, t.s);
            if let Some(first) = k.iter().find(|&&v| v != 0) {
                if *first < 0 {
                    k.iter_mut().for_each(|v| *v = -*v);
                    s = -s;
                }
            } else {
                s = 0.0;
            }
            if let Some(e) = out.iter_mut().find(|e| e.k == k) {
                e.c += c;
                e.s += s;
            } else {
                out.push(TrigTerm { k, c, s });
            }
        }
        out.retain(|t| t.c != 0.0 || t.s != 0.0);
        TrigSeries { periods: self.periods.clone(), terms: out }
    }

    pub fn max_mode(&self) -> i32 {
        self.terms
            .iter()
            .flat_map(|t| t.k.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Mean over one period cell.
    pub fn mean(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.k.iter().all(|&v| v == 0))
            .map(|t| t.c)
            .sum()
    }

    /// Complex Fourier coefficient of `exp(i w_k . x)`.
    pub fn fourier_coefficient(&self, k: &[i32]) -> num_complex::Complex64 {
        use num_complex::Complex64;
        let mut acc = Complex64::new(0.0, 0.0);
        let neg: Vec<i32> = k.iter().map(|v| -v).collect();
        let zero = k.iter().all(|&v| v == 0);
        for t in &self.terms {
            if zero && t.k.iter().all(|&v| v == 0) {
                acc += t.c;
            } else if t.k == k {
                acc += Complex64::new(t.c / 2.0, -t.s / 2.0);
            } else if t.k == neg {
                acc += Complex64::new(t.c / 2.0, t.s / 2.0);
            }
        }
        acc
    }
}

/// Closed-form fields used on non-periodic patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Preset {
    Const { value: f64 },
    /// `-ln x_axis`, the conformal factor of the upper half-plane.
    NegLog { axis: usize },
    /// `x_axis^(-2)`, the hyperbolic metric coefficient.
    InvSquare { axis: usize },
}

impl Preset {
    fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Preset::Const { value } => value,
            Preset::NegLog { axis } => -x[axis].ln(),
            Preset::InvSquare { axis } => 1.0 / (x[axis] * x[axis]),
        }
    }

    /// Closed-form `d_i f` and `d_i d_j f`.
    fn d1(&self, x: &[f64], i: usize) -> f64 {
        match *self {
            Preset::Const { .. } => 0.0,
            Preset::NegLog { axis } if axis == i => -1.0 / x[axis],
            Preset::InvSquare { axis } if axis == i => -2.0 / x[axis].powi(3),
            _ => 0.0,
        }
    }

    fn d2(&self, x: &[f64], i: usize, j: usize) -> f64 {
        match *self {
            Preset::NegLog { axis } if axis == i && axis == j => 1.0 / (x[axis] * x[axis]),
            Preset::InvSquare { axis } if axis == i && axis == j => 6.0 / x[axis].powi(4),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarField {
    Trig(TrigSeries),
    Preset(Preset),
}

impl ScalarField {
    pub fn constant(value: f64) -> Self {
        ScalarField::Preset(Preset::Const { value })
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, ScalarField::Trig(_))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Trig(t) => t.eval(x),
            ScalarField::Preset(p) => p.eval(x),
        }
    }

    /// Gradient, closed form for both variants.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|j| match self {
                ScalarField::Trig(t) => {
                    let mut a = vec![0; n];
                    a[j] = 1;
                    t.deriv(x, &a)
                }
                ScalarField::Preset(p) => p.d1(x, j),
            })
            .collect()
    }

    /// Hessian, row-major `n x n`.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = match self {
                    ScalarField::Trig(t) => {
                        let mut a = vec![0; n];
                        a[i] += 1;
                        a[j] += 1;
                        t.deriv(x, &a)
                    }
                    ScalarField::Preset(p) => p.d2(x, i, j),
                };
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }
}

/// 4th-order central first derivative along `axis`.
pub fn fd1(f: &dyn Fn(&[f64]) -> f64, x: &[f64], axis: usize, h: f64) -> f64 {
    let mut y = x.to_vec();
    let mut at = |d: f64| {
        y[axis] = x[axis] + d;
        f(&y)
    };
    (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
}

/// 4th-order central second derivative along `axis`.
pub fn fd2(f: &dyn Fn(&[f64]) -> f64, x: &[f64], axis: usize, h: f64) -> f64 {
    let mut y = x.to_vec();
    let mut at = |d: f64| {
        y[axis] = x[axis] + d;
        f(&y)
    };
    (-at(-2.0 * h) + 16.0 * at(-h) - 30.0 * at(0.0) + 16.0 * at(h) - at(2.0 * h)) / (12.0 * h * h)
}
