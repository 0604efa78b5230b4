//! Fiber and base quadrature for integrals over the cosphere bundle.

use crate::error::{LabError, Result};
use crate::geometry::MetricChart;
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Nodes on the Euclidean unit sphere `S^{n-1}` with weights summing to its volume.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Volume of `S^{n-1}`: `2 pi^{n/2} / Gamma(n/2)`.
pub fn sphere_volume(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_volume(n - 2),
    }
}

/// Equispaced angles; exact for trigonometric polynomials of degree `< m`.
pub fn circle_rule(m: usize) -> SphereRule {
    let w = 2.0 * PI / m as f64;
    SphereRule {
        dim: 2,
        nodes: (0..m)
            .map(|k| {
                let t = w * k as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        weights: vec![w; m],
    }
}

/// 38-point Lebedev rule, exact for polynomials of degree 9 on `S^2`.
pub fn lebedev38() -> SphereRule {
    let mut nodes = Vec::with_capacity(38);
    let mut weights = Vec::with_capacity(38);
    let total = 4.0 * PI;
    for ax in 0..3 {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; 3];
            v[ax] = s;
            nodes.push(v);
            weights.push(total / 105.0);
        }
    }
    let c = 1.0 / 3f64.sqrt();
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                nodes.push(vec![sx * c, sy * c, sz * c]);
                weights.push(total * 9.0 / 280.0);
            }
        }
    }
    let (p, q) = (0.459_700_843_380_983_1, 0.888_073_833_977_115_3);
    for (i, j) in [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)] {
        for sp in [1.0, -1.0] {
            for sq in [1.0, -1.0] {
                let mut v = vec![0.0; 3];
                v[i] = sp * p;
                v[j] = sq * q;
                nodes.push(v);
                weights.push(total / 35.0);
            }
        }
    }
    SphereRule { dim: 3, nodes, weights }
}

/// Default fiber rule: `m` angles for `n = 2`, Lebedev-38 for `n = 3`.
pub fn sphere_rule(n: usize, m: usize) -> Result<SphereRule> {
    match n {
        2 => Ok(circle_rule(m.max(3))),
        3 => Ok(lebedev38()),
        _ => Err(LabError::InvalidArgument(format!("no fiber rule for n = {n}"))),
    }
}

/// Unit covectors `theta = L w` (`g = L L^T`) at `x` with Liouville weights
/// `w_k sqrt(det g)`.
pub fn cosphere_nodes(g: &DMatrix<f64>, rule: &SphereRule) -> Result<Vec<(Vec<f64>, f64)>> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::NumericalDegeneracy("metric not positive definite".into()))?;
    let l = chol.l();
    let sqrt_det = l.diagonal().product();
    Ok(rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(w, &wt)| {
            let v = &l * nalgebra::DVector::from_column_slice(w);
            (v.as_slice().to_vec(), wt * sqrt_det)
        })
        .collect())
}

/// Base-point rule on the chart: uniform weights on periodic axes,
/// composite Simpson (trapezoid if the node count is even) on patches.
pub fn base_rule(chart: &MetricChart, n: usize) -> Vec<(Vec<f64>, f64)> {
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..chart.dim)
        .map(|ax| {
            let [a, b] = chart.domain[ax];
            if chart.is_periodic() {
                let h = (b - a) / n as f64;
                ((0..n).map(|i| a + h * i as f64).collect(), vec![h; n])
            } else {
                let h = (b - a) / (n - 1) as f64;
                let nodes = (0..n).map(|i| a + h * i as f64).collect();
                let w = if n % 2 == 1 {
                    (0..n)
                        .map(|i| {
                            let c = if i == 0 || i == n - 1 {
                                1.0
                            } else if i % 2 == 1 {
                                4.0
                            } else {
                                2.0
                            };
                            c * h / 3.0
                        })
                        .collect()
                } else {
                    (0..n).map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h }).collect()
                };
                (nodes, w)
            }
        })
        .collect();
    let mut out = vec![(Vec::new(), 1.0)];
    for (nodes, w) in &axes {
        let mut next = Vec::with_capacity(out.len() * nodes.len());
        for (p, pw) in &out {
            for (x, wx) in nodes.iter().zip(w) {
                let mut q = p.clone();
                q.push(*x);
                next.push((q, pw * wx));
            }
        }
        out = next;
    }
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
