//! Functions on `S*M` that are affine in the fiber: `f0(x) + <f1(x), theta#>`.

use crate::error::{LabError, Result};
use crate::field::ScalarField;
use crate::geometry::MetricChart;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFiberFunction {
    pub f0: ScalarField,
    /// Components `a_k` of the one-form `f1 = a_k dx^k`.
    pub f1: Vec<ScalarField>,
}

impl AffineFiberFunction {
    pub fn new(f0: ScalarField, f1: Vec<ScalarField>) -> Self {
        AffineFiberFunction { f0, f1 }
    }

    pub fn zero(dim: usize) -> Self {
        AffineFiberFunction { f0: ScalarField::constant(0.0), f1: vec![ScalarField::constant(0.0); dim] }
    }

    pub fn one_form(f1: Vec<ScalarField>) -> Self {
        AffineFiberFunction { f0: ScalarField::constant(0.0), f1 }
    }

    pub fn dim(&self) -> usize {
        self.f1.len()
    }

    pub fn form_at(&self, x: &[f64]) -> Vec<f64> {
        self.f1.iter().map(|a| a.eval(x)).collect()
    }

    /// Value at a unit tangent vector `v` (so `theta# = v`).
    pub fn eval_vector(&self, x: &[f64], v: &[f64]) -> f64 {
        self.f0.eval(x) + self.f1.iter().zip(v).map(|(a, vk)| a.eval(x) * vk).sum::<f64>()
    }

    /// Value at a unit covector `theta`.
    pub fn eval_covector(&self, chart: &MetricChart, x: &[f64], theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() || chart.dim != self.dim() {
            return Err(LabError::Mismatch("one-form and chart dimensions differ".into()));
        }
        let gi = chart.inverse_metric(x)?;
        let v: Vec<f64> = (0..self.dim())
            .map(|k| (0..self.dim()).map(|l| gi[(k, l)] * theta[l]).sum())
            .collect();
        Ok(self.eval_vector(x, &v))
    }
}
