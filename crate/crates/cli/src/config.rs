//! Flat TOML experiment configuration. Flags override file values.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Every key is optional; each subcommand documents its defaults.
///
/// Fourier terms are flat arrays: `a_terms` rows are `[component, k_1 .. k_d,
/// cos, sin]`, `q_terms` and `psi_terms` rows are `[k_1 .. k_d, cos, sin]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_deserializing)]
    pub subcommand: String,
    pub chart: Option<String>,
    pub periods: Option<Vec<f64>>,
    pub resolution: Option<usize>,
    pub fiber: Option<usize>,
    pub a: Option<Vec<f64>>,
    pub a_terms: Option<Vec<Vec<f64>>>,
    pub q: Option<f64>,
    pub q_terms: Option<Vec<Vec<f64>>>,
    pub winding: Option<Vec<i32>>,
    pub psi_terms: Option<Vec<Vec<f64>>>,
    pub shift: Option<Vec<f64>>,
    pub lines: Option<Vec<Vec<i32>>>,
    pub a_theta: Option<Vec<f64>>,
    pub q_radial: Option<Vec<f64>>,
    pub jets: Option<String>,
    pub k_min: Option<i32>,
    pub k_max: Option<i32>,
    pub truncation: Option<usize>,
    pub l_max: Option<f64>,
    pub word_budget: Option<usize>,
    pub samples: Option<usize>,
    pub count: Option<usize>,
    pub grid: Option<usize>,
    pub fiber_samples: Option<usize>,
    pub dq_order: Option<usize>,
    pub dq: Option<f64>,
    pub tol: Option<f64>,
    pub order: Option<usize>,
    pub cutoff: Option<usize>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(t) = self.tol {
            if !t.is_finite() || t <= 0.0 {
                return Err(CliError::Config(format!("tolerance must be positive, got {t}")));
            }
        }
        if let Some(p) = &self.periods {
            if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(CliError::Config(format!("periods must be positive, got {p:?}")));
            }
        }
        Ok(())
    }
}
