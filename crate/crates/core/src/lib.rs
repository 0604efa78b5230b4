//! Numerical laboratory for magnetic spectral inverse problems on Anosov
//! manifolds: length spectra, cosphere-bundle calculus, magnetic Schrödinger
//! spectra, X-ray gauge decisions and the DN-map symbol engine.

// Index loops mirror tensor notation; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod affine;
pub mod checks;
pub mod cosphere;
pub mod cosphere_nd;
pub mod disk;
pub mod error;
pub mod field;
pub mod flow;
pub mod geodesic;
pub mod geometry;
pub mod hyperbolic;
pub mod magnetic;
pub mod mobius;
mod phg;
pub mod quadrature;
pub mod recovery;
pub mod steklov;
pub mod transport;
pub mod xray;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use affine::AffineFiberFunction;
pub use cosphere::{CosphereField, CosphereGrid, ResidualRecord, ValueKind};
pub use error::{LabError, Result};
pub use field::{Preset, ScalarField, TrigSeries, TrigTerm};
pub use geodesic::{ClosedGeodesic, Representative};
pub use geometry::{ChartKind, Christoffel, CurvatureData, MetricChart, Riemann};
pub use hyperbolic::{FuchsianGroup, LengthSpectrum};
pub use magnetic::{GaugeFunction, PotentialData, Spectrum};
pub use mobius::Mat2;
pub use recovery::JetRecoveryState;
pub use steklov::{BoundaryJets, PhgSymbol};
pub use xray::{GaugeDecision, Verdict, XRayRecord};
