//! Charts, metrics, Christoffel symbols and curvature.

use crate::error::{LabError, Result};
use crate::field::{Preset, ScalarField, TrigSeries};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    FlatTorus,
    Isothermal2d,
    GeneralNd,
}

/// A single coordinate chart. Periodic charts carry `periods`; patches carry
/// a box `domain` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricChart {
    pub dim: usize,
    pub kind: ChartKind,
    pub periods: Vec<f64>,
    pub domain: Vec<[f64; 2]>,
    pub resolution: Vec<usize>,
    pub conformal_factor: Option<ScalarField>,
    /// Row-major `dim x dim`, symmetric.
    pub metric_tensor: Option<Vec<ScalarField>>,
}

/// `Gamma^l_{jk}` stored as `[l][j][k]`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, l: usize, j: usize, k: usize) -> f64 {
        self.data[(l * self.dim + j) * self.dim + k]
    }
}

/// `R^l_{mjk}` stored as `[l][m][j][k]`.
#[derive(Debug, Clone)]
pub struct Riemann {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Riemann {
    pub fn get(&self, l: usize, m: usize, j: usize, k: usize) -> f64 {
        let n = self.dim;
        self.data[((l * n + m) * n + j) * n + k]
    }

    /// max |R^l_{mjk} + R^l_{mkj}|
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.dim;
        let mut r: f64 = 0.0;
        for l in 0..n {
            for m in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        r = r.max((self.get(l, m, j, k) + self.get(l, m, k, j)).abs());
                    }
                }
            }
        }
        r
    }
}

/// Curvature bundle at one point.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub gauss_k: Option<f64>,
    pub riemann: Riemann,
    pub christoffel: Christoffel,
}

/// Metric and its first two derivatives at a point.
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub d2g: Vec<Vec<DMatrix<f64>>>,
}

pub fn make_flat_torus(periods: &[f64], resolution: usize) -> Result<MetricChart> {
    if periods.is_empty() {
        return Err(LabError::InvalidArgument("torus needs at least one period".into()));
    }
    if let Some(p) = periods.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
        return Err(LabError::InvalidArgument(format!("non-positive period {p}")));
    }
    check_resolution(resolution)?;
    Ok(MetricChart {
        dim: periods.len(),
        kind: ChartKind::FlatTorus,
        periods: periods.to_vec(),
        domain: periods.iter().map(|&p| [0.0, p]).collect(),
        resolution: vec![resolution; periods.len()],
        conformal_factor: None,
        metric_tensor: None,
    })
}

/// 2D chart with metric `e^{2 phi}(dx1^2 + dx2^2)`. Trigonometric `phi` gives a
/// periodic chart; presets need an explicit `domain`.
pub fn make_isothermal_chart(
    phi: ScalarField,
    resolution: usize,
    domain: Option<Vec<[f64; 2]>>,
) -> Result<MetricChart> {
    check_resolution(resolution)?;
    let (periods, domain) = match (&phi, domain) {
        (ScalarField::Trig(t), _) => {
            if t.dim() != 2 {
                return Err(LabError::InvalidArgument("isothermal chart is 2D".into()));
            }
            (t.periods.clone(), t.periods.iter().map(|&p| [0.0, p]).collect())
        }
        (ScalarField::Preset(_), Some(d)) => (Vec::new(), d),
        (ScalarField::Preset(_), None) => {
            return Err(LabError::InvalidArgument("closed-form chart needs a domain".into()))
        }
    };
    if domain.len() != 2 || domain.iter().any(|d| !(d[1] > d[0])) {
        return Err(LabError::InvalidArgument("bad 2D domain".into()));
    }
    let chart = MetricChart {
        dim: 2,
        kind: ChartKind::Isothermal2d,
        periods,
        domain,
        resolution: vec![resolution; 2],
        conformal_factor: Some(phi),
        metric_tensor: None,
    };
    for x in chart.validation_points() {
        let v = chart.conformal_factor.as_ref().unwrap().eval(&x);
        if !v.is_finite() {
            return Err(LabError::InvalidArgument(format!("non-finite phi at {x:?}")));
        }
    }
    Ok(chart)
}

/// General chart from metric components (row-major, symmetric). Periodic iff
/// `periods` is nonempty.
pub fn make_general_chart(
    components: Vec<ScalarField>,
    periods: Vec<f64>,
    domain: Option<Vec<[f64; 2]>>,
    resolution: usize,
) -> Result<MetricChart> {
    check_resolution(resolution)?;
    let n2 = components.len();
    let dim = (n2 as f64).sqrt().round() as usize;
    if dim * dim != n2 || dim < 2 {
        return Err(LabError::InvalidArgument("metric needs dim^2 components, dim >= 2".into()));
    }
    let domain = if !periods.is_empty() {
        if periods.len() != dim || periods.iter().any(|p| !(*p > 0.0)) {
            return Err(LabError::InvalidArgument("bad periods".into()));
        }
        periods.iter().map(|&p| [0.0, p]).collect()
    } else {
        domain.ok_or_else(|| LabError::InvalidArgument("patch needs a domain".into()))?
    };
    let chart = MetricChart {
        dim,
        kind: ChartKind::GeneralNd,
        periods,
        domain,
        resolution: vec![resolution; dim],
        conformal_factor: None,
        metric_tensor: Some(components),
    };
    for x in chart.validation_points() {
        let g = chart.metric(&x);
        if (&g - g.transpose()).abs().max() > 1e-12 {
            return Err(LabError::InvalidArgument(format!("metric not symmetric at {x:?}")));
        }
        if g.clone().cholesky().is_none() {
            return Err(LabError::InvalidArgument(format!("metric not positive definite at {x:?}")));
        }
    }
    Ok(chart)
}

fn check_resolution(r: usize) -> Result<()> {
    if r < 2 {
        return Err(LabError::InvalidArgument("resolution must be >= 2".into()));
    }
    Ok(())
}

/// Upper half-plane patch `phi = -ln y` on `[x0, x1] x [y0, y1]`.
pub fn hyperbolic_patch(domain: Vec<[f64; 2]>, resolution: usize) -> Result<MetricChart> {
    if domain.len() == 2 && domain[1][0] <= 0.0 {
        return Err(LabError::InvalidArgument("upper half-plane needs y > 0".into()));
    }
    make_isothermal_chart(ScalarField::Preset(Preset::NegLog { axis: 1 }), resolution, Some(domain))
}

/// (upper half-plane patch) x (circle factor), metric `diag(1/y^2, 1/y^2, 1)`.
pub fn hyperbolic_product_patch(resolution: usize) -> Result<MetricChart> {
    let z = ScalarField::constant(0.0);
    let inv = ScalarField::Preset(Preset::InvSquare { axis: 1 });
    let comps = vec![
        inv.clone(), z.clone(), z.clone(),
        z.clone(), inv, z.clone(),
        z.clone(), z, ScalarField::constant(1.0),
    ];
    make_general_chart(
        comps,
        Vec::new(),
        Some(vec![[-0.5, 0.5], [1.0, 2.0], [0.0, 2.0 * std::f64::consts::PI]]),
        resolution,
    )
}

/// A warped metric on the standard 3-torus with trigonometric components.
pub fn warped_three_torus(resolution: usize) -> Result<MetricChart> {
    let p = vec![2.0 * std::f64::consts::PI; 3];
    let t = |c: f64| TrigSeries::constant(&p, c);
    let g11 = t(1.0).with_term(&[0, 1, 0], 0.0, 0.2).with_term(&[0, 0, 1], 0.1, 0.0);
    let g22 = t(1.0).with_term(&[1, 0, 1], 0.15, 0.05);
    let g33 = t(1.0).with_term(&[1, 0, 0], 0.3, 0.0).with_term(&[1, 1, 0], 0.0, 0.1);
    let g12 = TrigSeries::zero(&p).with_term(&[0, 0, 1], 0.1, 0.0);
    let g13 = TrigSeries::zero(&p).with_term(&[0, 1, 0], 0.0, 0.05);
    let g23 = TrigSeries::zero(&p);
    let f = ScalarField::Trig;
    let comps = vec![
        f(g11), f(g12.clone()), f(g13.clone()),
        f(g12), f(g22), f(g23.clone()),
        f(g13), f(g23), f(g33),
    ];
    make_general_chart(comps, p, None, resolution)
}

impl MetricChart {
    pub fn is_periodic(&self) -> bool {
        !self.periods.is_empty()
    }

    /// Finite-difference step used for closed-form fields.
    pub fn fd_step(&self) -> f64 {
        self.domain
            .iter()
            .zip(&self.resolution)
            .map(|(d, &r)| (d[1] - d[0]) / r as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Uniform sample nodes (periodic: `[0, P)`, patch: closed box).
    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        let [a, b] = self.domain[axis];
        let n = self.resolution[axis];
        if self.is_periodic() {
            (0..n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
        } else {
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        }
    }

    pub fn sample_points(&self) -> Vec<Vec<f64>> {
        let mut pts = vec![Vec::new()];
        for ax in 0..self.dim {
            let nodes = self.axis_nodes(ax);
            let mut next = Vec::with_capacity(pts.len() * nodes.len());
            for p in &pts {
                for &v in &nodes {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
            pts = next;
        }
        pts
    }

    /// Coarse box of at most 33 nodes per axis for constructor validation.
    fn validation_points(&self) -> Vec<Vec<f64>> {
        let mut coarse = self.clone();
        coarse.resolution = self.resolution.iter().map(|&r| r.min(33)).collect();
        coarse.sample_points()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(LabError::Mismatch(format!("point of dim {} on {}-chart", x.len(), self.dim)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Domain(format!("non-finite point {x:?}")));
        }
        if !self.is_periodic() {
            for (v, d) in x.iter().zip(&self.domain) {
                if *v < d[0] - 1e-12 || *v > d[1] + 1e-12 {
                    return Err(LabError::Domain(format!("{x:?} outside {:?}", self.domain)));
                }
            }
        }
        Ok(())
    }

    fn identity_jet(&self) -> MetricJet {
        let n = self.dim;
        MetricJet {
            g: DMatrix::identity(n, n),
            dg: vec![DMatrix::zeros(n, n); n],
            d2g: vec![vec![DMatrix::zeros(n, n); n]; n],
        }
    }

    pub fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        match self.kind {
            ChartKind::FlatTorus => DMatrix::identity(self.dim, self.dim),
            ChartKind::Isothermal2d => {
                let phi = self.conformal_factor.as_ref().unwrap().eval(x);
                DMatrix::identity(2, 2) * (2.0 * phi).exp()
            }
            ChartKind::GeneralNd => {
                let c = self.metric_tensor.as_ref().unwrap();
                DMatrix::from_fn(self.dim, self.dim, |i, j| c[i * self.dim + j].eval(x))
            }
        }
    }

    pub fn inverse_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        invert(&self.metric(x), x)
    }

    pub fn metric_jet(&self, x: &[f64]) -> MetricJet {
        let n = self.dim;
        match self.kind {
            ChartKind::FlatTorus => self.identity_jet(),
            ChartKind::Isothermal2d => {
                let f = self.conformal_factor.as_ref().unwrap();
                let e = (2.0 * f.eval(x)).exp();
                let d = f.grad(x);
                let hs = f.hessian(x);
                let id = DMatrix::<f64>::identity(2, 2);
                MetricJet {
                    g: &id * e,
                    dg: (0..2).map(|m| &id * (2.0 * e * d[m])).collect(),
                    d2g: (0..2)
                        .map(|m| {
                            (0..2)
                                .map(|p| &id * (e * (4.0 * d[m] * d[p] + 2.0 * hs[m * 2 + p])))
                                .collect()
                        })
                        .collect(),
                }
            }
            ChartKind::GeneralNd => {
                let c = self.metric_tensor.as_ref().unwrap();
                let mut jet = self.identity_jet();
                for i in 0..n {
                    for j in 0..n {
                        let f = &c[i * n + j];
                        jet.g[(i, j)] = f.eval(x);
                        let d = f.grad(x);
                        let hs = f.hessian(x);
                        for m in 0..n {
                            jet.dg[m][(i, j)] = d[m];
                            for p in 0..n {
                                jet.d2g[m][p][(i, j)] = hs[m * n + p];
                            }
                        }
                    }
                }
                jet
            }
        }
    }

    /// Metric and first derivatives only.
    pub fn metric_grad(&self, x: &[f64]) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let n = self.dim;
        match self.kind {
            ChartKind::FlatTorus => (DMatrix::identity(n, n), vec![DMatrix::zeros(n, n); n]),
            ChartKind::Isothermal2d => {
                let f = self.conformal_factor.as_ref().unwrap();
                let e = (2.0 * f.eval(x)).exp();
                let d = f.grad(x);
                let id = DMatrix::<f64>::identity(2, 2);
                (&id * e, (0..2).map(|m| &id * (2.0 * e * d[m])).collect())
            }
            ChartKind::GeneralNd => {
                let c = self.metric_tensor.as_ref().unwrap();
                let mut g = DMatrix::zeros(n, n);
                let mut dg = vec![DMatrix::zeros(n, n); n];
                for i in 0..n {
                    for j in 0..n {
                        let f = &c[i * n + j];
                        g[(i, j)] = f.eval(x);
                        for (m, v) in f.grad(x).into_iter().enumerate() {
                            dg[m][(i, j)] = v;
                        }
                    }
                }
                (g, dg)
            }
        }
    }

    /// Christoffel symbols and their first derivatives `dgamma[p]`.
    pub fn christoffel_with_derivs(&self, x: &[f64]) -> Result<(Christoffel, Vec<Christoffel>)> {
        let n = self.dim;
        let jet = self.metric_jet(x);
        let gi = invert(&jet.g, x)?;
        let dgi: Vec<DMatrix<f64>> = (0..n).map(|p| -(&gi * &jet.dg[p] * &gi)).collect();
        let mut gam = vec![0.0; n * n * n];
        let mut dgam = vec![vec![0.0; n * n * n]; n];
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        let b = jet.dg[j][(m, k)] + jet.dg[k][(m, j)] - jet.dg[m][(j, k)];
                        s += gi[(l, m)] * b;
                        for p in 0..n {
                            let db = jet.d2g[p][j][(m, k)] + jet.d2g[p][k][(m, j)] - jet.d2g[p][m][(j, k)];
                            dgam[p][(l * n + j) * n + k] += 0.5 * (dgi[p][(l, m)] * b + gi[(l, m)] * db);
                        }
                    }
                    gam[(l * n + j) * n + k] = 0.5 * s;
                }
            }
        }
        Ok((
            Christoffel { dim: n, data: gam },
            dgam.into_iter().map(|d| Christoffel { dim: n, data: d }).collect(),
        ))
    }

    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        Ok(self.christoffel_with_derivs(x)?.0)
    }

    pub fn riemann_tensor(&self, x: &[f64]) -> Result<Riemann> {
        self.check_point(x)?;
        let n = self.dim;
        let (g, dg) = self.christoffel_with_derivs(x)?;
        let mut r = vec![0.0; n * n * n * n];
        for l in 0..n {
            for m in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut quad = 0.0;
                        for p in 0..n {
                            quad += g.get(l, j, p) * g.get(p, k, m) - g.get(l, k, p) * g.get(p, j, m);
                        }
                        r[((l * n + m) * n + j) * n + k] =
                            (dg[j].get(l, k, m) - dg[k].get(l, j, m)) + quad;
                    }
                }
            }
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NumericalDegeneracy(format!("non-finite curvature at {x:?}")));
        }
        Ok(Riemann { dim: n, data: r })
    }

    /// `K = -e^{-2 phi} Laplacian(phi)` on isothermal charts, 0 on flat tori,
    /// the sectional curvature of the coordinate plane on general 2D charts.
    pub fn gauss_curvature(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        if self.dim != 2 {
            return Err(LabError::Mismatch("Gauss curvature needs a 2D chart".into()));
        }
        match self.kind {
            ChartKind::FlatTorus => Ok(0.0),
            ChartKind::Isothermal2d => {
                let f = self.conformal_factor.as_ref().unwrap();
                let hs = f.hessian(x);
                Ok(-(-2.0 * f.eval(x)).exp() * (hs[0] + hs[3]))
            }
            ChartKind::GeneralNd => self.sectional_curvature(x, &[1.0, 0.0], &[0.0, 1.0]),
        }
    }

    /// `R_{lmjk} u^l v^m u^j v^k` with `R_{lmjk} = g_{lp} R^p_{mjk}`; equals
    /// the sectional curvature of `span(u, v)` times `|u|^2|v|^2 - <u,v>^2`.
    pub fn curvature_form(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let n = self.dim;
        let r = self.riemann_tensor(x)?;
        let g = self.metric(x);
        let mut num = 0.0;
        for l in 0..n {
            for m in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut low = 0.0;
                        for p in 0..n {
                            low += g[(l, p)] * r.get(p, m, j, k);
                        }
                        num += low * u[l] * v[m] * u[j] * v[k];
                    }
                }
            }
        }
        Ok(num)
    }

    pub fn sectional_curvature(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let n = self.dim;
        let num = self.curvature_form(x, u, v)?;
        let g = self.metric(x);
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += g[(i, j)] * a[i] * b[j];
                }
            }
            s
        };
        let den = dot(u, u) * dot(v, v) - dot(u, v).powi(2);
        if den.abs() < 1e-14 {
            return Err(LabError::NumericalDegeneracy("degenerate plane".into()));
        }
        Ok(num / den)
    }

    pub fn curvature_data(&self, x: &[f64]) -> Result<CurvatureData> {
        let riemann = self.riemann_tensor(x)?;
        let christoffel = self.christoffel(x)?;
        let gauss_k = if self.dim == 2 { Some(self.gauss_curvature(x)?) } else { None };
        Ok(CurvatureData { gauss_k, riemann, christoffel })
    }

    /// max over (j,k,l) of `d_l g^{jk} + sum_m (g^{jm} Gamma^k_{lm} + g^{km} Gamma^j_{lm})`.
    pub fn compatibility_residual(&self, x: &[f64]) -> Result<f64> {
        let n = self.dim;
        let jet = self.metric_jet(x);
        let gi = invert(&jet.g, x)?;
        let gam = self.christoffel(x)?;
        let mut worst: f64 = 0.0;
        for l in 0..n {
            let dgi = -(&gi * &jet.dg[l] * &gi);
            for j in 0..n {
                for k in 0..n {
                    let mut s = dgi[(j, k)];
                    for m in 0..n {
                        s += gi[(j, m)] * gam.get(k, l, m) + gi[(k, m)] * gam.get(j, l, m);
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
        Ok(worst)
    }

    /// JSON document `{dim, kind, periods, resolution, field_coefficients}`.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "dim": self.dim,
            "kind": self.kind,
            "periods": self.periods,
            "resolution": self.resolution,
            "field_coefficients": {
                "domain": self.domain,
                "conformal_factor": self.conformal_factor,
                "metric_tensor": self.metric_tensor,
            }
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<MetricChart> {
        let bad = |e: serde_json::Error| LabError::InvalidArgument(format!("chart json: {e}"));
        let dim: usize = serde_json::from_value(v["dim"].clone()).map_err(bad)?;
        let kind: ChartKind = serde_json::from_value(v["kind"].clone()).map_err(bad)?;
        let periods: Vec<f64> = serde_json::from_value(v["periods"].clone()).map_err(bad)?;
        let resolution: Vec<usize> = serde_json::from_value(v["resolution"].clone()).map_err(bad)?;
        let fc = &v["field_coefficients"];
        let domain: Vec<[f64; 2]> = serde_json::from_value(fc["domain"].clone()).map_err(bad)?;
        let conformal_factor = serde_json::from_value(fc["conformal_factor"].clone()).map_err(bad)?;
        let metric_tensor = serde_json::from_value(fc["metric_tensor"].clone()).map_err(bad)?;
        if resolution.len() != dim || domain.len() != dim {
            return Err(LabError::InvalidArgument("chart json: inconsistent dim".into()));
        }
        Ok(MetricChart { dim, kind, periods, domain, resolution, conformal_factor, metric_tensor })
    }
}

fn invert(g: &DMatrix<f64>, x: &[f64]) -> Result<DMatrix<f64>> {
    let det = g.determinant();
    if !det.is_finite() || det.abs() < 1e-14 {
        return Err(LabError::NumericalDegeneracy(format!("det g = {det} at {x:?}")));
    }
    g.clone()
        .try_inverse()
        .ok_or_else(|| LabError::NumericalDegeneracy(format!("singular metric at {x:?}")))
}
