//! Coordinate charts on Riemannian manifolds and the geometric quantities
//! derived from them: Levi-Civita connection, Ricci scalar, covariant Hessian
//! and the operator-ordering corrections to the potential.
//!
//! Built-in charts (flat, constant metric, stereographic sphere charts) are
//! evaluated in closed form. [`ChartKind::Custom`] charts only supply the
//! metric; every derivative is taken by finite differences.

pub mod check;
pub(crate) mod fd;
mod jet;
mod sphere;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretize::PotentialField;
use crate::error::{Error, Result};

pub use jet::MetricJet;
pub use sphere::ConformalFactor;

/// Metric callback for user-defined charts.
pub type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Which pole a stereographic chart projects from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pole {
    /// Projection from `x^N = +R`; chart origin maps to the south pole.
    North,
    /// Projection from `x^N = -R`; chart origin maps to the north pole.
    South,
}

/// The family a chart belongs to.
#[derive(Clone)]
pub enum ChartKind {
    Flat,
    Constant(DMatrix<f64>),
    /// Stereographic chart of the sphere `S^{N-1}` of radius `radius`
    /// embedded in `R^N`; the chart itself has dimension `N - 1`.
    SphereStereo {
        pole: Pole,
        ambient_dim: usize,
        radius: f64,
    },
    Custom(MetricFn),
}

impl fmt::Debug for ChartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChartKind::Flat => write!(f, "Flat"),
            ChartKind::Constant(g) => write!(f, "Constant({g:?})"),
            ChartKind::SphereStereo {
                pole,
                ambient_dim,
                radius,
            } => write!(f, "SphereStereo({pole:?}, N={ambient_dim}, R={radius})"),
            ChartKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Axis-aligned coordinate box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Parameter("domain bounds must have equal, nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::Parameter(format!("empty or non-finite domain box {lo:?} .. {hi:?}")));
        }
        Ok(Domain { lo, hi })
    }

    /// The box `[-half, half]^dim`.
    pub fn symmetric(dim: usize, half: f64) -> Self {
        Domain {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Closed-box membership with a small relative slack for rounding.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point.iter().enumerate().all(|(i, &x)| {
                let slack = 1e-12 * self.width(i);
                x.is_finite() && x >= self.lo[i] - slack && x <= self.hi[i] + slack
            })
    }

    pub fn contains_box(&self, other: &Domain) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }
}

/// Christoffel symbols `Γ^i_{jk}` at one point, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Christoffel {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[(i * self.dim + j) * self.dim + k] = value;
    }

    /// `Σ_{jk} Γ^i_{jk} v^j w^k` for each `i`.
    pub fn contract(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        s += self.get(i, j, k) * v[j] * w[k];
                    }
                }
                s
            })
            .collect()
    }

    /// Trace `Γ_j = Σ_k Γ^k_{jk}`.
    pub fn trace(&self) -> Vec<f64> {
        let n = self.dim;
        (0..n).map(|j| (0..n).map(|k| self.get(k, j, k)).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest `|Γ^i_{jk} - Γ^i_{kj}|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }

    pub fn max_diff(&self, other: &Christoffel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Curvature-derived scalars at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureBundle {
    pub ricci_scalar: f64,
    pub christoffel_trace: Vec<f64>,
    pub delta_v: f64,
    pub delta_v_prime: f64,
}

/// A coordinate chart with its metric tensor field.
///
/// Charts are immutable after construction and cheap to clone.
#[derive(Clone, Debug)]
pub struct MetricChart {
    kind: ChartKind,
    dim: usize,
    domain: Domain,
    // cached for Constant charts
    inverse: Option<DMatrix<f64>>,
    sqrt_det: f64,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl MetricChart {
    pub fn flat(dim: usize, domain: Domain) -> Result<Self> {
        Self::check_dims(dim, &domain)?;
        Ok(MetricChart {
            kind: ChartKind::Flat,
            dim,
            domain,
            inverse: Some(DMatrix::identity(dim, dim)),
            sqrt_det: 1.0,
        })
    }

    /// Constant metric `g_{ij} = G_{ij}`; `G` must be symmetric positive definite.
    pub fn constant(metric: DMatrix<f64>, domain: Domain) -> Result<Self> {
        let dim = metric.nrows();
        if metric.ncols() != dim {
            return Err(Error::Parameter("constant metric must be square".into()));
        }
        Self::check_dims(dim, &domain)?;
        if (&metric - metric.transpose()).amax() > SYMMETRY_TOL * metric.amax().max(1.0) {
            return Err(Error::Parameter("constant metric must be symmetric".into()));
        }
        let chol = metric
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularMetric { point: vec![] })?;
        let det = chol.determinant();
        let inverse = chol.inverse();
        Ok(MetricChart {
            kind: ChartKind::Constant(metric),
            dim,
            domain,
            inverse: Some(inverse),
            sqrt_det: det.sqrt(),
        })
    }

    /// Stereographic chart of the sphere of radius `radius` in `R^{ambient_dim}`,
    /// on the default domain `[-R, R]^{N-1}`.
    pub fn sphere(pole: Pole, ambient_dim: usize, radius: f64) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::Parameter("sphere needs ambient dimension >= 2".into()));
        }
        Self::sphere_on(pole, ambient_dim, radius, Domain::symmetric(ambient_dim - 1, radius))
    }

    pub fn sphere_on(pole: Pole, ambient_dim: usize, radius: f64, domain: Domain) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::Parameter("sphere needs ambient dimension >= 2".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("sphere radius must be positive, got {radius}")));
        }
        let dim = ambient_dim - 1;
        Self::check_dims(dim, &domain)?;
        Ok(MetricChart {
            kind: ChartKind::SphereStereo {
                pole,
                ambient_dim,
                radius,
            },
            dim,
            domain,
            inverse: None,
            sqrt_det: f64::NAN,
        })
    }

    /// User-supplied metric; all derivatives by finite differences.
    pub fn custom(dim: usize, domain: Domain, metric: MetricFn) -> Result<Self> {
        Self::check_dims(dim, &domain)?;
        Ok(MetricChart {
            kind: ChartKind::Custom(metric),
            dim,
            domain,
            inverse: None,
            sqrt_det: f64::NAN,
        })
    }

    /// Wraps the metric of `self` as a [`ChartKind::Custom`] chart, so every
    /// derived quantity is recomputed by finite differences.
    pub fn as_custom(&self) -> MetricChart {
        let inner = self.clone();
        let metric: MetricFn = Arc::new(move |p: &[f64]| inner.raw_metric(p));
        MetricChart {
            kind: ChartKind::Custom(metric),
            dim: self.dim,
            domain: self.domain.clone(),
            inverse: None,
            sqrt_det: f64::NAN,
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        Self::check_dims(self.dim, &domain)?;
        self.domain = domain;
        Ok(self)
    }

    fn check_dims(dim: usize, domain: &Domain) -> Result<()> {
        if dim == 0 {
            return Err(Error::Parameter("chart dimension must be positive".into()));
        }
        if domain.dim() != dim {
            return Err(Error::Parameter(format!(
                "domain has dimension {} but chart has dimension {dim}",
                domain.dim()
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn kind(&self) -> &ChartKind {
        &self.kind
    }

    /// True when the metric is the same at every point.
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, ChartKind::Flat | ChartKind::Constant(_))
    }

    /// Conformal factor of sphere charts.
    pub fn conformal_factor(&self) -> Option<ConformalFactor> {
        match self.kind {
            ChartKind::SphereStereo { radius, .. } => Some(ConformalFactor::new(radius)),
            _ => None,
        }
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim || !self.domain.contains(point) {
            return Err(Error::Domain {
                point: point.to_vec(),
            });
        }
        Ok(())
    }

    fn raw_metric(&self, point: &[f64]) -> DMatrix<f64> {
        match &self.kind {
            ChartKind::Flat => DMatrix::identity(self.dim, self.dim),
            ChartKind::Constant(g) => g.clone(),
            ChartKind::SphereStereo { radius, .. } => {
                let f = ConformalFactor::new(*radius).factor(point);
                DMatrix::from_diagonal_element(self.dim, self.dim, f)
            }
            ChartKind::Custom(metric) => metric(point),
        }
    }

    /// `g_{ij}` at `point`. No domain check: face midpoints of a grid may sit on the boundary.
    pub fn metric_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        if point.len() != self.dim {
            return Err(Error::Domain {
                point: point.to_vec(),
            });
        }
        let g = self.raw_metric(point);
        if g.nrows() != self.dim || g.ncols() != self.dim || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularMetric {
                point: point.to_vec(),
            });
        }
        Ok(g)
    }

    /// `g^{ij}` at `point`, via Cholesky; fails on non-SPD metrics.
    pub fn inverse_metric_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        if let Some(inv) = &self.inverse {
            return Ok(inv.clone());
        }
        if let Some(c) = self.conformal_factor() {
            let f = c.factor(point);
            return Ok(DMatrix::from_diagonal_element(self.dim, self.dim, 1.0 / f));
        }
        let g = self.metric_at(point)?;
        g.cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::SingularMetric {
                point: point.to_vec(),
            })
    }

    /// `√det g` at `point`.
    pub fn sqrt_det_at(&self, point: &[f64]) -> Result<f64> {
        if self.is_constant() {
            return Ok(self.sqrt_det);
        }
        if let Some(c) = self.conformal_factor() {
            return Ok(c.factor(point).powf(self.dim as f64 / 2.0));
        }
        let g = self.metric_at(point)?;
        g.cholesky()
            .map(|c| c.determinant().sqrt())
            .ok_or_else(|| Error::SingularMetric {
                point: point.to_vec(),
            })
    }

    /// `(√det g, g^{ij})` in one evaluation.
    pub fn volume_and_inverse(&self, point: &[f64]) -> Result<(f64, DMatrix<f64>)> {
        if let Some(inv) = &self.inverse {
            return Ok((self.sqrt_det, inv.clone()));
        }
        if let Some(c) = self.conformal_factor() {
            let f = c.factor(point);
            return Ok((
                f.powf(self.dim as f64 / 2.0),
                DMatrix::from_diagonal_element(self.dim, self.dim, 1.0 / f),
            ));
        }
        let g = self.metric_at(point)?;
        let chol = g.cholesky().ok_or_else(|| Error::SingularMetric {
            point: point.to_vec(),
        })?;
        Ok((chol.determinant().sqrt(), chol.inverse()))
    }

    /// Metric together with its first and second coordinate derivatives.
    pub fn jet(&self, point: &[f64]) -> Result<MetricJet> {
        self.check_point(point)?;
        match &self.kind {
            ChartKind::Flat | ChartKind::Constant(_) => {
                MetricJet::constant(self.raw_metric(point), self.inverse.clone().unwrap())
            }
            ChartKind::SphereStereo { radius, .. } => {
                ConformalFactor::new(*radius).jet(point)
            }
            ChartKind::Custom(_) => {
                let steps = fd::Steps::for_domain(&self.domain);
                let g = self.metric_at(point)?;
                let metric = |p: &[f64]| self.raw_metric(p);
                let dg = fd::first_derivatives(&metric, point, &steps.first);
                let ddg = fd::second_derivatives(&metric, point, &steps.second);
                MetricJet::new(g, dg, ddg).map_err(|_| Error::SingularMetric {
                    point: point.to_vec(),
                })
            }
        }
    }

    /// Levi-Civita connection `Γ^i_{jk}` at `point`.
    pub fn christoffel(&self, point: &[f64]) -> Result<Christoffel> {
        self.check_point(point)?;
        match self.conformal_factor() {
            _ if self.is_constant() => Ok(Christoffel::zeros(self.dim)),
            Some(c) => Ok(c.christoffel(point)),
            None => Ok(self.jet(point)?.christoffel()),
        }
    }

    /// `Σ_{jk} Γ^i_{jk} v^j v^k`, the geodesic acceleration term.
    pub fn christoffel_quadratic(&self, point: &[f64], velocity: &[f64]) -> Result<Vec<f64>> {
        match self.conformal_factor() {
            _ if self.is_constant() => Ok(vec![0.0; self.dim]),
            Some(c) => {
                self.check_point(point)?;
                Ok(c.christoffel_quadratic(point, velocity))
            }
            None => Ok(self.christoffel(point)?.contract(velocity, velocity)),
        }
    }

    /// Ricci scalar with `R_{ij} = R_{ki}{}^k{}_j` (positive on spheres).
    pub fn ricci_scalar(&self, point: &[f64]) -> Result<f64> {
        self.check_point(point)?;
        match self.conformal_factor() {
            _ if self.is_constant() => Ok(0.0),
            Some(c) => Ok(c.ricci_scalar(point)),
            None => Ok(self.jet(point)?.ricci_scalar()),
        }
    }

    /// Operator-ordering corrections `(ΔV, ΔV')` for a particle of mass `mass`.
    pub fn quantum_corrections(&self, point: &[f64], mass: f64) -> Result<(f64, f64)> {
        let b = self.curvature(point, mass)?;
        Ok((b.delta_v, b.delta_v_prime))
    }

    pub fn curvature(&self, point: &[f64], mass: f64) -> Result<CurvatureBundle> {
        if !(mass > 0.0) {
            return Err(Error::Parameter(format!("mass must be positive, got {mass}")));
        }
        self.check_point(point)?;
        if self.is_constant() {
            return Ok(CurvatureBundle {
                ricci_scalar: 0.0,
                christoffel_trace: vec![0.0; self.dim],
                delta_v: 0.0,
                delta_v_prime: 0.0,
            });
        }
        match self.conformal_factor() {
            Some(c) => Ok(c.curvature(point, mass)),
            None => Ok(self.jet(point)?.curvature(mass)),
        }
    }

    /// Covariant Hessian `∂_i∂_j V − Γ^k_{ij} ∂_k V`.
    pub fn manifold_hessian(&self, potential: &PotentialField, point: &[f64]) -> Result<DMatrix<f64>> {
        let gamma = self.christoffel(point)?;
        let grad = potential.gradient(point);
        let mut hess = potential.hessian(point);
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                let corr: f64 = (0..n).map(|k| gamma.get(k, i, j) * grad[k]).sum();
                hess[(i, j)] -= corr;
            }
        }
        Ok(hess)
    }

    /// Eigenvalues of `g^{-1} Hess_g V`, sorted ascending. Coordinate
    /// independent at stationary points.
    pub fn natural_hessian_eigenvalues(&self, potential: &PotentialField, point: &[f64]) -> Result<Vec<f64>> {
        let hess = self.manifold_hessian(potential, point)?;
        let g = self.metric_at(point)?;
        let chol = g.cholesky().ok_or_else(|| Error::SingularMetric {
            point: point.to_vec(),
        })?;
        // L^{-1} H L^{-T} is symmetric and similar to g^{-1} H.
        let l = chol.l();
        let linv = l.clone().try_inverse().ok_or_else(|| Error::SingularMetric {
            point: point.to_vec(),
        })?;
        let sym = &linv * hess * linv.transpose();
        let sym = (&sym + sym.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok(ev)
    }

    /// Ambient point of a sphere chart coordinate.
    pub fn embed(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            ChartKind::SphereStereo { pole, radius, .. } => {
                if u.len() != self.dim || u.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Domain { point: u.to_vec() });
                }
                Ok(sphere::embed(pole, radius, u))
            }
            _ => Err(Error::Parameter("embed is only defined for sphere charts".into())),
        }
    }

    /// Chart coordinate of an ambient point on the sphere.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            ChartKind::SphereStereo {
                pole,
                radius,
                ambient_dim,
            } => {
                if x.len() != ambient_dim {
                    return Err(Error::Parameter(format!("expected {ambient_dim} ambient coordinates")));
                }
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - radius).abs() > 1e-9 * radius.max(1.0) {
                    return Err(Error::Parameter(format!("point is not on the sphere (|x| = {norm})")));
                }
                sphere::project(pole, radius, x)
            }
            _ => Err(Error::Parameter("project is only defined for sphere charts".into())),
        }
    }

    /// Jacobian `∂x^a/∂u^i` of the embedding (`N × (N-1)`).
    pub fn embed_jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        match self.kind {
            ChartKind::SphereStereo { pole, radius, .. } => Ok(sphere::embed_jacobian(pole, radius, u)),
            _ => Err(Error::Parameter("embedding jacobian is only defined for sphere charts".into())),
        }
    }

    /// Ambient dimension for sphere charts, the chart dimension otherwise.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ChartKind::SphereStereo { ambient_dim, .. } => ambient_dim,
            _ => self.dim,
        }
    }

    /// `√g · Σ g^{ij} v_i v_j`-style weighted norm `|v|_g` at `point`.
    pub fn norm_at(&self, point: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.metric_at(point)?;
        let v = DVector::from_column_slice(v);
        Ok((v.transpose() * g * &v)[(0, 0)].max(0.0).sqrt())
    }
}
