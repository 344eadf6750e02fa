use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::Grid;
use crate::error::{Error, Result};
use crate::geometry::{ChartKind, MetricChart};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Scalar potential `V` on chart coordinates, with optional analytic
/// gradient and Hessian. Missing derivatives fall back to central differences.
#[derive(Clone)]
pub struct PotentialField {
    dim: usize,
    value: ScalarFn,
    gradient: Option<VectorFn>,
    hessian: Option<MatrixFn>,
}

impl fmt::Debug for PotentialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialField")
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

const GRADIENT_STEP: f64 = 1e-6;
const HESSIAN_STEP: f64 = 1e-5;

fn check_symmetric(matrix: &DMatrix<f64>) -> Result<()> {
    if !matrix.is_square() {
        return Err(Error::Parameter("potential matrix must be square".into()));
    }
    if (matrix - matrix.transpose()).amax() > 1e-12 * matrix.amax().max(1.0) {
        return Err(Error::Parameter("potential matrix must be symmetric".into()));
    }
    Ok(())
}

impl PotentialField {
    pub fn new(dim: usize, value: ScalarFn) -> Self {
        PotentialField {
            dim,
            value,
            gradient: None,
            hessian: None,
        }
    }

    pub fn with_gradient(mut self, gradient: VectorFn) -> Self {
        self.gradient = Some(gradient);
        self
    }

    pub fn with_hessian(mut self, hessian: MatrixFn) -> Self {
        self.hessian = Some(hessian);
        self
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        PotentialField::new(dim, Arc::new(move |_| c))
            .with_gradient(Arc::new(move |_| vec![0.0; dim]))
            .with_hessian(Arc::new(move |_| DMatrix::zeros(dim, dim)))
    }

    /// `V(x) = (m/2) xᵀ A x` on flat coordinates.
    pub fn quadratic(mass: f64, matrix: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&matrix)?;
        let dim = matrix.nrows();
        let a = Arc::new(matrix);
        let (a1, a2, a3) = (a.clone(), a.clone(), a);
        Ok(PotentialField::new(
            dim,
            Arc::new(move |x| {
                let x = DVector::from_column_slice(x);
                0.5 * mass * x.dot(&(&*a1 * &x))
            }),
        )
        .with_gradient(Arc::new(move |x| {
            let x = DVector::from_column_slice(x);
            (&*a2 * x * mass).iter().copied().collect()
        }))
        .with_hessian(Arc::new(move |_| &*a3 * mass)))
    }

    /// `V(u) = (m/2) x(u)ᵀ A x(u)` pulled back through a sphere chart's embedding.
    pub fn sphere_quadratic(chart: &MetricChart, mass: f64, matrix: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&matrix)?;
        if !matches!(chart.kind(), ChartKind::SphereStereo { .. }) {
            return Err(Error::Parameter("sphere_quadratic needs a sphere chart".into()));
        }
        if matrix.nrows() != chart.ambient_dim() {
            return Err(Error::Parameter(format!(
                "matrix is {}x{} but the sphere lives in R^{}",
                matrix.nrows(),
                matrix.ncols(),
                chart.ambient_dim()
            )));
        }
        let a = Arc::new(matrix);
        let (c1, c2) = (chart.clone(), chart.clone());
        let (a1, a2) = (a.clone(), a);
        Ok(PotentialField::new(
            chart.dim(),
            Arc::new(move |u| {
                let x = DVector::from_vec(c1.embed(u).unwrap_or_else(|_| vec![f64::NAN; c1.ambient_dim()]));
                0.5 * mass * x.dot(&(&*a1 * &x))
            }),
        )
        .with_gradient(Arc::new(move |u| {
            let (Ok(x), Ok(jac)) = (c2.embed(u), c2.embed_jacobian(u)) else {
                return vec![f64::NAN; u.len()];
            };
            let ax = &*a2 * DVector::from_vec(x) * mass;
            (jac.transpose() * ax).iter().copied().collect()
        })))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, point: &[f64]) -> f64 {
        (self.value)(point)
    }

    pub fn gradient(&self, point: &[f64]) -> Vec<f64> {
        match &self.gradient {
            Some(g) => g(point),
            None => {
                let steps: Vec<f64> = point.iter().map(|x| GRADIENT_STEP * x.abs().max(1.0)).collect();
                crate::geometry::fd::gradient(|p| self.value(p), point, &steps)
            }
        }
    }

    /// `∂_i ∂_j V`, symmetrized.
    pub fn hessian(&self, point: &[f64]) -> DMatrix<f64> {
        if let Some(h) = &self.hessian {
            return h(point);
        }
        let n = point.len();
        let mut hess = DMatrix::zeros(n, n);
        let mut p = point.to_vec();
        for k in 0..n {
            let h = HESSIAN_STEP * point[k].abs().max(1.0);
            p[k] = point[k] + h;
            let plus = self.gradient(&p);
            p[k] = point[k] - h;
            let minus = self.gradient(&p);
            p[k] = point[k];
            for i in 0..n {
                hess[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        (&hess + hess.transpose()) * 0.5
    }

    /// Node values on `grid`; fails if any is non-finite.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(grid.len());
        let mut x = vec![0.0; grid.dim()];
        for idx in 0..grid.len() {
            grid.coord_into(idx, &mut x);
            let v = self.value(&x);
            if !v.is_finite() {
                return Err(Error::Parameter(format!("potential is not finite at {x:?}")));
            }
            out.push(v);
        }
        Ok(out)
    }
}
