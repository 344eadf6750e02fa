//! Grids over chart domains and the sparse operators of the Hamiltonian.

mod grid;
mod laplace;
mod potential;
mod sparse;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::Schedule;
use crate::geometry::MetricChart;

pub use grid::Grid;
pub use laplace::{assemble_laplace_beltrami, node_weights, sqrt_det_field};
pub use potential::{MatrixFn, PotentialField, ScalarFn, VectorFn};
pub use sparse::SparseOperator;

/// Time-independent pieces of `H(t)`, assembled once and recombined per time.
#[derive(Debug, Clone)]
pub struct HamiltonianParts {
    /// `−D/(2m)`.
    pub kinetic: SparseOperator,
    /// `V` at every node.
    pub potential: Vec<f64>,
    /// `ΔV` at every node when the ordering correction is requested.
    pub weyl: Option<Vec<f64>>,
}

impl HamiltonianParts {
    pub fn new(
        chart: &MetricChart,
        grid: &Grid,
        potential: &PotentialField,
        mass: f64,
        include_weyl_correction: bool,
    ) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Parameter(format!("mass must be positive, got {mass}")));
        }
        if potential.dim() != grid.dim() {
            return Err(Error::Parameter("potential and grid dimensions differ".into()));
        }
        let d = assemble_laplace_beltrami(chart, grid)?;
        let mut kinetic = d.scaled(Complex64::new(-0.5 / mass, 0.0));
        kinetic.weighted_hermitian = true;
        let values = potential.sample(grid)?;
        let weyl = if include_weyl_correction {
            Some(
                (0..grid.len())
                    .into_par_iter()
                    .map(|i| Ok(chart.curvature(&grid.coord(i), mass)?.delta_v))
                    .collect::<Result<Vec<f64>>>()?,
            )
        } else {
            None
        };
        Ok(HamiltonianParts {
            kinetic,
            potential: values,
            weyl,
        })
    }

    /// `(1/a(t), diagonal)` so that `H(t) = kinetic / a + diag(diagonal)`.
    pub fn coefficients(&self, schedule: &Schedule, t: f64) -> Result<(f64, Vec<f64>)> {
        let a = schedule.a_checked(t)?;
        let pot = a * schedule.eta(t);
        let diag = match &self.weyl {
            Some(w) => self.potential.iter().zip(w).map(|(v, dv)| pot * v + dv / a).collect(),
            None => self.potential.iter().map(|v| pot * v).collect(),
        };
        Ok((1.0 / a, diag))
    }

    pub fn at(&self, schedule: &Schedule, t: f64) -> Result<SparseOperator> {
        let (inv_a, diag) = self.coefficients(schedule, t)?;
        let diag: Vec<Complex64> = diag.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        Ok(self.kinetic.scaled(Complex64::new(inv_a, 0.0)).plus_diagonal(&diag))
    }
}

/// `H(t) = (1/a)(−D/(2m)) + a η diag(V)`, optionally `+ (1/a) diag(ΔV)`.
pub fn assemble_hamiltonian(
    chart: &MetricChart,
    grid: &Grid,
    potential: &PotentialField,
    schedule: &Schedule,
    t: f64,
    mass: f64,
    include_weyl_correction: bool,
) -> Result<SparseOperator> {
    schedule.a_checked(t)?;
    HamiltonianParts::new(chart, grid, potential, mass, include_weyl_correction)?.at(schedule, t)
}

pub const SPECTRAL_MAX_ITERATIONS: usize = 10_000;

/// Largest singular value by power iteration on `AᴴA`, from the normalized
/// all-ones vector, stopping when the estimate changes by less than `tol`
/// relative.
pub fn spectral_norm(op: &SparseOperator, tol: f64) -> Result<f64> {
    let n = op.size();
    if n == 0 || op.nnz() == 0 {
        return Ok(0.0);
    }
    let mut x = vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    let mut ax = vec![Complex64::new(0.0, 0.0); n];
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let mut estimate = 0.0;
    for it in 0..SPECTRAL_MAX_ITERATIONS {
        op.matvec(&x, &mut ax);
        op.matvec_adjoint(&ax, &mut y);
        // Rayleigh quotient of AᴴA at unit x.
        let lambda: f64 = ax.iter().map(|v| v.norm_sqr()).sum();
        let norm: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let sigma = lambda.sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if it > 0 && (sigma - estimate).abs() <= tol * sigma {
            return Ok(sigma);
        }
        estimate = sigma;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    Err(Error::Convergence {
        iterations: SPECTRAL_MAX_ITERATIONS,
        estimate,
    })
}

#[cfg(test)]
mod tests;
