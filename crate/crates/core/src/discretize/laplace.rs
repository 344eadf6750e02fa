//! Divergence-form Laplace–Beltrami operator from a discrete energy.
//!
//! The operator is defined through `E(ψ) = ψᵀ S ψ ≈ ∫ √g g^{ij} ∂_iψ ∂_jψ`
//! and `D = −W⁻¹ S` with `W = diag(√g · Π h)`, which makes `W D` symmetric
//! by construction. Axis terms are face fluxes with `√g g^{ii}` at face
//! midpoints. Each mixed term `i < j` is evaluated once per cell with
//! `√g g^{ij}` at the cell centre and split across the two cell corners whose
//! diagonal is aligned with the sign of the coefficient, which keeps the
//! scheme second order and its symbol equal to `dᴴ G d`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Grid, SparseOperator};
use crate::error::{Error, Result};
use crate::geometry::MetricChart;

/// Quadrature weights `√g(node) · Π h_i`.
pub fn node_weights(chart: &MetricChart, grid: &Grid) -> Result<Vec<f64>> {
    let vol = grid.cell_volume();
    (0..grid.len())
        .into_par_iter()
        .map(|idx| Ok(chart.sqrt_det_at(&grid.coord(idx))? * vol))
        .collect()
}

/// `√g` at every node.
pub fn sqrt_det_field(chart: &MetricChart, grid: &Grid) -> Result<Vec<f64>> {
    (0..grid.len())
        .into_par_iter()
        .map(|idx| chart.sqrt_det_at(&grid.coord(idx)))
        .collect()
}

pub(super) fn check_compatible(chart: &MetricChart, grid: &Grid) -> Result<()> {
    if chart.dim() != grid.dim() {
        return Err(Error::Parameter(format!(
            "grid dimension {} does not match chart dimension {}",
            grid.dim(),
            chart.dim()
        )));
    }
    if !chart.domain().contains_box(grid.domain()) {
        return Err(Error::Domain {
            point: grid.domain().lo.iter().chain(&grid.domain().hi).copied().collect(),
        });
    }
    Ok(())
}

struct Energy<'a> {
    interior: &'a [bool],
    out: Vec<(usize, usize, f64)>,
}

impl Energy<'_> {
    fn push(&mut self, r: usize, c: usize, v: f64) {
        if self.interior[r] && self.interior[c] {
            self.out.push((r, c, v));
        }
    }

    /// `coef · (ψ_a − ψ_b)²`.
    fn square(&mut self, coef: f64, a: usize, b: usize) {
        self.push(a, a, coef);
        self.push(b, b, coef);
        self.push(a, b, -coef);
        self.push(b, a, -coef);
    }

    /// `coef · (ψ_a − ψ_b)(ψ_c − ψ_d)`, symmetrized.
    fn product(&mut self, coef: f64, a: usize, b: usize, c: usize, d: usize) {
        let half = 0.5 * coef;
        for (x, sx) in [(a, 1.0), (b, -1.0)] {
            for (y, sy) in [(c, 1.0), (d, -1.0)] {
                self.push(x, y, half * sx * sy);
                self.push(y, x, half * sx * sy);
            }
        }
    }
}

/// Discrete `Δ_g` with homogeneous Dirichlet conditions: boundary rows and
/// columns are empty.
pub fn assemble_laplace_beltrami(chart: &MetricChart, grid: &Grid) -> Result<SparseOperator> {
    check_compatible(chart, grid)?;
    let n = grid.dim();
    let h = grid.spacing().to_vec();
    let vol = grid.cell_volume();
    let interior: Vec<bool> = (0..grid.len()).map(|i| !grid.is_boundary(i)).collect();
    let weights = node_weights(chart, grid)?;

    let pieces: Vec<Vec<(usize, usize, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let mut e = Energy {
                interior: &interior,
                out: Vec::new(),
            };
            let base = grid.coord(p);
            let last: Vec<bool> = (0..n).map(|a| grid.axis_index(p, a) + 1 == grid.nodes()[a]).collect();
            for i in 0..n {
                if last[i] {
                    continue;
                }
                let q = p + grid.stride(i);
                if interior[p] || interior[q] {
                    let mut mid = base.clone();
                    mid[i] += 0.5 * h[i];
                    let (sg, ginv) = chart.volume_and_inverse(&mid)?;
                    e.square(sg * ginv[(i, i)] * vol / (h[i] * h[i]), p, q);
                }
                for j in (i + 1)..n {
                    if last[j] || chart.is_constant() && chart.inverse_metric_at(&base)?[(i, j)] == 0.0 {
                        continue;
                    }
                    let pi = p + grid.stride(i);
                    let pj = p + grid.stride(j);
                    let pij = pi + grid.stride(j);
                    if ![p, pi, pj, pij].iter().any(|&x| interior[x]) {
                        continue;
                    }
                    let mut centre = base.clone();
                    centre[i] += 0.5 * h[i];
                    centre[j] += 0.5 * h[j];
                    let (sg, ginv) = chart.volume_and_inverse(&centre)?;
                    let k = sg * ginv[(i, j)];
                    let coef = k * vol / (h[i] * h[j]);
                    if k >= 0.0 {
                        e.product(coef, pi, p, pj, p);
                        e.product(coef, pij, pj, pij, pi);
                    } else {
                        e.product(coef, pi, p, pij, pi);
                        e.product(coef, pij, pj, pj, p);
                    }
                }
            }
            Ok(e.out)
        })
        .collect::<Result<_>>()?;

    let triplets: Vec<(usize, usize, Complex64)> = pieces
        .into_iter()
        .flatten()
        .map(|(r, c, s)| (r, c, Complex64::new(-s / weights[r], 0.0)))
        .collect();
    let mut op = SparseOperator::from_triplets(grid.len(), triplets)?;
    op.weighted_hermitian = true;
    Ok(op)
}
