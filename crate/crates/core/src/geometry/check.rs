//! Self-consistency checks of a chart against finite-difference oracles.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ChartKind, MetricChart};
use crate::error::Result;

pub const FD_TOLERANCE: f64 = 1e-6;
pub const CONSTANCY_TOLERANCE: f64 = 1e-8;

/// One line of the check table: worst observed error against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRow {
    fn new(name: &'static str, worst: f64, tolerance: f64) -> Self {
        CheckRow {
            name,
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

/// Points drawn uniformly from the inner 90% of the chart box.
pub fn sample_points(chart: &MetricChart, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = chart.domain();
    (0..count)
        .map(|_| {
            (0..chart.dim())
                .map(|i| d.lo[i] + (0.05 + 0.9 * rng.random::<f64>()) * d.width(i))
                .collect()
        })
        .collect()
}

/// Runs every invariant that applies to `chart` at `count` sample points.
///
/// Analytic charts are compared with a finite-difference evaluation of the
/// same metric. Curvature constancy is checked on charts of constant
/// curvature, exact vanishing of the corrections on constant metrics.
pub fn run_checks(chart: &MetricChart, count: usize, seed: u64) -> Result<Vec<CheckRow>> {
    let mass = 1.0;
    let points = sample_points(chart, count, seed);
    let n = chart.dim();
    let oracle = match chart.kind() {
        ChartKind::Custom(_) => None,
        _ => Some(chart.as_custom()),
    };

    let mut inverse = 0.0f64;
    let mut symmetry = 0.0f64;
    let mut christoffel_fd = 0.0f64;
    let mut ricci_fd = 0.0f64;
    let mut corrections_fd = 0.0f64;
    let mut corrections_abs = 0.0f64;
    let mut ricci = Vec::with_capacity(points.len());
    for p in &points {
        let prod = chart.metric_at(p)? * chart.inverse_metric_at(p)?;
        inverse = inverse.max((prod - DMatrix::identity(n, n)).amax());
        let gamma = chart.christoffel(p)?;
        symmetry = symmetry.max(gamma.asymmetry());
        let bundle = chart.curvature(p, mass)?;
        ricci.push(bundle.ricci_scalar);
        corrections_abs = corrections_abs
            .max(bundle.delta_v.abs())
            .max(bundle.delta_v_prime.abs())
            .max(bundle.christoffel_trace.iter().fold(0.0, |m, v| m.max(v.abs())));
        if let Some(fd) = &oracle {
            christoffel_fd = christoffel_fd.max(gamma.max_diff(&fd.christoffel(p)?));
            let other = fd.curvature(p, mass)?;
            ricci_fd = ricci_fd.max((bundle.ricci_scalar - other.ricci_scalar).abs());
            corrections_fd = corrections_fd
                .max((bundle.delta_v - other.delta_v).abs())
                .max((bundle.delta_v_prime - other.delta_v_prime).abs());
        }
    }

    let mut rows = vec![
        CheckRow::new("metric_times_inverse", inverse, 1e-10),
        CheckRow::new("christoffel_symmetry", symmetry, 1e-12),
    ];
    if oracle.is_some() {
        rows.push(CheckRow::new("christoffel_vs_fd", christoffel_fd, FD_TOLERANCE));
        rows.push(CheckRow::new("ricci_vs_fd", ricci_fd, FD_TOLERANCE));
        rows.push(CheckRow::new("corrections_vs_fd", corrections_fd, FD_TOLERANCE));
    }
    if !matches!(chart.kind(), ChartKind::Custom(_)) {
        let reference = ricci.first().copied().unwrap_or(0.0);
        let spread = ricci.iter().fold(0.0f64, |m, r| m.max((r - reference).abs()));
        let scale = reference.abs().max(f64::MIN_POSITIVE);
        let relative = if spread == 0.0 { 0.0 } else { spread / scale };
        rows.push(CheckRow::new("ricci_constant", relative, CONSTANCY_TOLERANCE));
    }
    if chart.is_constant() {
        rows.push(CheckRow::new("corrections_vanish", corrections_abs, 0.0));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Pole};

    #[test]
    fn built_in_charts_pass_every_check() {
        let charts = [
            MetricChart::flat(3, Domain::symmetric(3, 1.0)).unwrap(),
            MetricChart::constant(nalgebra::dmatrix![1.0, -0.9; -0.9, 1.0], Domain::symmetric(2, 2.0)).unwrap(),
            MetricChart::sphere(Pole::North, 4, 2.0).unwrap(),
            MetricChart::sphere(Pole::South, 3, 1.0).unwrap(),
        ];
        for chart in &charts {
            let rows = run_checks(chart, 50, 7).unwrap();
            for row in &rows {
                assert!(row.passed, "{:?}: {row:?}", chart.kind());
            }
        }
        assert_eq!(run_checks(&charts[0], 5, 1).unwrap().len(), 7);
        assert_eq!(run_checks(&charts[2], 5, 1).unwrap().len(), 6);
    }

    #[test]
    fn custom_charts_skip_oracle_rows() {
        let chart = MetricChart::sphere(Pole::South, 3, 1.0).unwrap().as_custom();
        let rows = run_checks(&chart, 5, 1).unwrap();
        let names: Vec<_> = rows.iter().map(|r| r.name).collect();
        assert_eq!(names, ["metric_times_inverse", "christoffel_symmetry"]);
    }
}
