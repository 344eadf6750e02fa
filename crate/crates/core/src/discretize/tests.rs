use approx::assert_abs_diff_eq;
use nalgebra::{dmatrix, DMatrix};
use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::evolve::Schedule;
use crate::geometry::{Domain, MetricChart, Pole};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn a1() -> DMatrix<f64> {
    dmatrix![1.0, -0.9; -0.9, 1.0]
}

fn box2(lo: f64, hi: f64) -> Domain {
    Domain::new(vec![lo, lo], vec![hi, hi]).unwrap()
}

#[test]
fn grid_rejects_coarse_axes() {
    assert!(Grid::new(box2(0.0, 1.0), &[3, 2]).is_err());
    assert!(Grid::new(box2(0.0, 1.0), &[3]).is_err());
}

#[test]
fn grid_index_is_a_bijection() {
    let grid = Grid::new(Domain::new(vec![0.0; 3], vec![1.0, 2.0, 3.0]).unwrap(), &[3, 4, 5]).unwrap();
    assert_eq!(grid.len(), 60);
    for idx in 0..grid.len() {
        assert_eq!(grid.index(&grid.multi_index(idx)), idx);
    }
    assert_eq!(grid.coord(grid.len() - 1), vec![1.0, 2.0, 3.0]);
    assert_abs_diff_eq!(grid.spacing()[2], 0.75);
}

#[test]
fn sparse_sums_duplicates_and_exports_coo() {
    let op = SparseOperator::from_triplets(
        2,
        vec![(0, 1, c(1.0)), (0, 1, c(2.0)), (1, 0, Complex64::new(0.5, -1.0)), (1, 1, c(0.0))],
    )
    .unwrap();
    assert_eq!(op.nnz(), 2);
    assert_eq!(op.get(0, 1), c(3.0));
    let mut buf = Vec::new();
    op.write_coo(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next().unwrap(), "0 1 3e0 0e0");
    assert!(SparseOperator::from_triplets(2, vec![(2, 0, c(1.0))]).is_err());
}

#[test]
fn adjoint_matvec_matches_dense() {
    let op = SparseOperator::from_triplets(
        3,
        vec![(0, 2, Complex64::new(1.0, 2.0)), (2, 1, c(-3.0)), (1, 1, Complex64::new(0.0, 1.0))],
    )
    .unwrap();
    let x = vec![c(1.0), Complex64::new(2.0, -1.0), c(0.5)];
    let mut y = vec![c(0.0); 3];
    op.matvec_adjoint(&x, &mut y);
    let dense = op.to_dense();
    for col in 0..3 {
        let expected: Complex64 = (0..3).map(|r| dense[r][col].conj() * x[r]).sum();
        assert!((y[col] - expected).norm() < 1e-15);
    }
}

#[test]
fn flat_1d_stencil_is_second_difference() {
    let chart = MetricChart::flat(1, Domain::new(vec![0.0], vec![4.0]).unwrap()).unwrap();
    let grid = Grid::uniform(chart.domain().clone(), 5).unwrap();
    let d = assemble_laplace_beltrami(&chart, &grid).unwrap();
    assert_eq!(d.get(2, 1), c(1.0));
    assert_eq!(d.get(2, 2), c(-2.0));
    assert_eq!(d.get(2, 3), c(1.0));
    // Dirichlet: boundary rows and columns are empty.
    assert_eq!(d.row(0).count(), 0);
    assert_eq!(d.get(1, 0), c(0.0));
}

#[test]
fn flat_2d_equals_standard_laplacian() {
    let chart = MetricChart::flat(2, Domain::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap()).unwrap();
    let grid = Grid::new(chart.domain().clone(), &[6, 9]).unwrap();
    let d = assemble_laplace_beltrami(&chart, &grid).unwrap();
    let h = grid.spacing();
    for p in 0..grid.len() {
        if grid.is_boundary(p) {
            assert_eq!(d.row(p).count(), 0);
            continue;
        }
        let mut expected = vec![(p, -2.0 / (h[0] * h[0]) - 2.0 / (h[1] * h[1]))];
        for a in 0..2 {
            for q in [p - grid.stride(a), p + grid.stride(a)] {
                if !grid.is_boundary(q) {
                    expected.push((q, 1.0 / (h[a] * h[a])));
                }
            }
        }
        assert_eq!(d.row(p).count(), expected.len());
        for (q, v) in expected {
            assert!((d.get(p, q).re - v).abs() < 1e-12 * v.abs());
        }
    }
}

#[test]
fn constant_metric_cross_coupling() {
    let chart = MetricChart::constant(a1(), box2(-1.0, 1.0)).unwrap();
    let grid = Grid::uniform(chart.domain().clone(), 9).unwrap();
    let d = assemble_laplace_beltrami(&chart, &grid).unwrap();
    let h = grid.spacing();
    let g12 = 0.9 / (1.0 - 0.81);
    let p = grid.index(&[4, 4]);
    let anti = grid.index(&[3, 5]);
    let diag = grid.index(&[5, 5]);
    assert_abs_diff_eq!(d.get(p, anti).re, -g12 / (h[0] * h[1]), epsilon = 1e-9);
    assert_eq!(d.get(p, diag), c(0.0));
}

/// Δ_g of a quadratic with constant metric is `2 tr(g⁻¹ B)`; the scheme is exact on quadratics.
#[test]
fn constant_metric_exact_on_quadratics() {
    let chart = MetricChart::constant(a1(), box2(-1.0, 1.0)).unwrap();
    let grid = Grid::uniform(chart.domain().clone(), 11).unwrap();
    let d = assemble_laplace_beltrami(&chart, &grid).unwrap();
    let ginv = a1().try_inverse().unwrap();
    let b = dmatrix![0.3, 0.7; 0.7, -1.2];
    let f: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let x = grid.coord(i);
            c(b[(0, 0)] * x[0] * x[0] + 2.0 * b[(0, 1)] * x[0] * x[1] + b[(1, 1)] * x[1] * x[1])
        })
        .collect();
    let df = d.apply(&f);
    let expected = 2.0 * (ginv * b).trace();
    for p in 0..grid.len() {
        let m = grid.multi_index(p);
        if m.iter().all(|&k| (2..9).contains(&k)) {
            assert_abs_diff_eq!(df[p].re, expected, epsilon = 1e-9);
        }
    }
}

#[test]
fn sphere_operator_is_weighted_symmetric() {
    let chart = MetricChart::sphere(Pole::South, 3, 1.0).unwrap();
    let grid = Grid::uniform(chart.domain().clone(), 64).unwrap();
    let d = assemble_laplace_beltrami(&chart, &grid).unwrap();
    let w = node_weights(&chart, &grid).unwrap();
    let scale = d.entries().map(|(r, _, v)| (w[r] * v).norm()).fold(0.0, f64::max);
    assert!(d.weighted_asymmetry(&w) < 1e-10 * scale);
}

fn gaussian(x: &[f64]) -> f64 {
    let c = [0.1, -0.2];
    (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / 0.25).exp()
}

/// Analytic Laplacian and gradient of the test Gaussian.
fn gaussian_derivs(x: &[f64]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let c = [0.1, -0.2];
    let s = 0.25;
    let f = gaussian(x);
    let d = [x[0] - c[0], x[1] - c[1]];
    let grad = [-2.0 * d[0] / s * f, -2.0 * d[1] / s * f];
    let mut hess = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let delta = if i == j { 1.0 } else { 0.0 };
            hess[i][j] = (4.0 * d[i] * d[j] / (s * s) - 2.0 * delta / s) * f;
        }
    }
    (f, grad, hess)
}

fn refinement_errors(chart: &MetricChart, exact: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let probe = [0.2, 0.1];
    [21, 41, 81]
        .iter()
        .map(|&n| {
            let grid = Grid::uniform(chart.domain().clone(), n).unwrap();
            let d = assemble_laplace_beltrami(chart, &grid).unwrap();
            let f: Vec<Complex64> = (0..grid.len()).map(|i| c(gaussian(&grid.coord(i)))).collect();
            let idx = grid.nearest(&probe);
            assert!(grid.coord(idx).iter().zip(&probe).all(|(a, b)| (a - b).abs() < 1e-12));
            let row: Complex64 = d.row(idx).map(|(q, v)| v * f[q]).sum();
            (row.re - exact(&probe)).abs()
        })
        .collect()
}

#[test]
fn refinement_is_second_order_on_sphere_chart() {
    let chart = MetricChart::sphere(Pole::South, 3, 1.0).unwrap();
    let factor = chart.conformal_factor().unwrap();
    let errors = refinement_errors(&chart, |x| {
        let (_, _, h) = gaussian_derivs(x);
        (h[0][0] + h[1][1]) / factor.factor(x)
    });
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "errors {errors:?}");
    }
}

#[test]
fn refinement_is_second_order_with_constant_metric() {
    let chart = MetricChart::constant(a1(), box2(-1.0, 1.0)).unwrap();
    let ginv = a1().try_inverse().unwrap();
    let errors = refinement_errors(&chart, |x| {
        let (_, _, h) = gaussian_derivs(x);
        (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| ginv[(i, j)] * h[i][j]).sum()
    });
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "errors {errors:?}");
    }
}

#[test]
fn refinement_is_second_order_for_custom_metric() {
    // g = diag(1 + x², 1 + y²/2) exercises non-conformal face coefficients.
    let metric: crate::geometry::MetricFn =
        std::sync::Arc::new(|p: &[f64]| dmatrix![1.0 + p[0] * p[0], 0.3 * p[0] * p[1]; 0.3 * p[0] * p[1], 1.0 + 0.5 * p[1] * p[1]]);
    let chart = MetricChart::custom(2, box2(-1.0, 1.0), metric.clone()).unwrap();
    // Reference via the divergence form with a fine central difference of the flux.
    let exact = |x: &[f64]| {
        let flux = |p: &[f64]| {
            let g = metric(p);
            let chol = g.clone().cholesky().unwrap();
            let sg = chol.determinant().sqrt();
            let gi = chol.inverse();
            let (_, grad, _) = gaussian_derivs(p);
            [sg * (gi[(0, 0)] * grad[0] + gi[(0, 1)] * grad[1]), sg * (gi[(1, 0)] * grad[0] + gi[(1, 1)] * grad[1])]
        };
        let h = 1e-5;
        let div = (flux(&[x[0] + h, x[1]])[0] - flux(&[x[0] - h, x[1]])[0]) / (2.0 * h)
            + (flux(&[x[0], x[1] + h])[1] - flux(&[x[0], x[1] - h])[1]) / (2.0 * h);
        div / metric(x).determinant().sqrt()
    };
    let errors = refinement_errors(&chart, exact);
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "errors {errors:?}");
    }
}

#[test]
fn pure_kinetic_hamiltonian() {
    let chart = MetricChart::sphere(Pole::South, 3, 1.0).unwrap();
    let grid = Grid::uniform(chart.domain().clone(), 12).unwrap();
    let v = PotentialField::sphere_quadratic(&chart, 1.0, DMatrix::identity(3, 3)).unwrap();
    let schedule = Schedule::exponential(0.0, 0.0, 1.0, 0.1).unwrap();
    let h = assemble_hamiltonian(&chart, &grid, &v, &schedule, 0.0, 2.0, false).unwrap();
    let d = assemble_laplace_beltrami(&chart, &grid).unwrap();
    assert_eq!(h, d.scaled(c(-0.25)).plus_diagonal(&vec![c(0.0); grid.len()]));
    for (r, col, val) in d.entries() {
        assert_eq!(h.get(r, col), val * -0.25);
    }
}

#[test]
fn flat_demo_hamiltonian_at_time_zero() {
    let chart = MetricChart::flat(2, box2(-2.0, 2.0)).unwrap();
    let grid = Grid::uniform(chart.domain().clone(), 10).unwrap();
    let v = PotentialField::quadratic(0.1, a1()).unwrap();
    let schedule = Schedule::exponential(0.25, 0.1, 4.0, 0.1).unwrap();
    let h = assemble_hamiltonian(&chart, &grid, &v, &schedule, 0.0, 0.1, false).unwrap();
    let d = assemble_laplace_beltrami(&chart, &grid).unwrap();
    for p in 0..grid.len() {
        let expected_diag = -d.get(p, p).re / 0.2 + 0.1 * v.value(&grid.coord(p));
        assert_abs_diff_eq!(h.get(p, p).re, expected_diag, epsilon = 1e-10);
        for (q, val) in d.row(p) {
            if q != p {
                assert_abs_diff_eq!(h.get(p, q).re, -val.re / 0.2, epsilon = 1e-10);
            }
        }
    }
    let late = assemble_hamiltonian(&chart, &grid, &v, &schedule, 2.0, 0.1, false).unwrap();
    let a = 1f64.exp();
    let p = grid.index(&[4, 5]);
    let expected = -d.get(p, p).re / (0.2 * a) + a * 0.1 * v.value(&grid.coord(p));
    assert_abs_diff_eq!(late.get(p, p).re, expected, epsilon = 1e-10);
}

#[test]
fn weyl_flag_adds_scaled_correction() {
    let chart = MetricChart::sphere(Pole::South, 3, 1.0).unwrap();
    let grid = Grid::uniform(chart.domain().clone(), 8).unwrap();
    let v = PotentialField::constant(2, 0.0);
    let schedule = Schedule::exponential(0.5, 1.0, 2.0, 0.1).unwrap();
    let off = assemble_hamiltonian(&chart, &grid, &v, &schedule, 1.0, 1.0, false).unwrap();
    let on = assemble_hamiltonian(&chart, &grid, &v, &schedule, 1.0, 1.0, true).unwrap();
    let p = grid.index(&[3, 4]);
    let dv = chart.curvature(&grid.coord(p), 1.0).unwrap().delta_v;
    assert_abs_diff_eq!((on.get(p, p) - off.get(p, p)).re, dv / 1f64.exp(), epsilon = 1e-12);
}

#[test]
fn nonpositive_scale_is_a_schedule_error() {
    let chart = MetricChart::flat(1, Domain::new(vec![0.0], vec![1.0]).unwrap()).unwrap();
    let grid = Grid::uniform(chart.domain().clone(), 5).unwrap();
    let v = PotentialField::constant(1, 0.0);
    let schedule = Schedule::new(
        crate::evolve::ScaleLaw::Custom(std::sync::Arc::new(|t| 1.0 - t)),
        crate::evolve::EtaLaw::Constant(1.0),
        0.0,
        2.0,
        0.1,
    )
    .unwrap();
    assert!(matches!(
        assemble_hamiltonian(&chart, &grid, &v, &schedule, 1.5, 1.0, false),
        Err(Error::Schedule(_))
    ));
}

#[test]
fn spectral_norm_of_diagonal() {
    let op = SparseOperator::diagonal(&[c(1.0), c(-3.0), c(2.0)]);
    assert_abs_diff_eq!(spectral_norm(&op, 1e-12).unwrap(), 3.0, epsilon = 1e-9);
}

#[test]
fn spectral_norm_of_1d_laplacian_matches_dense_eigensolve() {
    for n in [9usize, 17, 33, 63] {
        let chart = MetricChart::flat(1, Domain::new(vec![0.0], vec![(n - 1) as f64]).unwrap()).unwrap();
        let grid = Grid::uniform(chart.domain().clone(), n).unwrap();
        let d = assemble_laplace_beltrami(&chart, &grid).unwrap();
        let m = n - 2;
        let dense = DMatrix::<f64>::from_fn(m, m, |i, j| match i.abs_diff(j) {
            0 => -2.0,
            1 => 1.0,
            _ => 0.0,
        });
        let oracle: f64 = dense.symmetric_eigen().eigenvalues.amax();
        let estimate = spectral_norm(&d, 1e-12).unwrap();
        assert!((estimate - oracle).abs() < 1e-6 * oracle, "n={n}: {estimate} vs {oracle}");
        assert!(estimate < 4.0);
    }
}

#[test]
fn kinetic_norm_ratio_on_moderate_grid() {
    let dom = box2(-1.0, 1.0);
    let grid = Grid::uniform(dom.clone(), 48).unwrap();
    let flat = MetricChart::flat(2, dom.clone()).unwrap();
    let shear = MetricChart::constant(a1(), dom).unwrap();
    let nf = spectral_norm(&assemble_laplace_beltrami(&flat, &grid).unwrap(), 1e-8).unwrap();
    let ns = spectral_norm(&assemble_laplace_beltrami(&shear, &grid).unwrap(), 1e-8).unwrap();
    assert!((ns / nf - 10.0).abs() < 0.5, "ratio {}", ns / nf);
}

#[test]
fn potential_sampling_rejects_non_finite_values() {
    let grid = Grid::uniform(Domain::new(vec![-1.0], vec![1.0]).unwrap(), 5).unwrap();
    let v = PotentialField::new(1, std::sync::Arc::new(|x: &[f64]| 1.0 / x[0]));
    assert!(v.sample(&grid).is_err());
}

#[test]
fn finite_difference_gradient_matches_analytic() {
    let analytic = PotentialField::quadratic(0.3, a1()).unwrap();
    let inner = analytic.clone();
    let numeric = PotentialField::new(2, std::sync::Arc::new(move |x: &[f64]| inner.value(x)));
    let p = [0.7, -1.3];
    for (a, b) in analytic.gradient(&p).iter().zip(numeric.gradient(&p)) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-8);
    }
    assert!((analytic.hessian(&p) - numeric.hessian(&p)).amax() < 1e-5);
}

proptest! {
    #[test]
    fn laplacian_weighted_symmetry_holds_for_random_boxes(
        lo in -0.9f64..-0.1, hi in 0.1f64..0.9, nx in 4usize..12, ny in 4usize..12, north in any::<bool>()
    ) {
        let pole = if north { Pole::North } else { Pole::South };
        let chart = MetricChart::sphere(pole, 3, 1.0).unwrap();
        let grid = Grid::new(Domain::new(vec![lo, lo], vec![hi, hi]).unwrap(), &[nx, ny]).unwrap();
        let d = assemble_laplace_beltrami(&chart, &grid).unwrap();
        let w = node_weights(&chart, &grid).unwrap();
        let scale = d.entries().map(|(r, _, v)| (w[r] * v).norm()).fold(0.0, f64::max);
        prop_assert!(d.weighted_asymmetry(&w) < 1e-10 * scale);
    }
}
