//! Query-complexity arithmetic for simulating the descent Hamiltonian with a
//! truncated Dyson series. Big-O constants are set to one, so every count is
//! in relative query units and only ratios are meaningful.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretize::{assemble_laplace_beltrami, spectral_norm, Grid, PotentialField, SparseOperator};
use crate::error::{Error, Result};
use crate::evolve::{EtaLaw, ScaleLaw, Schedule};
use crate::geometry::MetricChart;

/// Relative tolerance of the power iteration behind `α_H`.
pub const SPECTRAL_TOLERANCE: f64 = 1e-8;
const SIMPSON_PANELS: usize = 10_000;
const TIME_SAMPLES: usize = 1001;

/// Kinetic operator `−D/(2m)` and its measured sparsity.
pub fn kinetic_operator(chart: &MetricChart, grid: &Grid, mass: f64) -> Result<SparseOperator> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Parameter(format!("mass must be positive, got {mass}")));
    }
    Ok(assemble_laplace_beltrami(chart, grid)?.scaled(Complex64::new(-0.5 / mass, 0.0)))
}

fn sample_times(t_end: f64) -> impl Iterator<Item = f64> {
    (0..TIME_SAMPLES).map(move |k| t_end * k as f64 / (TIME_SAMPLES - 1) as f64)
}

/// `α_H = max_t ‖−D/(2m)‖ / a(t)` over the schedule window.
pub fn kinetic_norm_bound(chart: &MetricChart, grid: &Grid, mass: f64, schedule: &Schedule) -> Result<f64> {
    let norm = spectral_norm(&kinetic_operator(chart, grid, mass)?, SPECTRAL_TOLERANCE)?;
    let mut inv_a_max: f64 = 0.0;
    for t in sample_times(schedule.t_end()) {
        inv_a_max = inv_a_max.max(1.0 / schedule.a_checked(t)?);
    }
    Ok(norm * inv_a_max)
}

/// `max |V|` over the grid nodes.
pub fn potential_max(potential: &PotentialField, grid: &Grid) -> Result<f64> {
    Ok(potential.sample(grid)?.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// `∫₀ᵀ a(t) η(t) dt`, in closed form for the exponential law with constant
/// `η`, otherwise by composite Simpson.
pub fn schedule_integral(schedule: &Schedule, t_total: f64) -> Result<f64> {
    check_time(t_total)?;
    match (schedule.scale_law(), schedule.eta_law()) {
        (ScaleLaw::Exponential, EtaLaw::Constant(eta)) => {
            let g = schedule.gamma();
            Ok(if g == 0.0 {
                eta * t_total
            } else {
                eta * (2.0 * g * t_total).exp_m1() / (2.0 * g)
            })
        }
        (ScaleLaw::Constant(a), EtaLaw::Constant(eta)) => Ok(a * eta * t_total),
        _ => schedule_integral_quadrature(schedule, t_total),
    }
}

/// Composite Simpson rule with 10⁴ panels.
pub fn schedule_integral_quadrature(schedule: &Schedule, t_total: f64) -> Result<f64> {
    check_time(t_total)?;
    let n = SIMPSON_PANELS;
    let h = t_total / n as f64;
    let f = |t: f64| schedule.a(t) * schedule.eta(t);
    let mut sum = f(0.0) + f(t_total);
    for k in 1..n {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    Ok(sum * h / 3.0)
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("simulation time must be positive, got {t}")))
    }
}

/// Where the simulation time `T` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSource {
    Measured,
    Bound,
}

/// Everything the query count depends on.
#[derive(Debug, Clone)]
pub struct ComplexityInputs {
    pub alpha_h: f64,
    pub v_max: f64,
    pub schedule: Schedule,
    pub t_total: f64,
    pub sparsity: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub t_source: TimeSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub units: String,
    pub t_source: TimeSource,
    pub t_total: f64,
    pub alpha_h: f64,
    pub v_max: f64,
    pub sparsity: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// `max_t a η V_max`.
    pub beta_h: f64,
    /// `∫₀ᵀ a η dt`.
    pub schedule_integral: f64,
    /// `log(α_H T/ε) / log log(α_H T/ε)`.
    pub dyson_factor: f64,
    /// `log²(1/ε)`.
    pub precision_factor: f64,
    /// `log(1/δ)`.
    pub amplification_factor: f64,
    pub n_query_a: f64,
    pub n_query_ub: f64,
    pub n_query_total: f64,
    /// `α_H β_H T²`, the scale `n_query_ub` approaches when `T ≈ 1/γ`.
    pub ub_scale: f64,
}

impl QueryReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Query counts of the oracle part and the potential block-encoding part.
pub fn query_count(inputs: &ComplexityInputs) -> Result<QueryReport> {
    let ComplexityInputs {
        alpha_h,
        v_max,
        t_total,
        sparsity,
        epsilon,
        delta,
        ..
    } = *inputs;
    if !(alpha_h > 0.0 && v_max > 0.0 && sparsity > 0) {
        return Err(Error::Parameter("alpha_H, V_max and sparsity must be positive".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!(
            "epsilon and delta must lie in (0, 1), got {epsilon} and {delta}"
        )));
    }
    check_time(t_total)?;
    let x = alpha_h * t_total / epsilon;
    if !(x > std::f64::consts::E) {
        return Err(Error::Parameter(format!("alpha_H T / epsilon = {x} must exceed e")));
    }
    let dyson_factor = x.ln() / x.ln().ln();
    let precision_factor = (1.0 / epsilon).ln().powi(2);
    let amplification_factor = (1.0 / delta).ln();
    let integral = schedule_integral(&inputs.schedule, t_total)?;
    let mut peak: f64 = 0.0;
    for t in sample_times(t_total) {
        peak = peak.max(inputs.schedule.a(t) * inputs.schedule.eta(t));
    }
    let beta_h = peak * v_max;
    let common = precision_factor * dyson_factor * amplification_factor;
    let n_query_ub = alpha_h * v_max * integral * t_total * common;
    let n_query_a = t_total * (sparsity as f64 * alpha_h).sqrt() * common;
    Ok(QueryReport {
        units: "relative query units".into(),
        t_source: inputs.t_source,
        t_total,
        alpha_h,
        v_max,
        sparsity,
        epsilon,
        delta,
        beta_h,
        schedule_integral: integral,
        dyson_factor,
        precision_factor,
        amplification_factor,
        n_query_a,
        n_query_ub,
        n_query_total: n_query_a + n_query_ub,
        ub_scale: alpha_h * beta_h * t_total * t_total,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    use super::*;
    use crate::geometry::Domain;

    fn inputs(alpha: f64, t: f64, eps: f64) -> ComplexityInputs {
        ComplexityInputs {
            alpha_h: alpha,
            v_max: 2.0,
            schedule: Schedule::exponential(0.25, 0.1, 10.0, 0.01).unwrap(),
            t_total: t,
            sparsity: 9,
            epsilon: eps,
            delta: 0.1,
            t_source: TimeSource::Measured,
        }
    }

    #[test]
    fn schedule_integral_examples() {
        let flat = Schedule::new(ScaleLaw::Constant(1.0), EtaLaw::Constant(1.0), 0.0, 3.0, 0.1).unwrap();
        assert_relative_eq!(schedule_integral(&flat, 3.0).unwrap(), 3.0);
        let exp = Schedule::exponential(0.5, 1.0, 2.0, 0.1).unwrap();
        let closed = schedule_integral(&exp, 2.0).unwrap();
        assert_relative_eq!(closed, 2f64.exp() - 1.0, epsilon = 1e-12);
        assert!((closed - 6.389).abs() < 1e-3);
        let quad = schedule_integral_quadrature(&exp, 2.0).unwrap();
        assert!((quad / closed - 1.0).abs() < 1e-8);
        assert!(schedule_integral(&exp, 0.0).is_err());
    }

    #[test]
    fn custom_schedules_use_quadrature() {
        let s = Schedule::new(
            ScaleLaw::Custom(Arc::new(|t| 1.0 + t)),
            EtaLaw::Custom(Arc::new(|t| 2.0 * t)),
            0.0,
            1.0,
            0.1,
        )
        .unwrap();
        // ∫₀² (1 + t) 2t dt = 4 + 16/3.
        assert_relative_eq!(schedule_integral(&s, 2.0).unwrap(), 4.0 + 16.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn total_is_sum_of_parts() {
        let r = query_count(&inputs(50.0, 12.0, 0.01)).unwrap();
        assert_relative_eq!(r.n_query_total, r.n_query_a + r.n_query_ub);
        assert!(r.n_query_a > 0.0 && r.n_query_ub > 0.0 && r.beta_h > 0.0);
        assert_relative_eq!(r.beta_h, 0.1 * (0.5f64 * 12.0).exp() * 2.0, max_relative = 1e-12);
    }

    #[test]
    fn tighter_epsilon_scales_by_stated_factors() {
        let a = query_count(&inputs(50.0, 12.0, 0.01)).unwrap();
        let b = query_count(&inputs(50.0, 12.0, 0.001)).unwrap();
        let x = |eps: f64| 50.0 * 12.0 / eps;
        let dyson = |eps: f64| x(eps).ln() / x(eps).ln().ln();
        let factor = (1000f64.ln() / 100f64.ln()).powi(2) * dyson(0.001) / dyson(0.01);
        assert_relative_eq!(b.n_query_total / a.n_query_total, factor, max_relative = 1e-12);
    }

    #[test]
    fn delta_one_over_e_gives_unit_factor() {
        let mut i = inputs(50.0, 12.0, 0.01);
        i.delta = (-1.0f64).exp();
        assert_relative_eq!(query_count(&i).unwrap().amplification_factor, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(query_count(&inputs(50.0, 12.0, 1.5)).is_err());
        assert!(query_count(&inputs(50.0, -1.0, 0.01)).is_err());
        // α T / ε below e.
        assert!(query_count(&inputs(1e-3, 1.0, 0.5)).is_err());
        let mut i = inputs(50.0, 12.0, 0.01);
        i.delta = 0.0;
        assert!(query_count(&i).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_every_input(
            alpha in 1.0f64..100.0,
            t in 1.0f64..20.0,
            v in 0.1f64..10.0,
            eps in 1e-4f64..0.3,
            delta in 1e-4f64..0.5,
            bump in 1.01f64..3.0,
        ) {
            let base = |alpha: f64, t: f64, v: f64, eps: f64, delta: f64| {
                let mut i = inputs(alpha, t, eps);
                i.v_max = v;
                i.delta = delta;
                query_count(&i).unwrap().n_query_total
            };
            let n = base(alpha, t, v, eps, delta);
            prop_assert!(base(alpha * bump, t, v, eps, delta) >= n);
            prop_assert!(base(alpha, t * bump, v, eps, delta) >= n);
            prop_assert!(base(alpha, t, v * bump, eps, delta) >= n);
            prop_assert!(base(alpha, t, v, eps / bump, delta) >= n);
            prop_assert!(base(alpha, t, v, eps, delta / bump) >= n);
        }
    }

    #[test]
    fn kinetic_bound_peaks_at_start_and_scales_with_mass() {
        let dom = Domain::symmetric(2, 1.0);
        let grid = Grid::uniform(dom.clone(), 24).unwrap();
        let chart = MetricChart::flat(2, dom).unwrap();
        let sched = Schedule::exponential(0.25, 0.1, 8.0, 0.02).unwrap();
        let norm = spectral_norm(&kinetic_operator(&chart, &grid, 1.0).unwrap(), SPECTRAL_TOLERANCE).unwrap();
        let alpha = kinetic_norm_bound(&chart, &grid, 1.0, &sched).unwrap();
        assert_relative_eq!(alpha, norm, max_relative = 1e-12);
        let heavy = kinetic_norm_bound(&chart, &grid, 2.0, &sched).unwrap();
        assert_relative_eq!(heavy, alpha / 2.0, max_relative = 1e-6);
        // Shrinking scale factor moves the maximum to the end of the window.
        let shrink = Schedule::new(ScaleLaw::Custom(Arc::new(|t| (-t).exp())), EtaLaw::Constant(1.0), 0.0, 2.0, 0.1)
            .unwrap();
        assert_relative_eq!(
            kinetic_norm_bound(&chart, &grid, 1.0, &shrink).unwrap(),
            norm * 2f64.exp(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn shear_metric_raises_kinetic_norm_by_inverse_smallest_eigenvalue() {
        let dom = Domain::symmetric(2, 1.0);
        let grid = Grid::uniform(dom.clone(), 40).unwrap();
        let a1 = DMatrix::from_row_slice(2, 2, &[1.0, -0.9, -0.9, 1.0]);
        let sched = Schedule::exponential(0.25, 0.1, 8.0, 0.02).unwrap();
        let flat = kinetic_norm_bound(&MetricChart::flat(2, dom.clone()).unwrap(), &grid, 0.1, &sched).unwrap();
        let shear = kinetic_norm_bound(&MetricChart::constant(a1, dom).unwrap(), &grid, 0.1, &sched).unwrap();
        assert!((shear / flat / 10.0 - 1.0).abs() < 0.05, "ratio {}", shear / flat);
    }
}
