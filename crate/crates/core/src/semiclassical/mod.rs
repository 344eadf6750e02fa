//! Semiclassical dynamics of the mean position, convergence-time detection
//! and the critically damped lower bound on it.

mod eom;
mod lambert;
mod study;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MetricChart;

pub use eom::{default_ode_step, effective_potential_gradient, integrate_eom, EomOptions, SemiclassicalState, Trajectory, VeffTerms};
pub use lambert::{envelope_factor, lambert_w_minus1};
pub use study::{run_appendix_c_study, RandomInstance, RunRecord, RunStatus, StudyConfig, StudyReport};

/// Relative slack allowed when comparing a sampled `t*` with the bound.
pub const BOUND_SLACK: f64 = 0.02;

/// Distance used by the convergence criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StarNorm {
    /// Plain chart-coordinate distance.
    Euclid,
    /// `|·|_g` with the metric frozen at the target.
    WeightedAtTarget,
}

/// `|Re x(t) − target| / |x(0) − target|` for every sample.
pub fn distance_ratios(trajectory: &Trajectory, target: &[f64], chart: &MetricChart, norm: StarNorm) -> Option<Vec<f64>> {
    let metric = match norm {
        StarNorm::Euclid => None,
        StarNorm::WeightedAtTarget => Some(chart.metric_at(target).ok()?),
    };
    let dist = |x: &[f64]| -> f64 {
        let d: Vec<f64> = x.iter().zip(target).map(|(a, b)| a - b).collect();
        match &metric {
            None => d.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Some(g) => {
                let n = d.len();
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += g[(i, j)] * d[i] * d[j];
                    }
                }
                s.max(0.0).sqrt()
            }
        }
    };
    let mut positions = trajectory.real_positions();
    let d0 = dist(&positions.next()?);
    Some(
        std::iter::once(if d0 > 0.0 { 1.0 } else { 0.0 })
            .chain(positions.map(|x| if d0 > 0.0 { dist(&x) / d0 } else { 0.0 }))
            .collect(),
    )
}

/// First time the distance ratio drops to `epsilon_star`, linearly
/// interpolated between the bracketing samples. `None` when it never does
/// or when `epsilon_star` is outside `(0, 1)`.
pub fn detect_t_star(
    trajectory: &Trajectory,
    target: &[f64],
    epsilon_star: f64,
    chart: &MetricChart,
    norm: StarNorm,
) -> Option<f64> {
    if !(epsilon_star > 0.0 && epsilon_star < 1.0) {
        return None;
    }
    let ratios = distance_ratios(trajectory, target, chart, norm)?;
    first_crossing(&trajectory.times, &ratios, epsilon_star)
}

pub(crate) fn first_crossing(times: &[f64], ratios: &[f64], level: f64) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for (&t, &r) in times.iter().zip(ratios) {
        if r <= level {
            return Some(match prev {
                Some((t0, r0)) if r0 > r => t0 + (t - t0) * (r0 - level) / (r0 - r),
                _ => t,
            });
        }
        prev = Some((t, r));
    }
    None
}

/// Critically damped lower bound on `t*` and the friction that attains it.
pub fn convergence_bound(lambda_eff: f64, eta: f64, mass: f64, epsilon_star: f64) -> Result<(f64, f64)> {
    if !(lambda_eff > 0.0 && lambda_eff.is_finite()) {
        return Err(Error::Parameter(format!("lambda_eff must be positive, got {lambda_eff}")));
    }
    if !(eta > 0.0 && mass > 0.0) {
        return Err(Error::Parameter(format!("eta and mass must be positive, got {eta}, {mass}")));
    }
    let rate = (eta * lambda_eff / mass).sqrt();
    Ok((envelope_factor(epsilon_star)? / rate, rate))
}

/// Detected convergence time against its lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub t_star: Option<f64>,
    pub epsilon_star: f64,
    pub bound: f64,
    /// `t* ≥ (1 − BOUND_SLACK) · bound`; false when `t*` was not reached.
    pub satisfied: bool,
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl ConvergenceReport {
    pub fn new(trajectory: &Trajectory, target: &[f64], epsilon_star: f64, bound: f64, chart: &MetricChart, norm: StarNorm) -> Self {
        let ratios = distance_ratios(trajectory, target, chart, norm).unwrap_or_default();
        let t_star = if epsilon_star > 0.0 && epsilon_star < 1.0 {
            first_crossing(&trajectory.times, &ratios, epsilon_star)
        } else {
            None
        };
        ConvergenceReport {
            t_star,
            epsilon_star,
            bound,
            satisfied: t_star.is_some_and(|t| t >= (1.0 - BOUND_SLACK) * bound),
            times: trajectory.times.clone(),
            ratios,
        }
    }
}
