use std::cell::RefCell;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretize::PotentialField;
use crate::error::{Error, Result};
use crate::evolve::Schedule;
use crate::geometry::{fd, ConformalFactor, MetricChart};

const CORRECTION_STEP: f64 = 1e-5;

/// Mean position and velocity of the semiclassical wave packet.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiclassicalState {
    pub position: Vec<Complex64>,
    pub velocity: Vec<Complex64>,
    pub time: f64,
}

impl SemiclassicalState {
    /// Real starting point with zero velocity at `t = 0`.
    pub fn at_rest(point: &[f64]) -> Self {
        SemiclassicalState {
            position: point.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            velocity: vec![Complex64::new(0.0, 0.0); point.len()],
            time: 0.0,
        }
    }

    pub fn real_position(&self) -> Vec<f64> {
        self.position.iter().map(|z| z.re).collect()
    }

    fn is_finite(&self) -> bool {
        self.position.iter().chain(&self.velocity).all(|z| z.is_finite())
    }
}

/// Which correction terms of the effective potential are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VeffTerms {
    /// `(ΔV + ΔV')/(η a²)`.
    pub curvature: bool,
    /// `−(i/(η a)) log √g`.
    pub volume: bool,
}

impl VeffTerms {
    pub const ALL: VeffTerms = VeffTerms {
        curvature: true,
        volume: true,
    };
    pub const NONE: VeffTerms = VeffTerms {
        curvature: false,
        volume: false,
    };

    pub fn any(&self) -> bool {
        self.curvature || self.volume
    }
}

impl Default for VeffTerms {
    fn default() -> Self {
        VeffTerms::ALL
    }
}

impl From<bool> for VeffTerms {
    fn from(on: bool) -> Self {
        if on {
            VeffTerms::ALL
        } else {
            VeffTerms::NONE
        }
    }
}

/// Integration settings for [`integrate_eom`].
#[derive(Debug, Clone)]
pub struct EomOptions {
    pub mass: f64,
    pub corrections: VeffTerms,
    /// Fixed RK4 step; `None` picks [`default_ode_step`].
    pub dt: Option<f64>,
    /// Keep every `record_every`-th step (the final state is always kept).
    pub record_every: usize,
}

impl EomOptions {
    pub fn new(mass: f64, corrections: impl Into<VeffTerms>) -> Self {
        EomOptions {
            mass,
            corrections: corrections.into(),
            dt: None,
            record_every: 1,
        }
    }
}

/// `min(1e-3, 0.05/γ)`.
pub fn default_ode_step(gamma: f64) -> f64 {
    if gamma > 0.0 {
        (0.05 / gamma).min(1e-3)
    } else {
        1e-3
    }
}

/// Sampled solution of the equations of motion.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<Complex64>>,
    pub velocities: Vec<Vec<Complex64>>,
}

impl Trajectory {
    fn push(&mut self, s: &SemiclassicalState) {
        self.times.push(s.time);
        self.positions.push(s.position.clone());
        self.velocities.push(s.velocity.clone());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn real_positions(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.positions.iter().map(|p| p.iter().map(|z| z.re).collect())
    }

    pub fn last(&self) -> Option<SemiclassicalState> {
        Some(SemiclassicalState {
            position: self.positions.last()?.clone(),
            velocity: self.velocities.last()?.clone(),
            time: *self.times.last()?,
        })
    }
}

/// Geometric data at a real point, specialised for conformal charts.
enum LocalGeometry {
    Flat(Option<DMatrix<f64>>),
    Conformal { inv_factor: f64, log_grad: Vec<f64> },
    General {
        g_inv: DMatrix<f64>,
        gamma: crate::geometry::Christoffel,
    },
}

impl LocalGeometry {
    fn at(chart: &MetricChart, point: &[f64]) -> Result<Self> {
        if chart.is_constant() {
            let g_inv = match chart.kind() {
                crate::geometry::ChartKind::Flat => None,
                _ => Some(chart.inverse_metric_at(point)?),
            };
            return Ok(LocalGeometry::Flat(g_inv));
        }
        if let Some(c) = chart.conformal_factor() {
            return Ok(LocalGeometry::Conformal {
                inv_factor: 1.0 / c.factor(point),
                log_grad: c.log_gradient(point),
            });
        }
        Ok(LocalGeometry::General {
            g_inv: chart.inverse_metric_at(point)?,
            gamma: chart.christoffel(point)?,
        })
    }

    fn raise(&self, covector: &[Complex64]) -> Vec<Complex64> {
        match self {
            LocalGeometry::Flat(None) => covector.to_vec(),
            LocalGeometry::Flat(Some(g_inv)) | LocalGeometry::General { g_inv, .. } => {
                let n = covector.len();
                (0..n)
                    .map(|i| (0..n).map(|j| covector[j] * g_inv[(i, j)]).sum())
                    .collect()
            }
            LocalGeometry::Conformal { inv_factor, .. } => covector.iter().map(|c| c * *inv_factor).collect(),
        }
    }

    /// `Γ^i_{jk} w^j w^k` for a complex velocity (bilinear, not Hermitian).
    fn geodesic_term(&self, w: &[Complex64]) -> Vec<Complex64> {
        let n = w.len();
        match self {
            LocalGeometry::Flat(_) => vec![Complex64::new(0.0, 0.0); n],
            LocalGeometry::Conformal { log_grad, .. } => {
                let dw: Complex64 = log_grad.iter().zip(w).map(|(d, x)| x * *d).sum();
                let ww: Complex64 = w.iter().map(|x| x * x).sum();
                (0..n).map(|i| w[i] * dw - ww * (0.5 * log_grad[i])).collect()
            }
            LocalGeometry::General { gamma, .. } => (0..n)
                .map(|i| {
                    let mut s = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        for k in 0..n {
                            s += w[j] * w[k] * gamma.get(i, j, k);
                        }
                    }
                    s
                })
                .collect(),
        }
    }
}

/// `ΔV + ΔV'` at a real point.
fn correction_field(chart: &MetricChart, conformal: Option<ConformalFactor>, point: &[f64], mass: f64) -> Result<f64> {
    let b = match conformal {
        Some(c) => c.curvature(point, mass),
        None => chart.curvature(point, mass)?,
    };
    Ok(b.delta_v + b.delta_v_prime)
}

/// Gradient of the effective potential
/// `V + (ΔV + ΔV')/(η a²) − (i/(η a)) log √g` at a real point, or of `V`
/// alone when no correction is selected.
pub fn effective_potential_gradient(
    chart: &MetricChart,
    potential: &PotentialField,
    point: &[f64],
    schedule: &Schedule,
    t: f64,
    mass: f64,
    corrections: impl Into<VeffTerms>,
) -> Result<Vec<Complex64>> {
    let terms = corrections.into();
    if point.len() != chart.dim() || potential.dim() != chart.dim() {
        return Err(Error::Parameter("point, potential and chart dimensions differ".into()));
    }
    let grad: Vec<Complex64> = potential.gradient(point).into_iter().map(|g| Complex64::new(g, 0.0)).collect();
    if !terms.any() {
        return Ok(grad);
    }
    let eta = schedule.eta(t);
    if !(eta > 0.0) {
        return Err(Error::Schedule(format!("eta({t}) = {eta}; the corrected potential needs eta > 0")));
    }
    if chart.is_constant() {
        return Ok(grad);
    }
    let a = schedule.a_checked(t)?;
    let conformal = chart.conformal_factor();
    let steps: Vec<f64> = (0..chart.dim()).map(|k| CORRECTION_STEP * chart.domain().width(k)).collect();
    let failure = RefCell::new(None);
    let corr_grad = fd::gradient(
        |p| {
            correction_field(chart, conformal, p, mass).unwrap_or_else(|e| {
                *failure.borrow_mut() = Some(e);
                f64::NAN
            })
        },
        point,
        &steps,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let log_sqrt_g_grad = match conformal {
        Some(c) => {
            let n = chart.dim() as f64;
            c.log_gradient(point).into_iter().map(|x| 0.5 * n * x).collect()
        }
        None => chart.christoffel(point)?.trace(),
    };
    let real_scale = if terms.curvature { 1.0 / (eta * a * a) } else { 0.0 };
    let imag_scale = if terms.volume { 1.0 / (eta * a) } else { 0.0 };
    Ok(grad
        .iter()
        .zip(corr_grad.iter().zip(&log_sqrt_g_grad))
        .map(|(g, (c, l))| g + Complex64::new(c * real_scale, -l * imag_scale))
        .collect())
}

struct Rhs<'a> {
    chart: &'a MetricChart,
    potential: &'a PotentialField,
    schedule: &'a Schedule,
    options: &'a EomOptions,
}

impl Rhs<'_> {
    fn acceleration(&self, t: f64, position: &[Complex64], velocity: &[Complex64]) -> Result<Vec<Complex64>> {
        let re: Vec<f64> = position.iter().map(|z| z.re).collect();
        let geometry = LocalGeometry::at(self.chart, &re)?;
        let force = effective_potential_gradient(
            self.chart,
            self.potential,
            &re,
            self.schedule,
            t,
            self.options.mass,
            self.options.corrections,
        )?;
        let natural = geometry.raise(&force);
        let geodesic = geometry.geodesic_term(velocity);
        let friction = self.schedule.friction(t);
        let pull = self.schedule.eta(t) / self.options.mass;
        Ok((0..re.len())
            .map(|i| -geodesic[i] - velocity[i] * friction - natural[i] * pull)
            .collect())
    }
}

fn axpy(base: &[Complex64], scale: f64, dir: &[Complex64]) -> Vec<Complex64> {
    base.iter().zip(dir).map(|(b, d)| b + d * scale).collect()
}

/// Integrates
/// `v̈ + Γ(v)(v̇, v̇) + (ȧ/a) v̇ + (η/m) g⁻¹(v) ∇V_eff(v) = 0`
/// with classical RK4 at a fixed step. Geometry is evaluated at the real
/// part of the position.
pub fn integrate_eom(
    chart: &MetricChart,
    potential: &PotentialField,
    schedule: &Schedule,
    initial: &SemiclassicalState,
    t_end: f64,
    options: &EomOptions,
) -> Result<Trajectory> {
    let n = chart.dim();
    if initial.position.len() != n || initial.velocity.len() != n || potential.dim() != n {
        return Err(Error::Parameter("state, potential and chart dimensions differ".into()));
    }
    if !(options.mass > 0.0) {
        return Err(Error::Parameter(format!("mass must be positive, got {}", options.mass)));
    }
    if !(t_end >= initial.time) {
        return Err(Error::Parameter(format!("t_end {t_end} precedes the initial time {}", initial.time)));
    }
    if !chart.domain().contains(&initial.real_position()) {
        return Err(Error::Domain {
            point: initial.real_position(),
        });
    }
    let dt_nominal = options.dt.unwrap_or_else(|| default_ode_step(schedule.gamma()));
    if !(dt_nominal > 0.0) {
        return Err(Error::Parameter(format!("ODE step must be positive, got {dt_nominal}")));
    }
    let span = t_end - initial.time;
    let steps = ((span / dt_nominal).ceil() as usize).max(1);
    let dt = span / steps as f64;
    let every = options.record_every.max(1);

    let rhs = Rhs {
        chart,
        potential,
        schedule,
        options,
    };
    let mut state = initial.clone();
    let mut out = Trajectory::default();
    out.push(&state);
    for step in 1..=steps {
        let t = state.time;
        let (x, v) = (&state.position, &state.velocity);
        let stage = |tt: f64, xx: &[Complex64], vv: &[Complex64]| -> Result<Vec<Complex64>> {
            rhs.acceleration(tt, xx, vv).map_err(|e| exit_error(e, &state))
        };
        let a1 = stage(t, x, v)?;
        let x2 = axpy(x, 0.5 * dt, v);
        let v2 = axpy(v, 0.5 * dt, &a1);
        let a2 = stage(t + 0.5 * dt, &x2, &v2)?;
        let x3 = axpy(x, 0.5 * dt, &v2);
        let v3 = axpy(v, 0.5 * dt, &a2);
        let a3 = stage(t + 0.5 * dt, &x3, &v3)?;
        let x4 = axpy(x, dt, &v3);
        let v4 = axpy(v, dt, &a3);
        let a4 = stage(t + dt, &x4, &v4)?;
        let next = SemiclassicalState {
            position: (0..n)
                .map(|i| x[i] + (v[i] + (v2[i] + v3[i]) * 2.0 + v4[i]) * (dt / 6.0))
                .collect(),
            velocity: (0..n)
                .map(|i| v[i] + (a1[i] + (a2[i] + a3[i]) * 2.0 + a4[i]) * (dt / 6.0))
                .collect(),
            time: initial.time + step as f64 * dt,
        };
        if !next.is_finite() {
            return Err(Error::BlowUp { time: next.time });
        }
        if !chart.domain().contains(&next.real_position()) {
            return Err(Error::DomainExit {
                time: state.time,
                position: state.real_position(),
            });
        }
        state = next;
        if step % every == 0 || step == steps {
            out.push(&state);
        }
    }
    Ok(out)
}

/// RK4 stages may probe just outside the chart; report that as leaving it.
fn exit_error(e: Error, last: &SemiclassicalState) -> Error {
    match e {
        Error::Domain { .. } | Error::PoleSingularity { .. } => Error::DomainExit {
            time: last.time,
            position: last.real_position(),
        },
        other => other,
    }
}
