//! Crank–Nicolson propagation of the curved-space Schrödinger equation.

mod io;
mod schedule;
pub(crate) mod solver;
mod wave;

use num_complex::Complex64;

use crate::discretize::{sqrt_det_field, Grid, HamiltonianParts, PotentialField, SparseOperator};
use crate::error::{Error, Result};
use crate::geometry::{ChartKind, MetricChart};

pub use io::{write_frames, write_trace_csv};
pub use schedule::{EtaLaw, ScaleLaw, Schedule, TimeFn};
pub use wave::{init_state, InitialState, WaveFunction};

use solver::{CayleySystem, RealCsr};

pub const DEFAULT_SOLVER_TOLERANCE: f64 = 1e-10;

/// One Crank–Nicolson step `(I + i dt/2 H) ψ' = (I − i dt/2 H) ψ` with `H`
/// assembled at the midpoint time. `H` must be real and weighted-symmetric
/// with respect to the state's quadrature weights.
pub fn crank_nicolson_step(psi: &WaveFunction, h_mid: &SparseOperator, dt: f64) -> Result<WaveFunction> {
    if h_mid.size() != psi.amplitudes().len() {
        return Err(Error::Parameter("operator and state sizes differ".into()));
    }
    if h_mid.entries().any(|(_, _, v)| v.im != 0.0) {
        return Err(Error::Parameter("Crank–Nicolson needs a real Hamiltonian".into()));
    }
    let weights = psi.weights();
    let sym = RealCsr::symmetrized(h_mid, weights);
    let zeros = vec![0.0; sym.size()];
    let system = CayleySystem {
        kinetic: &sym,
        scale: 1.0,
        diag: &zeros,
        tau: 0.5 * dt,
    };
    let y: Vec<Complex64> = psi
        .amplitudes()
        .iter()
        .zip(weights.iter())
        .map(|(a, w)| a * w.sqrt())
        .collect();
    let mut b = vec![Complex64::new(0.0, 0.0); y.len()];
    system.rhs(&y, &mut b);
    let mut next = y;
    system.solve(&b, &mut next, DEFAULT_SOLVER_TOLERANCE)?;
    let amps = next
        .into_iter()
        .zip(weights.iter())
        .map(|(v, w)| v / w.sqrt())
        .collect();
    Ok(psi.with_amplitudes(amps))
}

/// A dense `|ψ|²` snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub density: Vec<f64>,
}

/// Observables recorded after every step of an evolution.
#[derive(Debug, Clone, Default)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// `⟨x⟩` in chart coordinates, one row per time.
    pub mean_position: Vec<Vec<f64>>,
    /// `⟨x⟩` pushed to the ambient space for sphere charts.
    pub ambient_position: Option<Vec<Vec<f64>>>,
    pub norms: Vec<f64>,
    pub frames: Vec<Frame>,
    /// `√g` per node, so frames can be reweighted downstream.
    pub sqrt_det: Vec<f64>,
    /// Krylov iterations per step.
    pub solver_iterations: Vec<usize>,
}

impl EvolutionTrace {
    pub fn max_norm_drift(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    /// First time `|⟨x⟩ − target| ≤ fraction · |⟨x⟩(0) − target|`, linearly
    /// interpolated between samples.
    pub fn first_time_within(&self, target: &[f64], fraction: f64) -> Option<f64> {
        let dist = |x: &[f64]| x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let threshold = fraction * dist(self.mean_position.first()?);
        let mut prev: Option<(f64, f64)> = None;
        for (t, x) in self.times.iter().zip(&self.mean_position) {
            let d = dist(x);
            if d <= threshold {
                return Some(match prev {
                    Some((t0, d0)) if d0 > d => t0 + (t - t0) * (d0 - threshold) / (d0 - d),
                    _ => *t,
                });
            }
            prev = Some((*t, d));
        }
        None
    }

    pub fn final_position(&self) -> Option<&[f64]> {
        self.mean_position.last().map(|v| v.as_slice())
    }
}

/// Evolution settings beyond the schedule.
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub mass: f64,
    pub include_weyl_correction: bool,
    /// Times at which `|ψ|²` frames are captured (nearest step at or after).
    pub sample_times: Vec<f64>,
    pub solver_tolerance: f64,
}

impl EvolveOptions {
    pub fn new(mass: f64) -> Self {
        EvolveOptions {
            mass,
            include_weyl_correction: false,
            sample_times: Vec::new(),
            solver_tolerance: DEFAULT_SOLVER_TOLERANCE,
        }
    }
}

/// Propagates `initial` from `t = 0` to `schedule.t_end()`, re-evaluating
/// `H` at each step midpoint.
pub fn evolve(
    chart: &MetricChart,
    grid: &Grid,
    potential: &PotentialField,
    schedule: &Schedule,
    initial: &WaveFunction,
    options: &EvolveOptions,
) -> Result<EvolutionTrace> {
    let t_end = schedule.t_end();
    if let Some(t) = options.sample_times.iter().find(|&&t| !(0.0..=t_end + 1e-12).contains(&t)) {
        return Err(Error::Parameter(format!("sample time {t} outside [0, {t_end}]")));
    }
    if initial.amplitudes().len() != grid.len() {
        return Err(Error::Parameter("initial state does not live on this grid".into()));
    }
    let parts = HamiltonianParts::new(chart, grid, potential, options.mass, options.include_weyl_correction)?;
    let weights = initial.weights().clone();
    let kinetic = RealCsr::symmetrized(&parts.kinetic, &weights);
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();

    let sphere = matches!(chart.kind(), ChartKind::SphereStereo { .. });
    let mut trace = EvolutionTrace {
        ambient_position: sphere.then(Vec::new),
        sqrt_det: sqrt_det_field(chart, grid)?,
        ..Default::default()
    };
    let mut pending: Vec<f64> = options.sample_times.clone();
    pending.sort_by(|a, b| a.total_cmp(b));
    pending.dedup();
    let mut pending = pending.into_iter().peekable();

    let mut psi = initial.clone();
    let mut record = |t: f64, psi: &WaveFunction, trace: &mut EvolutionTrace| -> Result<()> {
        let mean = psi.expectation_position();
        if let Some(amb) = trace.ambient_position.as_mut() {
            amb.push(chart.embed(&mean)?);
        }
        trace.times.push(t);
        trace.mean_position.push(mean);
        trace.norms.push(psi.weighted_norm());
        while let Some(&ts) = pending.peek() {
            if ts > t + 1e-9 {
                break;
            }
            trace.frames.push(Frame {
                time: t,
                density: psi.density(),
            });
            pending.next();
        }
        Ok(())
    };
    record(0.0, &psi, &mut trace)?;

    let steps = schedule.steps();
    let dt = t_end / steps as f64;
    let n = grid.len();
    let mut y: Vec<Complex64> = psi.amplitudes().iter().zip(&sqrt_w).map(|(a, s)| a * s).collect();
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    for step in 0..steps {
        let t0 = step as f64 * dt;
        let t1 = if step + 1 == steps { t_end } else { t0 + dt };
        let (scale, diag) = parts.coefficients(schedule, 0.5 * (t0 + t1))?;
        let system = CayleySystem {
            kinetic: &kinetic,
            scale,
            diag: &diag,
            tau: 0.5 * (t1 - t0),
        };
        system.rhs(&y, &mut b);
        let iterations = system.solve(&b, &mut y, options.solver_tolerance)?;
        trace.solver_iterations.push(iterations);
        if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::BlowUp { time: t1 });
        }
        let amps = psi.amplitudes_mut();
        for k in 0..n {
            amps[k] = y[k] / sqrt_w[k];
        }
        record(t1, &psi, &mut trace)?;
    }
    Ok(trace)
}
