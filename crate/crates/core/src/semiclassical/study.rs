use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eom::{default_ode_step, integrate_eom, EomOptions, SemiclassicalState, Trajectory, VeffTerms};
use super::{convergence_bound, distance_ratios, first_crossing, StarNorm, BOUND_SLACK};
use crate::discretize::PotentialField;
use crate::error::{Error, Result};
use crate::evolve::Schedule;
use crate::geometry::{Domain, MetricChart, Pole};

/// Distance of the starting point from the optimum, in units of `R`.
const START_OFFSET: f64 = 0.1;
/// Spacing of stored curve samples.
const CURVE_SPACING: f64 = 0.01;
/// Length of each integration window; runs stop once they converge.
const WINDOW: f64 = 10.0;

/// `A = Qᵀ diag(1, 4, …, N²) Q` on the sphere of radius `R` in `R^N`, with
/// its minimiser and a starting chart point on the south stereographic chart.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub dim: usize,
    pub radius: f64,
    pub matrix: DMatrix<f64>,
    pub x_star: Vec<f64>,
    pub v_star: Vec<f64>,
    pub v0: Vec<f64>,
}

impl RandomInstance {
    /// Instance `index` of the stream seeded by `seed`.
    pub fn generate(dim: usize, radius: f64, seed: u64, index: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Parameter(format!("instance dimension must be >= 2, got {dim}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let gauss = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
        let qr = gauss.qr();
        let r = qr.r();
        let mut q = qr.q();
        for (j, mut col) in q.column_iter_mut().enumerate() {
            if r[(j, j)] < 0.0 {
                col.neg_mut();
            }
        }
        let spectrum = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |i, _| ((i + 1) * (i + 1)) as f64));
        let matrix = q.transpose() * spectrum * &q;
        let matrix = (&matrix + matrix.transpose()) * 0.5;

        // Aᵀ-eigenvectors are the rows of Q; row 0 carries eigenvalue 1.
        let mut x_star: Vec<f64> = q.row(0).iter().map(|x| x * radius).collect();
        if x_star[dim - 1] < 0.0 {
            x_star.iter_mut().for_each(|x| *x = -*x);
        }
        let chart = MetricChart::sphere(Pole::South, dim, radius)?;
        let v_star = chart.project(&x_star)?;

        let mut dir: Vec<f64> = (0..dim - 1).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|x| *x /= norm);
        let v0 = v_star.iter().zip(&dir).map(|(v, d)| v + START_OFFSET * radius * d).collect();
        Ok(RandomInstance {
            dim,
            radius,
            matrix,
            x_star,
            v_star,
            v0,
        })
    }
}

/// Settings of a random-instance study on the south stereographic chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub dim: usize,
    pub gammas: Vec<f64>,
    pub instances: usize,
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon_star: f64,
    /// Spectral gap `λ₂ − λ₁` of `A` used for the bound.
    #[serde(default = "default_lambda")]
    pub lambda_eff: f64,
    #[serde(default)]
    pub corrections: VeffTerms,
    /// Fixed horizon; by default five e-foldings of the slowest mode.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    /// Half-width of the chart box; defaults to the radius.
    #[serde(default)]
    pub domain_half_width: Option<f64>,
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_lambda() -> f64 {
    3.0
}

impl StudyConfig {
    pub fn new(dim: usize, gammas: Vec<f64>, instances: usize, seed: u64) -> Self {
        StudyConfig {
            dim,
            gammas,
            instances,
            seed,
            epsilon_star: default_epsilon(),
            lambda_eff: default_lambda(),
            corrections: VeffTerms::ALL,
            t_end: None,
            dt: None,
            domain_half_width: None,
        }
    }

    /// Horizon for friction `gamma`: long enough for the slowest linear
    /// mode to decay by `epsilon_star` several times over.
    pub fn horizon(&self, gamma: f64) -> f64 {
        if let Some(t) = self.t_end {
            return t;
        }
        let omega2 = self.lambda_eff;
        let rate = if gamma * gamma <= omega2 {
            gamma
        } else {
            gamma - (gamma * gamma - omega2).sqrt()
        };
        let decay = (1.0 / self.epsilon_star).ln();
        (5.0 * decay / rate.max(1e-3)).max(4.0 * decay / omega2.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    NotConverged,
    DomainExit,
    BlowUp,
}

/// One `(instance, γ)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: usize,
    pub gamma: f64,
    pub t_star: Option<f64>,
    pub bound: f64,
    pub satisfied: Option<bool>,
    pub status: RunStatus,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub bound: f64,
    pub gamma_opt: f64,
    pub runs: Vec<RunRecord>,
    /// Share of converged runs whose `t*` respects the bound.
    pub fraction_satisfied: f64,
    pub converged: usize,
    pub not_converged: usize,
    /// Runs that left the chart or blew up; excluded from the fraction.
    pub excluded: usize,
    /// `min t* / bound` over converged runs.
    pub min_ratio_to_bound: Option<f64>,
}

impl StudyReport {
    /// `study.csv` plus one `curves/<instance>_<gamma>.csv` per run.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("curves"))?;
        let mut csv = fs::File::create(dir.join("study.csv"))?;
        writeln!(csv, "instance,gamma,t_star,bound,satisfied,status")?;
        for r in &self.runs {
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                r.instance,
                r.gamma,
                r.t_star.map_or(String::new(), |t| t.to_string()),
                r.bound,
                r.satisfied.map_or(String::new(), |s| s.to_string()),
                serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
            )?;
            let mut curve = fs::File::create(dir.join("curves").join(format!("{}_{}.csv", r.instance, r.gamma)))?;
            writeln!(curve, "t,ratio")?;
            for (t, q) in r.times.iter().zip(&r.ratios) {
                writeln!(curve, "{t},{q:e}")?;
            }
        }
        Ok(())
    }
}

/// Integrates every `(instance, γ)` pair on the south chart of the unit
/// sphere with `m = η = 1` and compares the detected `t*` with the bound.
pub fn run_appendix_c_study(config: &StudyConfig) -> Result<StudyReport> {
    if config.dim < 2 {
        return Err(Error::Parameter(format!("study dimension must be >= 2, got {}", config.dim)));
    }
    if config.gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::Parameter("study gammas must be positive".into()));
    }
    let (radius, mass, eta) = (1.0, 1.0, 1.0);
    let (bound, gamma_opt) = convergence_bound(config.lambda_eff, eta, mass, config.epsilon_star)?;
    let half = config.domain_half_width.unwrap_or(radius);
    let chart = MetricChart::sphere_on(Pole::South, config.dim, radius, Domain::symmetric(config.dim - 1, half))?;
    let instances: Vec<RandomInstance> = (0..config.instances)
        .map(|i| RandomInstance::generate(config.dim, radius, config.seed, i as u64))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64)> = (0..config.instances)
        .flat_map(|i| config.gammas.iter().map(move |&g| (i, g)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, gamma)| run_one(&chart, &instances[i], i, gamma, eta, mass, bound, config))
        .collect::<Result<Vec<_>>>()?;

    let converged: Vec<&RunRecord> = runs.iter().filter(|r| r.status == RunStatus::Converged).collect();
    let satisfied = converged.iter().filter(|r| r.satisfied == Some(true)).count();
    let not_converged = runs.iter().filter(|r| r.status == RunStatus::NotConverged).count();
    let min_ratio = converged
        .iter()
        .filter_map(|r| r.t_star)
        .map(|t| t / bound)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));
    Ok(StudyReport {
        config: config.clone(),
        bound,
        gamma_opt,
        fraction_satisfied: if converged.is_empty() {
            0.0
        } else {
            satisfied as f64 / converged.len() as f64
        },
        converged: converged.len(),
        not_converged,
        excluded: runs.len() - converged.len() - not_converged,
        min_ratio_to_bound: min_ratio,
        runs,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    chart: &MetricChart,
    instance: &RandomInstance,
    index: usize,
    gamma: f64,
    eta: f64,
    mass: f64,
    bound: f64,
    config: &StudyConfig,
) -> Result<RunRecord> {
    let potential = PotentialField::sphere_quadratic(chart, mass, instance.matrix.clone())?;
    let t_end = config.horizon(gamma);
    let dt = config.dt.unwrap_or_else(|| default_ode_step(gamma));
    let schedule = Schedule::exponential(gamma, eta, t_end, dt)?;
    let options = EomOptions {
        mass,
        corrections: config.corrections,
        dt: Some(dt),
        record_every: ((CURVE_SPACING / dt).round() as usize).max(1),
    };
    let mut record = RunRecord {
        instance: index,
        gamma,
        t_star: None,
        bound,
        satisfied: None,
        status: RunStatus::NotConverged,
        times: Vec::new(),
        ratios: Vec::new(),
    };
    let mut whole = Trajectory::default();
    let mut state = SemiclassicalState::at_rest(&instance.v0);
    if !chart.domain().contains(&instance.v0) {
        record.status = RunStatus::DomainExit;
        return Ok(record);
    }
    while state.time < t_end {
        let stop = (state.time + WINDOW).min(t_end);
        let part = match integrate_eom(chart, &potential, &schedule, &state, stop, &options) {
            Ok(p) => p,
            Err(Error::DomainExit { .. }) => {
                record.status = RunStatus::DomainExit;
                break;
            }
            Err(Error::BlowUp { .. }) => {
                record.status = RunStatus::BlowUp;
                break;
            }
            Err(e) => return Err(e),
        };
        let skip = usize::from(!whole.is_empty());
        whole.times.extend_from_slice(&part.times[skip..]);
        whole.positions.extend_from_slice(&part.positions[skip..]);
        whole.velocities.extend_from_slice(&part.velocities[skip..]);
        state = part.last().expect("integration returns at least one sample");
        let ratios = distance_ratios(&whole, &instance.v_star, chart, StarNorm::Euclid).unwrap_or_default();
        if let Some(t) = first_crossing(&whole.times, &ratios, config.epsilon_star) {
            record.t_star = Some(t);
            record.satisfied = Some(t >= (1.0 - BOUND_SLACK) * bound);
            record.status = RunStatus::Converged;
            break;
        }
    }
    record.ratios = distance_ratios(&whole, &instance.v_star, chart, StarNorm::Euclid).unwrap_or_default();
    record.times = whole.times;
    Ok(record)
}
