//! TOML experiment descriptions shared by the CLI and the bundled demos.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::discretize::{Grid, PotentialField};
use crate::error::{Error, Result};
use crate::evolve::{EvolveOptions, InitialState, Schedule};
use crate::geometry::{ChartKind, Domain, MetricChart, Pole};
use crate::semiclassical::VeffTerms;

pub const DEFAULT_DT: f64 = 0.02;

/// One evolution experiment, possibly run on several charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub mass: f64,
    pub charts: Vec<ChartSpec>,
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    pub schedule: ScheduleSpec,
    pub initial: InitialState,
    #[serde(default)]
    pub sample_times: Vec<f64>,
    #[serde(default)]
    pub weyl_correction: bool,
    #[serde(default)]
    pub veff: VeffTerms,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub label: String,
    #[serde(flatten)]
    pub kind: ChartSpecKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartSpecKind {
    Flat {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Constant {
        metric: Vec<Vec<f64>>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Sphere {
        pole: Pole,
        ambient_dim: usize,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<Vec<f64>>,
    },
}

/// `V = (m/2) xᵀ A x`, pulled back through the embedding on sphere charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Quadratic { matrix: Vec<Vec<f64>> },
    Builtin { name: BuiltinPotential },
}

/// Matrices of the two bundled demos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinPotential {
    /// `[[1, −0.9], [−0.9, 1]]`.
    Shear,
    /// Rayleigh quotient on `S²` with minimiser `(1/2, 1/2, 1/√2)`.
    Rayleigh,
}

impl BuiltinPotential {
    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            BuiltinPotential::Shear => DMatrix::from_row_slice(2, 2, &[1.0, -0.9, -0.9, 1.0]),
            BuiltinPotential::Rayleigh => {
                let s = -std::f64::consts::FRAC_1_SQRT_2;
                DMatrix::from_row_slice(3, 3, &[1.0, 0.0, s, 0.0, 1.0, s, s, s, 1.0])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    /// `a(t) = e^{2γt}`.
    pub gamma: f64,
    pub eta: f64,
    /// Defaults to `6/γ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl ScheduleSpec {
    pub fn t_end(&self) -> Result<f64> {
        match self.t_end {
            Some(t) => Ok(t),
            None if self.gamma > 0.0 => Ok(6.0 / self.gamma),
            None => Err(Error::Config("t_end is required when gamma = 0".into())),
        }
    }

    pub fn build(&self) -> Result<Schedule> {
        Schedule::exponential(self.gamma, self.eta, self.t_end()?, self.dt.unwrap_or(DEFAULT_DT))
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("matrices must be square and non-empty".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    if (0..n).any(|i| (0..i).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * m.amax().max(1.0))) {
        return Err(Error::Config("matrices must be symmetric".into()));
    }
    Ok(m)
}

impl ChartSpec {
    pub fn build(&self) -> Result<MetricChart> {
        match &self.kind {
            ChartSpecKind::Flat { lo, hi } => MetricChart::flat(lo.len(), Domain::new(lo.clone(), hi.clone())?),
            ChartSpecKind::Constant { metric, lo, hi } => {
                MetricChart::constant(matrix_from_rows(metric)?, Domain::new(lo.clone(), hi.clone())?)
            }
            ChartSpecKind::Sphere {
                pole,
                ambient_dim,
                radius,
                lo,
                hi,
            } => match (lo, hi) {
                (None, None) => MetricChart::sphere(*pole, *ambient_dim, *radius),
                (Some(lo), Some(hi)) => {
                    MetricChart::sphere_on(*pole, *ambient_dim, *radius, Domain::new(lo.clone(), hi.clone())?)
                }
                _ => Err(Error::Config(format!("chart {}: give both lo and hi or neither", self.label))),
            },
        }
    }
}

impl PotentialSpec {
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        match self {
            PotentialSpec::Quadratic { matrix } => matrix_from_rows(matrix),
            PotentialSpec::Builtin { name } => Ok(name.matrix()),
        }
    }

    pub fn build(&self, chart: &MetricChart, mass: f64) -> Result<PotentialField> {
        let matrix = self.matrix()?;
        match chart.kind() {
            ChartKind::SphereStereo { .. } => PotentialField::sphere_quadratic(chart, mass, matrix),
            _ if matrix.nrows() == chart.dim() => PotentialField::quadratic(mass, matrix),
            _ => Err(Error::Config(format!(
                "potential matrix is {}x{} but the chart has dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                chart.dim()
            ))),
        }
    }
}

/// Chart, grid and potential ready for one evolution.
pub struct Prepared {
    pub label: String,
    pub chart: MetricChart,
    pub grid: Grid,
    pub potential: PotentialField,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds every chart and checks the pieces fit together, so bad input
    /// is rejected before any output is written.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        if self.charts.is_empty() {
            return Err(Error::Config("at least one chart is required".into()));
        }
        if !(self.mass > 0.0) {
            return Err(Error::Config(format!("mass must be positive, got {}", self.mass)));
        }
        let schedule = self.schedule.build().map_err(wrap)?;
        if let Some(t) = self.sample_times.iter().find(|t| !(**t >= 0.0 && **t <= schedule.t_end())) {
            return Err(Error::Config(format!("sample time {t} lies outside [0, t_end]")));
        }
        self.potential.matrix().map_err(wrap)?;
        let mut labels = std::collections::HashSet::new();
        for spec in &self.charts {
            if !labels.insert(spec.label.as_str()) {
                return Err(Error::Config(format!("duplicate chart label {}", spec.label)));
            }
            let chart = spec.build().map_err(wrap)?;
            if self.grid.nodes.len() != chart.dim() {
                return Err(Error::Config(format!(
                    "grid has {} axes but chart {} has dimension {}",
                    self.grid.nodes.len(),
                    spec.label,
                    chart.dim()
                )));
            }
            Grid::new(chart.domain().clone(), &self.grid.nodes).map_err(wrap)?;
            self.potential.build(&chart, self.mass).map_err(wrap)?;
        }
        Ok(())
    }

    pub fn prepare(&self) -> Result<Vec<Prepared>> {
        self.charts
            .iter()
            .map(|spec| {
                let chart = spec.build()?;
                let grid = Grid::new(chart.domain().clone(), &self.grid.nodes)?;
                let potential = self.potential.build(&chart, self.mass)?;
                Ok(Prepared {
                    label: spec.label.clone(),
                    chart,
                    grid,
                    potential,
                })
            })
            .collect()
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        let mut options = EvolveOptions::new(self.mass);
        options.include_weyl_correction = self.weyl_correction;
        options.sample_times = self.sample_times.clone();
        options
    }

    /// Copy with every defaulted field spelled out.
    pub fn effective(mut self) -> Result<Self> {
        self.schedule.t_end = Some(self.schedule.t_end()?);
        self.schedule.dt = Some(self.schedule.dt.unwrap_or(DEFAULT_DT));
        for spec in &mut self.charts {
            if let ChartSpecKind::Sphere { radius, lo, hi, .. } = &mut spec.kind {
                if lo.is_none() && hi.is_none() {
                    let n = self.grid.nodes.len();
                    *lo = Some(vec![-*radius; n]);
                    *hi = Some(vec![*radius; n]);
                }
            }
        }
        Ok(self)
    }

    /// Same experiment with a different random seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let InitialState::Random { seed: s, .. } = &mut self.initial {
            *s = seed;
        }
        self
    }
}

/// Bundled experiment descriptions.
pub mod bundled {
    pub const FLAT_DEMO: &str = include_str!("../configs/flat_demo.toml");
    pub const SPHERE_DEMO: &str = include_str!("../configs/sphere_demo.toml");
    pub const STUDY_N5: &str = include_str!("../configs/study_n5.toml");
    pub const STUDY_N9: &str = include_str!("../configs/study_n9.toml");

    pub fn by_name(name: &str) -> Option<&'static str> {
        match name {
            "flat_demo" => Some(FLAT_DEMO),
            "sphere_demo" => Some(SPHERE_DEMO),
            "study_n5" => Some(STUDY_N5),
            "study_n9" => Some(STUDY_N9),
            _ => None,
        }
    }
}
