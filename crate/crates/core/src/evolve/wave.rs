use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretize::{node_weights, Grid};
use crate::error::{Error, Result};
use crate::geometry::MetricChart;

/// Initial-state family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Independent uniform magnitudes in `[0, 1)` and phases in `[0, 2π)`
    /// per node. A positive `correlation_length` smooths the draw with a
    /// Gaussian kernel of that width (in chart units) before normalizing.
    Random {
        seed: u64,
        #[serde(default)]
        correlation_length: f64,
    },
    /// `exp(−|x − center|² / (4 width²))`.
    Gaussian { center: Vec<f64>, width: f64 },
    Uniform,
}

/// Complex amplitudes on grid nodes with the `√g · Π h` quadrature weights.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    amplitudes: Vec<Complex64>,
    weights: Arc<Vec<f64>>,
    grid: Arc<Grid>,
}

impl WaveFunction {
    /// Wraps raw amplitudes; `weights` must be `√g · Π h` per node.
    pub fn from_parts(amplitudes: Vec<Complex64>, weights: Arc<Vec<f64>>, grid: Arc<Grid>) -> Result<Self> {
        if amplitudes.len() != grid.len() || weights.len() != grid.len() {
            return Err(Error::Parameter("amplitude, weight and grid sizes differ".into()));
        }
        Ok(WaveFunction {
            amplitudes,
            weights,
            grid,
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn weights(&self) -> &Arc<Vec<f64>> {
        &self.weights
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> Self {
        WaveFunction {
            amplitudes,
            weights: self.weights.clone(),
            grid: self.grid.clone(),
        }
    }

    /// `Σ √g |ψ|² Π h`.
    pub fn weighted_norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .zip(self.weights.iter())
            .map(|(a, w)| w * a.norm_sqr())
            .sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.weighted_norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Parameter("cannot normalize a zero or non-finite state".into()));
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    /// `⟨x^i⟩ = Σ √g x^i |ψ|² Π h / norm`.
    pub fn expectation_position(&self) -> Vec<f64> {
        let n = self.grid.dim();
        let mut acc = vec![0.0; n];
        let mut total = 0.0;
        let mut x = vec![0.0; n];
        for (idx, (a, w)) in self.amplitudes.iter().zip(self.weights.iter()).enumerate() {
            let p = w * a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            self.grid.coord_into(idx, &mut x);
            total += p;
            for (s, xi) in acc.iter_mut().zip(&x) {
                *s += p * xi;
            }
        }
        acc.iter().map(|s| s / total).collect()
    }

    /// `Σ √g |x − ⟨x⟩|² |ψ|² Π h / norm`.
    pub fn position_variance(&self) -> f64 {
        let mean = self.expectation_position();
        let mut x = vec![0.0; self.grid.dim()];
        let mut acc = 0.0;
        let mut total = 0.0;
        for (idx, (a, w)) in self.amplitudes.iter().zip(self.weights.iter()).enumerate() {
            let p = w * a.norm_sqr();
            self.grid.coord_into(idx, &mut x);
            total += p;
            acc += p * x.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        acc / total
    }

    /// `|ψ|²` per node.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|⟨self|other⟩|` in the weighted inner product.
    pub fn overlap(&self, other: &WaveFunction) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .zip(self.weights.iter())
            .map(|((a, b), w)| a.conj() * b * w)
            .sum::<Complex64>()
            .norm()
    }
}

/// Builds a normalized initial state with zero boundary values.
pub fn init_state(grid: &Grid, chart: &MetricChart, kind: &InitialState) -> Result<WaveFunction> {
    let weights = Arc::new(node_weights(chart, grid)?);
    let grid = Arc::new(grid.clone());
    let mut amps = vec![Complex64::new(0.0, 0.0); grid.len()];
    match kind {
        InitialState::Random {
            seed,
            correlation_length,
        } => {
            if !(*correlation_length >= 0.0 && correlation_length.is_finite()) {
                return Err(Error::Parameter(format!(
                    "correlation length must be >= 0, got {correlation_length}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for a in amps.iter_mut() {
                let r: f64 = rng.random();
                let phase: f64 = rng.random::<f64>() * 2.0 * PI;
                *a = Complex64::from_polar(r, phase);
            }
            if *correlation_length > 0.0 {
                for axis in 0..grid.dim() {
                    smooth_axis(&grid, &mut amps, axis, *correlation_length);
                }
            }
            for (idx, a) in amps.iter_mut().enumerate() {
                if grid.is_boundary(idx) {
                    *a = Complex64::new(0.0, 0.0);
                }
            }
        }
        InitialState::Gaussian { center, width } => {
            if !(*width > 0.0) {
                return Err(Error::Parameter(format!("gaussian width must be positive, got {width}")));
            }
            if center.len() != grid.dim() {
                return Err(Error::Parameter("gaussian centre has the wrong dimension".into()));
            }
            let mut x = vec![0.0; grid.dim()];
            for (idx, a) in amps.iter_mut().enumerate() {
                if grid.is_boundary(idx) {
                    continue;
                }
                grid.coord_into(idx, &mut x);
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                *a = Complex64::new((-d2 / (4.0 * width * width)).exp(), 0.0);
            }
        }
        InitialState::Uniform => {
            for (idx, a) in amps.iter_mut().enumerate() {
                if !grid.is_boundary(idx) {
                    *a = Complex64::new(1.0, 0.0);
                }
            }
        }
    }
    let mut psi = WaveFunction::from_parts(amps, weights, grid)?;
    psi.normalize()?;
    Ok(psi)
}

/// Gaussian convolution along one axis, truncated at four widths.
fn smooth_axis(grid: &Grid, amps: &mut [Complex64], axis: usize, width: f64) {
    let h = grid.spacing()[axis];
    let reach = ((4.0 * width / h).ceil() as usize).min(grid.nodes()[axis] - 1);
    let kernel: Vec<f64> = (0..=reach)
        .map(|k| (-0.5 * (k as f64 * h / width).powi(2)).exp())
        .collect();
    let n = grid.nodes()[axis];
    let stride = grid.stride(axis);
    let src = amps.to_vec();
    for (idx, out) in amps.iter_mut().enumerate() {
        let k0 = grid.axis_index(idx, axis);
        let base = idx - k0 * stride;
        let lo = k0.saturating_sub(reach);
        let hi = (k0 + reach).min(n - 1);
        *out = (lo..=hi)
            .map(|k| src[base + k * stride] * kernel[k.abs_diff(k0)])
            .sum();
    }
}
