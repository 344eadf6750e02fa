//! Stereographic charts of the round sphere `|x| = R` in `R^N`.
//!
//! Both charts are conformally flat, `g = e^ξ δ` with
//! `e^ξ = 4 / (1 + |u|²/R²)²`, so all curvature quantities reduce to
//! derivatives of `ξ`.

use nalgebra::DMatrix;

use super::{Christoffel, CurvatureBundle, MetricJet, Pole};
use crate::error::{Error, Result};

/// The conformal factor `e^ξ` of a stereographic chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalFactor {
    pub radius: f64,
}

impl ConformalFactor {
    pub fn new(radius: f64) -> Self {
        ConformalFactor { radius }
    }

    fn s(&self, u: &[f64]) -> f64 {
        1.0 + norm2(u) / (self.radius * self.radius)
    }

    /// `e^ξ`.
    pub fn factor(&self, u: &[f64]) -> f64 {
        let s = self.s(u);
        4.0 / (s * s)
    }

    /// `∂_i ξ = −4 u_i / (R² s)`.
    pub fn log_gradient(&self, u: &[f64]) -> Vec<f64> {
        let r2 = self.radius * self.radius;
        let s = self.s(u);
        u.iter().map(|x| -4.0 * x / (r2 * s)).collect()
    }

    /// `∂_i ∂_j ξ`.
    pub fn log_hessian(&self, u: &[f64]) -> DMatrix<f64> {
        let n = u.len();
        let r2 = self.radius * self.radius;
        let s = self.s(u);
        DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { -4.0 / (r2 * s) } else { 0.0 };
            diag + 8.0 * u[i] * u[j] / (r2 * r2 * s * s)
        })
    }

    /// `Δξ = Σ_i ∂_i ∂_i ξ`.
    fn log_laplacian(&self, u: &[f64]) -> f64 {
        let n = u.len() as f64;
        let r2 = self.radius * self.radius;
        let s = self.s(u);
        -4.0 * n / (r2 * s) + 8.0 * norm2(u) / (r2 * r2 * s * s)
    }

    /// `Γ^i_{jk} = ½(δ^i_k ξ_j + δ^i_j ξ_k − δ_{jk} ξ_i)`.
    pub fn christoffel(&self, u: &[f64]) -> Christoffel {
        let n = u.len();
        let d = self.log_gradient(u);
        let mut gamma = Christoffel::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = 0.0;
                    if i == k {
                        v += d[j];
                    }
                    if i == j {
                        v += d[k];
                    }
                    if j == k {
                        v -= d[i];
                    }
                    gamma.set(i, j, k, 0.5 * v);
                }
            }
        }
        gamma
    }

    /// `Γ^i_{jk} w^j w^k = w^i (ξ·w) − ½|w|² ξ_i`, in O(N).
    pub fn christoffel_quadratic(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let d = self.log_gradient(u);
        let dw: f64 = d.iter().zip(w).map(|(a, b)| a * b).sum();
        let ww = norm2(w);
        (0..u.len()).map(|i| w[i] * dw - 0.5 * ww * d[i]).collect()
    }

    pub fn ricci_scalar(&self, u: &[f64]) -> f64 {
        let n = u.len() as f64;
        let grad2 = norm2(&self.log_gradient(u));
        -((n - 1.0) * self.log_laplacian(u) + (n - 1.0) * (n - 2.0) / 4.0 * grad2) / self.factor(u)
    }

    pub fn curvature(&self, u: &[f64], mass: f64) -> CurvatureBundle {
        let n = u.len() as f64;
        let d = self.log_gradient(u);
        let grad2 = norm2(&d);
        let inv_factor = 1.0 / self.factor(u);
        let ricci = self.ricci_scalar(u);
        let gamma_square = inv_factor * (2.0 - n) * grad2 / 4.0;
        CurvatureBundle {
            ricci_scalar: ricci,
            christoffel_trace: d.iter().map(|x| 0.5 * n * x).collect(),
            delta_v: (-ricci + gamma_square) / (8.0 * mass),
            delta_v_prime: inv_factor * 0.5 * n * self.log_laplacian(u) / (8.0 * mass),
        }
    }

    /// Analytic jet: `∂_k g = e^ξ ξ_k δ`, `∂_k∂_l g = e^ξ (ξ_k ξ_l + ξ_{kl}) δ`.
    pub fn jet(&self, u: &[f64]) -> Result<MetricJet> {
        let n = u.len();
        let f = self.factor(u);
        let d = self.log_gradient(u);
        let h = self.log_hessian(u);
        let id = DMatrix::<f64>::identity(n, n);
        Ok(MetricJet {
            g: &id * f,
            g_inv: &id / f,
            dg: d.iter().map(|dk| &id * (f * dk)).collect(),
            ddg: (0..n)
                .map(|k| (0..n).map(|l| &id * (f * (d[k] * d[l] + h[(k, l)]))).collect())
                .collect(),
        })
    }
}

fn norm2(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum()
}

fn pole_sign(pole: Pole) -> f64 {
    match pole {
        Pole::North => 1.0,
        Pole::South => -1.0,
    }
}

pub(super) fn embed(pole: Pole, radius: f64, u: &[f64]) -> Vec<f64> {
    let r2 = radius * radius;
    let q = norm2(u);
    let s = 1.0 + q / r2;
    let mut x: Vec<f64> = u.iter().map(|ui| 2.0 * ui / s).collect();
    x.push(pole_sign(pole) * radius * (q - r2) / (q + r2));
    x
}

pub(super) fn project(pole: Pole, radius: f64, x: &[f64]) -> Result<Vec<f64>> {
    let (last, rest) = x.split_last().expect("ambient point is non-empty");
    let denom = 1.0 - pole_sign(pole) * last / radius;
    if denom.abs() <= 1e-12 {
        return Err(Error::PoleSingularity { point: x.to_vec() });
    }
    Ok(rest.iter().map(|xi| xi / denom).collect())
}

/// `∂x^a/∂u^j`: `2δ/s − 4u_a u_j/(R² s²)` for the first `N−1` rows and
/// `±4u_j/(R s²)` for the last.
pub(super) fn embed_jacobian(pole: Pole, radius: f64, u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let r2 = radius * radius;
    let s = 1.0 + norm2(u) / r2;
    DMatrix::from_fn(n + 1, n, |a, j| {
        if a < n {
            let diag = if a == j { 2.0 / s } else { 0.0 };
            diag - 4.0 * u[a] * u[j] / (r2 * s * s)
        } else {
            pole_sign(pole) * 4.0 * u[j] / (radius * s * s)
        }
    })
}
