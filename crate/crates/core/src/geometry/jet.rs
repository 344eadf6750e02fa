use nalgebra::DMatrix;

use super::{Christoffel, CurvatureBundle};

/// Metric with first and second derivatives at one point. Every curvature
/// quantity below is assembled from these by index contraction only, so the
/// same code serves analytic and finite-difference charts.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `dg[k] = ∂_k g`.
    pub dg: Vec<DMatrix<f64>>,
    /// `ddg[k][l] = ∂_k ∂_l g`.
    pub ddg: Vec<Vec<DMatrix<f64>>>,
}

impl MetricJet {
    pub fn new(g: DMatrix<f64>, dg: Vec<DMatrix<f64>>, ddg: Vec<Vec<DMatrix<f64>>>) -> Result<Self, ()> {
        let g_inv = g.clone().cholesky().ok_or(())?.inverse();
        Ok(MetricJet { g, g_inv, dg, ddg })
    }

    pub(super) fn constant(g: DMatrix<f64>, g_inv: DMatrix<f64>) -> crate::Result<Self> {
        let n = g.nrows();
        let zero = DMatrix::zeros(n, n);
        Ok(MetricJet {
            g,
            g_inv,
            dg: vec![zero.clone(); n],
            ddg: vec![vec![zero; n]; n],
        })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// Lowered symbols `Γ_{ljk} = ½(∂_k g_{lj} + ∂_j g_{lk} − ∂_l g_{jk})`.
    fn lowered(&self, dg: &[DMatrix<f64>]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n * n];
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[(l * n + j) * n + k] = 0.5 * (dg[k][(l, j)] + dg[j][(l, k)] - dg[l][(j, k)]);
                }
            }
        }
        out
    }

    fn raise(&self, ginv: &DMatrix<f64>, lowered: &[f64]) -> Christoffel {
        let n = self.dim();
        let mut gamma = Christoffel::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s: f64 = (0..n).map(|l| ginv[(i, l)] * lowered[(l * n + j) * n + k]).sum();
                    gamma.set(i, j, k, s);
                }
            }
        }
        gamma
    }

    pub fn christoffel(&self) -> Christoffel {
        self.raise(&self.g_inv, &self.lowered(&self.dg))
    }

    /// `out[m] = ∂_m Γ`, using `∂_m g^{-1} = −g^{-1} (∂_m g) g^{-1}`.
    pub fn christoffel_derivatives(&self) -> Vec<Christoffel> {
        let n = self.dim();
        let low = self.lowered(&self.dg);
        (0..n)
            .map(|m| {
                let dginv = -(&self.g_inv * &self.dg[m] * &self.g_inv);
                let dlow = self.lowered(&self.ddg[m]);
                let a = self.raise(&dginv, &low);
                let b = self.raise(&self.g_inv, &dlow);
                let mut out = Christoffel::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            out.set(i, j, k, a.get(i, j, k) + b.get(i, j, k));
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// `R_{ij} = ∂_k Γ^k_{ij} − ∂_i Γ^k_{kj} + Γ^k_{km} Γ^m_{ij} − Γ^k_{im} Γ^m_{kj}`.
    pub fn ricci_tensor(&self) -> DMatrix<f64> {
        let n = self.dim();
        let gamma = self.christoffel();
        let dgamma = self.christoffel_derivatives();
        DMatrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for k in 0..n {
                s += dgamma[k].get(k, i, j) - dgamma[i].get(k, k, j);
                for m in 0..n {
                    s += gamma.get(k, k, m) * gamma.get(m, i, j) - gamma.get(k, i, m) * gamma.get(m, k, j);
                }
            }
            s
        })
    }

    pub fn ricci_scalar(&self) -> f64 {
        self.g_inv.component_mul(&self.ricci_tensor()).sum()
    }

    /// `g^{ij} Γ^k_{il} Γ^l_{jk}`.
    pub fn christoffel_square(&self) -> f64 {
        let n = self.dim();
        let gamma = self.christoffel();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let gij = self.g_inv[(i, j)];
                if gij == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        s += gij * gamma.get(k, i, l) * gamma.get(l, j, k);
                    }
                }
            }
        }
        s
    }

    /// `g^{ij} ∂_i Γ_j` with `Γ_j = Γ^k_{jk}`.
    pub fn trace_divergence(&self) -> f64 {
        let n = self.dim();
        let dgamma = self.christoffel_derivatives();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d: f64 = (0..n).map(|k| dgamma[i].get(k, j, k)).sum();
                s += self.g_inv[(i, j)] * d;
            }
        }
        s
    }

    pub fn curvature(&self, mass: f64) -> CurvatureBundle {
        let ricci = self.ricci_scalar();
        CurvatureBundle {
            ricci_scalar: ricci,
            christoffel_trace: self.christoffel().trace(),
            delta_v: (-ricci + self.christoffel_square()) / (8.0 * mass),
            delta_v_prime: self.trace_divergence() / (8.0 * mass),
        }
    }
}
