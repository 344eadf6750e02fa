//! Krylov solvers for the Crank–Nicolson systems `(I + iτH) x = b`.

use num_complex::Complex64;

use crate::discretize::SparseOperator;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 20_000;

/// Real sparse matrix used for the symmetrized kinetic operator.
#[derive(Debug, Clone)]
pub(crate) struct RealCsr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl RealCsr {
    /// `W^{1/2} A W^{-1/2}`, keeping real parts (the operators here are real).
    pub fn symmetrized(op: &SparseOperator, weights: &[f64]) -> Self {
        let n = op.size();
        let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(op.nnz());
        let mut vals = Vec::with_capacity(op.nnz());
        let mut diag = vec![0.0; n];
        row_ptr.push(0);
        for r in 0..n {
            for (c, v) in op.row(r) {
                let s = v.re * sq[r] / sq[c];
                if r == c {
                    diag[r] = s;
                }
                cols.push(c);
                vals.push(s);
            }
            row_ptr.push(cols.len());
        }
        RealCsr {
            row_ptr,
            cols,
            vals,
            diag,
        }
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[Complex64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            s += x[self.cols[k]] * self.vals[k];
        }
        s
    }
}

/// `A = I + iτ(scale·K + diag(d))`, complex symmetric when `K` is symmetric.
pub(crate) struct CayleySystem<'a> {
    pub kinetic: &'a RealCsr,
    pub scale: f64,
    pub diag: &'a [f64],
    pub tau: f64,
}

impl CayleySystem<'_> {
    fn apply(&self, x: &[Complex64], y: &mut [Complex64], sign: f64) {
        let it = Complex64::new(0.0, sign * self.tau);
        for r in 0..x.len() {
            let hx = self.kinetic.row_dot(r, x) * self.scale + x[r] * self.diag[r];
            y[r] = x[r] + it * hx;
        }
    }

    /// `y = (I − iτH) x`.
    pub fn rhs(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.apply(x, y, -1.0);
    }

    fn diagonal(&self, r: usize) -> Complex64 {
        Complex64::new(1.0, self.tau * (self.scale * self.kinetic.diag[r] + self.diag[r]))
    }

    /// Jacobi-preconditioned conjugate orthogonal CG. `x` holds the initial
    /// guess on entry. Returns the iteration count.
    pub fn solve(&self, b: &[Complex64], x: &mut [Complex64], tol: f64) -> Result<usize> {
        let n = b.len();
        let bnorm = norm(b);
        if bnorm == 0.0 {
            x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            return Ok(0);
        }
        let minv: Vec<Complex64> = (0..n).map(|r| self.diagonal(r).inv()).collect();
        let mut q = vec![Complex64::new(0.0, 0.0); n];
        self.apply(x, &mut q, 1.0);
        let mut r: Vec<Complex64> = b.iter().zip(&q).map(|(b, q)| b - q).collect();
        if norm(&r) <= tol * bnorm {
            return Ok(0);
        }
        let mut z: Vec<Complex64> = r.iter().zip(&minv).map(|(r, m)| r * m).collect();
        let mut p = z.clone();
        let mut rho = bilinear(&r, &z);
        let mut residual = f64::INFINITY;
        for it in 1..=MAX_ITERATIONS {
            self.apply(&p, &mut q, 1.0);
            let pq = bilinear(&p, &q);
            if pq.norm() == 0.0 {
                break;
            }
            let alpha = rho / pq;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * q[k];
            }
            residual = norm(&r) / bnorm;
            if residual <= tol {
                return Ok(it);
            }
            for k in 0..n {
                z[k] = r[k] * minv[k];
            }
            let rho_next = bilinear(&r, &z);
            let beta = rho_next / rho;
            rho = rho_next;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::Solver {
            iterations: MAX_ITERATIONS,
            residual,
        })
    }
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Unconjugated `xᵀ y`.
fn bilinear(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
