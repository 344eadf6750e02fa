//! Finite-difference derivatives of matrix-valued fields.
//!
//! First derivatives use a central difference with `h = 1e-5 · width`.
//! Second derivatives use fourth-order five-point stencils with the coarser
//! step `1e-3 · width`; nesting two second-order central differences at
//! `1e-5` loses about six digits to cancellation.

use nalgebra::DMatrix;

use super::Domain;

const FIRST_STEP: f64 = 1e-5;
const SECOND_STEP: f64 = 1e-3;

pub(super) struct Steps {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl Steps {
    pub fn for_domain(domain: &Domain) -> Self {
        let widths: Vec<f64> = (0..domain.dim()).map(|i| domain.width(i)).collect();
        Steps {
            first: widths.iter().map(|w| FIRST_STEP * w).collect(),
            second: widths.iter().map(|w| SECOND_STEP * w).collect(),
        }
    }
}

fn shifted(point: &[f64], axis: usize, by: f64) -> Vec<f64> {
    let mut p = point.to_vec();
    p[axis] += by;
    p
}

fn shifted2(point: &[f64], a: usize, da: f64, b: usize, db: f64) -> Vec<f64> {
    let mut p = point.to_vec();
    p[a] += da;
    p[b] += db;
    p
}

/// `∂_k f` for every axis `k`.
pub(super) fn first_derivatives<F>(f: &F, point: &[f64], steps: &[f64]) -> Vec<DMatrix<f64>>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    (0..point.len())
        .map(|k| {
            let h = steps[k];
            (f(&shifted(point, k, h)) - f(&shifted(point, k, -h))) / (2.0 * h)
        })
        .collect()
}

const D1: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// `∂_k ∂_l f` as `out[k][l]`, symmetric by construction.
pub(super) fn second_derivatives<F>(f: &F, point: &[f64], steps: &[f64]) -> Vec<Vec<DMatrix<f64>>>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    let n = point.len();
    let centre = f(point);
    let zero = DMatrix::zeros(centre.nrows(), centre.ncols());
    let mut out = vec![vec![zero; n]; n];
    for k in 0..n {
        let h = steps[k];
        let mut acc = &centre * -30.0;
        for (off, w) in [(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)] {
            acc += f(&shifted(point, k, off * h)) * w;
        }
        out[k][k] = acc / (12.0 * h * h);
        for l in (k + 1)..n {
            let hl = steps[l];
            let mut acc = &centre * 0.0;
            for (ok, wk) in D1 {
                for (ol, wl) in D1 {
                    acc += f(&shifted2(point, k, ok * h, l, ol * hl)) * (wk * wl);
                }
            }
            let d = acc / (144.0 * h * hl);
            out[l][k] = d.clone();
            out[k][l] = d;
        }
    }
    out
}

/// Central-difference gradient of a scalar field with absolute steps.
pub fn gradient<F>(f: F, point: &[f64], steps: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    (0..point.len())
        .map(|k| {
            let h = steps[k];
            (f(&shifted(point, k, h)) - f(&shifted(point, k, -h))) / (2.0 * h)
        })
        .collect()
}
