use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row form with complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    size: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    /// Set when `W·A` is Hermitian for the grid weights used at assembly.
    pub weighted_hermitian: bool,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros that result from summing are kept out.
    pub fn from_triplets(size: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= size || *c >= size) {
            return Err(Error::Parameter(format!("entry ({r}, {c}) outside a {size}x{size} operator")));
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; size + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..size {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut op = SparseOperator {
            size,
            row_ptr,
            cols,
            vals,
            weighted_hermitian: false,
        };
        op.prune();
        Ok(op)
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        let n = values.len();
        SparseOperator {
            size: n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: values.to_vec(),
            weighted_hermitian: values.iter().all(|v| v.im == 0.0),
        }
    }

    pub fn zeros(size: usize) -> Self {
        SparseOperator {
            size,
            row_ptr: vec![0; size + 1],
            cols: Vec::new(),
            vals: Vec::new(),
            weighted_hermitian: true,
        }
    }

    fn prune(&mut self) {
        let mut row_ptr = vec![0usize; self.size + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.size {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != Complex64::new(0.0, 0.0) {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Largest number of stored entries in any row.
    pub fn max_row_nnz(&self) -> usize {
        (0..self.size)
            .map(|r| self.row_ptr[r + 1] - self.row_ptr[r])
            .max()
            .unwrap_or(0)
    }

    /// `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.size).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.size {
            let mut s = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[r] = s;
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.size];
        self.matvec(x, &mut y);
        y
    }

    /// `y = Aᴴ x`.
    pub fn matvec_adjoint(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for r in 0..self.size {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.cols[k]] += self.vals[k].conj() * x[r];
            }
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `self + diag(d)`.
    pub fn plus_diagonal(&self, d: &[Complex64]) -> Self {
        let mut trip: Vec<_> = self.entries().collect();
        trip.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        let mut out = SparseOperator::from_triplets(self.size, trip).expect("indices in range");
        out.weighted_hermitian = self.weighted_hermitian && d.iter().all(|v| v.im == 0.0);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest `|(W A)_{ij} − conj((W A)_{ji})|` for diagonal weights `w`.
    pub fn weighted_asymmetry(&self, w: &[f64]) -> f64 {
        self.entries()
            .map(|(r, c, v)| (w[r] * v - (w[c] * self.get(c, r)).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Dense copy, row-major; for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut out = vec![vec![Complex64::new(0.0, 0.0); self.size]; self.size];
        for (r, c, v) in self.entries() {
            out[r][c] = v;
        }
        out
    }

    /// Coordinate-list text: one `row col re im` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        for (r, c, v) in self.entries() {
            writeln!(out, "{r} {c} {:e} {:e}", v.re, v.im)?;
        }
        Ok(())
    }
}
