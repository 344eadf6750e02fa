use crate::error::{Error, Result};
use crate::geometry::Domain;

/// Uniform tensor-product grid over a box, boundary nodes included.
/// Linear indices are row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    nodes: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(domain: Domain, nodes: &[usize]) -> Result<Self> {
        if nodes.len() != domain.dim() {
            return Err(Error::Parameter(format!(
                "grid has {} axes but the domain has {}",
                nodes.len(),
                domain.dim()
            )));
        }
        if let Some(n) = nodes.iter().find(|&&n| n < 3) {
            return Err(Error::Parameter(format!("need at least 3 nodes per axis, got {n}")));
        }
        let spacing: Vec<f64> = (0..nodes.len())
            .map(|i| domain.width(i) / (nodes[i] - 1) as f64)
            .collect();
        let mut strides = vec![1; nodes.len()];
        for i in (0..nodes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * nodes[i + 1];
        }
        let len = nodes.iter().product();
        Ok(Grid {
            domain,
            nodes: nodes.to_vec(),
            spacing,
            strides,
            len,
        })
    }

    /// Same node count on every axis.
    pub fn uniform(domain: Domain, per_axis: usize) -> Result<Self> {
        let n = vec![per_axis; domain.dim()];
        Grid::new(domain, &n)
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// `Π h_i`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(m, s)| m * s).sum()
    }

    /// Position of `idx` along `axis`.
    #[inline]
    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.nodes[axis]
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.axis_index(idx, a)).collect()
    }

    pub fn coord_into(&self, idx: usize, out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.axis_coord(a, self.axis_index(idx, a));
        }
    }

    pub fn coord(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.coord_into(idx, &mut out);
        out
    }

    /// Coordinate of node `k` on `axis`; the last node lands exactly on `hi`.
    pub fn axis_coord(&self, axis: usize, k: usize) -> f64 {
        if k + 1 == self.nodes[axis] {
            self.domain.hi[axis]
        } else {
            self.domain.lo[axis] + k as f64 * self.spacing[axis]
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        (0..self.dim()).any(|a| {
            let k = self.axis_index(idx, a);
            k == 0 || k + 1 == self.nodes[a]
        })
    }

    /// Index of the nearest node to `point`, clamped into the box.
    pub fn nearest(&self, point: &[f64]) -> usize {
        let multi: Vec<usize> = (0..self.dim())
            .map(|a| {
                let k = ((point[a] - self.domain.lo[a]) / self.spacing[a]).round();
                k.clamp(0.0, (self.nodes[a] - 1) as f64) as usize
            })
            .collect();
        self.index(&multi)
    }
}
