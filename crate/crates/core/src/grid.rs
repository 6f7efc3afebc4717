//! Tensor quadrature grids for copula arguments and conditioning nodes.

use crate::error::{Error, Result};
use crate::special::gauss_legendre;
use serde::{Deserialize, Serialize};

/// Tensor-product Gauss–Legendre grid on a box `[lo, hi]^dim`.
///
/// Points are enumerated with the first coordinate varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorGrid {
    pub dim: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TensorGrid {
    pub fn gauss_legendre(m: usize, dim: usize, lo: f64, hi: f64) -> Result<Self> {
        if m == 0 || dim == 0 {
            return Err(Error::Config("grid needs at least one node per dimension".into()));
        }
        if !(lo < hi) {
            return Err(Error::Config(format!("empty grid range [{lo}, {hi}]")));
        }
        let (nodes, weights) = gauss_legendre(m, lo, hi);
        Ok(TensorGrid { dim, nodes, weights })
    }

    /// Grid on the open unit cube for copula arguments.
    pub fn unit(m: usize, dim: usize) -> Result<Self> {
        TensorGrid::gauss_legendre(m, dim, 0.0, 1.0)
    }

    /// Equally spaced midpoints `(i + 1/2)/m` with equal weights `1/m`.
    pub fn midpoints(m: usize, dim: usize) -> Result<Self> {
        if m == 0 || dim == 0 {
            return Err(Error::Config("grid needs at least one node per dimension".into()));
        }
        let nodes = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        Ok(TensorGrid { dim, nodes, weights: vec![1.0 / m as f64; m] })
    }

    /// Equally spaced points `i/(m-1)`, `i = 0..m`, each with weight `1/m`.
    pub fn uniform_closed(m: usize, dim: usize) -> Result<Self> {
        if m < 2 || dim == 0 {
            return Err(Error::Config("closed grid needs at least two nodes".into()));
        }
        let nodes = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        Ok(TensorGrid { dim, nodes, weights: vec![1.0 / m as f64; m] })
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.m().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-dimension node indices of flat point `idx`.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let m = self.m();
        (0..self.dim)
            .map(|_| {
                let a = idx % m;
                idx /= m;
                a
            })
            .collect()
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).into_iter().map(|a| self.nodes[a]).collect()
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.multi_index(idx).into_iter().map(|a| self.weights[a]).product()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn all_weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }
}
