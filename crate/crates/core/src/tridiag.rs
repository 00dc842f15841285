//! Symmetric tridiagonal matrices stored as a diagonal and a single
//! off-diagonal band.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Symmetric tridiagonal matrix. `off[i]` couples rows `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(invalid("diag", "matrix must have at least one row"));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len() - 1,
                actual: off.len(),
            });
        }
        Ok(Self { diag, off })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "matrix must have at least one row");
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n - 1],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        m.diag.iter_mut().for_each(|d| *d = 1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub(crate) fn diag_mut(&mut self) -> &mut [f64] {
        &mut self.diag
    }

    pub(crate) fn off_mut(&mut self) -> &mut [f64] {
        &mut self.off
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    /// `y = self * x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        if n == 1 {
            y[0] = self.diag[0] * x[0];
            return;
        }
        y[0] = self.diag[0] * x[0] + self.off[0] * x[1];
        for i in 1..n - 1 {
            y[i] = self.off[i - 1] * x[i - 1] + self.diag[i] * x[i] + self.off[i] * x[i + 1];
        }
        y[n - 1] = self.off[n - 2] * x[n - 2] + self.diag[n - 1] * x[n - 1];
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ · self · y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            acc += x[i] * self.diag[i] * y[i];
        }
        for i in 0..n - 1 {
            acc += self.off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
        }
        acc
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `self + alpha * other`, entrywise.
    pub fn add_scaled(&self, alpha: f64, other: &SymTridiagonal) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let diag = self.diag.iter().zip(&other.diag).map(|(a, b)| a + alpha * b).collect();
        let off = self.off.iter().zip(&other.off).map(|(a, b)| a + alpha * b).collect();
        Ok(Self { diag, off })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|d| alpha * d).collect(),
            off: self.off.iter().map(|o| alpha * o).collect(),
        }
    }

    /// Row sums, i.e. `self * 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        self.mul_vec(&vec![1.0; self.dim()])
    }

    /// Largest absolute entry difference against `other`.
    pub fn max_abs_diff(&self, other: &SymTridiagonal) -> f64 {
        self.diag
            .iter()
            .zip(&other.diag)
            .chain(self.off.iter().zip(&other.off))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Dense row-major copy, for small-matrix checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }
}
