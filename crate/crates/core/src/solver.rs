//! Linear solvers for symmetric positive definite tridiagonal systems.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tridiag::SymTridiagonal;

/// Stopping rule for [`cg_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgOptions {
    /// Target for `‖b - Ax‖ / ‖b‖`.
    pub rel_tolerance: f64,
    /// Iteration cap; `None` means `10 n`.
    #[serde(default)]
    pub max_iterations: Option<usize>,
    /// Diagonal (Jacobi) preconditioning.
    #[serde(default)]
    pub jacobi: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-10,
            max_iterations: None,
            jacobi: false,
        }
    }
}

impl CgOptions {
    pub fn with_tolerance(rel_tolerance: f64) -> Self {
        Self {
            rel_tolerance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(invalid(
                "rel_tolerance",
                format!("must lie in (0, 1), got {}", self.rel_tolerance),
            ));
        }
        if self.max_iterations == Some(0) {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        Ok(())
    }

    fn iteration_cap(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(10 * n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b - Ax‖ / ‖b‖` (zero when `b = 0`).
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradient for `A x = b` starting from `x0`.
pub fn cg_solve(a: &SymTridiagonal, b: &[f64], x0: &[f64], opts: &CgOptions) -> Result<CgSolution> {
    cg_solve_monitored(a, b, x0, opts, |_, _| {})
}

/// [`cg_solve`] that calls `monitor(iteration, x)` after every update.
pub fn cg_solve_monitored(
    a: &SymTridiagonal,
    b: &[f64],
    x0: &[f64],
    opts: &CgOptions,
    mut monitor: impl FnMut(usize, &[f64]),
) -> Result<CgSolution> {
    opts.validate()?;
    let n = a.dim();
    for len in [b.len(), x0.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }

    let inv_diag: Option<Vec<f64>> = opts.jacobi.then(|| a.diag().iter().map(|d| 1.0 / d).collect());
    let precondition = |r: &[f64], z: &mut [f64]| match &inv_diag {
        Some(inv) => z.iter_mut().zip(r.iter().zip(inv)).for_each(|(z, (r, d))| *z = r * d),
        None => z.copy_from_slice(r),
    };

    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    a.mul_vec_into(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = ax;

    let target = opts.rel_tolerance * b_norm;
    let mut residual = norm(&r);
    let cap = opts.iteration_cap(n);
    let mut iterations = 0;
    while residual > target {
        if iterations == cap {
            return Err(Error::NotConverged {
                iterations,
                residual: residual / b_norm,
            });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            // loss of positive definiteness or total breakdown
            return Err(Error::NotConverged {
                iterations,
                residual: residual / b_norm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        monitor(iterations, &x);
        residual = norm(&r);
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Ok(CgSolution {
        x,
        iterations,
        residual: residual / b_norm,
    })
}

/// Thomas algorithm (forward elimination, back substitution).
pub fn thomas_solve(a: &SymTridiagonal, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let diag = a.diag();
    let off = a.off();
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];

    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::ZeroPivot { row: 0 });
    }
    if n > 1 {
        c_prime[0] = off[0] / pivot;
    }
    d_prime[0] = b[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - off[i - 1] * c_prime[i - 1];
        if pivot == 0.0 {
            return Err(Error::ZeroPivot { row: i });
        }
        if i < n - 1 {
            c_prime[i] = off[i] / pivot;
        }
        d_prime[i] = (b[i] - off[i - 1] * d_prime[i - 1]) / pivot;
    }

    let mut x = d_prime;
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = SymTridiagonal::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 4.0];
        let sol = cg_solve(&a, &b, &[0.0; 5], &CgOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        for (x, b) in sol.x.iter().zip(&b) {
            assert_abs_diff_eq!(x, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let a = SymTridiagonal::new(vec![4.0; 4], vec![1.0; 3]).unwrap();
        let sol = cg_solve(&a, &[0.0; 4], &[1.0; 4], &CgOptions::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.x, vec![0.0; 4]);
    }

    #[test]
    fn dimension_mismatch() {
        let a = SymTridiagonal::identity(3);
        assert!(matches!(
            cg_solve(&a, &[1.0; 2], &[0.0; 3], &CgOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(thomas_solve(&a, &[1.0; 4]).is_err());
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let a = SymTridiagonal::new(vec![4.0; 50], vec![1.0; 49]).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let opts = CgOptions {
            rel_tolerance: 1e-14,
            max_iterations: Some(2),
            jacobi: false,
        };
        match cg_solve(&a, &b, &vec![0.0; 50], &opts) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-14);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn thomas_small_systems() {
        let a = SymTridiagonal::new(vec![2.0], vec![]).unwrap();
        assert_eq!(thomas_solve(&a, &[4.0]).unwrap(), vec![2.0]);
        let a = SymTridiagonal::new(vec![2.0, 2.0], vec![1.0]).unwrap();
        let x = thomas_solve(&a, &[3.0, 3.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn thomas_zero_pivot() {
        let a = SymTridiagonal::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        assert_eq!(thomas_solve(&a, &[1.0, 1.0]), Err(Error::ZeroPivot { row: 0 }));
    }

    #[test]
    fn jacobi_matches_plain() {
        let diag: Vec<f64> = (0..40).map(|i| 3.0 + (i % 7) as f64).collect();
        let a = SymTridiagonal::new(diag, vec![1.0; 39]).unwrap();
        let b: Vec<f64> = (0..40).map(|i| (0.3 * i as f64).cos()).collect();
        let plain = cg_solve(&a, &b, &vec![0.0; 40], &CgOptions::with_tolerance(1e-12)).unwrap();
        let opts = CgOptions {
            jacobi: true,
            ..CgOptions::with_tolerance(1e-12)
        };
        let pre = cg_solve(&a, &b, &vec![0.0; 40], &opts).unwrap();
        for (p, q) in plain.x.iter().zip(&pre.x) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-10);
        }
    }

    #[test]
    fn options_validation() {
        assert!(CgOptions::with_tolerance(0.0).validate().is_err());
        assert!(CgOptions::with_tolerance(1.0).validate().is_err());
        let opts = CgOptions {
            max_iterations: Some(0),
            ..CgOptions::default()
        };
        assert!(opts.validate().is_err());
    }
}
