//! Symmetric positive-definite factorization with a conditioning gate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result, WindowSize};

/// Solves are refused when the estimated reciprocal condition number of the
/// matrix falls below this value.
pub const MIN_RCOND: f64 = 1e-12;

/// Cholesky factor of an SPD matrix that passed the conditioning gate.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    rcond: f64,
}

impl SpdFactor {
    /// Factorizes `a`. `window` is only used to label the error.
    pub fn new(a: &DMatrix<f64>, window: Option<usize>) -> Result<Self> {
        let dim = a.nrows();
        let singular = |rcond| Error::Singular {
            dim,
            window: WindowSize(window),
            rcond,
        };
        if dim == 0 || !a.is_square() {
            return Err(Error::Dimension(format!(
                "expected a non-empty square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(singular(0.0));
        }
        let chol = Cholesky::new(a.clone()).ok_or_else(|| singular(0.0))?;
        let l = chol.l_dirty();
        if (0..dim).any(|i| !(l[(i, i)] > 0.0) || !l[(i, i)].is_finite()) {
            return Err(singular(0.0));
        }
        let mut factor = SpdFactor { chol, rcond: 0.0 };
        let norm_a = one_norm(a);
        let rcond = if norm_a > 0.0 {
            1.0 / (norm_a * factor.inverse_one_norm_estimate())
        } else {
            0.0
        };
        if !(rcond >= MIN_RCOND) {
            return Err(singular(rcond));
        }
        factor.rcond = rcond;
        Ok(factor)
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Estimated reciprocal condition number in the 1-norm.
    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `A^{-1} 1`.
    pub fn solve_ones(&self) -> DVector<f64> {
        self.solve(&DVector::from_element(self.dim(), 1.0))
    }

    /// Hager's estimator of `||A^{-1}||_1`; a handful of solves, exact for
    /// most matrices and never an overestimate.
    fn inverse_one_norm_estimate(&self) -> f64 {
        let n = self.dim();
        let mut x = DVector::from_element(n, 1.0 / n as f64);
        let mut estimate = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            estimate = y.lp_norm(1);
            let sign = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            // A is symmetric, so A^{-T} = A^{-1}.
            let z = self.solve(&sign);
            let (j, zmax) = z
                .iter()
                .map(|v| v.abs())
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
                );
            if zmax <= z.dot(&x) {
                break;
            }
            x.fill(0.0);
            x[j] = 1.0;
        }
        estimate
    }
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `x' A x`.
pub fn quadratic_form(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(a * x))
}

/// Replaces `a` with `(a + a') / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Largest absolute asymmetry relative to the largest absolute entry.
pub fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Principal square root of a symmetric positive-definite matrix via its
/// spectral decomposition.
pub fn spd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = a.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::Domain(format!(
            "matrix is not positive definite (smallest eigenvalue {min:.3e})"
        )));
    }
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * eig.eigenvalues[j].sqrt());
    let mut root = scaled * v.transpose();
    symmetrize(&mut root);
    Ok(root)
}
