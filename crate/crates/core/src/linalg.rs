//! Dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative threshold below which an orthogonalized column is treated as
/// linearly dependent on the columns already in the basis.
pub const RANK_RTOL: f64 = 1e-10;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Frobenius norm of a complex matrix.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn column_norm(m: &CMatrix, j: usize) -> f64 {
    m.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn row_norm(m: &CMatrix, i: usize) -> f64 {
    m.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Columns of `a` picked by `idx`, in that order.
pub fn select_columns(a: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])])
}

/// Least-squares solution of `a x = b` through a Householder QR of `a`.
///
/// Fails with [`Error::RankDeficient`] when a diagonal entry of `R` falls
/// below `RANK_RTOL` times the largest column norm of `a`; `support` is only
/// used to label that error.
pub fn qr_solve(a: &CMatrix, b: &CMatrix, support: &[usize]) -> Result<CMatrix> {
    let (m, n) = a.shape();
    if b.nrows() != m {
        return Err(Error::Dimension(format!(
            "least squares with {m} equations but right-hand side has {} rows",
            b.nrows()
        )));
    }
    if n == 0 {
        return Ok(CMatrix::zeros(0, b.ncols()));
    }
    if n > m {
        return Err(Error::RankDeficient {
            support: support.to_vec(),
        });
    }
    let scale = (0..n).map(|j| column_norm(a, j)).fold(0.0, f64::max);
    let qr = a.clone().qr();
    let r = qr.r();
    if scale == 0.0 || (0..n).any(|i| r[(i, i)].norm() <= RANK_RTOL * scale) {
        return Err(Error::RankDeficient {
            support: support.to_vec(),
        });
    }
    let qhb = qr.q().ad_mul(b);
    r.solve_upper_triangular(&qhb).ok_or_else(|| Error::RankDeficient {
        support: support.to_vec(),
    })
}

/// Thin QR factorization that grows and shrinks one column at a time while
/// tracking the projection residual of a fixed right-hand side.
///
/// Orthogonalization is classical Gram-Schmidt with one full
/// re-orthogonalization pass, which keeps the basis orthonormal to working
/// precision.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    basis: Vec<CVector>,
    /// Column `j` holds the first `j + 1` entries of column `j` of `R`.
    r_cols: Vec<Vec<Complex64>>,
    /// Row `j` is `q_j^H` applied to the right-hand side.
    coeffs: Vec<Vec<Complex64>>,
    residual: CMatrix,
}

impl IncrementalQr {
    pub fn new(rhs: &CMatrix) -> Self {
        Self {
            basis: Vec::new(),
            r_cols: Vec::new(),
            coeffs: Vec::new(),
            residual: rhs.clone(),
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn residual(&self) -> &CMatrix {
        &self.residual
    }

    /// Appends `col` to the basis and projects it out of the residual.
    ///
    /// Returns `false` (leaving the state untouched) when `col` is
    /// numerically in the span of the current basis.
    pub fn push(&mut self, col: &CVector) -> bool {
        let norm = col.norm();
        if norm == 0.0 {
            return false;
        }
        let k = self.basis.len();
        let mut v = col.clone();
        let mut r = vec![ZERO; k + 1];
        for _ in 0..2 {
            for (j, q) in self.basis.iter().enumerate() {
                let c = q.dotc(&v);
                v.axpy(-c, q, Complex64::new(1.0, 0.0));
                r[j] += c;
            }
        }
        let diag = v.norm();
        if diag <= RANK_RTOL * norm {
            return false;
        }
        v.unscale_mut(diag);
        r[k] = Complex64::new(diag, 0.0);

        let ncols = self.residual.ncols();
        let mut c_row = Vec::with_capacity(ncols);
        for j in 0..ncols {
            let c = v.dotc(&self.residual.column(j));
            let mut rc = self.residual.column_mut(j);
            rc.axpy(-c, &v, Complex64::new(1.0, 0.0));
            c_row.push(c);
        }
        self.basis.push(v);
        self.r_cols.push(r);
        self.coeffs.push(c_row);
        true
    }

    /// Removes the most recently pushed column, restoring the residual.
    pub fn pop(&mut self) {
        if let (Some(q), Some(c_row)) = (self.basis.pop(), self.coeffs.pop()) {
            self.r_cols.pop();
            for (j, c) in c_row.into_iter().enumerate() {
                let mut rc = self.residual.column_mut(j);
                rc.axpy(c, &q, Complex64::new(1.0, 0.0));
            }
        }
    }

    /// Coefficients `X` minimizing `‖rhs − A_basis X‖_F`, by back substitution
    /// `R X = Q^H rhs`.
    pub fn solve(&self) -> CMatrix {
        let n = self.basis.len();
        let ncols = self.residual.ncols();
        let mut x = CMatrix::zeros(n, ncols);
        for c in 0..ncols {
            for i in (0..n).rev() {
                let mut acc = self.coeffs[i][c];
                for j in i + 1..n {
                    acc -= self.r_cols[j][i] * x[(j, c)];
                }
                x[(i, c)] = acc / self.r_cols[i][i];
            }
        }
        x
    }
}

/// Ratio of extreme eigenvalues of a Hermitian positive semi-definite matrix.
pub fn hermitian_condition(g: &CMatrix) -> f64 {
    let eig = g.clone().symmetric_eigen();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l.abs());
        hi = hi.max(l.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
