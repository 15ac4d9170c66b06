//! Sparse estimators of the time-domain channel from a decoupled sensing
//! problem `Z = A·H + N`.
//!
//! * [`tdcebs`]: greedy block pursuit. Each iteration picks the delay tap
//!   whose sensing column best explains the residual jointly across all
//!   antennas, then re-projects `Z` onto the span of the chosen columns.
//! * [`omp_percolumn`]: classic OMP run independently on every column of `Z`.
//! * [`ls_full`]: unconstrained least squares over all taps.
//!
//! The stacked vector form of the block problem is never materialized. With
//! `B_{k,m} = A(k,m)·I`, the block correlation `‖P_i^H r‖₂` equals the row
//! norm `‖A_i^H R‖₂` and the block residual is the column-wise LS residual of
//! `Z`; see [`crate::oracle`] for the literal stacked version.

mod omp;
mod pursuit;
mod stop;

pub use omp::{omp_percolumn, PerColumnResult};
pub use pursuit::{tdcebs, BlockPursuit, SolverResult};
pub use stop::{StopReason, StopRule};

use crate::error::{Error, Result};
use crate::linalg::{column_norm, qr_solve, select_columns, CMatrix, RANK_RTOL};

/// How candidate taps are scored against the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMetric {
    /// `‖A_i^H R‖₂`; valid when all pilots have equal power.
    #[default]
    Simplified,
    /// `‖(A_i^H A_i)^{-1} A_i^H R‖₂ = ‖A_i^H R‖₂ / ‖A_i‖₂²`, the LS projection
    /// coefficient of the block.
    Normalized,
    /// `‖A_i^H R‖₂ / ‖A_i‖₂`, the correlation with the unit-norm column (the
    /// usual OMP rule).
    UnitColumn,
}

impl SelectionMetric {
    fn divisor(&self, col_norm: f64) -> f64 {
        match self {
            SelectionMetric::Simplified => 1.0,
            SelectionMetric::Normalized => col_norm * col_norm,
            SelectionMetric::UnitColumn => col_norm,
        }
    }
}

fn check_shapes(a: &CMatrix, z: &CMatrix) -> Result<()> {
    if a.nrows() != z.nrows() {
        return Err(Error::Dimension(format!(
            "A has {} rows but Z has {}",
            a.nrows(),
            z.nrows()
        )));
    }
    if a.ncols() == 0 || a.nrows() == 0 {
        return Err(Error::Dimension("sensing matrix is empty".into()));
    }
    Ok(())
}

/// Score of every tap `i` against residual `r` under `metric`.
///
/// Zero-norm columns score zero.
pub fn block_scores(a: &CMatrix, r: &CMatrix, metric: SelectionMetric) -> Vec<f64> {
    let corr = a.ad_mul(r);
    (0..a.ncols())
        .map(|i| {
            let num = corr.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let div = metric.divisor(column_norm(a, i));
            if div == 0.0 {
                0.0
            } else {
                num / div
            }
        })
        .collect()
}

/// Scores within this relative distance of the maximum count as tied.
pub const TIE_RTOL: f64 = 1e-9;

/// Index maximizing `scores` outside `forbidden`; ties go to the smallest index.
///
/// Two scores that are equal in exact arithmetic can differ in the last few
/// bits depending on how they were computed, so near-equal scores are treated
/// as a tie.
pub(crate) fn argmax_allowed(scores: &[f64], forbidden: &[usize]) -> Result<usize> {
    let allowed = || scores.iter().enumerate().filter(|(i, _)| !forbidden.contains(i));
    let max = allowed()
        .map(|(_, &s)| s)
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))))
        .ok_or(Error::Exhausted(scores.len()))?;
    let floor = max - TIE_RTOL * max.abs();
    allowed()
        .find(|(_, &s)| s >= floor)
        .map(|(i, _)| i)
        .ok_or_else(|| Error::NonFinite("selection scores".into()))
}

/// Tap with the largest score against residual `r`, skipping `forbidden`.
pub fn select_block(a: &CMatrix, r: &CMatrix, forbidden: &[usize], metric: SelectionMetric) -> Result<usize> {
    check_shapes(a, r)?;
    argmax_allowed(&block_scores(a, r, metric), forbidden)
}

fn check_support(n_cp: usize, support: &[usize]) -> Result<()> {
    for (pos, &i) in support.iter().enumerate() {
        if i >= n_cp {
            return Err(Error::OutOfRange {
                what: "support index",
                detail: format!("{i} >= N_cp = {n_cp}"),
            });
        }
        if support[..pos].contains(&i) {
            return Err(Error::OutOfRange {
                what: "support index",
                detail: format!("{i} listed twice"),
            });
        }
    }
    Ok(())
}

/// Least-squares rows `(A_Λ^H A_Λ)^{-1} A_Λ^H Z`, solved by QR of `A_Λ`.
pub fn ls_refit(a: &CMatrix, z: &CMatrix, support: &[usize]) -> Result<CMatrix> {
    check_shapes(a, z)?;
    check_support(a.ncols(), support)?;
    qr_solve(&select_columns(a, support), z, support)
}

/// `Z − A_Λ · ls_refit(A, Z, Λ)`.
pub fn update_residual(a: &CMatrix, z: &CMatrix, support: &[usize]) -> Result<CMatrix> {
    let rows = ls_refit(a, z, support)?;
    Ok(z - select_columns(a, support) * rows)
}

/// Numerical rank from singular values above `RANK_RTOL · σ_max`.
pub fn numerical_rank(a: &CMatrix) -> usize {
    let sv = a.clone().singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > RANK_RTOL * top).count()
}

/// Full least squares `(A^H A)^{-1} A^H Z` over all `N_cp` taps.
///
/// Fails with [`Error::LowRank`] unless `A` has full column rank, which is
/// impossible with fewer pilots than taps.
pub fn ls_full(a: &CMatrix, z: &CMatrix) -> Result<CMatrix> {
    check_shapes(a, z)?;
    let cols = a.ncols();
    let rank = numerical_rank(a);
    if rank < cols {
        return Err(Error::LowRank { rank, cols });
    }
    let all: Vec<usize> = (0..cols).collect();
    qr_solve(a, z, &all).map_err(|_| Error::LowRank { rank, cols })
}
