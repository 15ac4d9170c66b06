use crate::error::Result;
use crate::linalg::CMatrix;

use super::{tdcebs, SelectionMetric, SolverResult, StopRule};

/// Per-column OMP output.
#[derive(Debug, Clone)]
pub struct PerColumnResult {
    /// One pursuit per antenna column; supports may differ between columns.
    pub columns: Vec<SolverResult>,
    /// `N_cp × N_BS` estimate assembled from the column estimates.
    pub full_estimate: CMatrix,
}

impl PerColumnResult {
    /// Number of taps that are nonzero in at least one column.
    pub fn union_support_size(&self) -> usize {
        let mut taps: Vec<usize> = self.columns.iter().flat_map(|c| c.support.iter().copied()).collect();
        taps.sort_unstable();
        taps.dedup();
        taps.len()
    }
}

/// Orthogonal matching pursuit applied independently to each column `z_j`
/// of `Z`, ignoring that the columns share their nonzero taps.
///
/// Selection is `argmax_i |A_i^H r_j| / ‖A_i‖₂`; `stop` applies to each
/// column's own residual.
pub fn omp_percolumn(a: &CMatrix, z: &CMatrix, stop: &StopRule) -> Result<PerColumnResult> {
    let mut full_estimate = CMatrix::zeros(a.ncols(), z.ncols());
    let mut columns = Vec::with_capacity(z.ncols());
    for j in 0..z.ncols() {
        let zj = z.columns(j, 1).into_owned();
        let res = tdcebs(a, &zj, stop, SelectionMetric::UnitColumn)?;
        for (row, &tap) in res.support.iter().enumerate() {
            full_estimate[(tap, j)] = res.estimate_rows[(row, 0)];
        }
        columns.push(res);
    }
    Ok(PerColumnResult { columns, full_estimate })
}
