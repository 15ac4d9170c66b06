use crate::error::{Error, Result};
use crate::linalg::{frobenius, CMatrix, IncrementalQr};

use super::{argmax_allowed, block_scores, check_shapes, SelectionMetric, StopReason, StopRule};

/// Output of a block pursuit.
#[derive(Debug, Clone)]
pub struct SolverResult {
    /// Selected taps in selection order.
    pub support: Vec<usize>,
    /// Least-squares rows for `support`, `|Λ| × N_BS`, in the same order.
    pub estimate_rows: CMatrix,
    /// `N_cp × N_BS` estimate, zero outside the support.
    pub full_estimate: CMatrix,
    /// `‖r‖₂` after each iteration.
    pub residual_history: Vec<f64>,
    pub stop_reason: StopReason,
}

impl SolverResult {
    pub fn iterations(&self) -> usize {
        self.residual_history.len()
    }
}

/// Step-by-step state of the block pursuit.
///
/// The residual is kept as the projection of `Z` onto the orthogonal
/// complement of the selected sensing columns, maintained with an
/// incrementally grown QR factorization.
#[derive(Debug, Clone)]
pub struct BlockPursuit<'a> {
    a: &'a CMatrix,
    metric: SelectionMetric,
    support: Vec<usize>,
    qr: IncrementalQr,
}

impl<'a> BlockPursuit<'a> {
    pub fn new(a: &'a CMatrix, z: &CMatrix, metric: SelectionMetric) -> Result<Self> {
        check_shapes(a, z)?;
        if let Some(bad) = z.iter().find(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("observation entry {bad}")));
        }
        Ok(Self {
            a,
            metric,
            support: Vec::new(),
            qr: IncrementalQr::new(z),
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn residual(&self) -> &CMatrix {
        self.qr.residual()
    }

    pub fn residual_norm(&self) -> f64 {
        frobenius(self.qr.residual())
    }

    /// Current score of every tap.
    pub fn scores(&self) -> Vec<f64> {
        block_scores(self.a, self.qr.residual(), self.metric)
    }

    /// Selects the best unselected tap and projects it out of the residual.
    ///
    /// Returns `Ok(None)` without changing state when that tap's column is
    /// numerically dependent on the current support.
    pub fn step(&mut self) -> Result<Option<usize>> {
        let best = argmax_allowed(&self.scores(), &self.support)?;
        if self.qr.push(&self.a.column(best).into_owned()) {
            self.support.push(best);
            Ok(Some(best))
        } else {
            Ok(None)
        }
    }

    /// Drops the most recently selected tap.
    pub fn undo(&mut self) {
        if self.support.pop().is_some() {
            self.qr.pop();
        }
    }

    /// Least-squares rows for the current support.
    pub fn estimate_rows(&self) -> CMatrix {
        self.qr.solve()
    }

    fn finish(self, residual_history: Vec<f64>, stop_reason: StopReason) -> SolverResult {
        let estimate_rows = self.estimate_rows();
        let mut full_estimate = CMatrix::zeros(self.a.ncols(), estimate_rows.ncols());
        for (row, &tap) in self.support.iter().enumerate() {
            full_estimate.set_row(tap, &estimate_rows.row(row));
        }
        SolverResult {
            support: self.support,
            estimate_rows,
            full_estimate,
            residual_history,
            stop_reason,
        }
    }
}

/// Block pursuit over the delay taps of `Z = A·H + N`.
///
/// Runs select → append → re-project until `stop` fires, the residual is
/// exactly zero, the support reaches `min(K, N_cp)` taps, or the next pick is
/// linearly dependent on the support. Under [`StopRule::NonDecrease`] the tap
/// that failed to shrink the residual is removed before the final estimate.
pub fn tdcebs(a: &CMatrix, z: &CMatrix, stop: &StopRule, metric: SelectionMetric) -> Result<SolverResult> {
    stop.validate()?;
    let mut pursuit = BlockPursuit::new(a, z, metric)?;
    let cap = a.nrows().min(a.ncols());
    let threshold = stop.threshold();
    let max_iter = stop.max_iterations();
    let non_decrease = stop.non_decrease();

    let mut history = Vec::new();
    let mut prev = pursuit.residual_norm();
    let reason = loop {
        if threshold.is_some_and(|eps| prev < eps) {
            break StopReason::ResidualThreshold;
        }
        if prev == 0.0 {
            break StopReason::ZeroResidual;
        }
        if max_iter.is_some_and(|t| history.len() >= t) {
            break StopReason::MaxIterations;
        }
        if pursuit.support().len() >= cap {
            break StopReason::SupportFull;
        }
        if pursuit.step()?.is_none() {
            break StopReason::RankExhausted;
        }
        let cur = pursuit.residual_norm();
        history.push(cur);
        if non_decrease && cur >= prev {
            pursuit.undo();
            break StopReason::NonDecrease;
        }
        prev = cur;
    };
    Ok(pursuit.finish(history, reason))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, seeded};
    use crate::solver::ls_refit;
    use num_complex::Complex64;

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = seeded(seed);
        CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    fn sparse_rows(n_cp: usize, n_bs: usize, taps: &[usize], seed: u64) -> CMatrix {
        let vals = random(taps.len(), n_bs, seed);
        let mut h = CMatrix::zeros(n_cp, n_bs);
        for (i, &t) in taps.iter().enumerate() {
            h.set_row(t, &vals.row(i));
        }
        h
    }

    #[test]
    fn zero_observation_stops_immediately() {
        let a = random(8, 12, 1);
        let z = CMatrix::zeros(8, 3);
        let res = tdcebs(&a, &z, &StopRule::MaxIterations(5), SelectionMetric::Simplified).unwrap();
        assert!(res.support.is_empty());
        assert_eq!(res.stop_reason, StopReason::ZeroResidual);
        assert!(res.full_estimate.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn max_iterations_bounds_support() {
        let a = random(10, 16, 2);
        let z = random(10, 2, 3);
        let res = tdcebs(&a, &z, &StopRule::MaxIterations(3), SelectionMetric::Simplified).unwrap();
        assert_eq!(res.support.len(), 3);
        assert_eq!(res.stop_reason, StopReason::MaxIterations);
        assert!(res.residual_history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn support_cap_is_k() {
        let a = random(5, 16, 4);
        let z = random(5, 2, 5);
        let res = tdcebs(&a, &z, &StopRule::ResidualThreshold(1e-300), SelectionMetric::Simplified).unwrap();
        assert!(res.support.len() <= 5);
        assert!(matches!(
            res.stop_reason,
            StopReason::SupportFull | StopReason::ZeroResidual | StopReason::RankExhausted
        ));
    }

    #[test]
    fn estimate_matches_householder_refit() {
        let a = random(20, 30, 6);
        let z = random(20, 4, 7);
        let res = tdcebs(&a, &z, &StopRule::MaxIterations(8), SelectionMetric::Simplified).unwrap();
        let direct = ls_refit(&a, &z, &res.support).unwrap();
        assert!(frobenius(&(direct - &res.estimate_rows)) < 1e-9);
        for (row, &tap) in res.support.iter().enumerate() {
            assert_eq!(res.full_estimate.row(tap), res.estimate_rows.row(row));
        }
    }

    #[test]
    fn consistent_sparse_system_recovered() {
        let a = random(24, 40, 8);
        let h = sparse_rows(40, 4, &[3, 17, 29], 9);
        let z = &a * &h;
        let res = tdcebs(&a, &z, &StopRule::ResidualThreshold(1e-8), SelectionMetric::Normalized).unwrap();
        let mut s = res.support.clone();
        s.sort_unstable();
        assert_eq!(s, vec![3, 17, 29]);
        assert!(frobenius(&(res.full_estimate - h)) < 1e-9);
    }

    fn real(rows: usize, cols: usize, vals: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(rows, cols, &vals.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn non_decrease_discards_useless_tap() {
        // the component of z along e2 is invisible to both columns
        let a = real(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let z = real(3, 1, &[1.0, 0.0, 5.0]);
        let res = tdcebs(&a, &z, &StopRule::NonDecrease, SelectionMetric::Simplified).unwrap();
        assert_eq!(res.support, vec![0]);
        assert_eq!(res.stop_reason, StopReason::NonDecrease);
        assert_eq!(res.residual_history.len(), 2);
        assert_eq!(res.residual_history[1], res.residual_history[0]);
        assert_eq!(res.full_estimate[(1, 0)], Complex64::new(0.0, 0.0));
        assert!((res.full_estimate[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rank_exhaustion_stops_without_error() {
        // column 2 is e0 - e1 up to a 1e-13 perturbation
        let a = real(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 1e-13]);
        let z = real(3, 1, &[3.0, 0.1, 1.0]);
        let res = tdcebs(&a, &z, &StopRule::MaxIterations(3), SelectionMetric::Simplified).unwrap();
        assert_eq!(res.support, vec![0, 1]);
        assert_eq!(res.stop_reason, StopReason::RankExhausted);
    }
}
