//! Literal stacked-vector form of the block pursuit, for cross-checking the
//! solver on small problems.
//!
//! `H` (`N_cp × N_BS`) and `Z` (`K × N_BS`) are vectorized row by row into `s`
//! and `q`, and the sensing matrix is expanded to `B` (`K·N_BS × N_cp·N_BS`)
//! whose `(k, m)` block is `A(k, m)·I_{N_BS}`, so that `q = B s + v`. The
//! pursuit below runs on these vectors exactly as written, with explicit
//! inverses and no structure exploited. It is quadratic in memory and only
//! meant for tests.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, ZERO};
use crate::solver::{argmax_allowed, StopReason, StopRule};

/// Largest stacked matrix, in entries, the oracle will build.
pub const MAX_STACKED_ENTRIES: usize = 10_000_000;

/// The vectorized problem `q = B s + v`.
#[derive(Debug, Clone)]
pub struct StackedProblem {
    pub b: CMatrix,
    pub q: CVector,
    /// Row-vectorized channel, when the ground truth was supplied.
    pub s: Option<CVector>,
    pub k: usize,
    pub n_cp: usize,
    pub n_bs: usize,
}

/// Row-major vectorization: entry `(r, c)` goes to `r·ncols + c`.
pub fn vectorize_rows(m: &CMatrix) -> CVector {
    CVector::from_fn(m.len(), |i, _| m[(i / m.ncols(), i % m.ncols())])
}

/// Inverse of [`vectorize_rows`] for blocks of length `n_bs`.
pub fn devectorize_rows(v: &CVector, n_bs: usize) -> CMatrix {
    CMatrix::from_fn(v.len() / n_bs, n_bs, |r, c| v[r * n_bs + c])
}

pub fn build_stacked(a: &CMatrix, z: &CMatrix, h: Option<&CMatrix>) -> Result<StackedProblem> {
    let (k, n_cp) = a.shape();
    let n_bs = z.ncols();
    if z.nrows() != k {
        return Err(Error::Dimension(format!("A is {k}x{n_cp}, Z has {} rows", z.nrows())));
    }
    if let Some(h) = h {
        if h.shape() != (n_cp, n_bs) {
            return Err(Error::Dimension(format!(
                "H is {}x{}, expected {n_cp}x{n_bs}",
                h.nrows(),
                h.ncols()
            )));
        }
    }
    let (n_q, n_s) = (k * n_bs, n_cp * n_bs);
    let entries = n_q.saturating_mul(n_s);
    if entries > MAX_STACKED_ENTRIES {
        return Err(Error::TooLarge {
            entries,
            limit: MAX_STACKED_ENTRIES,
        });
    }
    let mut b = CMatrix::zeros(n_q, n_s);
    for kk in 0..k {
        for m in 0..n_cp {
            for d in 0..n_bs {
                b[(kk * n_bs + d, m * n_bs + d)] = a[(kk, m)];
            }
        }
    }
    Ok(StackedProblem {
        b,
        q: vectorize_rows(z),
        s: h.map(vectorize_rows),
        k,
        n_cp,
        n_bs,
    })
}

/// Column block `P_i` of `B`, `K·N_BS × N_BS`.
pub fn extract_block(p: &StackedProblem, i: usize) -> Result<CMatrix> {
    if i >= p.n_cp {
        return Err(Error::OutOfRange {
            what: "block index",
            detail: format!("{i} >= N_cp = {}", p.n_cp),
        });
    }
    Ok(p.b.columns(i * p.n_bs, p.n_bs).into_owned())
}

fn blocks(p: &StackedProblem, support: &[usize]) -> CMatrix {
    let mut out = CMatrix::zeros(p.b.nrows(), support.len() * p.n_bs);
    for (j, &i) in support.iter().enumerate() {
        out.columns_mut(j * p.n_bs, p.n_bs)
            .copy_from(&p.b.columns(i * p.n_bs, p.n_bs));
    }
    out
}

/// `(P^H P)^{-1} P^H x` with an explicit inverse.
fn projection_coeffs(p_mat: &CMatrix, x: &CVector) -> Option<CVector> {
    let gram_inv = p_mat.ad_mul(p_mat).try_inverse()?;
    Some(gram_inv * p_mat.ad_mul(x))
}

/// Literal pursuit state on the stacked vectors.
#[derive(Debug, Clone)]
pub struct LiteralPursuit<'a> {
    problem: &'a StackedProblem,
    support: Vec<usize>,
    r: CVector,
}

impl<'a> LiteralPursuit<'a> {
    pub fn new(problem: &'a StackedProblem) -> Self {
        Self {
            problem,
            support: Vec::new(),
            r: problem.q.clone(),
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn residual(&self) -> &CVector {
        &self.r
    }

    /// `‖P_i^H r‖₂` for every block.
    pub fn correlation_scores(&self) -> Vec<f64> {
        (0..self.problem.n_cp)
            .map(|i| {
                let p_i = extract_block(self.problem, i).unwrap();
                p_i.ad_mul(&self.r).norm()
            })
            .collect()
    }

    /// `‖(P_i^H P_i)^{-1} P_i^H r‖₂` for every block; blocks with a singular
    /// Gram matrix score zero.
    pub fn projection_scores(&self) -> Vec<f64> {
        (0..self.problem.n_cp)
            .map(|i| {
                let p_i = extract_block(self.problem, i).unwrap();
                projection_coeffs(&p_i, &self.r).map_or(0.0, |c| c.norm())
            })
            .collect()
    }

    /// Picks the block with the largest projection score, adds it to the
    /// support and recomputes `r = q − P_Λ (P_Λ^H P_Λ)^{-1} P_Λ^H q`.
    ///
    /// Returns `Ok(None)` if the enlarged `P_Λ^H P_Λ` is not invertible.
    pub fn step(&mut self) -> Result<Option<usize>> {
        let pick = argmax_allowed(&self.projection_scores(), &self.support)?;
        let mut trial = self.support.clone();
        trial.push(pick);
        let p_l = blocks(self.problem, &trial);
        match projection_coeffs(&p_l, &self.problem.q) {
            Some(c) => {
                self.r = &self.problem.q - p_l * c;
                self.support = trial;
                Ok(Some(pick))
            }
            None => Ok(None),
        }
    }

    fn undo(&mut self) {
        self.support.pop();
        let p_l = blocks(self.problem, &self.support);
        self.r = match projection_coeffs(&p_l, &self.problem.q) {
            Some(c) if !self.support.is_empty() => &self.problem.q - p_l * c,
            _ => self.problem.q.clone(),
        };
    }

    /// Stacked estimate: the block coefficients of `q` on `P_Λ`, zero elsewhere.
    pub fn estimate(&self) -> CVector {
        let mut s_hat = CVector::from_element(self.problem.n_cp * self.problem.n_bs, ZERO);
        if self.support.is_empty() {
            return s_hat;
        }
        let p_l = blocks(self.problem, &self.support);
        if let Some(c) = projection_coeffs(&p_l, &self.problem.q) {
            let n_bs = self.problem.n_bs;
            for (j, &i) in self.support.iter().enumerate() {
                s_hat.rows_mut(i * n_bs, n_bs).copy_from(&c.rows(j * n_bs, n_bs));
            }
        }
        s_hat
    }
}

/// Output of [`tdcebs_literal`].
#[derive(Debug, Clone)]
pub struct LiteralResult {
    pub support: Vec<usize>,
    pub s_hat: CVector,
    pub residual_history: Vec<f64>,
    pub stop_reason: StopReason,
}

/// Runs the stacked pursuit until `stop` fires, with the same stopping
/// semantics as [`crate::solver::tdcebs`].
pub fn tdcebs_literal(problem: &StackedProblem, stop: &StopRule) -> Result<LiteralResult> {
    stop.validate()?;
    let mut pursuit = LiteralPursuit::new(problem);
    let cap = problem.k.min(problem.n_cp);
    let mut history = Vec::new();
    let mut prev = pursuit.residual().norm();
    let stop_reason = loop {
        if let Some(eps) = stop.threshold() {
            if prev < eps {
                break StopReason::ResidualThreshold;
            }
        }
        if prev == 0.0 {
            break StopReason::ZeroResidual;
        }
        if let Some(t) = stop.max_iterations() {
            if history.len() >= t {
                break StopReason::MaxIterations;
            }
        }
        if pursuit.support().len() >= cap {
            break StopReason::SupportFull;
        }
        if pursuit.step()?.is_none() {
            break StopReason::RankExhausted;
        }
        let cur = pursuit.residual().norm();
        history.push(cur);
        if stop.non_decrease() && cur >= prev {
            pursuit.undo();
            break StopReason::NonDecrease;
        }
        prev = cur;
    };
    Ok(LiteralResult {
        support: pursuit.support().to_vec(),
        s_hat: pursuit.estimate(),
        residual_history: history,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use crate::rng::{complex_gaussian, seeded};
    use num_complex::Complex64;

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = seeded(seed);
        CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn single_block() {
        let a = CMatrix::from_element(1, 1, Complex64::new(0.5, -2.0));
        let z = random(1, 2, 1);
        let p = build_stacked(&a, &z, None).unwrap();
        let want = CMatrix::identity(2, 2) * Complex64::new(0.5, -2.0);
        assert_eq!(p.b, want);
    }

    #[test]
    fn stacked_product_matches_matrix_product() {
        let a = random(3, 4, 2);
        let h = random(4, 2, 3);
        let z = &a * &h;
        let p = build_stacked(&a, &z, Some(&h)).unwrap();
        let bs = &p.b * p.s.as_ref().unwrap();
        assert!((bs - &p.q).norm() <= 1e-12);
        assert_eq!(devectorize_rows(p.s.as_ref().unwrap(), 2), h);
    }

    #[test]
    fn blocks_have_scaled_identity_gram() {
        let a = random(5, 3, 4);
        let z = random(5, 4, 5);
        let p = build_stacked(&a, &z, None).unwrap();
        for i in 0..3 {
            let p_i = extract_block(&p, i).unwrap();
            let gram = p_i.ad_mul(&p_i);
            let c = a.column(i).norm_squared();
            assert!(frobenius(&(gram - CMatrix::identity(4, 4) * Complex64::new(c, 0.0))) < 1e-12);
            // entry (k·N_BS + r, c) of P_i is A(k, i) δ_rc
            for kk in 0..5 {
                for r in 0..4 {
                    for cc in 0..4 {
                        let want = if r == cc { a[(kk, i)] } else { ZERO };
                        assert_eq!(p_i[(kk * 4 + r, cc)], want);
                    }
                }
            }
        }
        assert!(extract_block(&p, 3).is_err());
    }

    #[test]
    fn size_guard() {
        let a = CMatrix::zeros(132, 144);
        let z = CMatrix::zeros(132, 64);
        assert!(matches!(build_stacked(&a, &z, None), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn zero_observation_gives_empty_support() {
        let a = random(6, 8, 6);
        let z = CMatrix::zeros(6, 4);
        let p = build_stacked(&a, &z, None).unwrap();
        let res = tdcebs_literal(&p, &StopRule::MaxIterations(3)).unwrap();
        assert!(res.support.is_empty());
        assert!(res.s_hat.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn single_path_support() {
        let a = random(6, 8, 7);
        let mut h = CMatrix::zeros(8, 4);
        h.set_row(5, &random(1, 4, 8).row(0));
        let z = &a * &h;
        let p = build_stacked(&a, &z, Some(&h)).unwrap();
        let res = tdcebs_literal(&p, &StopRule::ResidualThreshold(1e-9)).unwrap();
        assert_eq!(res.support, vec![5]);
        assert!((devectorize_rows(&res.s_hat, 4) - h).norm() < 1e-10);
    }
}
