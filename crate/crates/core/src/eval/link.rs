use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{ChannelMatrix, OfdmNumerology};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ZERO};
use crate::rng::complex_gaussian;

/// `Σ_n H(n,:)·exp(−j2π·k·n / N_c)` for each subcarrier `k` in `subcarriers`.
pub fn frequency_response_at(h: &CMatrix, numerology: &OfdmNumerology, subcarriers: &[usize]) -> Result<CMatrix> {
    let nc = numerology.n_subcarriers();
    if h.nrows() != numerology.cp_length() {
        return Err(Error::Dimension(format!(
            "channel has {} taps, numerology has N_cp = {}",
            h.nrows(),
            numerology.cp_length()
        )));
    }
    if let Some(&bad) = subcarriers.iter().find(|&&k| k >= nc) {
        return Err(Error::OutOfRange {
            what: "subcarrier",
            detail: format!("{bad} >= N_c = {nc}"),
        });
    }
    let twiddle: Vec<Complex64> = (0..nc)
        .map(|e| Complex64::from_polar(1.0, -2.0 * PI * e as f64 / nc as f64))
        .collect();
    let w = CMatrix::from_fn(subcarriers.len(), h.nrows(), |r, n| twiddle[(subcarriers[r] * n) % nc]);
    Ok(w * h)
}

/// Frequency response on every subcarrier, `N_c × N_BS`.
pub fn frequency_response(h: &CMatrix, numerology: &OfdmNumerology) -> Result<CMatrix> {
    let all: Vec<usize> = (0..numerology.n_subcarriers()).collect();
    frequency_response_at(h, numerology, &all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BerCount {
    pub bit_errors: u64,
    pub bits_total: u64,
}

impl BerCount {
    pub fn ber(&self) -> f64 {
        if self.bits_total == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_total as f64
        }
    }
}

/// Downlink QPSK link over the used band with per-subcarrier maximum-ratio
/// transmission computed from `h_est`.
///
/// On subcarrier `k` the beamformer is `w = conj(ĥ_k) / ‖ĥ_k‖`; the user sees
/// `g = h_k·w` and equalizes with the estimated gain `ĝ = ĥ_k·w = ‖ĥ_k‖`.
/// Noise variance is `mean|g|² / 10^(snr_db/10)` over the active subcarriers.
/// Subcarriers with `ĥ_k = 0` carry no data.
pub fn ber_trial<R: Rng + ?Sized>(
    h_true: &ChannelMatrix,
    h_est: &CMatrix,
    numerology: &OfdmNumerology,
    used_band: Range<usize>,
    snr_db: f64,
    n_symbols: usize,
    rng: &mut R,
) -> Result<BerCount> {
    if h_est.shape() != h_true.taps().shape() {
        return Err(Error::Dimension(format!(
            "estimate is {:?}, channel is {:?}",
            h_est.shape(),
            h_true.taps().shape()
        )));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::OutOfRange {
            what: "SNR",
            detail: format!("{snr_db} dB"),
        });
    }
    let used: Vec<usize> = used_band.collect();
    let hf = frequency_response_at(h_true.taps(), numerology, &used)?;
    let hf_est = frequency_response_at(h_est, numerology, &used)?;

    // (true effective gain, estimated effective gain) per active subcarrier
    let mut gains: Vec<(Complex64, f64)> = Vec::with_capacity(used.len());
    for k in 0..used.len() {
        let est = hf_est.row(k);
        let norm = est.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            continue;
        }
        let g = hf
            .row(k)
            .iter()
            .zip(est.iter())
            .fold(ZERO, |acc, (h, e)| acc + h * e.conj())
            / norm;
        gains.push((g, norm));
    }
    if gains.is_empty() {
        return Ok(BerCount::default());
    }
    let reference = gains.iter().map(|(g, _)| g.norm_sqr()).sum::<f64>() / gains.len() as f64;
    let variance = reference / 10f64.powf(snr_db / 10.0);

    let mut count = BerCount::default();
    for _ in 0..n_symbols {
        for &(g, g_hat) in &gains {
            let b0: bool = rng.random();
            let b1: bool = rng.random();
            let s = Complex64::new(
                if b0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 },
                if b1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 },
            );
            let mut r = g * s;
            if variance > 0.0 {
                r += complex_gaussian(rng, variance);
            }
            let eq = r / g_hat;
            count.bit_errors += ((eq.re < 0.0) != b0) as u64 + ((eq.im < 0.0) != b1) as u64;
            count.bits_total += 2;
        }
    }
    Ok(count)
}
