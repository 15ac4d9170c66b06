//! Estimation quality metrics and the Monte-Carlo sweep engine.

mod link;
mod sweep;

pub use link::{ber_trial, frequency_response, frequency_response_at, BerCount};
pub use sweep::{
    format_summary_csv, format_trials_csv, noise_seed, run_sweep, scenario_channel, write_summary_csv,
    write_trials_csv, CellSummary, SweepMode, SweepResult, TrialRecord, SUMMARY_HEADER, TRIALS_HEADER,
};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, CMatrix};

/// Reported NMSE for a perfect estimate.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// `‖Ĥ − H‖²_F / ‖H‖²_F` on a linear scale.
pub fn nmse_linear(estimate: &CMatrix, reference: &CMatrix) -> Result<f64> {
    if estimate.shape() != reference.shape() {
        return Err(Error::Dimension(format!(
            "estimate is {:?}, reference is {:?}",
            estimate.shape(),
            reference.shape()
        )));
    }
    let denom = frobenius(reference).powi(2);
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(frobenius(&(estimate - reference)).powi(2) / denom)
}

/// Linear ratio to dB, clamped at [`NMSE_FLOOR_DB`].
pub fn to_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
    } else {
        NMSE_FLOOR_DB
    }
}

/// NMSE in dB, floored at −300 dB for an exact estimate.
pub fn nmse(estimate: &CMatrix, reference: &CMatrix) -> Result<f64> {
    nmse_linear(estimate, reference).map(to_db)
}
