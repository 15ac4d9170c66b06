mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use tdcebs::channel::OfdmNumerology;
use tdcebs::config::{ScenarioConfig, Scheme};
use tdcebs::eval::{
    ber_trial, format_summary_csv, format_trials_csv, frequency_response_at, nmse, run_sweep, SweepMode,
    NMSE_FLOOR_DB, SUMMARY_HEADER, TRIALS_HEADER,
};
use tdcebs::linalg::CMatrix;
use tdcebs::rng::seeded;
use tdcebs::Complex64;

use common::{c, random, Desk};

// Gaussian tail by composite Simpson integration of the density on [0, x].
fn q_function(x: f64) -> f64 {
    let n = 4000;
    let h = x / n as f64;
    let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * PI).sqrt();
    let mut acc = pdf(0.0) + pdf(x);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(i as f64 * h);
    }
    0.5 - acc * h / 3.0
}

#[test]
fn q_function_reference_points() {
    assert!((q_function(0.0) - 0.5).abs() < 1e-15);
    assert!((q_function(1.0) - 0.158_655_253_931_457).abs() < 1e-12);
    assert!((q_function(3.0) - 0.001_349_898_031_630).abs() < 1e-12);
}

#[test]
fn nmse_reference_values() {
    let h = random(6, 3, 1);
    assert!(nmse(&CMatrix::zeros(6, 3), &h).unwrap().abs() < 1e-12);
    let off = &h * c(1.1, 0.0);
    assert!((nmse(&off, &h).unwrap() + 20.0).abs() < 1e-9);
    assert_eq!(nmse(&h, &h).unwrap(), NMSE_FLOOR_DB);
    assert_eq!(nmse(&h, &CMatrix::zeros(6, 3)).unwrap_err().kind(), "zero_reference");
}

#[test]
fn frequency_response_matches_direct_sum() {
    let num = OfdmNumerology::new(96, 120e3, 12).unwrap();
    let h = random(12, 4, 5);
    let ks = [0usize, 1, 17, 48, 95];
    let f = frequency_response_at(&h, &num, &ks).unwrap();
    for (r, &k) in ks.iter().enumerate() {
        for j in 0..4 {
            let mut want = Complex64::new(0.0, 0.0);
            for n in 0..12 {
                want += h[(n, j)] * Complex64::from_polar(1.0, -2.0 * PI * (k * n) as f64 / 96.0);
            }
            assert!((f[(r, j)] - want).norm() < 1e-12);
        }
    }
}

#[test]
fn perfect_csi_ber_matches_closed_form() {
    // With perfect CSI each subcarrier is an AWGN QPSK link with real gain
    // ‖h_k‖, so each bit errs with probability Q(‖h_k‖ / σ).
    let desk = Desk::new(64, 16, 16, 4, 4);
    let h = desk.channel(4, 3);
    let snr_db = 3.0;
    let n_symbols = 400;
    let f = frequency_response_at(h.taps(), &desk.numerology, &(0..64).collect::<Vec<_>>()).unwrap();
    let gains: Vec<f64> = (0..64).map(|k| f.row(k).norm()).collect();
    let sigma2 = gains.iter().map(|g| g * g).sum::<f64>() / 64.0 / 10f64.powf(snr_db / 10.0);
    let probs: Vec<f64> = gains.iter().map(|g| q_function(g / sigma2.sqrt())).collect();
    let expected = probs.iter().sum::<f64>() / 64.0;
    let var: f64 = probs.iter().map(|p| p * (1.0 - p)).sum::<f64>() * 2.0 * n_symbols as f64;
    let bits = (64 * 2 * n_symbols) as f64;
    let se = var.sqrt() / bits;

    let got = ber_trial(&h, h.taps(), &desk.numerology, 0..64, snr_db, n_symbols, &mut seeded(8)).unwrap();
    assert_eq!(got.bits_total as f64, bits);
    assert!((got.ber() - expected).abs() < 3.0 * se, "{} vs {expected} ± {se}", got.ber());
}

#[test]
fn noiseless_link_is_error_free_and_zero_estimate_sends_nothing() {
    let desk = Desk::standard();
    let h = desk.channel(4, 1);
    let ok = ber_trial(&h, h.taps(), &desk.numerology, 0..64, f64::INFINITY, 3, &mut seeded(0)).unwrap();
    assert_eq!(ok.bit_errors, 0);
    assert_eq!(ok.bits_total, 64 * 2 * 3);
    let none = ber_trial(&h, &CMatrix::zeros(32, 8), &desk.numerology, 0..64, 10.0, 3, &mut seeded(0)).unwrap();
    assert_eq!(none.bits_total, 0);
    assert_eq!(none.ber(), 0.0);
}

fn desk_sweep(threads: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::from_text(
        "n_subcarriers = 64\ncp_length = 32\nn_bs = 8\nn_pilots = 32, 16\nl_paths = 4\n\
         snr_db = 0, 10\ntrials = 6\nschemes = tdcebs, omp, ls, ideal\nstop = threshold:1e-6, maxiter:8\n\
         ber_symbols = 4\nseed = 99\n",
    )
    .unwrap();
    cfg.threads = threads;
    cfg
}

#[test]
fn sweep_output_is_independent_of_thread_count() {
    let serial = run_sweep(&desk_sweep(1), SweepMode::Ber).unwrap();
    let parallel = run_sweep(&desk_sweep(4), SweepMode::Ber).unwrap();
    assert_eq!(format_trials_csv(&serial.records), format_trials_csv(&parallel.records));
    assert_eq!(format_summary_csv(&serial.cells), format_summary_csv(&parallel.cells));
}

#[test]
fn sweep_layout_and_csv_shape() {
    let res = run_sweep(&desk_sweep(0), SweepMode::Nmse).unwrap();
    assert_eq!(res.cells.len(), 4 * 2 * 2);
    assert_eq!(res.records.len(), 4 * 2 * 2 * 6);
    let trials = format_trials_csv(&res.records);
    let mut lines = trials.lines();
    assert_eq!(lines.next(), Some(TRIALS_HEADER));
    let cols = TRIALS_HEADER.split(',').count();
    assert!(lines.all(|l| l.split(',').count() == cols));
    let summary = format_summary_csv(&res.cells);
    assert_eq!(summary.lines().next(), Some(SUMMARY_HEADER));
    assert_eq!(summary.lines().count(), 1 + res.cells.len());

    let ideal = res.cell(Scheme::Ideal, 10.0, 32).unwrap();
    assert_eq!(ideal.mean_nmse_db, NMSE_FLOOR_DB);
    // K = 16 < N_cp: the full LS baseline cannot run
    let ls = res.cell(Scheme::Ls, 10.0, 16).unwrap();
    assert_eq!((ls.trials, ls.failed), (0, 6));
    let ls_ok = res.cell(Scheme::Ls, 10.0, 32).unwrap();
    assert_eq!(ls_ok.failed, 0);
}

#[test]
fn higher_snr_lowers_nmse() {
    let res = run_sweep(&desk_sweep(0), SweepMode::Nmse).unwrap();
    for scheme in [Scheme::Tdcebs, Scheme::Omp, Scheme::Ls] {
        let lo = res.cell(scheme, 0.0, 32).unwrap().mean_nmse_db;
        let hi = res.cell(scheme, 10.0, 32).unwrap().mean_nmse_db;
        assert!(hi < lo, "{scheme}: {hi} !< {lo}");
    }
}

#[test]
fn different_master_seeds_give_different_draws() {
    let a = run_sweep(&desk_sweep(0), SweepMode::Nmse).unwrap();
    let mut cfg = desk_sweep(0);
    cfg.seed = 100;
    let b = run_sweep(&cfg, SweepMode::Nmse).unwrap();
    assert_ne!(format_trials_csv(&a.records), format_trials_csv(&b.records));
}

proptest! {
    #[test]
    fn nmse_is_scale_invariant(seed in 0u64..1000, s in 1e-6f64..1e6) {
        let h = random(8, 3, seed);
        let e = random(8, 3, seed + 1);
        let k = c(s, 0.0);
        let a = nmse(&e, &h).unwrap();
        let b = nmse(&(&e * k), &(&h * k)).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }
}
