use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::channel::{read_channel_file, sample_channel, synthesize_paths, ChannelMatrix};
use crate::config::{ChannelSource, ScenarioConfig, Scheme};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::pilot::{centered_band, dft_codebook, dft_submatrix, equispaced_pilots, measure, Codebook};
use crate::rng::{derive_seed, seeded};
use crate::solver::{ls_full, omp_percolumn, tdcebs};

use super::{ber_trial, nmse_linear, to_db};

const TAG_CHANNEL: u64 = 1;
const TAG_NOISE: u64 = 2;
const TAG_BER: u64 = 3;

/// Which metrics a sweep scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Nmse,
    /// NMSE plus a BER link trial per estimate.
    Ber,
}

impl SweepMode {
    pub fn file_stem(&self) -> &'static str {
        match self {
            SweepMode::Nmse => "nmse",
            SweepMode::Ber => "ber",
        }
    }
}

/// One scheme evaluated on one channel/noise draw.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: usize,
    /// Sub-seed of the noise stream for this draw.
    pub seed: u64,
    pub scheme: Scheme,
    pub snr_db: f64,
    pub k_pilots: usize,
    /// `None` when the estimator failed.
    pub nmse_db: Option<f64>,
    pub nmse_linear: Option<f64>,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub support_size: usize,
    pub runtime_ms: f64,
    pub error: Option<String>,
}

/// Aggregate of one `(scheme, snr, K)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub k_pilots: usize,
    /// Successful trials.
    pub trials: usize,
    pub failed: usize,
    pub mean_nmse_linear: f64,
    /// 95% normal-approximation half-width of the linear mean.
    pub nmse_ci_linear: f64,
    pub mean_nmse_db: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    /// 95% half-width of the mean per-trial BER.
    pub ber_ci: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub mode: SweepMode,
    pub cells: Vec<CellSummary>,
    pub records: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn cell(&self, scheme: Scheme, snr_db: f64, k_pilots: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.scheme == scheme && c.snr_db == snr_db && c.k_pilots == k_pilots)
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().map(|c| c.failed).sum()
    }
}

/// Synthetic channel of trial `trial`; depends only on the master seed and
/// the trial index.
pub fn scenario_channel(cfg: &ScenarioConfig, trial: usize) -> Result<ChannelMatrix> {
    let numerology = cfg.numerology()?;
    let mut rng = seeded(derive_seed(cfg.seed, &[TAG_CHANNEL, trial as u64]));
    let paths = synthesize_paths(cfg.l_paths, cfg.delay_grid(), &numerology, &mut rng)?;
    sample_channel(&paths, &numerology, cfg.n_bs, cfg.pulse)
}

/// Seed of the pilot-noise stream for one `(K, SNR, trial)` draw.
pub fn noise_seed(master: u64, k_pilots: usize, snr_db: f64, trial: usize) -> u64 {
    derive_seed(master, &[TAG_NOISE, k_pilots as u64, snr_db.to_bits(), trial as u64])
}

struct PilotSetup {
    k: usize,
    sensing: CMatrix,
    dft: CMatrix,
    layout: crate::pilot::PilotLayout,
}

struct Setup {
    cfg: ScenarioConfig,
    numerology: crate::channel::OfdmNumerology,
    band: std::ops::Range<usize>,
    codebook: Codebook,
    pilots: Vec<PilotSetup>,
    fixed_channel: Option<ChannelMatrix>,
}

impl Setup {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let numerology = cfg.numerology()?;
        let band = centered_band(cfg.n_subcarriers, cfg.used_subcarriers)?;
        let codebook = dft_codebook(cfg.n_bs, cfg.n_beams)?;
        let pilots = cfg
            .n_pilots
            .iter()
            .map(|&k| {
                let layout = equispaced_pilots(&numerology, band.clone(), k)?;
                let dft = dft_submatrix(&numerology, layout.indices());
                let sensing = crate::pilot::sensing_matrix(&layout, &dft)?;
                Ok(PilotSetup {
                    k,
                    sensing,
                    dft,
                    layout,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let fixed_channel = match &cfg.channel {
            ChannelSource::Synthetic => None,
            ChannelSource::File(p) => {
                let h = read_channel_file(p)?;
                if h.cp_length() != cfg.cp_length || h.n_bs() != cfg.n_bs {
                    return Err(Error::Dimension(format!(
                        "{} is {}x{}, scenario expects {}x{}",
                        p.display(),
                        h.cp_length(),
                        h.n_bs(),
                        cfg.cp_length,
                        cfg.n_bs
                    )));
                }
                Some(h)
            }
        };
        Ok(Self {
            cfg: cfg.clone(),
            numerology,
            band,
            codebook,
            pilots,
            fixed_channel,
        })
    }

    fn channel(&self, trial: usize) -> Result<ChannelMatrix> {
        match &self.fixed_channel {
            Some(h) => Ok(h.clone()),
            None => scenario_channel(&self.cfg, trial),
        }
    }

    /// Runs every scheme on one `(K, SNR, trial)` draw.
    fn run_unit(&self, pi: usize, snr_db: f64, trial: usize, mode: SweepMode) -> Vec<TrialRecord> {
        let p = &self.pilots[pi];
        let coords = [p.k as u64, snr_db.to_bits(), trial as u64];
        let noise_seed = noise_seed(self.cfg.seed, p.k, snr_db, trial);
        let ber_seed = derive_seed(self.cfg.seed, &[TAG_BER, coords[0], coords[1], coords[2]]);
        let blank = |scheme: Scheme| TrialRecord {
            trial_id: trial,
            seed: noise_seed,
            scheme,
            snr_db,
            k_pilots: p.k,
            nmse_db: None,
            nmse_linear: None,
            bit_errors: 0,
            bits_total: 0,
            support_size: 0,
            runtime_ms: 0.0,
            error: None,
        };
        let fail_all = |e: Error| {
            self.cfg
                .schemes
                .iter()
                .map(|&s| TrialRecord {
                    error: Some(format!("{}: {e}", e.kind())),
                    ..blank(s)
                })
                .collect::<Vec<_>>()
        };

        let h = match self.channel(trial) {
            Ok(h) => h,
            Err(e) => return fail_all(e),
        };
        let meas = match measure(&p.layout, &p.dft, &h, &self.codebook, snr_db, &mut seeded(noise_seed)) {
            Ok(m) => m,
            Err(e) => return fail_all(e),
        };
        debug_assert_eq!(meas.sensing, p.sensing);

        self.cfg
            .schemes
            .iter()
            .map(|&scheme| {
                let mut rec = blank(scheme);
                let start = Instant::now();
                let estimate: Result<(CMatrix, usize)> = match scheme {
                    Scheme::Tdcebs => tdcebs(&p.sensing, &meas.observation, &self.cfg.stop, self.cfg.metric)
                        .map(|r| (r.full_estimate, r.support.len())),
                    Scheme::Omp => omp_percolumn(&p.sensing, &meas.observation, &self.cfg.stop)
                        .map(|r| {
                            let size = r.union_support_size();
                            (r.full_estimate, size)
                        }),
                    Scheme::Ls => ls_full(&p.sensing, &meas.observation).map(|e| (e, self.cfg.cp_length)),
                    Scheme::Ideal => Ok((h.taps().clone(), h.nonzero_rows().len())),
                };
                if self.cfg.timing {
                    rec.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                }
                let (est, support) = match estimate {
                    Ok(v) => v,
                    Err(e) => {
                        rec.error = Some(format!("{}: {e}", e.kind()));
                        return rec;
                    }
                };
                rec.support_size = support;
                match nmse_linear(&est, h.taps()) {
                    Ok(v) => {
                        rec.nmse_linear = Some(v);
                        rec.nmse_db = Some(to_db(v));
                    }
                    Err(e) => {
                        rec.error = Some(format!("{}: {e}", e.kind()));
                        return rec;
                    }
                }
                if mode == SweepMode::Ber {
                    let ber = ber_trial(
                        &h,
                        &est,
                        &self.numerology,
                        self.band.clone(),
                        snr_db,
                        self.cfg.ber_symbols,
                        &mut seeded(ber_seed),
                    );
                    match ber {
                        Ok(c) => {
                            rec.bit_errors = c.bit_errors;
                            rec.bits_total = c.bits_total;
                        }
                        Err(e) => rec.error = Some(format!("{}: {e}", e.kind())),
                    }
                }
                rec
            })
            .collect()
    }
}

fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

fn summarize(cfg: &ScenarioConfig, records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    for &k in &cfg.n_pilots {
        for &snr in &cfg.snr_db {
            for &scheme in &cfg.schemes {
                let cell: Vec<&TrialRecord> = records
                    .iter()
                    .filter(|r| r.scheme == scheme && r.k_pilots == k && r.snr_db.to_bits() == snr.to_bits())
                    .collect();
                let ok: Vec<&&TrialRecord> = cell.iter().filter(|r| r.error.is_none()).collect();
                let nmse: Vec<f64> = ok.iter().filter_map(|r| r.nmse_linear).collect();
                let (mean_nmse_linear, nmse_ci_linear) = mean_ci(&nmse);
                let per_trial_ber: Vec<f64> = ok
                    .iter()
                    .filter(|r| r.bits_total > 0)
                    .map(|r| r.bit_errors as f64 / r.bits_total as f64)
                    .collect();
                let (_, ber_ci) = mean_ci(&per_trial_ber);
                let bit_errors = ok.iter().map(|r| r.bit_errors).sum();
                let bits_total = ok.iter().map(|r| r.bits_total).sum();
                cells.push(CellSummary {
                    scheme,
                    snr_db: snr,
                    k_pilots: k,
                    trials: ok.len(),
                    failed: cell.len() - ok.len(),
                    mean_nmse_linear,
                    nmse_ci_linear,
                    mean_nmse_db: if ok.is_empty() { f64::NAN } else { to_db(mean_nmse_linear) },
                    bit_errors,
                    bits_total,
                    ber: if bits_total == 0 {
                        0.0
                    } else {
                        bit_errors as f64 / bits_total as f64
                    },
                    ber_ci: if per_trial_ber.is_empty() { 0.0 } else { ber_ci },
                });
            }
        }
    }
    cells
}

/// Runs every `(K, SNR, trial)` draw of the scenario and scores each scheme.
///
/// Channel draws depend only on `(seed, trial)` and noise on
/// `(seed, K, SNR, trial)`, so all schemes see the same data and results do
/// not depend on thread count or scheduling. Failed estimates are kept in
/// `records` with their error and counted in `failed`.
pub fn run_sweep(cfg: &ScenarioConfig, mode: SweepMode) -> Result<SweepResult> {
    let setup = Setup::new(cfg)?;
    let units: Vec<(usize, f64, usize)> = (0..setup.pilots.len())
        .flat_map(|pi| {
            cfg.snr_db
                .iter()
                .flat_map(move |&snr| (0..cfg.trials).map(move |t| (pi, snr, t)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_unit: Vec<Vec<TrialRecord>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(pi, snr, t)| setup.run_unit(pi, snr, t, mode))
            .collect()
    });
    let records: Vec<TrialRecord> = per_unit.into_iter().flatten().collect();
    let cells = summarize(cfg, &records);
    Ok(SweepResult { mode, cells, records })
}

pub const TRIALS_HEADER: &str =
    "trial_id,seed,scheme,snr_db,k_pilots,nmse_db,bit_errors,bits_total,support_size,runtime_ms,error";

pub const SUMMARY_HEADER: &str = "scheme,snr_db,k_pilots,trials,failed,mean_nmse_db,mean_nmse_linear,\
nmse_ci_linear,bit_errors,bits_total,ber,ber_ci";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn format_trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(TRIALS_HEADER);
    out.push('\n');
    for r in records {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.trial_id,
            r.seed,
            r.scheme,
            r.snr_db,
            r.k_pilots,
            opt(r.nmse_db),
            r.bit_errors,
            r.bits_total,
            r.support_size,
            r.runtime_ms,
            err
        )
        .unwrap();
    }
    out
}

pub fn format_summary_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.scheme,
            c.snr_db,
            c.k_pilots,
            c.trials,
            c.failed,
            c.mean_nmse_db,
            c.mean_nmse_linear,
            c.nmse_ci_linear,
            c.bit_errors,
            c.bits_total,
            c.ber,
            c.ber_ci
        )
        .unwrap();
    }
    out
}

pub fn write_trials_csv(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_trials_csv(records))?;
    Ok(())
}

pub fn write_summary_csv(cells: &[CellSummary], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_summary_csv(cells))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> ScenarioConfig {
        ScenarioConfig::from_text(
            "n_subcarriers = 64\ncp_length = 32\nn_bs = 8\nn_pilots = 32\nl_paths = 4\n\
             snr_db = inf, 5\ntrials = 3\nschemes = tdcebs, omp, ls, ideal\n\
             stop = threshold:1e-6\nber_symbols = 2\n",
        )
        .unwrap()
    }

    #[test]
    fn noiseless_desk_scale_is_exact() {
        let res = run_sweep(&desk(), SweepMode::Nmse).unwrap();
        let cell = res.cell(Scheme::Tdcebs, f64::INFINITY, 32).unwrap();
        assert_eq!(cell.trials, 3);
        assert!(cell.mean_nmse_db <= -120.0, "{}", cell.mean_nmse_db);
        assert_eq!(res.records.len(), 2 * 3 * 4);
    }

    #[test]
    fn failures_are_counted_not_dropped() {
        let cfg = ScenarioConfig::from_text(
            "n_subcarriers = 64\ncp_length = 32\nn_bs = 4\nn_pilots = 16\nl_paths = 3\n\
             snr_db = 10\ntrials = 2\nschemes = ls, tdcebs\n",
        )
        .unwrap();
        let res = run_sweep(&cfg, SweepMode::Nmse).unwrap();
        let ls = res.cell(Scheme::Ls, 10.0, 16).unwrap();
        assert_eq!((ls.trials, ls.failed), (0, 2));
        assert!(ls.mean_nmse_db.is_nan());
        assert!(res.records.iter().filter(|r| r.scheme == Scheme::Ls).all(|r| r.error.as_deref().unwrap().starts_with("low_rank")));
        assert_eq!(res.cell(Scheme::Tdcebs, 10.0, 16).unwrap().failed, 0);
        assert!(format_trials_csv(&res.records).lines().count() == 5);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let mut cfg = desk();
        cfg.threads = 1;
        let serial = run_sweep(&cfg, SweepMode::Ber).unwrap();
        cfg.threads = 4;
        let parallel = run_sweep(&cfg, SweepMode::Ber).unwrap();
        assert_eq!(format_trials_csv(&serial.records), format_trials_csv(&parallel.records));
        assert_eq!(format_summary_csv(&serial.cells), format_summary_csv(&parallel.cells));
    }
}
