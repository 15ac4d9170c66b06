//! Command-line front end.
//!
//! Settings are layered: built-in defaults, then `--config`, then
//! `TDCEBS_*` environment variables, then the explicit flags.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::channel::{read_channel_file, write_channel_file, ChannelMatrix};
use crate::config::{ChannelSource, ScenarioConfig, Scheme};
use crate::error::{Error, Result};
use crate::eval::{noise_seed, nmse, run_sweep, scenario_channel, write_summary_csv, write_trials_csv, SweepMode};
use crate::pilot::{centered_band, dft_codebook, dft_submatrix, equispaced_pilots, measure};
use crate::rng::seeded;
use crate::solver::{ls_full, omp_percolumn, tdcebs};

#[derive(Debug, Parser)]
#[command(name = "tdcebs", version, about = "Block-sparse time-domain channel estimation for mmWave MIMO-OFDM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Scenario file (`key = value` lines)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Channel file in CHAN v1 format
    #[arg(long, global = true)]
    pub channel: Option<PathBuf>,
    /// SNR in dB (`inf` for noiseless)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    /// Estimation scheme: tdcebs | omp | ls | ideal
    #[arg(long, global = true)]
    pub scheme: Option<Scheme>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a channel and write it as a CHAN v1 file
    GenChannel,
    /// Estimate one channel from one noisy pilot block
    Estimate,
    /// Monte-Carlo NMSE sweep
    SweepNmse,
    /// Monte-Carlo NMSE and BER sweep
    SweepBer,
}

/// Resolves the scenario from defaults, config file, environment and flags.
pub fn resolve_config<I>(common: &CommonArgs, env: I) -> Result<ScenarioConfig>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    cfg.apply_env(env)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(ch) = &common.channel {
        cfg.channel = ChannelSource::File(ch.clone());
    }
    if let Some(snr) = common.snr {
        cfg.snr_db = vec![snr];
    }
    if let Some(scheme) = common.scheme {
        cfg.schemes = vec![scheme];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_channel(cfg: &ScenarioConfig) -> Result<ChannelMatrix> {
    let h = match &cfg.channel {
        ChannelSource::File(p) => read_channel_file(p)?,
        ChannelSource::Synthetic => scenario_channel(cfg, 0)?,
    };
    if h.cp_length() != cfg.cp_length || h.n_bs() != cfg.n_bs {
        return Err(Error::Dimension(format!(
            "channel is {}x{}, scenario expects {}x{}",
            h.cp_length(),
            h.n_bs(),
            cfg.cp_length,
            cfg.n_bs
        )));
    }
    Ok(h)
}

fn gen_channel(cfg: &ScenarioConfig, out: &mut dyn Write) -> Result<()> {
    let h = scenario_channel(cfg, 0)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("channel.chan");
    write_channel_file(&h, &path)?;
    let rows = h.nonzero_rows();
    let ts = cfg.numerology()?.sample_duration();
    writeln!(out, "paths: {}", cfg.l_paths)?;
    writeln!(out, "size: {}x{}", h.cp_length(), h.n_bs())?;
    writeln!(out, "nonzero_rows: {}", rows.len())?;
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        writeln!(
            out,
            "delay_taps: {first}..={last} (spread {:.3} ns)",
            (last - first) as f64 * ts * 1e9
        )?;
    }
    writeln!(out, "wrote: {}", path.display())?;
    Ok(())
}

fn estimate(cfg: &ScenarioConfig, out: &mut dyn Write) -> Result<()> {
    let h = load_channel(cfg)?;
    let numerology = cfg.numerology()?;
    let band = centered_band(cfg.n_subcarriers, cfg.used_subcarriers)?;
    let k = cfg.n_pilots[0];
    let snr = cfg.snr_db[0];
    let scheme = cfg.schemes[0];
    let layout = equispaced_pilots(&numerology, band, k)?;
    let d = dft_submatrix(&numerology, layout.indices());
    let codebook = dft_codebook(cfg.n_bs, cfg.n_beams)?;
    let meas = measure(&layout, &d, &h, &codebook, snr, &mut seeded(noise_seed(cfg.seed, k, snr, 0)))?;

    let (estimate, support, iterations, reason) = match scheme {
        Scheme::Tdcebs => {
            let r = tdcebs(&meas.sensing, &meas.observation, &cfg.stop, cfg.metric)?;
            let (s, it, why) = (r.support.len(), r.iterations(), r.stop_reason.to_string());
            (r.full_estimate, s, it, why)
        }
        Scheme::Omp => {
            let r = omp_percolumn(&meas.sensing, &meas.observation, &cfg.stop)?;
            let it = r.columns.iter().map(|c| c.iterations()).max().unwrap_or(0);
            let s = r.union_support_size();
            (r.full_estimate, s, it, "per_column".to_string())
        }
        Scheme::Ls => {
            let e = ls_full(&meas.sensing, &meas.observation)?;
            (e, cfg.cp_length, 0, "none".to_string())
        }
        Scheme::Ideal => (h.taps().clone(), h.nonzero_rows().len(), 0, "none".to_string()),
    };
    let estimate = ChannelMatrix::new(estimate)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("estimate.chan");
    write_channel_file(&estimate, &path)?;
    writeln!(out, "scheme: {scheme}")?;
    writeln!(out, "k_pilots: {k}")?;
    writeln!(out, "snr_db: {snr}")?;
    writeln!(out, "nmse_db: {:.4}", nmse(estimate.taps(), h.taps())?)?;
    writeln!(out, "support_size: {support}")?;
    writeln!(out, "iterations: {iterations}")?;
    writeln!(out, "stop_reason: {reason}")?;
    writeln!(out, "wrote: {}", path.display())?;
    Ok(())
}

/// Returns the number of cells with no successful trial.
fn sweep(cfg: &ScenarioConfig, mode: SweepMode, out: &mut dyn Write) -> Result<usize> {
    let res = run_sweep(cfg, mode)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let stem = mode.file_stem();
    let trials = cfg.out_dir.join(format!("{stem}_trials.csv"));
    let summary = cfg.out_dir.join(format!("{stem}_summary.csv"));
    write_trials_csv(&res.records, &trials)?;
    write_summary_csv(&res.cells, &summary)?;
    fs::write(cfg.out_dir.join("scenario.cfg"), cfg.to_text())?;

    writeln!(out, "{:<8} {:>8} {:>5} {:>7} {:>7} {:>12} {:>12}", "scheme", "snr_db", "K", "trials", "failed", "nmse_db", "ber")?;
    for c in &res.cells {
        let ber = if mode == SweepMode::Ber {
            format!("{:.4e}", c.ber)
        } else {
            "-".into()
        };
        writeln!(
            out,
            "{:<8} {:>8} {:>5} {:>7} {:>7} {:>12.3} {:>12}",
            c.scheme.as_str(),
            c.snr_db,
            c.k_pilots,
            c.trials,
            c.failed,
            c.mean_nmse_db,
            ber
        )?;
    }
    writeln!(out, "wrote: {}", trials.display())?;
    writeln!(out, "wrote: {}", summary.display())?;
    Ok(res.cells.iter().filter(|c| c.trials == 0).count())
}

/// Runs the parsed command and returns the process exit status.
///
/// Errors are reported on stderr as a single
/// `error kind=<kind> message=<text>` line.
pub fn run(cli: Cli, out: &mut dyn Write) -> i32 {
    let result = resolve_config(&cli.common, std::env::vars()).and_then(|cfg| match cli.command {
        Command::GenChannel => gen_channel(&cfg, out).map(|_| 0),
        Command::Estimate => estimate(&cfg, out).map(|_| 0),
        Command::SweepNmse => sweep(&cfg, SweepMode::Nmse, out),
        Command::SweepBer => sweep(&cfg, SweepMode::Ber, out),
    });
    match result {
        Ok(0) => 0,
        Ok(dead_cells) => {
            eprintln!("error kind=empty_cells message=\"{dead_cells} cell(s) had no successful trial\"");
            2
        }
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            1
        }
    }
}
