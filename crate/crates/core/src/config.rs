//! Scenario configuration.
//!
//! Flat `key = value` text, one entry per line, `#` starts a comment, list
//! values are comma-separated. Every key can be overridden from the
//! environment as `TDCEBS_<KEY>` (upper case), e.g. `TDCEBS_SNR_DB=0,10`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{DelayGrid, OfdmNumerology, PulseShape};
use crate::error::{Error, Result};
use crate::pilot::{centered_band, default_used_subcarriers, PilotPattern};
use crate::solver::{SelectionMetric, StopRule};

pub const ENV_PREFIX: &str = "TDCEBS_";

/// Estimation schemes a sweep can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Tdcebs,
    Omp,
    Ls,
    /// The true channel, used as the performance bound.
    Ideal,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Tdcebs => "tdcebs",
            Scheme::Omp => "omp",
            Scheme::Ls => "ls",
            Scheme::Ideal => "ideal",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tdcebs" => Ok(Scheme::Tdcebs),
            "omp" => Ok(Scheme::Omp),
            "ls" => Ok(Scheme::Ls),
            "ideal" => Ok(Scheme::Ideal),
            other => Err(Error::Config(format!("unknown scheme `{other}` (tdcebs | omp | ls | ideal)"))),
        }
    }
}

/// Where each trial's channel comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    /// Fresh synthetic paths every trial.
    Synthetic,
    /// One imported channel, reused by every trial with fresh noise.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub cp_length: usize,
    /// Occupied subcarriers, centred in the grid.
    pub used_subcarriers: usize,
    pub n_bs: usize,
    pub n_beams: usize,
    /// Pilot counts to sweep.
    pub n_pilots: Vec<usize>,
    pub pulse: PulseShape,
    pub delay_grid: DelayGridKind,
    pub l_paths: usize,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub stop: StopRule,
    pub metric: SelectionMetric,
    pub out_dir: PathBuf,
    pub channel: ChannelSource,
    /// OFDM data symbols per BER trial.
    pub ber_symbols: usize,
    /// Worker threads for sweeps; 0 uses every core.
    pub threads: usize,
    /// Record per-trial wall-clock time. Off by default so result files are
    /// reproducible byte for byte.
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayGridKind {
    OnGrid,
    OffGrid,
}

const KEYS: &[&str] = &[
    "n_subcarriers",
    "subcarrier_spacing_hz",
    "cp_length",
    "used_subcarriers",
    "n_bs",
    "n_beams",
    "n_pilots",
    "pilot_pattern",
    "pulse",
    "delay_grid",
    "l_paths",
    "snr_db",
    "trials",
    "seed",
    "schemes",
    "stop",
    "metric",
    "out_dir",
    "channel",
    "ber_symbols",
    "threads",
    "timing",
];

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 2048,
            subcarrier_spacing_hz: 120e3,
            cp_length: 144,
            used_subcarriers: default_used_subcarriers(2048),
            n_bs: 64,
            n_beams: 64,
            n_pilots: vec![132, 88],
            pulse: PulseShape::OnGridDirac,
            delay_grid: DelayGridKind::OnGrid,
            l_paths: 21,
            snr_db: vec![-5.0, 0.0, 5.0, 10.0, 15.0],
            trials: 100,
            seed: 1,
            schemes: vec![Scheme::Tdcebs, Scheme::Omp],
            stop: StopRule::ResidualThreshold(0.01),
            metric: SelectionMetric::Simplified,
            out_dir: PathBuf::from("results"),
            channel: ChannelSource::Synthetic,
            ber_symbols: 10,
            threads: 0,
            timing: false,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let items = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Config(format!("{key}: cannot parse `{s}`")))
        })
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{}`", v.trim())))
}

fn parse_pulse(v: &str) -> Result<PulseShape> {
    let v = v.trim();
    if v == "dirac" {
        return Ok(PulseShape::OnGridDirac);
    }
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        ["rc", rolloff, span] => {
            let p = PulseShape::RaisedCosine {
                rolloff: parse_one("pulse", rolloff)?,
                span: parse_one("pulse", span)?,
            };
            p.validate()?;
            Ok(p)
        }
        _ => Err(Error::Config(format!("pulse: expected `dirac` or `rc:<rolloff>:<span>`, got `{v}`"))),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected a boolean, got `{other}`"))),
    }
}

impl ScenarioConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_subcarriers" => {
                self.n_subcarriers = parse_one(key, value)?;
                self.used_subcarriers = default_used_subcarriers(self.n_subcarriers);
            }
            "subcarrier_spacing_hz" => self.subcarrier_spacing_hz = parse_one(key, value)?,
            "cp_length" => self.cp_length = parse_one(key, value)?,
            "used_subcarriers" => self.used_subcarriers = parse_one(key, value)?,
            "n_bs" => {
                self.n_bs = parse_one(key, value)?;
                self.n_beams = self.n_bs;
            }
            "n_beams" => self.n_beams = parse_one(key, value)?,
            "n_pilots" => self.n_pilots = parse_list(key, value)?,
            "pilot_pattern" => {
                let patterns: Vec<PilotPattern> = parse_list(key, value)?;
                self.n_pilots = patterns
                    .iter()
                    .map(|p| p.pilot_count(self.used_subcarriers))
                    .collect::<Result<_>>()?;
            }
            "pulse" => self.pulse = parse_pulse(value)?,
            "delay_grid" => {
                self.delay_grid = match value.trim() {
                    "on" | "on-grid" => DelayGridKind::OnGrid,
                    "off" | "off-grid" => DelayGridKind::OffGrid,
                    other => return Err(Error::Config(format!("delay_grid: expected on|off, got `{other}`"))),
                }
            }
            "l_paths" => self.l_paths = parse_one(key, value)?,
            "snr_db" => self.snr_db = parse_list(key, value)?,
            "trials" => self.trials = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "schemes" => self.schemes = parse_list(key, value)?,
            "stop" => self.stop = StopRule::parse_list(value)?,
            "metric" => {
                self.metric = match value.trim() {
                    "simplified" => SelectionMetric::Simplified,
                    "normalized" => SelectionMetric::Normalized,
                    other => {
                        return Err(Error::Config(format!(
                            "metric: expected simplified|normalized, got `{other}`"
                        )))
                    }
                }
            }
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "channel" => {
                let v = value.trim();
                self.channel = if v == "synthetic" {
                    ChannelSource::Synthetic
                } else if let Some(p) = v.strip_prefix("file:") {
                    ChannelSource::File(PathBuf::from(p))
                } else {
                    return Err(Error::Config(format!("channel: expected synthetic|file:<path>, got `{v}`")));
                };
            }
            "ber_symbols" => self.ber_symbols = parse_one(key, value)?,
            "threads" => self.threads = parse_one(key, value)?,
            "timing" => self.timing = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every setting in `text`, in order.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, Path::new("<inline>"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::default();
        cfg.apply_text(&fs::read_to_string(path)?, path)?;
        Ok(cfg)
    }

    /// Applies `TDCEBS_<KEY>` overrides from `vars`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut found: Vec<(usize, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| {
                let key = k.strip_prefix(ENV_PREFIX)?.to_ascii_lowercase();
                KEYS.iter().position(|&known| known == key).map(|pos| (pos, v))
            })
            .collect();
        // apply in key order so derived defaults (e.g. n_beams from n_bs) are stable
        found.sort_by_key(|(pos, _)| *pos);
        for (pos, v) in found {
            self.set(KEYS[pos], &v)?;
        }
        Ok(())
    }

    pub fn numerology(&self) -> Result<OfdmNumerology> {
        OfdmNumerology::new(self.n_subcarriers, self.subcarrier_spacing_hz, self.cp_length)
    }

    pub fn delay_grid(&self) -> DelayGrid {
        match self.delay_grid {
            DelayGridKind::OnGrid => DelayGrid::OnGrid,
            DelayGridKind::OffGrid => DelayGrid::OffGrid {
                span: self.pulse.span().max(1),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.numerology()?;
        centered_band(self.n_subcarriers, self.used_subcarriers)?;
        if self.n_bs == 0 {
            return Err(Error::Config("n_bs must be positive".into()));
        }
        if self.n_beams < self.n_bs {
            return Err(Error::Config(format!(
                "n_beams = {} must be at least n_bs = {}",
                self.n_beams, self.n_bs
            )));
        }
        if self.l_paths == 0 || self.l_paths > self.cp_length {
            return Err(Error::Config(format!(
                "l_paths = {} must be in [1, cp_length = {}]",
                self.l_paths, self.cp_length
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_pilots.is_empty() || self.snr_db.is_empty() || self.schemes.is_empty() {
            return Err(Error::Config("n_pilots, snr_db and schemes must be non-empty".into()));
        }
        if let Some(bad) = self.snr_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return Err(Error::Config(format!("invalid SNR {bad} dB")));
        }
        for &k in &self.n_pilots {
            if k == 0 || !self.used_subcarriers.is_multiple_of(k) {
                return Err(Error::Config(format!(
                    "n_pilots = {k} does not divide the {} used subcarriers",
                    self.used_subcarriers
                )));
            }
        }
        if self.ber_symbols == 0 {
            return Err(Error::Config("ber_symbols must be positive".into()));
        }
        self.pulse.validate()?;
        self.stop.validate()
    }

    /// Renders the configuration in the format accepted by [`Self::from_text`].
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let pulse = match self.pulse {
            PulseShape::OnGridDirac => "dirac".to_string(),
            PulseShape::RaisedCosine { rolloff, span } => format!("rc:{rolloff}:{span}"),
        };
        let channel = match &self.channel {
            ChannelSource::Synthetic => "synthetic".to_string(),
            ChannelSource::File(p) => format!("file:{}", p.display()),
        };
        let metric = match self.metric {
            SelectionMetric::Normalized => "normalized",
            _ => "simplified",
        };
        format!(
            "n_subcarriers = {}\nsubcarrier_spacing_hz = {}\ncp_length = {}\nused_subcarriers = {}\n\
             n_bs = {}\nn_beams = {}\nn_pilots = {}\npulse = {}\ndelay_grid = {}\nl_paths = {}\n\
             snr_db = {}\ntrials = {}\nseed = {}\nschemes = {}\nstop = {}\nmetric = {}\nout_dir = {}\n\
             channel = {}\nber_symbols = {}\nthreads = {}\ntiming = {}\n",
            self.n_subcarriers,
            self.subcarrier_spacing_hz,
            self.cp_length,
            self.used_subcarriers,
            self.n_bs,
            self.n_beams,
            join(self.n_pilots.iter().map(|k| k.to_string()).collect()),
            pulse,
            match self.delay_grid {
                DelayGridKind::OnGrid => "on",
                DelayGridKind::OffGrid => "off",
            },
            self.l_paths,
            join(self.snr_db.iter().map(|s| s.to_string()).collect()),
            self.trials,
            self.seed,
            join(self.schemes.iter().map(|s| s.to_string()).collect()),
            self.stop,
            metric,
            self.out_dir.display(),
            channel,
            self.ber_symbols,
            self.threads,
            self.timing,
        )
    }
}
