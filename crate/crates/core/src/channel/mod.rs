//! Wideband time-domain channel model.
//!
//! A channel is a superposition of `L` paths, each contributing a delayed
//! pulse times the conjugated array steering vector of its departure angle:
//!
//! ```text
//! h(n) = sqrt(N_BS / L) · Σ_l γ_l · p(n·T_s − τ_l) · α(N_BS, θ_l)^H
//! ```
//!
//! Row `n` of [`ChannelMatrix`] holds `h(n)` for `n = 0..N_cp`.

mod file;

pub use file::{format_channel, parse_channel, read_channel_file, write_channel_file};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{row_norm, CMatrix, CVector};
use crate::rng::complex_gaussian;

/// OFDM numerology: subcarrier count, spacing and cyclic-prefix length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmNumerology {
    n_subcarriers: usize,
    subcarrier_spacing: f64,
    cp_length: usize,
}

impl OfdmNumerology {
    pub fn new(n_subcarriers: usize, subcarrier_spacing: f64, cp_length: usize) -> Result<Self> {
        if n_subcarriers == 0 || cp_length == 0 || cp_length >= n_subcarriers {
            return Err(Error::OutOfRange {
                what: "numerology",
                detail: format!("need 0 < cp_length ({cp_length}) < n_subcarriers ({n_subcarriers})"),
            });
        }
        if !(subcarrier_spacing.is_finite() && subcarrier_spacing > 0.0) {
            return Err(Error::OutOfRange {
                what: "subcarrier spacing",
                detail: format!("{subcarrier_spacing} Hz"),
            });
        }
        Ok(Self {
            n_subcarriers,
            subcarrier_spacing,
            cp_length,
        })
    }

    /// 5G NR FR2 numerology: 2048-point IFFT, 120 kHz spacing, 144-sample CP.
    pub fn nr_fr2() -> Self {
        Self {
            n_subcarriers: 2048,
            subcarrier_spacing: 120e3,
            cp_length: 144,
        }
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.subcarrier_spacing
    }

    pub fn cp_length(&self) -> usize {
        self.cp_length
    }

    /// `T_s = 1 / (N_c · Δf)`.
    pub fn sample_duration(&self) -> f64 {
        1.0 / (self.n_subcarriers as f64 * self.subcarrier_spacing)
    }

    /// Longest delay the cyclic prefix can absorb, `N_cp · T_s`.
    pub fn max_delay(&self) -> f64 {
        self.cp_length as f64 * self.sample_duration()
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
    /// Normalized angle of departure in `[-1, 1)`; the array phase step is `π·aod`.
    pub aod: f64,
}

impl PathParams {
    fn validate(&self, numerology: &OfdmNumerology) -> Result<()> {
        if !(self.gain.re.is_finite() && self.gain.im.is_finite()) {
            return Err(Error::NonFinite(format!("path gain {}", self.gain)));
        }
        if !(self.delay.is_finite() && self.delay >= 0.0 && self.delay < numerology.max_delay()) {
            return Err(Error::OutOfRange {
                what: "path delay",
                detail: format!("{:e} s not in [0, {:e}) s", self.delay, numerology.max_delay()),
            });
        }
        if !(-1.0..1.0).contains(&self.aod) {
            return Err(Error::OutOfRange {
                what: "angle of departure",
                detail: format!("{} not in [-1, 1)", self.aod),
            });
        }
        Ok(())
    }
}

/// Time-domain channel `H`, `N_cp` rows by `N_BS` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(CMatrix);

impl ChannelMatrix {
    pub fn new(taps: CMatrix) -> Result<Self> {
        if taps.nrows() == 0 || taps.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "channel must be non-empty, got {}x{}",
                taps.nrows(),
                taps.ncols()
            )));
        }
        if let Some((i, z)) = taps.iter().enumerate().find(|(_, z)| !(z.re.is_finite() && z.im.is_finite())) {
            let (r, c) = (i % taps.nrows(), i / taps.nrows());
            return Err(Error::NonFinite(format!("channel entry ({r}, {c}) = {z}")));
        }
        Ok(Self(taps))
    }

    pub fn zeros(cp_length: usize, n_bs: usize) -> Self {
        Self(CMatrix::zeros(cp_length, n_bs))
    }

    pub fn taps(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn cp_length(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_bs(&self) -> usize {
        self.0.ncols()
    }

    /// Indices of rows with any nonzero entry.
    pub fn nonzero_rows(&self) -> Vec<usize> {
        (0..self.0.nrows()).filter(|&i| row_norm(&self.0, i) > 0.0).collect()
    }
}

/// Pulse-shaping filter `p(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PulseShape {
    /// `p(0) = 1` and zero at every other tap; delays are snapped to the
    /// nearest tap.
    #[default]
    OnGridDirac,
    /// Raised cosine with the given roll-off, truncated to `span` taps
    /// centred on the path delay.
    RaisedCosine { rolloff: f64, span: usize },
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

impl PulseShape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PulseShape::OnGridDirac => Ok(()),
            PulseShape::RaisedCosine { rolloff, span } => {
                if !(0.0..=1.0).contains(&rolloff) {
                    return Err(Error::OutOfRange {
                        what: "raised-cosine roll-off",
                        detail: format!("{rolloff} not in [0, 1]"),
                    });
                }
                if span == 0 {
                    return Err(Error::OutOfRange {
                        what: "raised-cosine span",
                        detail: "span must be at least one tap".into(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Support length in taps (zero for the on-grid impulse).
    pub fn span(&self) -> usize {
        match *self {
            PulseShape::OnGridDirac => 0,
            PulseShape::RaisedCosine { span, .. } => span,
        }
    }

    /// Evaluates `p(x·T_s)`, with `x` in units of the sample duration.
    ///
    /// For [`PulseShape::OnGridDirac`] this is the Kronecker delta on the
    /// integer grid.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PulseShape::OnGridDirac => {
                if x == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            PulseShape::RaisedCosine { rolloff, span } => {
                if x.abs() > span as f64 / 2.0 {
                    return 0.0;
                }
                let d = 2.0 * rolloff * x;
                let denom = 1.0 - d * d;
                if rolloff > 0.0 && denom.abs() < 1e-10 {
                    // removable singularity at |x| = 1 / (2β)
                    PI / 4.0 * sinc(1.0 / (2.0 * rolloff))
                } else {
                    sinc(x) * (PI * rolloff * x).cos() / denom
                }
            }
        }
    }
}

/// Unit-norm uniform-linear-array response, entry `k` is
/// `exp(j·π·aod·k) / sqrt(n_bs)`.
pub fn steering_vector(n_bs: usize, aod: f64) -> CVector {
    let scale = 1.0 / (n_bs as f64).sqrt();
    CVector::from_fn(n_bs, |k, _| Complex64::from_polar(scale, PI * aod * k as f64))
}

/// Tap index of an on-grid delay.
fn snap(delay: f64, numerology: &OfdmNumerology) -> Result<usize> {
    let tap = (delay / numerology.sample_duration()).round() as usize;
    if tap >= numerology.cp_length() {
        return Err(Error::OutOfRange {
            what: "path delay",
            detail: format!("rounds to tap {tap}, beyond the {}-tap cyclic prefix", numerology.cp_length()),
        });
    }
    Ok(tap)
}

/// Adds `scale · γ_l · p(n·T_s − τ_l) · α(θ_l)^H` for each path into `taps`.
fn accumulate(
    taps: &mut CMatrix,
    paths: &[PathParams],
    numerology: &OfdmNumerology,
    pulse: PulseShape,
    scale: f64,
) -> Result<()> {
    let n_bs = taps.ncols();
    let ts = numerology.sample_duration();
    for path in paths {
        path.validate(numerology)?;
        let row = steering_vector(n_bs, path.aod).map(|z| z.conj());
        let weight = path.gain * scale;
        match pulse {
            PulseShape::OnGridDirac => {
                let n = snap(path.delay, numerology)?;
                for (j, a) in row.iter().enumerate() {
                    taps[(n, j)] += weight * a;
                }
            }
            PulseShape::RaisedCosine { .. } => {
                let centre = path.delay / ts;
                for n in 0..taps.nrows() {
                    let p = pulse.eval(n as f64 - centre);
                    if p == 0.0 {
                        continue;
                    }
                    for (j, a) in row.iter().enumerate() {
                        taps[(n, j)] += weight * p * a;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Samples the wideband channel on the tap grid `n = 0..N_cp`.
pub fn sample_channel(
    paths: &[PathParams],
    numerology: &OfdmNumerology,
    n_bs: usize,
    pulse: PulseShape,
) -> Result<ChannelMatrix> {
    if paths.is_empty() {
        return Err(Error::OutOfRange {
            what: "path list",
            detail: "at least one path is required".into(),
        });
    }
    if n_bs == 0 {
        return Err(Error::OutOfRange {
            what: "antenna count",
            detail: "n_bs must be positive".into(),
        });
    }
    pulse.validate()?;
    let mut taps = CMatrix::zeros(numerology.cp_length(), n_bs);
    let scale = (n_bs as f64 / paths.len() as f64).sqrt();
    accumulate(&mut taps, paths, numerology, pulse, scale)?;
    ChannelMatrix::new(taps)
}

/// Placement of synthetic path delays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayGrid {
    /// Distinct integer taps.
    OnGrid,
    /// Uniform real delays in `[0, (N_cp − span)·T_s]`.
    OffGrid { span: usize },
}

/// Draws `l_paths` random paths: unit-variance complex Gaussian gains,
/// delays per `grid`, and angles uniform in `[-1, 1)`.
pub fn synthesize_paths<R: Rng + ?Sized>(
    l_paths: usize,
    grid: DelayGrid,
    numerology: &OfdmNumerology,
    rng: &mut R,
) -> Result<Vec<PathParams>> {
    let n_cp = numerology.cp_length();
    if l_paths == 0 || l_paths > n_cp {
        return Err(Error::OutOfRange {
            what: "path count",
            detail: format!("{l_paths} paths do not fit in {n_cp} taps"),
        });
    }
    if let DelayGrid::OffGrid { span } = grid {
        if span == 0 || span >= n_cp {
            return Err(Error::OutOfRange {
                what: "off-grid span",
                detail: format!("span {span} must be in [1, {n_cp})"),
            });
        }
    }
    let ts = numerology.sample_duration();
    let gains: Vec<Complex64> = (0..l_paths).map(|_| complex_gaussian(rng, 1.0)).collect();
    let delays: Vec<f64> = match grid {
        DelayGrid::OnGrid => rand::seq::index::sample(rng, n_cp, l_paths)
            .into_iter()
            .map(|tap| tap as f64 * ts)
            .collect(),
        DelayGrid::OffGrid { span } => {
            let hi = (n_cp - span) as f64;
            (0..l_paths).map(|_| rng.random_range(0.0..=hi) * ts).collect()
        }
    };
    let paths = gains
        .into_iter()
        .zip(delays)
        .map(|(gain, delay)| PathParams {
            gain,
            delay,
            aod: rng.random_range(-1.0..1.0),
        })
        .collect();
    Ok(paths)
}
