//! Pilot-domain measurement model.
//!
//! Received pilots over `N_b` beams are `Y = X·D·H·F + Ψ`. Right-multiplying
//! by the pseudo-inverse `F^H (F F^H)^{-1}` removes the beam dimension and
//! leaves the sensing problem `Z = A·H + N` with `A = X·D`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{steering_vector, ChannelMatrix, OfdmNumerology};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_condition, CMatrix};
use crate::rng::complex_gaussian;

/// Subcarriers per resource block.
pub const RB_SUBCARRIERS: usize = 12;

/// Largest accepted condition number of `F F^H`.
pub const MAX_CODEBOOK_CONDITION: f64 = 1e12;

/// Number of occupied subcarriers by default: 132 resource blocks for the
/// 2048-point FR2 grid, otherwise the whole grid.
pub fn default_used_subcarriers(n_subcarriers: usize) -> usize {
    if n_subcarriers == 2048 {
        132 * RB_SUBCARRIERS
    } else {
        n_subcarriers
    }
}

/// The `used` subcarriers centred in an `n_subcarriers` grid.
pub fn centered_band(n_subcarriers: usize, used: usize) -> Result<Range<usize>> {
    if used == 0 || used > n_subcarriers {
        return Err(Error::OutOfRange {
            what: "used band",
            detail: format!("{used} used subcarriers in a {n_subcarriers}-point grid"),
        });
    }
    let start = (n_subcarriers - used) / 2;
    Ok(start..start + used)
}

/// Pilot subcarrier positions and the symbols transmitted on them.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotLayout {
    n_subcarriers: usize,
    used_band: Range<usize>,
    indices: Vec<usize>,
    symbols: Vec<Complex64>,
}

impl PilotLayout {
    pub fn new(
        n_subcarriers: usize,
        used_band: Range<usize>,
        indices: Vec<usize>,
        symbols: Vec<Complex64>,
    ) -> Result<Self> {
        let k = indices.len();
        if k == 0 || k > n_subcarriers {
            return Err(Error::OutOfRange {
                what: "pilot count",
                detail: format!("K = {k} with N_c = {n_subcarriers}"),
            });
        }
        if used_band.end > n_subcarriers || used_band.is_empty() {
            return Err(Error::OutOfRange {
                what: "used band",
                detail: format!("{used_band:?} in a {n_subcarriers}-point grid"),
            });
        }
        if symbols.len() != k {
            return Err(Error::Dimension(format!("{k} pilot indices but {} symbols", symbols.len())));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::OutOfRange {
                what: "pilot indices",
                detail: "must be strictly increasing".into(),
            });
        }
        if let Some(&bad) = indices.iter().find(|i| !used_band.contains(i)) {
            return Err(Error::OutOfRange {
                what: "pilot index",
                detail: format!("{bad} outside used band {used_band:?}"),
            });
        }
        let p0 = symbols[0].norm();
        if p0 == 0.0 || symbols.iter().any(|x| (x.norm() - p0).abs() > 1e-12) {
            return Err(Error::OutOfRange {
                what: "pilot symbols",
                detail: "all pilots must have the same nonzero modulus".into(),
            });
        }
        Ok(Self {
            n_subcarriers,
            used_band,
            indices,
            symbols,
        })
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn used_band(&self) -> Range<usize> {
        self.used_band.clone()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }
}

/// `K` pilots spaced evenly across `used_band`, starting at its lower edge,
/// all carrying the symbol `1`.
///
/// `K` must divide the band size. On the 1584-subcarrier NR band this gives
/// stride 12 (one pilot per resource block) for `K = 132` and stride 18 (two
/// pilots per three resource blocks) for `K = 88`.
pub fn equispaced_pilots(numerology: &OfdmNumerology, used_band: Range<usize>, k: usize) -> Result<PilotLayout> {
    let width = used_band.len();
    if k == 0 || k > width || !width.is_multiple_of(k) {
        return Err(Error::Config(format!(
            "{k} pilots cannot be spaced evenly over {width} used subcarriers; \
             K must divide the band size (e.g. 132 → stride 12, 88 → stride 18 on 1584)"
        )));
    }
    let stride = width / k;
    let indices = (0..k).map(|i| used_band.start + i * stride).collect();
    PilotLayout::new(
        numerology.n_subcarriers(),
        used_band,
        indices,
        vec![Complex64::new(1.0, 0.0); k],
    )
}

/// Named pilot placement rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotPattern {
    /// One pilot per resource block (stride 12).
    Rb1,
    /// Two pilots per three resource blocks (stride 18).
    Rb3x2,
    /// Explicit subcarrier stride.
    Stride(usize),
}

impl PilotPattern {
    pub fn stride(&self) -> usize {
        match *self {
            PilotPattern::Rb1 => RB_SUBCARRIERS,
            PilotPattern::Rb3x2 => 3 * RB_SUBCARRIERS / 2,
            PilotPattern::Stride(s) => s,
        }
    }

    /// Pilot count this pattern yields on a band of `width` subcarriers.
    pub fn pilot_count(&self, width: usize) -> Result<usize> {
        let s = self.stride();
        if s == 0 || !width.is_multiple_of(s) {
            return Err(Error::Config(format!("stride {s} does not tile a {width}-subcarrier band")));
        }
        Ok(width / s)
    }
}

impl FromStr for PilotPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rb1" => Ok(PilotPattern::Rb1),
            "rb3x2" => Ok(PilotPattern::Rb3x2),
            other => other
                .strip_prefix("stride:")
                .and_then(|n| n.parse().ok())
                .filter(|&n: &usize| n > 0)
                .map(PilotPattern::Stride)
                .ok_or_else(|| Error::Config(format!("unknown pilot pattern `{other}` (rb1 | rb3x2 | stride:<n>)"))),
        }
    }
}

impl fmt::Display for PilotPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PilotPattern::Rb1 => f.write_str("rb1"),
            PilotPattern::Rb3x2 => f.write_str("rb3x2"),
            PilotPattern::Stride(s) => write!(f, "stride:{s}"),
        }
    }
}

/// `K × N_cp` rows of the unnormalized DFT matrix, `exp(−j2π·p_k·m / N_c)`.
pub fn dft_submatrix(numerology: &OfdmNumerology, pilot_indices: &[usize]) -> CMatrix {
    let nc = numerology.n_subcarriers();
    CMatrix::from_fn(pilot_indices.len(), numerology.cp_length(), |k, m| {
        // reduce the phase index exactly before converting to an angle
        let e = (pilot_indices[k] * m) % nc;
        Complex64::from_polar(1.0, -2.0 * PI * e as f64 / nc as f64)
    })
}

/// `A = X·D`: row `k` of `D` scaled by pilot symbol `x(k)`.
pub fn sensing_matrix(layout: &PilotLayout, d: &CMatrix) -> Result<CMatrix> {
    if d.nrows() != layout.k() {
        return Err(Error::Dimension(format!("D has {} rows, layout has K = {}", d.nrows(), layout.k())));
    }
    let mut a = d.clone();
    for (k, &x) in layout.symbols().iter().enumerate() {
        for m in 0..a.ncols() {
            a[(k, m)] *= x;
        }
    }
    Ok(a)
}

/// Beamforming codebook `F = [f_1 … f_{N_b}]`, `N_BS × N_b`.
#[derive(Debug, Clone)]
pub struct Codebook {
    beams: CMatrix,
    /// `F^H (F F^H)^{-1}`, `N_b × N_BS`.
    right_pinv: CMatrix,
}

impl Codebook {
    /// Validates `N_b ≥ N_BS` and that `F F^H` is well conditioned.
    pub fn new(beams: CMatrix) -> Result<Self> {
        let (n_bs, n_b) = beams.shape();
        if n_bs == 0 || n_b < n_bs {
            return Err(Error::OutOfRange {
                what: "codebook size",
                detail: format!("N_b = {n_b} beams for N_BS = {n_bs} antennas; need N_b >= N_BS"),
            });
        }
        let gram = &beams * beams.adjoint();
        let condition = hermitian_condition(&gram);
        if condition.is_nan() || condition > MAX_CODEBOOK_CONDITION {
            return Err(Error::SingularCodebook { condition });
        }
        let chol = gram.cholesky().ok_or(Error::SingularCodebook { condition })?;
        // (F F^H)^{-1} F is the adjoint of F^H (F F^H)^{-1}
        let right_pinv = chol.solve(&beams).adjoint();
        Ok(Self { beams, right_pinv })
    }

    pub fn beams(&self) -> &CMatrix {
        &self.beams
    }

    pub fn n_bs(&self) -> usize {
        self.beams.nrows()
    }

    pub fn n_beams(&self) -> usize {
        self.beams.ncols()
    }

    /// `F^H (F F^H)^{-1}`.
    pub fn right_pseudo_inverse(&self) -> &CMatrix {
        &self.right_pinv
    }
}

/// Steering-vector codebook on the angle grid `θ_i = −1 + 2i/n_b`.
pub fn dft_codebook(n_bs: usize, n_b: usize) -> Result<Codebook> {
    if n_b < n_bs {
        return Err(Error::OutOfRange {
            what: "codebook size",
            detail: format!("N_b = {n_b} < N_BS = {n_bs}"),
        });
    }
    let mut beams = CMatrix::zeros(n_bs, n_b);
    for i in 0..n_b {
        let theta = -1.0 + 2.0 * i as f64 / n_b as f64;
        beams.set_column(i, &steering_vector(n_bs, theta));
    }
    Codebook::new(beams)
}

/// A received pilot block and the noise variance used to generate it.
#[derive(Debug, Clone)]
pub struct Received {
    /// `K × N_b`.
    pub y: CMatrix,
    pub noise_variance: f64,
}

fn noiseless(a: &CMatrix, h: &ChannelMatrix, codebook: &Codebook) -> Result<CMatrix> {
    if a.ncols() != h.cp_length() || h.n_bs() != codebook.n_bs() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, H is {}x{}, F is {}x{}",
            a.nrows(),
            a.ncols(),
            h.cp_length(),
            h.n_bs(),
            codebook.n_bs(),
            codebook.n_beams()
        )));
    }
    Ok(a * h.taps() * codebook.beams())
}

fn add_noise<R: Rng + ?Sized>(y: &mut CMatrix, variance: f64, rng: &mut R) {
    if variance > 0.0 {
        for z in y.iter_mut() {
            *z += complex_gaussian(rng, variance);
        }
    }
}

fn snr_linear(snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::OutOfRange {
            what: "SNR",
            detail: format!("{snr_db} dB"),
        });
    }
    Ok(10f64.powf(snr_db / 10.0))
}

/// `Y = X·D·H·F + Ψ`, with `σ²` set so the mean power of the noiseless
/// entries over the whole `K × N_b` block is `snr_db` above it.
///
/// `snr_db = +∞` returns the noiseless block without touching `rng`.
pub fn simulate_received<R: Rng + ?Sized>(
    layout: &PilotLayout,
    d: &CMatrix,
    h: &ChannelMatrix,
    codebook: &Codebook,
    snr_db: f64,
    rng: &mut R,
) -> Result<Received> {
    let a = sensing_matrix(layout, d)?;
    let mut y = noiseless(&a, h, codebook)?;
    let power = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / y.len() as f64;
    let noise_variance = power / snr_linear(snr_db)?;
    add_noise(&mut y, noise_variance, rng);
    Ok(Received { y, noise_variance })
}

/// Like [`simulate_received`], but `σ² = reference_power / 10^(snr_db/10)`
/// for a caller-chosen reference power.
pub fn simulate_received_with_reference<R: Rng + ?Sized>(
    layout: &PilotLayout,
    d: &CMatrix,
    h: &ChannelMatrix,
    codebook: &Codebook,
    snr_db: f64,
    reference_power: f64,
    rng: &mut R,
) -> Result<Received> {
    if !(reference_power.is_finite() && reference_power >= 0.0) {
        return Err(Error::OutOfRange {
            what: "reference power",
            detail: format!("{reference_power}"),
        });
    }
    let a = sensing_matrix(layout, d)?;
    let mut y = noiseless(&a, h, codebook)?;
    let noise_variance = reference_power / snr_linear(snr_db)?;
    add_noise(&mut y, noise_variance, rng);
    Ok(Received { y, noise_variance })
}

/// `Z = Y · F^H (F F^H)^{-1}`.
pub fn decouple(y: &CMatrix, codebook: &Codebook) -> Result<CMatrix> {
    if y.ncols() != codebook.n_beams() {
        return Err(Error::Dimension(format!(
            "Y has {} columns, codebook has {} beams",
            y.ncols(),
            codebook.n_beams()
        )));
    }
    Ok(y * codebook.right_pseudo_inverse())
}

/// Decoupled sensing problem `Z = A·H + N`.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    /// `A`, `K × N_cp`.
    pub sensing: CMatrix,
    /// `Z`, `K × N_BS`.
    pub observation: CMatrix,
    /// `σ²` of the received entries before decoupling.
    pub noise_variance: f64,
}

impl MeasurementSet {
    pub fn new(sensing: CMatrix, observation: CMatrix, noise_variance: f64) -> Result<Self> {
        if sensing.nrows() != observation.nrows() {
            return Err(Error::Dimension(format!(
                "A has {} rows but Z has {}",
                sensing.nrows(),
                observation.nrows()
            )));
        }
        if noise_variance.is_nan() || noise_variance < 0.0 {
            return Err(Error::OutOfRange {
                what: "noise variance",
                detail: format!("{noise_variance}"),
            });
        }
        Ok(Self {
            sensing,
            observation,
            noise_variance,
        })
    }

    pub fn k(&self) -> usize {
        self.sensing.nrows()
    }

    pub fn cp_length(&self) -> usize {
        self.sensing.ncols()
    }

    pub fn n_bs(&self) -> usize {
        self.observation.ncols()
    }
}

/// Simulates reception over every beam and decouples it.
pub fn measure<R: Rng + ?Sized>(
    layout: &PilotLayout,
    d: &CMatrix,
    h: &ChannelMatrix,
    codebook: &Codebook,
    snr_db: f64,
    rng: &mut R,
) -> Result<MeasurementSet> {
    let rx = simulate_received(layout, d, h, codebook, snr_db, rng)?;
    let z = decouple(&rx.y, codebook)?;
    MeasurementSet::new(sensing_matrix(layout, d)?, z, rx.noise_variance)
}
