#![allow(dead_code)]

use tdcebs::channel::{sample_channel, synthesize_paths, ChannelMatrix, DelayGrid, OfdmNumerology, PulseShape};
use tdcebs::linalg::CMatrix;
use tdcebs::pilot::{dft_codebook, dft_submatrix, equispaced_pilots, sensing_matrix, Codebook, PilotLayout};
use tdcebs::rng::{complex_gaussian, seeded};
use tdcebs::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = seeded(seed);
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
}

pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Small scenario with equispaced pilots over the full grid.
pub struct Desk {
    pub numerology: OfdmNumerology,
    pub layout: PilotLayout,
    pub d: CMatrix,
    pub a: CMatrix,
    pub codebook: Codebook,
    pub n_bs: usize,
}

impl Desk {
    pub fn new(n_c: usize, n_cp: usize, k: usize, n_bs: usize, n_b: usize) -> Self {
        let numerology = OfdmNumerology::new(n_c, 120e3, n_cp).unwrap();
        let layout = equispaced_pilots(&numerology, 0..n_c, k).unwrap();
        let d = dft_submatrix(&numerology, layout.indices());
        let a = sensing_matrix(&layout, &d).unwrap();
        let codebook = dft_codebook(n_bs, n_b).unwrap();
        Self {
            numerology,
            layout,
            d,
            a,
            codebook,
            n_bs,
        }
    }

    /// The recovery scenario used throughout: `N_BS = 8`, `N_cp = 32`, `K = 32`.
    pub fn standard() -> Self {
        Self::new(64, 32, 32, 8, 8)
    }

    pub fn channel(&self, l: usize, seed: u64) -> ChannelMatrix {
        let mut rng = seeded(seed);
        let paths = synthesize_paths(l, DelayGrid::OnGrid, &self.numerology, &mut rng).unwrap();
        sample_channel(&paths, &self.numerology, self.n_bs, PulseShape::OnGridDirac).unwrap()
    }
}
