mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use tdcebs::channel::{ChannelMatrix, OfdmNumerology};
use tdcebs::linalg::CMatrix;
use tdcebs::pilot::{
    centered_band, decouple, dft_codebook, dft_submatrix, equispaced_pilots, sensing_matrix,
    simulate_received, simulate_received_with_reference, Codebook, PilotLayout, PilotPattern,
};
use tdcebs::rng::seeded;
use tdcebs::solver::{ls_full, numerical_rank};
use tdcebs::Complex64;

use common::{c, random, rel_err, Desk};

#[test]
fn nr_band_pilot_grids() {
    let num = OfdmNumerology::nr_fr2();
    let band = centered_band(2048, 1584).unwrap();
    assert_eq!(band, 232..1816);
    let k132 = equispaced_pilots(&num, band.clone(), 132).unwrap();
    assert_eq!(k132.indices()[0], 232);
    assert!(k132.indices().windows(2).all(|w| w[1] - w[0] == 12));
    let k88 = equispaced_pilots(&num, band.clone(), 88).unwrap();
    assert!(k88.indices().windows(2).all(|w| w[1] - w[0] == 18));
    assert_eq!(*k88.indices().last().unwrap(), 232 + 87 * 18);
    assert_eq!(equispaced_pilots(&num, band.clone(), 100).unwrap_err().kind(), "config");
    assert_eq!(PilotPattern::Rb1.pilot_count(1584).unwrap(), 132);
    assert_eq!(PilotPattern::Rb3x2.pilot_count(1584).unwrap(), 88);
    assert_eq!("stride:24".parse::<PilotPattern>().unwrap().pilot_count(1584).unwrap(), 66);
}

#[test]
fn dft_gram_matches_brute_force_sum() {
    let num = OfdmNumerology::nr_fr2();
    let layout = equispaced_pilots(&num, centered_band(2048, 1584).unwrap(), 88).unwrap();
    let d = dft_submatrix(&num, layout.indices());
    let gram = d.adjoint() * &d;
    let p = layout.indices();
    for m in (0..144).step_by(7) {
        for mp in (0..144).step_by(5) {
            let mut want = Complex64::new(0.0, 0.0);
            for &pk in p {
                want += Complex64::from_polar(1.0, 2.0 * PI * (pk * m) as f64 / 2048.0)
                    * Complex64::from_polar(1.0, -2.0 * PI * (pk * mp) as f64 / 2048.0);
            }
            assert!((gram[(m, mp)] - want).norm() < 1e-9, "({m},{mp})");
        }
    }
}

#[test]
fn full_grid_equispaced_pilots_give_orthogonal_columns() {
    let desk = Desk::standard();
    let gram = desk.d.adjoint() * &desk.d;
    let want = CMatrix::identity(32, 32) * c(32.0, 0.0);
    assert!(rel_err(&gram, &want) < 1e-12);
}

#[test]
fn sensing_matrix_scales_rows_by_pilot_symbols() {
    let num = OfdmNumerology::new(64, 120e3, 16).unwrap();
    let idx = vec![1, 9, 17, 40];
    let sym: Vec<Complex64> = [0.0, 1.1, -2.4, 3.0].iter().map(|&t| Complex64::from_polar(2.0, t)).collect();
    let layout = PilotLayout::new(64, 0..64, idx.clone(), sym.clone()).unwrap();
    let d = dft_submatrix(&num, &idx);
    let a = sensing_matrix(&layout, &d).unwrap();
    for k in 0..4 {
        for m in 0..16 {
            let want = sym[k] * Complex64::from_polar(1.0, -2.0 * PI * (idx[k] * m) as f64 / 64.0);
            assert!((a[(k, m)] - want).norm() < 1e-13);
        }
    }
}

#[test]
fn oversampled_codebook_inverse_solves_normal_equations() {
    for (n_bs, n_b) in [(4, 4), (4, 7), (8, 16), (6, 9)] {
        let f = dft_codebook(n_bs, n_b).unwrap();
        let fb = f.beams();
        let p = f.right_pseudo_inverse();
        let gram_inv = (fb * fb.adjoint()).try_inverse().unwrap();
        let want = fb.adjoint() * gram_inv;
        assert!(rel_err(p, &want) < 1e-12, "{n_bs}x{n_b}");
        assert!(rel_err(&(fb * p), &CMatrix::identity(n_bs, n_bs)) < 1e-12);
    }
}

#[test]
fn codebook_with_too_few_beams_is_rejected() {
    assert!(Codebook::new(random(8, 4, 1)).is_err());
    let mut rank_one = CMatrix::zeros(3, 5);
    rank_one.set_row(0, &random(1, 5, 2).row(0));
    assert_eq!(Codebook::new(rank_one).unwrap_err().kind(), "singular_codebook");
}

#[test]
fn noiseless_decoupling_returns_a_h() {
    let desk = Desk::new(128, 32, 32, 8, 12);
    for seed in 0..20 {
        let h = desk.channel(5, seed);
        let rx = simulate_received(&desk.layout, &desk.d, &h, &desk.codebook, f64::INFINITY, &mut seeded(seed)).unwrap();
        assert_eq!(rx.noise_variance, 0.0);
        let z = decouple(&rx.y, &desk.codebook).unwrap();
        assert!(rel_err(&z, &(&desk.a * h.taps())) <= 1e-9);
    }
}

#[test]
fn snr_sets_noise_variance_from_signal_power() {
    let desk = Desk::standard();
    let h = desk.channel(4, 7);
    let clean = &desk.a * h.taps() * desk.codebook.beams();
    let power = clean.norm_squared() / clean.len() as f64;
    let rx = simulate_received(&desk.layout, &desk.d, &h, &desk.codebook, 10.0, &mut seeded(1)).unwrap();
    assert!((rx.noise_variance - power / 10.0).abs() < 1e-12 * power);
}

#[test]
fn empirical_noise_statistics() {
    // H = 0 isolates the noise. Rows of Z = Ψ·P have covariance σ² (F F^H)^{-1}.
    let n_bs = 3;
    let beams = random(n_bs, 5, 9);
    let f = Codebook::new(beams.clone()).unwrap();
    let desk = Desk::new(64, 16, 32, n_bs, 5);
    let h = ChannelMatrix::zeros(16, n_bs);
    let sigma2: f64 = 0.7;
    let snr_db = 10.0 * (1.0 / sigma2).log10();
    let mut cov = CMatrix::zeros(n_bs, n_bs);
    let mut power = 0.0;
    let mut rows = 0usize;
    let mut rng = seeded(2024);
    for _ in 0..400 {
        let rx = simulate_received_with_reference(&desk.layout, &desk.d, &h, &f, snr_db, 1.0, &mut rng).unwrap();
        power += rx.y.norm_squared();
        let z = decouple(&rx.y, &f).unwrap();
        for r in 0..z.nrows() {
            let row = z.row(r).transpose();
            cov += &row * row.adjoint();
        }
        rows += z.nrows();
    }
    let entries = (rows * 5) as f64;
    assert!((power / entries - sigma2).abs() < 0.05 * sigma2);
    // E[z zᴴ] uses the column form, i.e. the transpose of the row covariance
    let cov = cov / c(rows as f64, 0.0);
    let want = ((&beams * beams.adjoint()).try_inverse().unwrap() * c(sigma2, 0.0)).transpose();
    assert!(rel_err(&cov, &want) < 0.05, "{}", rel_err(&cov, &want));
}

#[test]
fn full_scale_sensing_matrix_is_rank_deficient() {
    let num = OfdmNumerology::nr_fr2();
    let layout = equispaced_pilots(&num, centered_band(2048, 1584).unwrap(), 132).unwrap();
    let d = dft_submatrix(&num, layout.indices());
    let a = sensing_matrix(&layout, &d).unwrap();
    let rank = numerical_rank(&a);
    assert!(rank < 144, "rank {rank}");
    let z = random(132, 4, 1);
    assert_eq!(ls_full(&a, &z).unwrap_err().kind(), "low_rank");
}

proptest! {
    #[test]
    fn decoupling_is_linear(seed in 0u64..500, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let f = dft_codebook(4, 6).unwrap();
        let y1 = random(10, 6, seed);
        let y2 = random(10, 6, seed + 1000);
        let k = c(re, im);
        let lhs = decouple(&(&y1 * k + &y2), &f).unwrap();
        let rhs = decouple(&y1, &f).unwrap() * k + decouple(&y2, &f).unwrap();
        prop_assert!((lhs - &rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn equispaced_layouts_are_sorted_and_in_band(n_rb in 1usize..20, k_div in 1usize..6) {
        let width = 12 * n_rb * k_div;
        let n_c = width + 40;
        let num = OfdmNumerology::new(n_c, 120e3, 8).unwrap();
        let band = centered_band(n_c, width).unwrap();
        let k = width / (12 * k_div) * k_div;
        if width % k == 0 {
            let layout = equispaced_pilots(&num, band.clone(), k).unwrap();
            prop_assert_eq!(layout.k(), k);
            prop_assert!(layout.indices().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(layout.indices().iter().all(|i| band.contains(i)));
        }
    }
}
