use mc2::genmat::{make_power_law, preset, Conditioning, PRESET_NAMES};
use mc2::leverage::exact_leverage_scores;
use mc2::linalg::{numeric_rank, Svd, RANK_TOL};
use proptest::prelude::*;

#[test]
fn every_preset_is_normalized_rank_r() {
    for name in PRESET_NAMES {
        let m = preset(name, 100, 5, 17).unwrap();
        assert!((m.values.norm() - 1.0).abs() < 1e-10, "{name}");
        let svd = Svd::new(&m.values);
        assert_eq!(numeric_rank(svd.singular_values.as_slice(), RANK_TOL), 5, "{name}");
        assert!((m.kappa - m.spectrum[0] / m.spectrum[4]).abs() < 1e-10, "{name}");
        for (a, b) in m.spectrum.iter().zip(svd.singular_values.iter()) {
            assert!((a - b).abs() < 1e-10, "{name}");
        }
    }
}

#[test]
fn well_conditioned_spectra_are_flat() {
    for name in ["P1", "P2", "P3", "P4"] {
        let m = preset(name, 100, 5, 2).unwrap();
        assert!(m.spectrum.iter().all(|s| (s - m.spectrum[0]).abs() < 1e-10), "{name}");
        assert!((m.kappa - 1.0).abs() < 1e-10);
    }
}

#[test]
fn paper_preset_values() {
    let p1 = preset("P1", 100, 5, 9).unwrap();
    assert!((p1.kappa - 1.0).abs() < 1e-10);
    assert!(p1.eta() < 3.0, "P1 should be nearly incoherent, eta = {}", p1.eta());

    let p8 = make_power_law(100, 5, 2.0, Conditioning::LinSpaced, 4).unwrap();
    assert!((p8.kappa - 100.0).abs() < 1e-8);

    let b1 = preset("B1", 100, 5, 0).unwrap();
    assert_eq!(b1.values, preset("B1", 100, 5, 12345).unwrap().values);
    assert!((b1.eta() - 1.0).abs() < 1e-12);

    let b3 = preset("B3", 100, 5, 0).unwrap();
    assert!((b3.kappa - 100.0).abs() < 1e-8);
    assert!(b3.exact_scores.mu.iter().chain(&b3.exact_scores.nu).all(|s| (s - 1.0).abs() < 1e-9));
}

#[test]
fn coherence_grows_with_gamma() {
    let etas: Vec<f64> = ["P1", "P2", "P3", "P4"].iter().map(|p| preset(p, 100, 5, 5).unwrap().eta()).collect();
    assert!(etas.windows(2).all(|w| w[0] < w[1]), "{etas:?}");
    assert!(etas[3] <= 20.0 + 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scaling_keeps_scores_and_kappa(c in 1e-3f64..1e3, k in 0usize..12) {
        let m = preset(PRESET_NAMES[k], 30, 3, 8).unwrap();
        let s = m.scaled(c).unwrap();
        prop_assert!((s.kappa - m.kappa).abs() < 1e-10 * m.kappa.max(1.0));
        prop_assert!((s.eta() - m.eta()).abs() < 1e-10 * m.eta());
        let direct = exact_leverage_scores(&s.values, RANK_TOL).unwrap();
        for (a, b) in direct.mu.iter().zip(&m.exact_scores.mu).chain(direct.nu.iter().zip(&m.exact_scores.nu)) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
