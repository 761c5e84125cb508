use std::f64::consts::TAU;

use andersonspec::anderson::{build_anderson, AndersonConfig, Disorder};
use andersonspec::blockmodel::{log_abs_det_shifted, realize_h, spectrum, spectrum_plain};
use andersonspec::linalg::multiset_distance;
use andersonspec::random::{random_complex, random_model, BondKind, ModelShape};
use andersonspec::{BlockModel, BoundaryFactor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model_from(seed: u64, n: usize, m: usize, bonds: u8) -> BlockModel {
    let bonds = match bonds % 3 {
        0 => BondKind::Perturbed,
        1 => BondKind::Unitary,
        _ => BondKind::Identity,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_model(&mut rng, ModelShape::new(n, m).bonds(bonds))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn balanced_form_is_similar_to_plain(seed in any::<u64>(), n in 3usize..8, m in 1usize..4, bonds in any::<u8>(),
                                         xi in 0.0f64..0.6, phi in 0.0f64..TAU) {
        let model = model_from(seed, n, m, bonds);
        let bf = BoundaryFactor::new(xi, phi);
        let plain = spectrum_plain(&model, bf).unwrap();
        let balanced = spectrum(&model, bf).unwrap();
        let scale = balanced.spectral_radius().max(1.0);
        prop_assert!(multiset_distance(&plain.eigenvalues, &balanced.eigenvalues) < 1e-7 * scale);
    }

    #[test]
    fn hermitian_on_the_unit_circle(seed in any::<u64>(), n in 3usize..8, m in 1usize..4, bonds in any::<u8>(), phi in 0.0f64..TAU) {
        let model = model_from(seed, n, m, bonds);
        let h = realize_h(&model, BoundaryFactor::bloch(phi));
        prop_assert!(h.hermitian_defect() < 1e-12 * h.max_abs().max(1.0));
        let spec = spectrum(&model, BoundaryFactor::bloch(phi)).unwrap();
        for z in spec.eigenvalues {
            prop_assert!(z.im.abs() < 1e-9 * spec_scale(&h));
        }
    }

    #[test]
    fn corner_phase_is_two_pi_periodic(seed in any::<u64>(), n in 3usize..7, m in 1usize..3, xi in 0.0f64..0.5, phi in 0.0f64..TAU) {
        let model = model_from(seed, n, m, 0);
        let a = spectrum(&model, BoundaryFactor::new(xi, phi)).unwrap();
        let b = spectrum(&model, BoundaryFactor::new(xi, phi + TAU)).unwrap();
        prop_assert!(multiset_distance(&a.eigenvalues, &b.eigenvalues) < 1e-8 * a.spectral_radius().max(1.0));
    }

    #[test]
    fn structured_log_det_matches_eigenvalues(seed in any::<u64>(), n in 3usize..8, m in 1usize..4, bonds in any::<u8>(),
                                              xi in 0.0f64..0.8, phi in 0.0f64..TAU) {
        let model = model_from(seed, n, m, bonds);
        let bf = BoundaryFactor::new(xi, phi);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
        let eps = random_complex(&mut rng) * 2.0;
        let from_lu = log_abs_det_shifted(&model, bf, eps).unwrap();
        let from_ev = spectrum(&model, bf).unwrap().eigenvalues.iter().map(|z| (eps - z).norm().ln()).sum::<f64>() / model.dim() as f64;
        prop_assert!((from_lu - from_ev).abs() < 1e-7 * (1.0 + from_ev.abs()), "{from_lu} vs {from_ev}");
    }

    #[test]
    fn potentials_are_prefix_stable(seed in any::<u64>(), n in 2usize..40, w in 0.0f64..10.0) {
        let short = AndersonConfig::one_dimensional(n, w, seed);
        let long = AndersonConfig::one_dimensional(n + 17, w, seed);
        for s in 0..n {
            prop_assert_eq!(short.site_potential(s), long.site_potential(s));
            prop_assert!(short.site_potential(s).abs() <= w / 2.0);
        }
    }
}

fn spec_scale(h: &andersonspec::CMatrix) -> f64 {
    h.norm_inf().max(1.0)
}

#[test]
fn uniform_sampler_moments() {
    let w = 6.0;
    let config = AndersonConfig::one_dimensional(200_000, w, 77);
    let values: Vec<f64> = (0..200_000).map(|s| config.site_potential(s)).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let expect_var = w * w / 12.0;
    assert!(mean.abs() < 4.0 * (expect_var / n).sqrt(), "mean {mean}");
    assert!((var - expect_var).abs() < 0.02 * expect_var, "var {var}");
}

#[test]
fn cauchy_sampler_quartiles() {
    let delta = 1.5;
    let config = AndersonConfig::new(vec![100_000], Disorder::Cauchy { delta }, 5);
    let mut values: Vec<f64> = (0..100_000).map(|s| config.site_potential(s)).collect();
    values.sort_by(f64::total_cmp);
    let q1 = values[25_000];
    let q3 = values[75_000];
    assert!((q1 + delta).abs() < 0.05 && (q3 - delta).abs() < 0.05, "{q1} {q3}");
}

#[test]
fn seeds_give_different_realizations() {
    let a = AndersonConfig::one_dimensional(10, 4.0, 1);
    let b = a.with_seed(2);
    assert!((0..10).any(|s| a.site_potential(s) != b.site_potential(s)));
}

#[test]
fn strip_spectrum_is_real_and_bounded_at_zero_xi() {
    let config = AndersonConfig::strip(3, 12, 5.0, 9);
    let model = build_anderson(&config).unwrap();
    let spec = spectrum(&model, BoundaryFactor::bloch(0.0)).unwrap();
    assert_eq!(spec.len(), 36);
    for z in &spec.eigenvalues {
        assert!(z.im.abs() < 1e-10);
        assert!(z.re.abs() <= 2.0 * 2.0 + 2.5 + 1e-9);
    }
    let trace: f64 = spec.eigenvalues.iter().map(|z| z.re).sum();
    let potentials: f64 = (0..36).map(|s| config.site_potential(s)).sum();
    assert!((trace - potentials).abs() < 1e-9);
}
