use std::f64::consts::PI;

use proptest::prelude::*;
use spinlap_core::fluctuations::*;
use spinlap_core::rng::Streams;

fn component_variance(samples: &[[f64; 3]], k: usize) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s[k]).sum::<f64>() / n;
    samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn displacement_variance() {
    let p = TranslationParams::new(1.0, 1.0).unwrap();
    let w = sample_displacements(&p, 1_000_000, &Streams::new(1, "w"));
    for k in 0..3 {
        assert!((component_variance(&w, k) - 0.5).abs() < 0.005);
        let mean = w.iter().map(|s| s[k]).sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 3.0 * (0.5f64 / 1e6).sqrt());
    }
    let p2 = TranslationParams::new(2.0, 1.0).unwrap();
    let w2 = sample_displacements(&p2, 1_000_000, &Streams::new(2, "w"));
    assert!((component_variance(&w2, 0) - 0.25).abs() < 0.003);
}

#[test]
fn uncertainty_product_is_half_hbar() {
    let p = TranslationParams::new(1.0, 1.0).unwrap();
    let w = sample_displacements(&p, 1_000_000, &Streams::new(3, "up"));
    let u = uncertainty_product(&w, &p).unwrap();
    assert!((u.product - 0.5).abs() < 0.005, "{}", u.product);
    assert!(u.sd_product >= 0.5 - 4.0 * u.standard_error);
    let p2 = TranslationParams::with_hbar(1.0, 1.0, 2.0).unwrap();
    let w2 = sample_displacements(&p2, 1_000_000, &Streams::new(3, "up"));
    let u2 = uncertainty_product(&w2, &p2).unwrap();
    assert!((u2.product - 1.0).abs() < 0.01);
    // same streams: doubling hbar scales every sample by sqrt 2
    assert!((u2.product / u.product - 2.0).abs() < 1e-9);
}

#[test]
fn uncertainty_product_independent_of_dt() {
    let base = TranslationParams::new(1.5, 1.0).unwrap();
    let reference = uncertainty_product(&sample_displacements(&base, 200_000, &Streams::new(4, "dt")), &base).unwrap();
    for dt in [1e-3, 0.1, 7.0] {
        let p = TranslationParams::new(1.5, dt).unwrap();
        let u = uncertainty_product(&sample_displacements(&p, 200_000, &Streams::new(4, "dt")), &p).unwrap();
        assert!((u.product - reference.product).abs() < 1e-9);
    }
}

#[test]
fn angular_momentum_is_half_hbar() {
    for (k, (m, w)) in [(1.0, 1.0), (3.0, 7.0), (0.2, 0.05)].into_iter().enumerate() {
        let p = RotationParams::new(m, w).unwrap();
        let est = expected_angular_momentum(&p, 1_000_000, &Streams::new(5, "ls").child("k", k as u64)).unwrap();
        assert!((est.mean - 0.5).abs() < 0.005, "({m},{w}): {}", est.mean);
    }
    let p = RotationParams::with_hbar(1.0, 1.0, 2.0).unwrap();
    let est = expected_angular_momentum(&p, 1_000_000, &Streams::new(6, "ls")).unwrap();
    assert!((est.mean - 1.0).abs() < 0.01);
}

#[test]
fn variational_radius_for_random_params() {
    for (m, w) in [(0.7, 2.3), (4.0, 0.3), (1.9, 1.1)] {
        let p = RotationParams::new(m, w).unwrap();
        let grid = RadiusGrid::for_params(&p);
        let s = variational_radius_solve(&p, grid, 1.0).unwrap();
        let err = grid
            .nodes()
            .iter()
            .zip(&s.density)
            .map(|(&u, v)| (v - radius_density(u, &p).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
        let ls = s.moment(|u| m * w * u * u);
        assert!((ls - 0.5).abs() < 1e-6);
    }
}

fn von_mises(n: usize, kappa: f64) -> PeriodicDensity {
    PeriodicDensity::from_fn(-PI, 2.0 * PI, n, |x| (kappa * x.cos()).exp()).unwrap()
}

#[test]
fn kl_shift_converges_to_fisher_at_first_order() {
    let rho = von_mises(256, 2.0);
    let study = kl_shift_limit(&rho, 1.0, 1.0, &[1e-1, 1e-2, 1e-3]).unwrap();
    let errors: Vec<f64> = study.rates.iter().map(|r| (r / study.fisher - 1.0).abs()).collect();
    assert!(study.finest_ratio() > 0.98 && study.finest_ratio() < 1.02, "{errors:?}");
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log10();
        assert!((order - 1.0).abs() < 0.1, "order {order}");
    }
}

#[test]
fn fisher_functional_of_von_mises() {
    // I = kappa^2 <sin^2> = kappa I_1(kappa) / I_0(kappa)
    let kappa = 2.0;
    let rho = von_mises(256, kappa);
    let bessel = |nu: i32| {
        spinlap_core::numerics::integrate(
            |t: f64| (kappa * t.cos()).exp() * (nu as f64 * t).cos(),
            0.0,
            PI,
            1e-14,
            1e-16,
        )
        .unwrap()
            / PI
    };
    let info = kappa * bessel(1) / bessel(0);
    let f = fisher_functional(&rho, 1.0, 1.0).unwrap();
    assert!((f - 0.25 * info).abs() < 1e-12, "{f} vs {}", 0.25 * info);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn radius_density_is_normalized_for_any_params(m in 0.05..20.0f64, w in 0.05..20.0f64) {
        let p = RotationParams::new(m, w).unwrap();
        let total = spinlap_core::numerics::integrate_to_infinity(|u| radius_density(u, &p).unwrap(), 0.0, 1e-13, 1e-15).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-10);
        let u2 = spinlap_core::numerics::integrate_to_infinity(|u| u * u * radius_density(u, &p).unwrap(), 0.0, 1e-13, 1e-15).unwrap();
        prop_assert!((m * w * u2 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn invalid_params_rejected(x in -10.0..=0.0f64) {
        prop_assert!(TranslationParams::new(x, 1.0).is_err());
        prop_assert!(TranslationParams::new(1.0, x).is_err());
        prop_assert!(RotationParams::new(1.0, x).is_err());
    }
}
