use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rand::Rng;
use spinlap_core::export::Histogram;
use spinlap_core::oracle;
use spinlap_core::orientation::{CosPowerDensity, TwoPointDensity};
use spinlap_core::rng::Streams;
use spinlap_core::stern_gerlach::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn bernoulli_contract() {
    let s = Streams::new(5, "measure");
    let (f, _) = up_fraction(&TwoPointDensity::new(0.5).unwrap(), 1_000_000, &s).unwrap();
    assert!((f - 0.5).abs() < 0.002);
    let (f, _) = up_fraction(&TwoPointDensity::new(0.25).unwrap(), 1_000_000, &s.child("q", 1)).unwrap();
    assert!((f - 0.25).abs() < 0.002);
}

#[test]
fn frequencies_converge_at_root_n() {
    let beta = 1.1;
    let p = rotated_up_probability(beta);
    for (k, n) in [10_000usize, 100_000, 1_000_000].into_iter().enumerate() {
        let (f, se) = rotated_up_fraction(beta, n, &Streams::new(7, "conv").child("n", k as u64)).unwrap();
        assert!((se - (p * (1.0 - p) / n as f64).sqrt()).abs() < 1e-2 / (n as f64).sqrt());
        assert!((f - p).abs() < 4.0 * se, "n={n}: {f} vs {p}");
    }
}

#[test]
fn sequential_relaxed_statistics_match_oracle() {
    let mut rng = Streams::new(9, "seq").stream(0);
    let (b1, b2) = (0.3, 1.6);
    let n = 200_000;
    let ups = (0..n)
        .filter(|_| sequential_measurement(SpinOutcome::Up, b1, b2, true, &mut rng) == SpinOutcome::Up)
        .count();
    let p = oracle::overlap_prob(b1, b2);
    assert!((ups as f64 / n as f64 - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
}

fn chi_square_p_value(hist: &Histogram, probs: &[f64]) -> f64 {
    let n = hist.total() as f64;
    let mut stat = 0.0;
    let mut dof = 0usize;
    // pool bins with small expectation into their neighbour
    let (mut obs, mut exp) = (0.0f64, 0.0f64);
    for (c, p) in hist.counts.iter().zip(probs) {
        obs += *c as f64;
        exp += p * n;
        if exp >= 20.0 {
            stat += (obs - exp).powi(2) / exp;
            dof += 1;
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 {
        stat += (obs - exp).powi(2) / exp;
        dof += 1;
    }
    1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn displacement_histograms_match_pushforward() {
    for m in [0u32, 1, 3, 20] {
        let cfg = ApparatusConfig::new(1.0, 1.0, Order::Finite(m)).unwrap();
        let h = displacement_distribution(&cfg, 1_000_000, 60, &Streams::new(1, "dz").child("m", m as u64)).unwrap();
        let probs = pushforward_bin_probabilities(m, 60);
        let p = chi_square_p_value(&h, &probs);
        assert!(p > 1e-3, "m={m}: p={p}");
    }
}

#[test]
fn uniform_orientation_gives_symmetric_displacements() {
    let cfg = ApparatusConfig::new(1.0, 1.0, Order::Finite(0)).unwrap();
    let h = displacement_distribution(&cfg, 1_000_000, 200, &Streams::new(2, "sym")).unwrap();
    let scale = displacement_scale(0, 1.0, 1.0, Units::default());
    // displacement = scale * cos(theta) with theta uniform: sd = scale / sqrt 2
    let se = scale / 2f64.sqrt() / 1000.0;
    assert!(h.mean().abs() < 3.0 * se + h.bin_width() * 1e-3);
    let d = h.counts.len();
    let skew: f64 = (0..d)
        .map(|k| {
            let (a, b) = h.edges(k);
            (0.5 * (a + b) / scale).powi(3) * h.counts[k] as f64
        })
        .sum::<f64>()
        / h.total() as f64;
    assert!(skew.abs() < 0.005, "{skew}");
}

#[test]
fn modes_move_outward_with_m() {
    let centre_mass = |m| {
        let p = pushforward_bin_probabilities(m, 40);
        p[15..25].iter().sum::<f64>()
    };
    assert!(centre_mass(3) < centre_mass(1));
    assert!(centre_mass(20) < centre_mass(3));
    let p3 = pushforward_bin_probabilities(3, 40);
    assert!(p3[0] > p3[10] && p3[39] > p3[29]);
}

#[test]
fn edge_mass_for_m_twenty() {
    // |dz| >= 0.95 dz_max  <=>  theta within 0.95^(1/41) of a pole
    let m = 20;
    let eps = 0.95f64.powf(1.0 / 41.0).acos();
    let exact = CosPowerDensity::new(m).pole_mass(eps);
    let pushed: f64 = {
        let p = pushforward_bin_probabilities(m, 40);
        p[0] + p[39]
    };
    assert!((exact - pushed).abs() < 1e-10);
    assert!((exact - 0.2498).abs() < 1e-3, "{exact}");
}

#[test]
#[ignore = "the stated 95% edge mass for m = 20 is far above the exact value; see edge_mass_for_m_twenty"]
fn edge_mass_for_m_twenty_as_stated() {
    let eps = 0.95f64.powf(1.0 / 41.0).acos();
    assert!(CosPowerDensity::new(20).pole_mass(eps) >= 0.95);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn two_apparatus_matches_oracle(b1 in 0.0..2.0 * PI, b2 in 0.0..2.0 * PI) {
        prop_assert!((two_apparatus_up_probability(b1, b2) - oracle::overlap_prob(b1, b2)).abs() < 1e-12);
    }

    #[test]
    fn rotated_pair_sums_to_one(beta in 0.0..2.0 * PI) {
        let (u, d) = rotated_probabilities(beta);
        prop_assert_eq!(u + d, 1.0);
        prop_assert!((u - oracle::overlap_prob(0.0, beta)).abs() < 1e-12);
        prop_assert!((d - oracle::overlap_prob_down(0.0, beta)).abs() < 1e-12);
    }

    #[test]
    fn y_axis_pairs_sum_to_one(beta in -PI..PI) {
        let (a, b) = y_axis_density_coefficients(beta, RotationSign::Positive);
        let (c, d) = y_axis_density_coefficients(beta, RotationSign::Negative);
        prop_assert!((a + b - 1.0).abs() < 1e-14);
        prop_assert_eq!((a, b), (d, c));
        // the rotated-apparatus formula evaluated a quarter turn away
        prop_assert!((b - rotated_up_probability(beta - FRAC_PI_2)).abs() < 1e-12);
    }

    #[test]
    fn displacement_is_odd(theta in 0.0..=PI, m in 0u32..30, eta in 0.01..10.0f64) {
        let u = Units::default();
        let a = displacement(spinlap_core::orientation::PolarAngle::new(theta).unwrap(), Order::Finite(m), eta, 1.0, u).unwrap();
        let b = displacement(spinlap_core::orientation::PolarAngle::new(PI - theta).unwrap(), Order::Finite(m), eta, 1.0, u).unwrap();
        // rounding in pi - theta is amplified by (2m+1)/|cos theta| near the equator
        let cond = (2 * m + 1) as f64 * (1.0 + theta.tan().abs());
        prop_assert!((a + b).abs() <= 8.0 * f64::EPSILON * cond * a.abs() + 1e-300);
    }

    #[test]
    fn unrelaxed_outcome_depends_on_half_sphere(delta in -PI..PI, seed in 0u64..1000) {
        let mut rng = Streams::new(seed, "u").stream(0);
        let _: f64 = rng.random();
        let out = sequential_measurement(SpinOutcome::Up, 0.0, delta, false, &mut rng);
        prop_assert_eq!(out == SpinOutcome::Up, delta.abs() <= FRAC_PI_2);
    }
}

#[test]
fn displacement_is_odd_near_the_equator() {
    // regression: theta = 1.5666555106206295, m = 17 broke a fixed relative tolerance
    let u = Units::default();
    let theta = 1.5666555106206295;
    let d = |t: f64| {
        displacement(
            spinlap_core::orientation::PolarAngle::new(t).unwrap(),
            Order::Finite(17),
            0.01,
            1.0,
            u,
        )
        .unwrap()
    };
    let (a, b) = (d(theta), d(PI - theta));
    assert!(a > 0.0 && b < 0.0);
    assert!((a + b).abs() <= 8.0 * f64::EPSILON * 35.0 * (1.0 + theta.tan().abs()) * a.abs());
}
