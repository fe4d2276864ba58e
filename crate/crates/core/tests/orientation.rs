use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use spinlap_core::orientation::*;
use spinlap_core::rng::Streams;
use spinlap_core::Error;

/// `Z_m = pi (2m-1)!! / (2m)!!` independently of quadrature.
fn wallis(m: u32) -> f64 {
    (1..=m).fold(PI, |z, k| z * (2 * k - 1) as f64 / (2 * k) as f64)
}

#[test]
fn normalization_matches_wallis_product() {
    assert_eq!(normalization_constant(0), PI);
    assert!((normalization_constant(1) - FRAC_PI_2).abs() < 1e-12);
    assert!((normalization_constant(2) - 3.0 * PI / 8.0).abs() < 1e-12);
    for m in 1..=10 {
        let ratio = normalization_constant(m) / normalization_constant(m - 1);
        assert!((ratio - (2 * m - 1) as f64 / (2 * m) as f64).abs() < 1e-9);
        assert!((normalization_constant(m) / wallis(m) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn density_examples() {
    let t = |x| PolarAngle::new(x).unwrap();
    assert!(eval_density(1, t(FRAC_PI_2)).abs() < 1e-30);
    assert!((eval_density(0, t(1.0)) - 1.0 / PI).abs() < 1e-15);
    assert!((eval_density(2, t(0.0)) - 0.848_826_363_156_775).abs() < 1e-12);
}

#[test]
fn concentration_grows_with_m() {
    for eps in [0.05, 0.1, 0.3, 1.0] {
        let masses: Vec<f64> = (0..=10).map(|m| CosPowerDensity::new(m).pole_mass(eps)).collect();
        assert!(masses.windows(2).all(|w| w[1] > w[0]), "{eps}: {masses:?}");
    }
}

#[test]
fn sampler_moments() {
    let streams = Streams::new(11, "sampler");
    let n = 1_000_000;
    let moments = |m: u32, f: fn(f64) -> f64| -> f64 {
        let sampler = OrientationSampler::new(m);
        let sums = streams.child("m", m as u64).map_blocks(n, |rng, len| {
            (0..len).map(|_| f(sampler.sample(rng).value())).sum::<f64>()
        });
        sums.iter().sum::<f64>() / n as f64
    };
    // uniform: mean cos = 0 with sd 1/sqrt(2)
    assert!(moments(0, f64::cos).abs() < 3.0 * (0.5f64 / n as f64).sqrt());
    let upper = moments(3, |t| if t < FRAC_PI_2 { 1.0 } else { 0.0 });
    assert!((upper - 0.5).abs() < 3.0 * (0.25f64 / n as f64).sqrt());
    // <cos^2> under p_1 is Z_2 / Z_1 = 3/4
    let c2 = moments(1, |t| t.cos().powi(2));
    assert!((c2 - 0.75).abs() < 0.002, "{c2}");
}

#[test]
fn limit_density_examples() {
    let grid = ThetaGrid::default();
    let uniform = limit_density(&GridDensity::uniform(grid));
    assert!((uniform.weight_up() - 0.5).abs() < 1e-12);
    let p1 = limit_density(&CosPowerDensity::new(1).on_grid(grid));
    assert!((p1.weight_up() - 0.5).abs() < 1e-12);
    let upper = GridDensity::from_fn(grid, |t| if t <= FRAC_PI_2 { (2.0 * t).sin() } else { 0.0 }).unwrap();
    let lim = limit_density(&upper);
    assert!((lim.weight_up() - 1.0).abs() < 1e-12 && lim.weight_down().abs() < 1e-12);
    assert_eq!(lim.weight_up() + lim.weight_down(), 1.0);
}

fn spec(div: Divergence, m: u32) -> ActionSpec {
    ActionSpec::new(div, m)
}

#[test]
fn variational_matches_closed_form() {
    let grid = ThetaGrid::default();
    for m in 1..=3 {
        let closed = CosPowerDensity::new(m);
        for div in [Divergence::Tsallis, Divergence::Renyi] {
            let sol = variational_solve(&spec(div, m), grid).unwrap();
            let err = sol.density.linf_distance(|t| closed.eval(t));
            assert!(err <= 1e-6, "{div:?} m={m}: {err}");
        }
    }
    let t2 = variational_solve(&spec(Divergence::Tsallis, 2), grid).unwrap();
    let r2 = variational_solve(&spec(Divergence::Renyi, 2), grid).unwrap();
    assert!(t2.density.linf_distance(|t| r2.density.eval(t)) < 1e-6);
}

#[test]
fn kl_variant_is_exponential_of_cosine() {
    let grid = ThetaGrid::default();
    let sol = variational_solve(&spec(Divergence::KullbackLeibler, 1), grid).unwrap();
    let z = spinlap_core::numerics::integrate(|t: f64| t.cos().exp(), 0.0, PI, 1e-13, 1e-15).unwrap();
    assert!(sol.density.values().iter().all(|v| *v > 0.0));
    assert!(sol.density.linf_distance(|t| t.cos().exp() / z) < 1e-6);
    let p1 = CosPowerDensity::new(1);
    assert!(sol.density.linf_distance(|t| p1.eval(t)) > 0.1);
    let mass_at_equator = sol.density.eval(FRAC_PI_2);
    assert!(mass_at_equator > 0.1);
}

#[test]
fn closed_form_beats_uniform_only_in_the_divergence_term() {
    // <cos> vanishes for every symmetric density, so A_t(p_m) is the
    // divergence term alone and exceeds A_t(uniform) = 0.
    let grid = ThetaGrid::default();
    let uniform = GridDensity::uniform(grid);
    for m in 1..=3 {
        let s = spec(Divergence::Tsallis, m);
        let a_uniform = total_action(&uniform, &s).unwrap();
        let a_closed = total_action(&CosPowerDensity::new(m).on_grid(grid), &s).unwrap();
        assert!(a_uniform.abs() < 1e-12);
        assert!(a_closed > 0.0);
        let expected = [0.2004, 0.3140, 0.3915][m as usize - 1];
        assert!((a_closed - expected).abs() < 1e-3, "m={m}: {a_closed}");
    }
}

#[test]
fn cosine_tilt_lowers_the_action() {
    // p_m (1 + eps cos) gains classical energy faster than divergence cost
    let grid = ThetaGrid::default();
    for m in 1..=3 {
        let s = spec(Divergence::Tsallis, m);
        let closed = CosPowerDensity::new(m);
        let perturbed = GridDensity::from_fn(grid, |t| closed.eval(t) * (1.0 + 0.1 * t.cos())).unwrap();
        let a0 = total_action(&closed.on_grid(grid), &s).unwrap();
        let a1 = total_action(&perturbed, &s).unwrap();
        assert!(a1 < a0, "m={m}: {a1} vs {a0}");
    }
}

#[test]
#[ignore = "as literally stated this relation does not hold; see cosine_tilt_lowers_the_action"]
fn closed_form_minimizes_against_cosine_tilt() {
    let grid = ThetaGrid::default();
    for m in 1..=3 {
        let s = spec(Divergence::Tsallis, m);
        let closed = CosPowerDensity::new(m);
        let perturbed = GridDensity::from_fn(grid, |t| closed.eval(t) * (1.0 + 0.1 * t.cos())).unwrap();
        assert!(total_action(&closed.on_grid(grid), &s).unwrap() < total_action(&perturbed, &s).unwrap());
    }
}

#[test]
fn action_rejects_bad_input() {
    let grid = ThetaGrid::default();
    let values = vec![1.0; grid.len()];
    assert!(matches!(
        GridDensity::new(grid, values),
        Err(Error::NotNormalized { .. })
    ));
    assert!(alpha_from_m(0).is_err());
    let mut s = spec(Divergence::Tsallis, 1);
    s.delta_phi = -1.0;
    assert!(total_action(&GridDensity::uniform(grid), &s).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_is_symmetric(m in 0u32..40, theta in 0.0..=PI) {
        let a = eval_density(m, PolarAngle::new(theta).unwrap());
        let b = eval_density(m, PolarAngle::new(PI - theta).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn alpha_in_range(m in 1u32..10_000) {
        let a = alpha_from_m(m).unwrap();
        prop_assert!(a > 1.0 && a <= 1.5);
    }

    #[test]
    fn grid_densities_are_normalized(coeffs in proptest::collection::vec(0.0..1.0f64, 1..6), m in 0u32..12) {
        let grid = ThetaGrid::default();
        let g = GridDensity::from_fn(grid, |t| {
            coeffs.iter().enumerate().map(|(k, c)| c * (k as f64 * t).cos().powi(2)).sum::<f64>() + 1e-3
        }).unwrap();
        prop_assert!((g.integral() - 1.0).abs() < 1e-10);
        let p = CosPowerDensity::new(m).on_grid(grid);
        prop_assert!((p.integral() - 1.0).abs() < 1e-10);
        let lim = limit_density(&g);
        prop_assert_eq!(lim.weight_up() + lim.weight_down(), 1.0);
        prop_assert!((0.0..=1.0).contains(&lim.weight_up()));
    }

    #[test]
    fn polar_angle_bounds(x in -10.0..10.0f64) {
        let ok = PolarAngle::new(x).is_ok();
        prop_assert_eq!(ok, (0.0..=PI).contains(&x));
        let f = PolarAngle::folded(x).value();
        prop_assert!((0.0..=PI).contains(&f));
        prop_assert!((f.cos() - x.cos()).abs() < 1e-12);
    }
}
