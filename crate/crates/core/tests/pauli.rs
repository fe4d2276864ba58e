use std::f64::consts::PI;

use num_complex::Complex64 as C;
use spinlap_core::numerics::Spectral;
use spinlap_core::pauli::*;

fn packet(grid: SpatialGrid, x0: f64, width: f64, k: f64, spin: Option<Spin>) -> SpinorField {
    SpinorField::gaussian(grid, [x0, 0.0], width, [k, 0.0], spin).unwrap()
}

#[test]
fn norm_conserved_over_ten_thousand_steps() {
    let grid = SpatialGrid::default();
    let config = FieldConfig::free(grid).with_harmonic_well(1.0).with_uniform_bz(0.3);
    let f = packet(grid, 1.0, 0.7, 0.5, None);
    let out = evolve(&f, &config, DEFAULT_DT, 10_000, Scheme::SplitStep).unwrap();
    assert!((out.norm() - 1.0).abs() < 1e-8, "{}", out.norm() - 1.0);
    let (a, b) = out.spin_populations();
    assert!((a - 0.5).abs() < 1e-10 && (b - 0.5).abs() < 1e-10);
}

#[test]
fn crank_nicolson_preserves_norm() {
    let grid = SpatialGrid::default();
    let config = FieldConfig::free(grid).with_harmonic_well(1.0);
    let f = packet(grid, 1.0, 0.7, 0.0, Some(Spin::Plus));
    let out = evolve(&f, &config, DEFAULT_DT, 2000, Scheme::CrankNicolson).unwrap();
    assert!((out.norm() - 1.0).abs() < 1e-10);
    // both schemes agree on the centre of mass to discretization accuracy
    let split = evolve(&f, &config, DEFAULT_DT, 2000, Scheme::SplitStep).unwrap();
    let dx = (out.mean_position()[0] - split.mean_position()[0]).abs();
    assert!(dx < 1e-2, "{dx}");
}

#[test]
fn free_packet_spreads_and_stays_in_one_component() {
    let grid = SpatialGrid::line(512, 60.0).unwrap();
    let config = FieldConfig::free(grid);
    let s0: f64 = 1.0;
    let f = packet(grid, 0.0, s0, 0.0, Some(Spin::Plus));
    let t = 2.0;
    let out = evolve(&f, &config, 1e-3, 2000, Scheme::SplitStep).unwrap();
    assert_eq!(out.spin_populations().1, 0.0);
    assert!(out.component(Spin::Minus).iter().all(|z| *z == C::new(0.0, 0.0)));
    let expected = s0 * s0 * (1.0 + (t / (2.0 * s0 * s0)).powi(2));
    let var = out.position_variance(Spin::Plus);
    assert!((var - expected).abs() / expected < 1e-6, "{var} vs {expected}");
}

#[test]
fn larmor_rate_matches_field() {
    let grid = SpatialGrid::default();
    let config = FieldConfig::free(grid).with_uniform_bz(1.0);
    let f = packet(grid, 0.0, 1.0, 0.0, None);
    let rate = larmor_rate(&f, &config, DEFAULT_DT, 1000).unwrap();
    assert!((rate - 1.0).abs() < 0.01, "{rate}");
}

/// Classical oscillator `x'' = -omega^2 x` by RK4.
fn classical_period(omega: f64, x0: f64, dt: f64) -> f64 {
    let (mut x, mut v, mut t) = (x0, 0.0f64, 0.0);
    let acc = |x: f64| -omega * omega * x;
    let mut crossings = Vec::new();
    while crossings.len() < 3 {
        let (k1x, k1v) = (v, acc(x));
        let (k2x, k2v) = (v + 0.5 * dt * k1v, acc(x + 0.5 * dt * k1x));
        let (k3x, k3v) = (v + 0.5 * dt * k2v, acc(x + 0.5 * dt * k2x));
        let (k4x, k4v) = (v + dt * k3v, acc(x + dt * k3x));
        let nx = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if x.signum() != nx.signum() {
            crossings.push(t + dt * x / (x - nx));
        }
        x = nx;
        t += dt;
    }
    crossings[2] - crossings[0]
}

fn zero_crossings(series: &[f64], dt: f64) -> Vec<f64> {
    series
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].signum() != w[1].signum())
        .map(|(i, w)| dt * (i as f64 + w[0] / (w[0] - w[1])))
        .collect()
}

#[test]
fn coherent_state_oscillates_at_classical_frequency() {
    let grid = SpatialGrid::default();
    let omega = 1.0;
    let config = FieldConfig::free(grid).with_harmonic_well(omega);
    let f = packet(grid, 2.0, (0.5f64 / omega).sqrt(), 0.0, Some(Spin::Plus));
    let dt = DEFAULT_DT;
    let mut centre = Vec::new();
    evolve_with(&f, &config, dt, 14_000, Scheme::SplitStep, |_, s| {
        centre.push(s.mean_position()[0])
    })
    .unwrap();
    let c = zero_crossings(&centre, dt);
    assert!(c.len() >= 3);
    let period = c[2] - c[0];
    let oracle = classical_period(omega, 2.0, 1e-4);
    assert!((period / oracle - 1.0).abs() < 0.01, "{period} vs {oracle}");
    assert!((oracle - 2.0 * PI).abs() < 1e-6);
}

#[test]
fn energy_drift_is_small() {
    let grid = SpatialGrid::default();
    let config = FieldConfig::free(grid).with_harmonic_well(1.0).with_uniform_bz(0.5);
    let f = packet(grid, 1.5, 0.8, 0.3, None);
    let e0 = energy(&f, &config).unwrap();
    let out = evolve(&f, &config, DEFAULT_DT, 1000, Scheme::SplitStep).unwrap();
    let e1 = energy(&out, &config).unwrap();
    assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} {e1}");
}

#[test]
fn spectral_round_trip_is_identity() {
    let n = 256;
    let sp = Spectral::new(n, 20.0);
    let orig: Vec<C> = (0..n)
        .map(|i| C::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
        .collect();
    let mut buf = orig.clone();
    sp.forward(&mut buf);
    sp.inverse(&mut buf);
    let err = buf.iter().zip(&orig).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err}");
}

#[test]
fn ground_state_is_stationary() {
    let grid = SpatialGrid::default();
    let config = FieldConfig::free(grid).with_harmonic_well(1.0);
    let g = ground_state(&config, Spin::Plus, 1e-3, 1e-12, 200_000).unwrap();
    assert!((g.energy - 0.5).abs() < 1e-5, "{}", g.energy);
    let mut fields = Vec::new();
    evolve_with(&g.field, &config, DEFAULT_DT, 10, Scheme::SplitStep, |_, f| {
        fields.push(f.clone())
    })
    .unwrap();
    let r = continuity_residual(&fields, &config, DEFAULT_DT).unwrap();
    assert!(r < 1e-6, "{r}");
    let hj = hj_residual(&fields, &config, DEFAULT_DT).unwrap();
    println!("ground state residuals: continuity {r:e}, hj {hj:e}");
}

fn residuals(nodes: usize, dt: f64) -> (f64, f64) {
    let grid = SpatialGrid::line(nodes, 40.0).unwrap();
    let config = FieldConfig::free(grid).with_harmonic_well(0.5);
    let f = packet(grid, -1.0, 1.0, 1.0, Some(Spin::Plus));
    let steps = (0.5 / dt).round() as usize;
    let mut fields = Vec::new();
    evolve_with(&f, &config, dt, steps + 1, Scheme::SplitStep, |i, s| {
        if i + 1 >= steps {
            fields.push(s.clone())
        }
    })
    .unwrap();
    (
        continuity_residual(&fields, &config, dt).unwrap(),
        hj_residual(&fields, &config, dt).unwrap(),
    )
}

#[test]
fn madelung_residuals_converge_at_second_order() {
    let (c1, h1) = residuals(256, 4e-3);
    let (c2, h2) = residuals(512, 2e-3);
    let (c3, h3) = residuals(1024, 1e-3);
    println!("continuity {c1:e} {c2:e} {c3:e}; hj {h1:e} {h2:e} {h3:e}");
    for (a, b) in [(c1, c2), (c2, c3), (h1, h2), (h2, h3)] {
        let order = (a / b).log2();
        assert!(order > 1.7 && order < 2.3, "order {order}");
    }
}

#[test]
fn plane_wave_phase_gradient() {
    let grid = SpatialGrid::default();
    let k = 2.0 * PI * 3.0 / grid.extent();
    let f = SpinorField::from_fn(grid, |p| C::from_polar(1.0, k * p[0]), |_| C::new(0.0, 0.0)).unwrap();
    let g = phase_gradient(&f, Spin::Plus, 0, 1.0);
    assert!(g.iter().all(|v| (v - k).abs() < 1e-12));
    let d = madelung(&f, 1.0);
    assert!(d.rho_plus.iter().all(|r| (r - 1.0 / grid.extent()).abs() < 1e-14));
    for w in d.s_plus.windows(2) {
        assert!((w[1] - w[0] - k * grid.spacing()).abs() < 1e-12);
    }
}

#[test]
fn gauge_transform_handles_nonuniform_potential_in_1d() {
    // a pure-gauge A = d chi/dx only changes the phase of the solution
    let grid = SpatialGrid::default();
    let l = grid.extent();
    let q = 2.0 * PI / l;
    let chi: Vec<f64> = (0..grid.len()).map(|i| 0.3 * (q * grid.coordinate(i)).sin()).collect();
    let ax: Vec<f64> = (0..grid.len())
        .map(|i| 0.3 * q * (q * grid.coordinate(i)).cos())
        .collect();
    let base = FieldConfig::free(grid).with_harmonic_well(1.0);
    let gauged = base.clone().with_vector_potential(ax, vec![0.0; grid.len()]);
    let f = packet(grid, 1.0, 0.7, 0.0, Some(Spin::Plus));
    let mut g = f.clone();
    let gp: Vec<C> = g
        .component(Spin::Plus)
        .iter()
        .zip(&chi)
        .map(|(z, c)| z * C::from_polar(1.0, -c))
        .collect();
    g = SpinorField::new(grid, gp, vec![C::new(0.0, 0.0); grid.len()]).unwrap();
    let a = evolve(&f, &base, DEFAULT_DT, 500, Scheme::SplitStep).unwrap();
    let b = evolve(&g, &gauged, DEFAULT_DT, 500, Scheme::SplitStep).unwrap();
    let err = a
        .density(Spin::Plus)
        .iter()
        .zip(b.density(Spin::Plus))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
    let plane = SpatialGrid::plane(16, 4.0).unwrap();
    let bad = FieldConfig::free(plane).with_vector_potential((0..256).map(|i| i as f64).collect(), vec![0.0; 256]);
    assert!(Propagator::new(&bad, 1e-3, Scheme::SplitStep).is_err());
}

#[test]
fn two_dimensional_packet_conserves_norm_and_populations() {
    let grid = SpatialGrid::plane(64, 16.0).unwrap();
    let config = FieldConfig::free(grid).with_harmonic_well(1.0).with_uniform_bz(1.0);
    let f = SpinorField::gaussian(grid, [1.0, -0.5], 0.8, [0.2, 0.4], None).unwrap();
    let out = evolve(&f, &config, 1e-3, 500, Scheme::SplitStep).unwrap();
    assert!((out.norm() - 1.0).abs() < 1e-10);
    let (a, b) = out.spin_populations();
    assert!((a - 0.5).abs() < 1e-10 && (b - 0.5).abs() < 1e-10);
    let e0 = energy(&f, &config).unwrap();
    let e1 = energy(&out, &config).unwrap();
    assert!(((e1 - e0) / e0).abs() < 1e-6);
}
