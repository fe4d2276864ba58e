//! Stern-Gerlach measurement statistics.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::export::Histogram;
use crate::orientation::{
    normalization_constant, CosPowerDensity, GridDensity, OrientationDensity, OrientationSampler, PolarAngle,
    TwoPointDensity,
};
use crate::rng::Streams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinOutcome {
    Up,
    Down,
}

impl SpinOutcome {
    pub fn value(self) -> i8 {
        match self {
            SpinOutcome::Up => 1,
            SpinOutcome::Down => -1,
        }
    }
}

/// Outcome for an orientation on the halved sphere; `pi/2` counts as up.
pub fn classify(theta: PolarAngle) -> SpinOutcome {
    if theta.value() <= FRAC_PI_2 {
        SpinOutcome::Up
    } else {
        SpinOutcome::Down
    }
}

/// Divergence order reached inside the apparatus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Finite(u32),
    /// `m -> infinity`: quantized two-point outcome.
    Limit,
}

/// Charge, hbar and mass used for forces and displacements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub charge: f64,
    pub hbar: f64,
    pub mass: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            charge: 1.0,
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApparatusConfig {
    /// Tilt of the field axis from z, radians.
    pub axis_angle: f64,
    /// `eta` in `B = (B0 - eta z) z_hat`.
    pub gradient: f64,
    pub constant_field: f64,
    pub transit_time: f64,
    pub order: Order,
    pub units: Units,
}

impl ApparatusConfig {
    pub fn new(gradient: f64, transit_time: f64, order: Order) -> Result<Self> {
        let cfg = Self {
            axis_angle: 0.0,
            gradient,
            constant_field: 0.0,
            transit_time,
            order,
            units: Units::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transit_time > 0.0) {
            return Err(invalid("transit_time", "must be positive"));
        }
        if !(self.gradient >= 0.0) {
            return Err(invalid("gradient", "must be non-negative"));
        }
        Ok(())
    }
}

/// Draw an outcome from a quantized density.
pub fn measure<R: Rng + ?Sized>(density: &TwoPointDensity, rng: &mut R) -> SpinOutcome {
    if rng.random::<f64>() < density.weight_up() {
        SpinOutcome::Up
    } else {
        SpinOutcome::Down
    }
}

/// An outcome together with the tilt of the apparatus that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub value: SpinOutcome,
    pub axis_angle: f64,
}

impl ApparatusConfig {
    pub fn measure<R: Rng + ?Sized>(&self, density: &TwoPointDensity, rng: &mut R) -> Reading {
        Reading {
            value: measure(density, rng),
            axis_angle: self.axis_angle,
        }
    }
}

/// Empirical up fraction of `n` draws and its binomial standard error.
pub fn up_fraction(density: &TwoPointDensity, n: usize, streams: &Streams) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(invalid("samples", "at least one draw"));
    }
    let ups: u64 = streams
        .map_blocks(n, |rng, len| {
            (0..len).filter(|_| measure(density, rng) == SpinOutcome::Up).count() as u64
        })
        .iter()
        .sum();
    let f = ups as f64 / n as f64;
    Ok((f, (f * (1.0 - f) / n as f64).sqrt()))
}

/// Monte Carlo up fraction for a relaxed electron entering an apparatus tilted by `beta`.
pub fn rotated_up_fraction(beta: f64, n: usize, streams: &Streams) -> Result<(f64, f64)> {
    up_fraction(&TwoPointDensity::new(rotated_up_probability(beta))?, n, streams)
}

/// Re-express a density in a frame whose axis is tilted by `beta`:
/// the result at `theta'` is `sigma(theta' + beta)`, folded onto `[0, pi]`.
pub fn shift_frame(sigma: &GridDensity, beta: f64) -> GridDensity {
    GridDensity::from_fn(sigma.grid(), |t| sigma.eval(PolarAngle::folded(t + beta).value()))
        .expect("shifted density keeps its mass")
}

/// Posterior orientation density inside an apparatus of order `order`,
/// given the prior `sigma` already expressed in the apparatus frame.
///
/// Finite `m`: `sigma(theta') cos^{2m}(theta')`, renormalized. Limit: the
/// two-point density with weights `sigma(0)` and `sigma(pi)`, renormalized.
pub fn conditional_density(sigma: &GridDensity, order: Order) -> Result<OrientationDensity> {
    match order {
        Order::Finite(m) => {
            let p = 2 * m as i32;
            let grid = sigma.grid();
            let values = grid
                .thetas()
                .zip(sigma.values())
                .map(|(t, s)| s * t.cos().powi(p))
                .collect();
            Ok(OrientationDensity::Grid(GridDensity::from_unnormalized(grid, values)?))
        }
        Order::Limit => {
            let v = sigma.values();
            let up = v[0];
            let down = v[v.len() - 1];
            Ok(OrientationDensity::TwoPoint(TwoPointDensity::from_weights(up, down)?))
        }
    }
}

/// `(p_up, p_down)` for a fully relaxed electron entering an apparatus tilted
/// by `beta`, from `rho(beta) - rho(beta + pi) = cos(beta)` and
/// `rho(beta) + rho(beta + pi) = 1`.
pub fn rotated_probabilities(beta: f64) -> (f64, f64) {
    let difference = beta.cos();
    let up = 0.5 * (1.0 + difference);
    let down = 0.5 * (1.0 - difference);
    (up, down)
}

pub fn rotated_up_probability(beta: f64) -> f64 {
    rotated_probabilities(beta).0
}

pub fn rotated_down_probability(beta: f64) -> f64 {
    rotated_probabilities(beta).1
}

/// Up probability at an apparatus tilted `beta2` after an up result at `beta1`.
pub fn two_apparatus_up_probability(beta1: f64, beta2: f64) -> f64 {
    let half = 0.5 * (beta2 - beta1);
    let c = half.cos();
    c * c
}

/// Second-apparatus outcome after a first result at tilt `beta1`.
///
/// With `fully_relaxed` the orientation has spread over the half sphere of
/// the first result and the outcome follows `cos^2` statistics. Without
/// relaxation the orientation still points along the first axis and the
/// outcome is decided by which half sphere of the second axis contains it.
pub fn sequential_measurement<R: Rng + ?Sized>(
    first: SpinOutcome,
    beta1: f64,
    beta2: f64,
    fully_relaxed: bool,
    rng: &mut R,
) -> SpinOutcome {
    let relative = beta2 - beta1;
    if fully_relaxed {
        let up = match first {
            SpinOutcome::Up => two_apparatus_up_probability(beta1, beta2),
            SpinOutcome::Down => 1.0 - two_apparatus_up_probability(beta1, beta2),
        };
        measure(&TwoPointDensity::new(up).expect("probability in [0, 1]"), rng)
    } else {
        let axis = match first {
            SpinOutcome::Up => 0.0,
            SpinOutcome::Down => PI,
        };
        classify(PolarAngle::folded(axis - relative))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationSign {
    Positive,
    Negative,
}

/// Delta weights `(at theta'_y = 0, at theta'_y = pi)` of the outcome along
/// the rotated `y'` axis when the apparatus is tilted by `+beta` or `-beta`.
pub fn y_axis_density_coefficients(beta: f64, sign: RotationSign) -> (f64, f64) {
    let (s, c) = (0.5 * beta).sin_cos();
    let minus = 0.5 * (c - s) * (c - s);
    let plus = 0.5 * (c + s) * (c + s);
    match sign {
        RotationSign::Positive => (minus, plus),
        RotationSign::Negative => (plus, minus),
    }
}

/// `e hbar eta dT^2 / (4 m_e^2 Z_m)`: the displacement of an electron at `theta = 0`.
pub fn displacement_scale(m: u32, eta: f64, transit_time: f64, units: Units) -> f64 {
    units.charge * units.hbar * eta * transit_time * transit_time
        / (4.0 * units.mass * units.mass * normalization_constant(m))
}

/// Classical z displacement after `transit_time` in the weak-gradient regime.
pub fn displacement(theta: PolarAngle, order: Order, eta: f64, transit_time: f64, units: Units) -> Result<f64> {
    let m = match order {
        Order::Finite(m) => m,
        Order::Limit => {
            return Err(invalid(
                "order",
                "the quantized limit has no continuous displacement; use measure",
            ))
        }
    };
    if !(eta > 0.0) || !(transit_time > 0.0) {
        return Err(invalid("eta/transit_time", "must be positive"));
    }
    let scale = displacement_scale(m, eta, transit_time, units);
    Ok(scale * theta.value().cos().powi(2 * m as i32 + 1))
}

/// Sample `n` electrons with `theta ~ p_m` and histogram their displacements
/// over `bins` equal bins spanning `[-dz_max, dz_max]`.
pub fn displacement_distribution(
    config: &ApparatusConfig,
    n: usize,
    bins: usize,
    streams: &Streams,
) -> Result<Histogram> {
    config.validate()?;
    let m = match config.order {
        Order::Finite(m) => m,
        Order::Limit => return Err(invalid("order", "finite order required")),
    };
    if bins == 0 {
        return Err(invalid("bins", "at least one bin"));
    }
    let scale = displacement_scale(m, config.gradient, config.transit_time, config.units);
    let sampler = OrientationSampler::new(m);
    let power = 2 * m as i32 + 1;
    let partial = streams.map_blocks(n, |rng, len| {
        let mut counts = vec![0u64; bins];
        for _ in 0..len {
            let theta = sampler.sample(rng).value();
            let u = theta.cos().powi(power);
            counts[bin_index(u, bins)] += 1;
        }
        counts
    });
    let mut counts = vec![0u64; bins];
    for block in partial {
        for (c, b) in counts.iter_mut().zip(block) {
            *c += b;
        }
    }
    Ok(Histogram::uniform(-scale, scale, counts))
}

fn bin_index(unit_displacement: f64, bins: usize) -> usize {
    let x = 0.5 * (unit_displacement + 1.0) * bins as f64;
    (x.floor().max(0.0) as usize).min(bins - 1)
}

/// Exact bin probabilities of the displacement pushforward of `p_m`.
///
/// `cos^{2m+1}` is strictly decreasing on `[0, pi]`, so the event
/// `dz in [lo, hi]` is a single theta interval.
pub fn pushforward_bin_probabilities(m: u32, bins: usize) -> Vec<f64> {
    let density = CosPowerDensity::new(m);
    let inverse = |u: f64| -> f64 {
        let root = u.abs().powf(1.0 / (2 * m + 1) as f64);
        root.copysign(u).clamp(-1.0, 1.0).acos()
    };
    (0..bins)
        .map(|k| {
            let lo = -1.0 + 2.0 * k as f64 / bins as f64;
            let hi = -1.0 + 2.0 * (k + 1) as f64 / bins as f64;
            density.mass_between(inverse(hi), inverse(lo))
        })
        .collect()
}
