//! Translational and rotational vacuum fluctuations.
//!
//! Translation: displacements over `dt` are Gaussian with per-component
//! variance `hbar dt / 2m`. Rotation: the radius `u` of the local circular
//! motion has the half-Gaussian density `exp(-m omega u^2 / hbar) / Z`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{gauss_hermite, neumaier_sum, trapezoid, NeumaierSum, Spectral};
use crate::rng::Streams;

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationParams {
    pub mass: f64,
    pub dt: f64,
    pub hbar: f64,
}

impl TranslationParams {
    pub fn new(mass: f64, dt: f64) -> Result<Self> {
        Self::with_hbar(mass, dt, 1.0)
    }

    pub fn with_hbar(mass: f64, dt: f64, hbar: f64) -> Result<Self> {
        let p = Self { mass, dt, hbar };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("mass", self.mass)?;
        check_positive("dt", self.dt)?;
        check_positive("hbar", self.hbar)
    }

    /// Per-component variance `hbar dt / 2m`.
    pub fn variance(&self) -> f64 {
        self.hbar * self.dt / (2.0 * self.mass)
    }
}

pub fn sample_displacement<R: Rng + ?Sized>(params: &TranslationParams, rng: &mut R) -> [f64; 3] {
    let normal = Normal::new(0.0, params.variance().sqrt()).expect("positive variance");
    [normal.sample(rng), normal.sample(rng), normal.sample(rng)]
}

pub fn sample_displacements(params: &TranslationParams, n: usize, streams: &Streams) -> Vec<[f64; 3]> {
    streams
        .map_blocks(n, |rng, len| {
            (0..len).map(|_| sample_displacement(params, rng)).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyEstimate {
    /// `<dx_i dp_i>` with `dp_i = m w_i / dt`, pooled over components.
    pub product: f64,
    pub standard_error: f64,
    /// Product of the sample standard deviations of `x_i` and `p_i`.
    pub sd_product: f64,
}

pub const MIN_UNCERTAINTY_SAMPLES: usize = 10_000;

pub fn uncertainty_product(samples: &[[f64; 3]], params: &TranslationParams) -> Result<UncertaintyEstimate> {
    params.validate()?;
    if samples.len() < MIN_UNCERTAINTY_SAMPLES {
        return Err(invalid("samples", format!("need at least {MIN_UNCERTAINTY_SAMPLES}")));
    }
    let scale = params.mass / params.dt;
    let n = (3 * samples.len()) as f64;
    let w = samples.iter().flatten().copied();
    let mean = neumaier_sum(w.clone()) / n;
    let mean_sq = neumaier_sum(w.clone().map(|x| x * x)) / n;
    let fourth = neumaier_sum(w.map(|x| x.powi(4))) / n;
    let product = scale * mean_sq;
    let standard_error = scale * ((fourth - mean_sq * mean_sq).max(0.0) / n).sqrt();
    let var = (mean_sq - mean * mean) * n / (n - 1.0);
    Ok(UncertaintyEstimate {
        product,
        standard_error,
        sd_product: var.sqrt() * scale * var.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationParams {
    pub mass: f64,
    pub omega: f64,
    pub hbar: f64,
}

impl RotationParams {
    pub fn new(mass: f64, omega: f64) -> Result<Self> {
        Self::with_hbar(mass, omega, 1.0)
    }

    pub fn with_hbar(mass: f64, omega: f64, hbar: f64) -> Result<Self> {
        let p = Self { mass, omega, hbar };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("mass", self.mass)?;
        check_positive("omega", self.omega)?;
        check_positive("hbar", self.hbar)
    }

    /// Standard deviation of the underlying Gaussian, `sqrt(hbar / 2 m omega)`.
    pub fn sigma(&self) -> f64 {
        (self.hbar / (2.0 * self.mass * self.omega)).sqrt()
    }

    fn exponent(&self, u: f64) -> f64 {
        -self.mass * self.omega * u * u / self.hbar
    }

    pub fn normalization(&self) -> f64 {
        0.5 * (PI * self.hbar / (self.mass * self.omega)).sqrt()
    }
}

pub fn radius_density(u: f64, params: &RotationParams) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(invalid("u", "radius must be non-negative"));
    }
    Ok(params.exponent(u).exp() / params.normalization())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub samples: usize,
}

pub fn expected_angular_momentum(params: &RotationParams, n: usize, streams: &Streams) -> Result<MonteCarloEstimate> {
    params.validate()?;
    if n < MIN_UNCERTAINTY_SAMPLES {
        return Err(invalid("samples", format!("need at least {MIN_UNCERTAINTY_SAMPLES}")));
    }
    let normal = Normal::new(0.0, params.sigma()).expect("positive sigma");
    let blocks = streams.map_blocks(n, |rng, len| {
        let mut s = NeumaierSum::default();
        let mut s2 = NeumaierSum::default();
        for _ in 0..len {
            let u: f64 = normal.sample(rng);
            let l = params.mass * params.omega * u * u;
            s.add(l);
            s2.add(l * l);
        }
        (s.value(), s2.value())
    });
    let sum = neumaier_sum(blocks.iter().map(|b| b.0));
    let sum2 = neumaier_sum(blocks.iter().map(|b| b.1));
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum2 / nf - mean * mean).max(0.0);
    Ok(MonteCarloEstimate {
        mean,
        standard_error: (var / nf).sqrt(),
        samples: n,
    })
}

/// Uniform grid on `[0, max_u]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusGrid {
    pub intervals: usize,
    pub max_u: f64,
}

impl RadiusGrid {
    pub fn new(intervals: usize, max_u: f64) -> Result<Self> {
        if intervals < 2 {
            return Err(invalid("intervals", "need at least 2"));
        }
        check_positive("max_u", max_u)?;
        Ok(Self { intervals, max_u })
    }

    /// Ten standard deviations at 4000 intervals.
    pub fn for_params(params: &RotationParams) -> Self {
        Self {
            intervals: 4000,
            max_u: 10.0 * params.sigma(),
        }
    }

    pub fn spacing(&self) -> f64 {
        self.max_u / self.intervals as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..=self.intervals).map(|i| i as f64 * h).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSolution {
    pub grid: RadiusGrid,
    pub density: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl RadiusSolution {
    pub fn moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        let u = self.grid.nodes();
        let v: Vec<f64> = u.iter().zip(&self.density).map(|(&u, &p)| f(u) * p).collect();
        trapezoid(&v, self.grid.spacing())
    }

    pub fn mean_square_radius(&self) -> f64 {
        self.moment(|u| u * u)
    }
}

pub const RADIUS_MAX_ITERATIONS: usize = 500;
pub const RADIUS_TOLERANCE: f64 = 1e-12;

/// Minimize `(m/2) omega <u^2> + (hbar/2) KL(p || mu)` over normalized
/// densities on the grid by exponentiated-gradient descent. `prior_level`
/// is the constant value of the uniform prior `mu`.
pub fn variational_radius_solve(params: &RotationParams, grid: RadiusGrid, prior_level: f64) -> Result<RadiusSolution> {
    params.validate()?;
    check_positive("prior_level", prior_level)?;
    if grid.max_u < 6.0 * params.sigma() {
        return Err(invalid("grid", "must extend at least six standard deviations"));
    }
    let u = grid.nodes();
    let h = grid.spacing();
    // step 1/hbar: half of the exact Newton step in log space
    let step = 1.0 / params.hbar;
    let mut log_p = vec![-(grid.max_u.ln()); u.len()];
    let mut residual = f64::INFINITY;
    for iteration in 1..=RADIUS_MAX_ITERATIONS {
        let mut next: Vec<f64> = log_p
            .iter()
            .zip(&u)
            .map(|(&lp, &x)| {
                let gradient =
                    0.5 * params.mass * params.omega * x * x + 0.5 * params.hbar * (lp - prior_level.ln() + 1.0);
                lp - step * gradient
            })
            .collect();
        let shift = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mass = trapezoid(&next.iter().map(|v| (v - shift).exp()).collect::<Vec<_>>(), h);
        let log_mass = shift + mass.ln();
        next.iter_mut().for_each(|v| *v -= log_mass);
        residual = next
            .iter()
            .zip(&log_p)
            .map(|(a, b)| (a.exp() - b.exp()).abs())
            .fold(0.0, f64::max);
        log_p = next;
        if residual < RADIUS_TOLERANCE {
            return Ok(RadiusSolution {
                grid,
                density: log_p.iter().map(|v| v.exp()).collect(),
                iterations: iteration,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "variational_radius_solve",
        iterations: RADIUS_MAX_ITERATIONS,
        residual,
    })
}

/// Normalized, strictly positive density on a periodic 1D grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicDensity {
    pub x_min: f64,
    pub length: f64,
    pub values: Vec<f64>,
}

impl PeriodicDensity {
    pub fn new(x_min: f64, length: f64, values: Vec<f64>) -> Result<Self> {
        check_positive("length", length)?;
        if values.len() < 4 {
            return Err(invalid("values", "need at least 4 nodes"));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(invalid("density", format!("must be strictly positive, found {v}")));
        }
        let d = Self { x_min, length, values };
        let integral = d.integral();
        if (integral - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { integral });
        }
        Ok(d)
    }

    /// Sample `f` on `n` nodes and normalize.
    pub fn from_fn<F: Fn(f64) -> f64>(x_min: f64, length: f64, n: usize, f: F) -> Result<Self> {
        let dx = length / n as f64;
        let raw: Vec<f64> = (0..n).map(|j| f(x_min + j as f64 * dx)).collect();
        let total = neumaier_sum(raw.iter().copied()) * dx;
        check_positive("integral", total)?;
        Self::new(x_min, length, raw.into_iter().map(|v| v / total).collect())
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.values.len() as f64
    }

    pub fn integral(&self) -> f64 {
        neumaier_sum(self.values.iter().copied()) * self.spacing()
    }
}

/// `(hbar / 4m) * int |rho'|^2 / rho dx`, computed as `(hbar/m) int (sqrt rho)'^2`.
pub fn fisher_functional(rho: &PeriodicDensity, mass: f64, hbar: f64) -> Result<f64> {
    check_positive("mass", mass)?;
    check_positive("hbar", hbar)?;
    let spectral = Spectral::new(rho.values.len(), rho.length);
    let amplitude: Vec<f64> = rho.values.iter().map(|v| v.sqrt()).collect();
    let d = spectral.derivative(&amplitude);
    let info = 4.0 * neumaier_sum(d.iter().map(|x| x * x)) * rho.spacing();
    Ok(hbar / (4.0 * mass) * info)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlShiftStudy {
    pub dts: Vec<f64>,
    /// `<KL(rho(x) || rho(x + w))>_w / dt` for each entry of `dts`.
    pub rates: Vec<f64>,
    pub fisher: f64,
}

impl KlShiftStudy {
    /// Rate at the smallest step divided by the Fisher functional.
    pub fn finest_ratio(&self) -> f64 {
        let (k, _) = self
            .dts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        self.rates[k] / self.fisher
    }
}

const KL_HERMITE_NODES: usize = 40;

/// Mean relative entropy between `rho` and its translate by a Gaussian `w`
/// with variance `hbar dt / 2m`, per unit `dt`.
pub fn kl_shift_rate(rho: &PeriodicDensity, params: &TranslationParams) -> Result<f64> {
    params.validate()?;
    let spectral = Spectral::new(rho.values.len(), rho.length);
    let log_rho: Vec<f64> = rho.values.iter().map(|v| v.ln()).collect();
    let (x, w) = gauss_hermite(KL_HERMITE_NODES);
    let scale = (2.0 * params.variance()).sqrt();
    let dx = rho.spacing();
    let mut mean = NeumaierSum::default();
    for (xi, wi) in x.iter().zip(&w) {
        let shift = scale * xi;
        // int rho(x) ln rho(x + w) dx = int rho(y - w) ln rho(y) dy
        let moved = spectral.shift(&rho.values, -shift);
        let kl = neumaier_sum(
            log_rho
                .iter()
                .zip(&rho.values)
                .zip(&moved)
                .map(|((g, p), q)| g * (p - q)),
        ) * dx;
        mean.add(wi / PI.sqrt() * kl);
    }
    Ok(mean.value() / params.dt)
}

pub fn kl_shift_limit(rho: &PeriodicDensity, mass: f64, hbar: f64, dts: &[f64]) -> Result<KlShiftStudy> {
    if dts.is_empty() {
        return Err(invalid("dts", "need at least one time step"));
    }
    let rates = dts
        .iter()
        .map(|&dt| kl_shift_rate(rho, &TranslationParams::with_hbar(mass, dt, hbar)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(KlShiftStudy {
        dts: dts.to_vec(),
        rates,
        fisher: fisher_functional(rho, mass, hbar)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_to_infinity;

    #[test]
    fn radius_density_normalized() {
        for (m, w) in [(1.0, 1.0), (1.0, 2.0), (3.0, 0.4)] {
            let p = RotationParams::new(m, w).unwrap();
            let total = integrate_to_infinity(|u| radius_density(u, &p).unwrap(), 0.0, 1e-13, 1e-15).unwrap();
            assert!((total - 1.0).abs() < 1e-10);
        }
        let p = RotationParams::new(1.0, 1.0).unwrap();
        let u2 = integrate_to_infinity(|u| u * u * radius_density(u, &p).unwrap(), 0.0, 1e-13, 1e-15).unwrap();
        assert!((u2 - 0.5).abs() < 1e-10);
        let p = RotationParams::new(1.0, 2.0).unwrap();
        let u2 = integrate_to_infinity(|u| u * u * radius_density(u, &p).unwrap(), 0.0, 1e-13, 1e-15).unwrap();
        assert!((u2 - 0.25).abs() < 1e-10);
        assert!(radius_density(-0.1, &p).is_err());
    }

    #[test]
    fn variational_radius_matches_closed_form() {
        let p = RotationParams::new(1.0, 1.0).unwrap();
        let grid = RadiusGrid::for_params(&p);
        let s = variational_radius_solve(&p, grid, 1.0).unwrap();
        let err = grid
            .nodes()
            .iter()
            .zip(&s.density)
            .map(|(&u, v)| (v - radius_density(u, &p).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!((s.mean_square_radius() - 0.5).abs() < 1e-6);
        let doubled = variational_radius_solve(&p, grid, 2.0).unwrap();
        let diff = s
            .density
            .iter()
            .zip(&doubled.density)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-10);
        assert!(variational_radius_solve(&p, RadiusGrid::new(100, 2.0 * p.sigma()).unwrap(), 1.0).is_err());
    }

    #[test]
    fn fisher_of_gaussian_and_uniform() {
        let s: f64 = 0.7;
        let g = PeriodicDensity::from_fn(-10.0, 20.0, 512, |x| (-x * x / (2.0 * s * s)).exp()).unwrap();
        let f = fisher_functional(&g, 1.0, 1.0).unwrap();
        assert!((f - 0.25 / (s * s)).abs() < 1e-10, "{f}");
        let u = PeriodicDensity::from_fn(0.0, 3.0, 64, |_| 1.0).unwrap();
        assert!(fisher_functional(&u, 1.0, 1.0).unwrap().abs() < 1e-20);
        assert!(PeriodicDensity::new(0.0, 1.0, vec![1.0, 1.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn kl_rate_of_gaussian_is_exact() {
        let s: f64 = 0.8;
        let g = PeriodicDensity::from_fn(-12.0, 24.0, 512, |x| (-x * x / (2.0 * s * s)).exp()).unwrap();
        let study = kl_shift_limit(&g, 1.0, 1.0, &[1e-1, 1e-2, 1e-3]).unwrap();
        for r in &study.rates {
            assert!((r / study.fisher - 1.0).abs() < 1e-8, "{r}");
        }
    }

    #[test]
    fn uncertainty_needs_samples() {
        let p = TranslationParams::new(1.0, 1.0).unwrap();
        assert!(uncertainty_product(&[[0.0; 3]; 10], &p).is_err());
    }
}
