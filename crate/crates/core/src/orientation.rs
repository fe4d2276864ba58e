//! Orientation densities of the intrinsic angular momentum.
//!
//! A density lives on the polar angle `theta in [0, pi]` measured from the
//! field axis. Finite divergence orders give the grid-valued family
//! `cos^{2m}(theta) / Z_m`; the quantized limit is kept as a separate
//! two-point type because delta weights are not grid-representable.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{cumulative_trapezoid, integrate, trapezoid};

/// Reduced Planck constant in library units.
pub const HBAR: f64 = 1.0;
/// Default number of intervals of the uniform theta grid.
pub const DEFAULT_GRID_INTERVALS: usize = 2048;
/// Tolerance on the quadrature integral of a normalized grid density.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Polar angle in `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PolarAngle(f64);

impl PolarAngle {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&value) {
            return Err(invalid("theta", format!("{value} is outside [0, pi]")));
        }
        Ok(Self(value))
    }

    /// Fold an arbitrary in-plane angle onto `[0, pi]` (angle to the axis).
    pub fn folded(angle: f64) -> Self {
        let a = angle.rem_euclid(2.0 * PI);
        Self(if a > PI { 2.0 * PI - a } else { a })
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Order `m` of the Tsallis/Renyi divergence, `alpha = 1 + 1/(2m)`.
///
/// `m = 0` stands for the completely random (uniform) orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DivergenceOrder(u32);

impl DivergenceOrder {
    pub fn new(m: u32) -> Self {
        Self(m)
    }

    pub fn m(self) -> u32 {
        self.0
    }

    pub fn alpha(self) -> Option<f64> {
        alpha_from_m(self.0).ok()
    }
}

pub fn alpha_from_m(m: u32) -> Result<f64> {
    if m == 0 {
        return Err(invalid("m", "m = 0 has unbounded alpha; use the uniform density"));
    }
    Ok(1.0 + 1.0 / (2.0 * m as f64))
}

/// `Z_m = int_0^pi cos^{2m}(theta) d theta` by adaptive quadrature.
pub fn normalization_constant(m: u32) -> f64 {
    if m == 0 {
        return PI;
    }
    let p = 2 * m as i32;
    // the integrand is symmetric about pi/2
    2.0 * integrate(|t: f64| t.cos().powi(p), 0.0, FRAC_PI_2, 1e-13, 0.0).expect("cos^{2m} is smooth and bounded")
}

/// `p_m(theta) = cos^{2m}(theta) / Z_m`.
pub fn eval_density(m: u32, theta: PolarAngle) -> f64 {
    CosPowerDensity::new(m).eval(theta.value())
}

/// Closed-form member of the cos-power family with its normalization cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosPowerDensity {
    m: u32,
    z: f64,
}

impl CosPowerDensity {
    pub fn new(m: u32) -> Self {
        Self {
            m,
            z: normalization_constant(m),
        }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn normalization(&self) -> f64 {
        self.z
    }

    pub fn eval(&self, theta: f64) -> f64 {
        if self.m == 0 {
            return 1.0 / PI;
        }
        theta.cos().powi(2 * self.m as i32) / self.z
    }

    /// Probability mass on `[a, b]`, adaptive quadrature.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        integrate(|t| self.eval(t), a, b, 1e-12, 1e-15).expect("smooth integrand")
    }

    /// Mass within `eps` of either pole, `[0, eps] U [pi - eps, pi]`.
    pub fn pole_mass(&self, eps: f64) -> f64 {
        2.0 * self.mass_between(0.0, eps.min(FRAC_PI_2))
    }

    pub fn on_grid(&self, grid: ThetaGrid) -> GridDensity {
        GridDensity::from_fn(grid, |t| self.eval(t)).expect("cos-power density is positive")
    }
}

/// Uniform grid on `[0, pi]` described by its interval count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaGrid {
    intervals: usize,
}

impl Default for ThetaGrid {
    fn default() -> Self {
        Self {
            intervals: DEFAULT_GRID_INTERVALS,
        }
    }
}

impl ThetaGrid {
    pub fn new(intervals: usize) -> Result<Self> {
        if intervals < 2 {
            return Err(invalid("intervals", "theta grid needs at least 2 intervals"));
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        PI / self.intervals as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        if i == self.intervals {
            PI
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn thetas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.theta(i))
    }
}

/// Non-negative density sampled on a [`ThetaGrid`], trapezoid-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    grid: ThetaGrid,
    values: Vec<f64>,
}

impl GridDensity {
    /// Wrap already-normalized values; rejects anything off by more than 1e-10.
    pub fn new(grid: ThetaGrid, values: Vec<f64>) -> Result<Self> {
        check_values(&grid, &values)?;
        let integral = trapezoid(&values, grid.spacing());
        if (integral - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { integral });
        }
        Ok(Self { grid, values })
    }

    pub fn from_unnormalized(grid: ThetaGrid, mut values: Vec<f64>) -> Result<Self> {
        check_values(&grid, &values)?;
        let integral = trapezoid(&values, grid.spacing());
        if integral <= 0.0 || !integral.is_finite() {
            return Err(invalid("values", "density has no positive mass"));
        }
        values.iter_mut().for_each(|v| *v /= integral);
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: ThetaGrid, f: F) -> Result<Self> {
        let values = grid.thetas().map(f).collect();
        Self::from_unnormalized(grid, values)
    }

    pub fn uniform(grid: ThetaGrid) -> Self {
        Self {
            grid,
            values: vec![1.0 / PI; grid.len()],
        }
    }

    pub fn grid(&self) -> ThetaGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.spacing())
    }

    /// Trapezoid integral of `f(theta) * p(theta)`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let weighted: Vec<f64> = self.grid.thetas().zip(&self.values).map(|(t, p)| f(t) * p).collect();
        trapezoid(&weighted, self.grid.spacing())
    }

    /// Piecewise-linear interpolation.
    pub fn eval(&self, theta: f64) -> f64 {
        let h = self.grid.spacing();
        let x = (theta.clamp(0.0, PI) / h).min(self.grid.intervals as f64);
        let i = (x.floor() as usize).min(self.grid.intervals - 1);
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Exact integral of the piecewise-linear interpolant over `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let a = a.clamp(0.0, PI);
        let b = b.clamp(0.0, PI);
        if b <= a {
            return 0.0;
        }
        let h = self.grid.spacing();
        let mut total = 0.0;
        for i in 0..self.grid.intervals {
            let lo = self.grid.theta(i);
            let hi = self.grid.theta(i + 1);
            let s = lo.max(a);
            let e = hi.min(b);
            if e <= s {
                continue;
            }
            let fs = self.values[i] + (self.values[i + 1] - self.values[i]) * (s - lo) / h;
            let fe = self.values[i] + (self.values[i + 1] - self.values[i]) * (e - lo) / h;
            total += 0.5 * (fs + fe) * (e - s);
        }
        total
    }

    /// Largest nodal deviation from `f`.
    pub fn linf_distance<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.grid
            .thetas()
            .zip(&self.values)
            .map(|(t, p)| (p - f(t)).abs())
            .fold(0.0, f64::max)
    }
}

fn check_values(grid: &ThetaGrid, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(invalid(
            "values",
            format!("expected {} nodes, got {}", grid.len(), values.len()),
        ));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(invalid(
            "values",
            format!("density value {v} is negative or not finite"),
        ));
    }
    Ok(())
}

/// Quantized limit: weight `up` at `theta = 0` and `1 - up` at `theta = pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointDensity {
    up: f64,
    down: f64,
}

impl TwoPointDensity {
    pub fn new(weight_up: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight_up) {
            return Err(invalid("weight_up", format!("{weight_up} is outside [0, 1]")));
        }
        Ok(Self {
            up: weight_up,
            down: 1.0 - weight_up,
        })
    }

    /// Normalize two non-negative weights.
    pub fn from_weights(up: f64, down: f64) -> Result<Self> {
        let total = up + down;
        if up < 0.0 || down < 0.0 || !(total > 0.0) || !total.is_finite() {
            return Err(invalid("weights", format!("cannot normalize ({up}, {down})")));
        }
        Self::new(up / total)
    }

    pub fn weight_up(&self) -> f64 {
        self.up
    }

    pub fn weight_down(&self) -> f64 {
        self.down
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OrientationDensity {
    Grid(GridDensity),
    TwoPoint(TwoPointDensity),
}

impl OrientationDensity {
    pub fn as_grid(&self) -> Option<&GridDensity> {
        match self {
            Self::Grid(g) => Some(g),
            Self::TwoPoint(_) => None,
        }
    }

    pub fn as_two_point(&self) -> Option<&TwoPointDensity> {
        match self {
            Self::TwoPoint(t) => Some(t),
            Self::Grid(_) => None,
        }
    }
}

/// Halved-sphere masses of a grid density: `(int_0^{pi/2}, int_{pi/2}^pi)`.
pub fn limit_density(initial: &GridDensity) -> TwoPointDensity {
    let up = initial.mass_between(0.0, FRAC_PI_2);
    let down = initial.mass_between(FRAC_PI_2, PI);
    TwoPointDensity::from_weights(up, down).expect("grid density has positive mass")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Divergence {
    Tsallis,
    Renyi,
    KullbackLeibler,
}

/// Parameters of the total action functional.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    pub g_factor: f64,
    /// `L_s`, in units of hbar.
    pub spin_magnitude: f64,
    pub delta_phi: f64,
    pub hbar: f64,
    pub divergence: Divergence,
    pub order: DivergenceOrder,
    /// Reference density; `None` means uniform `1/pi`.
    pub prior: Option<GridDensity>,
}

impl ActionSpec {
    pub fn new(divergence: Divergence, m: u32) -> Self {
        Self {
            g_factor: 2.0,
            spin_magnitude: 0.5 * HBAR,
            delta_phi: 1.0,
            hbar: HBAR,
            divergence,
            order: DivergenceOrder::new(m),
            prior: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_phi > 0.0) {
            return Err(invalid("delta_phi", "must be positive"));
        }
        if !(self.spin_magnitude > 0.0) {
            return Err(invalid("spin_magnitude", "must be positive"));
        }
        if !(self.hbar > 0.0) {
            return Err(invalid("hbar", "must be positive"));
        }
        if !self.g_factor.is_finite() {
            return Err(invalid("g_factor", "must be finite"));
        }
        Ok(())
    }

    fn prior_on(&self, grid: ThetaGrid) -> Result<Vec<f64>> {
        match &self.prior {
            None => Ok(vec![1.0 / PI; grid.len()]),
            Some(p) if p.grid() == grid => Ok(p.values().to_vec()),
            Some(_) => Err(invalid("prior", "prior grid does not match the density grid")),
        }
    }

    /// `-(1/2) g_s L_s` times `Delta phi`: prefactor of `int p cos`.
    fn classical_coefficient(&self) -> f64 {
        -0.5 * self.g_factor * self.spin_magnitude * self.delta_phi
    }
}

/// Total action `A_t = -(1/2) g_s L_s dphi int p cos + (hbar/2) I_f`.
pub fn total_action(density: &GridDensity, spec: &ActionSpec) -> Result<f64> {
    spec.validate()?;
    let integral = density.integral();
    if (integral - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { integral });
    }
    let grid = density.grid();
    let prior = spec.prior_on(grid)?;
    let classical = spec.classical_coefficient() * density.expectation(f64::cos);
    let info = information_term(density.values(), &prior, grid, spec)?;
    Ok(classical + 0.5 * spec.hbar * info)
}

fn information_term(p: &[f64], prior: &[f64], grid: ThetaGrid, spec: &ActionSpec) -> Result<f64> {
    let h = grid.spacing();
    match spec.divergence {
        Divergence::Tsallis | Divergence::Renyi => {
            let alpha = alpha_from_m(spec.order.m())?;
            let f = spec.delta_phi * power_integral(p, prior, alpha, h);
            Ok(match spec.divergence {
                Divergence::Tsallis => (f - 1.0) / (alpha - 1.0),
                _ => f.ln() / (alpha - 1.0),
            })
        }
        Divergence::KullbackLeibler => {
            let terms: Vec<f64> = p
                .iter()
                .zip(prior)
                .map(|(&pi, &si)| if pi > 0.0 { pi * (pi / si).ln() } else { 0.0 })
                .collect();
            Ok(spec.delta_phi * trapezoid(&terms, h))
        }
    }
}

/// `int p^alpha / sigma^(alpha - 1)`.
fn power_integral(p: &[f64], prior: &[f64], alpha: f64, h: f64) -> f64 {
    let terms: Vec<f64> = p
        .iter()
        .zip(prior)
        .map(|(&pi, &si)| pi.powf(alpha) * si.powf(1.0 - alpha))
        .collect();
    trapezoid(&terms, h)
}

/// Result of [`variational_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalSolution {
    pub density: GridDensity,
    pub iterations: usize,
    /// Largest nodal residual of the stationarity condition at exit.
    pub residual: f64,
}

const MAX_ITERATIONS: usize = 10_000;
const STEP_TOL: f64 = 1e-10;

/// Extremize the total action over `p(theta)` on `grid`.
///
/// Tsallis and Renyi: the nodal stationarity condition
/// `-(1/2) g_s L_s cos + alpha hbar / (2 (alpha - 1) F) (p / sigma)^(alpha - 1) = 0`
/// (`F = 1` for Tsallis, `F = int p^alpha sigma^(1-alpha)` for Renyi) is solved
/// for the signed root `r = (p / sigma)^(1/(2m))`, so `p = sigma r^{2m}` stays
/// non-negative on both hemispheres; the normalization factor is applied
/// afterwards. Renyi iterates on `F` until the normalized iterate stops moving.
///
/// Kullback-Leibler: exponentiated-gradient descent with renormalization after
/// every step, which converges to the constrained minimizer
/// `exp(g_s L_s cos / hbar) / Z`.
pub fn variational_solve(spec: &ActionSpec, grid: ThetaGrid) -> Result<VariationalSolution> {
    spec.validate()?;
    let prior = spec.prior_on(grid)?;
    match spec.divergence {
        Divergence::Tsallis | Divergence::Renyi => solve_power_divergence(spec, grid, &prior),
        Divergence::KullbackLeibler => solve_kl(spec, grid, &prior),
    }
}

fn solve_power_divergence(spec: &ActionSpec, grid: ThetaGrid, prior: &[f64]) -> Result<VariationalSolution> {
    let m = spec.order.m();
    let alpha = alpha_from_m(m)?;
    let power = 2 * m as i32;
    let renyi = spec.divergence == Divergence::Renyi;
    let half_coupling = 0.5 * spec.g_factor * spec.spin_magnitude;
    let stiffness = alpha * spec.hbar / (2.0 * (alpha - 1.0));
    let cosines: Vec<f64> = grid.thetas().map(f64::cos).collect();

    let mut functional = 1.0;
    let mut current: Option<Vec<f64>> = None;
    for iteration in 1..=MAX_ITERATIONS {
        let k = stiffness / functional;
        let roots: Vec<f64> = cosines.iter().map(|c| half_coupling * c / k).collect();
        let raw: Vec<f64> = roots.iter().zip(prior).map(|(r, s)| s * r.powi(power)).collect();
        let residual = roots
            .iter()
            .zip(&cosines)
            .map(|(r, c)| (-half_coupling * c + k * r).abs())
            .fold(0.0, f64::max);
        let density = GridDensity::from_unnormalized(grid, raw)?;
        let change = match &current {
            Some(prev) => prev
                .iter()
                .zip(density.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            None => f64::INFINITY,
        };
        if !renyi || change < STEP_TOL {
            return Ok(VariationalSolution {
                density,
                iterations: iteration,
                residual,
            });
        }
        functional = spec.delta_phi * power_integral(density.values(), prior, alpha, grid.spacing());
        current = Some(density.values().to_vec());
    }
    Err(Error::NonConvergence {
        what: "Renyi stationarity iteration",
        iterations: MAX_ITERATIONS,
        residual: f64::NAN,
    })
}

fn solve_kl(spec: &ActionSpec, grid: ThetaGrid, prior: &[f64]) -> Result<VariationalSolution> {
    let coupling = spec.classical_coefficient();
    let info_weight = 0.5 * spec.hbar * spec.delta_phi;
    // step chosen so each update halves the distance to the fixed point
    let step = 1.0 / (2.0 * info_weight);
    let h = grid.spacing();
    let cosines: Vec<f64> = grid.thetas().map(f64::cos).collect();

    let mut log_p: Vec<f64> = prior.iter().map(|s| s.ln()).collect();
    let mut p = prior.to_vec();
    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        for ((lp, &c), &s) in log_p.iter_mut().zip(&cosines).zip(prior) {
            let gradient = coupling * c + info_weight * ((*lp - s.ln()) + 1.0);
            *lp -= step * gradient;
        }
        let shift = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnormalized: Vec<f64> = log_p.iter().map(|l| (l - shift).exp()).collect();
        let log_z = trapezoid(&unnormalized, h).ln() + shift;
        log_p.iter_mut().for_each(|l| *l -= log_z);
        let next: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        // stationarity up to the normalization multiplier: the nodal gradient is constant
        let grads: Vec<f64> = log_p
            .iter()
            .zip(&cosines)
            .zip(prior)
            .map(|((lp, c), s)| coupling * c + info_weight * (lp - s.ln() + 1.0))
            .collect();
        let mean = grads.iter().sum::<f64>() / grads.len() as f64;
        residual = grads.iter().map(|g| (g - mean).abs()).fold(0.0, f64::max);
        if change < STEP_TOL {
            return Ok(VariationalSolution {
                density: GridDensity::from_unnormalized(grid, p)?,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "exponentiated-gradient descent",
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Inverse-CDF sampler for `p_m` on a tabulated monotone CDF.
#[derive(Debug, Clone)]
pub struct OrientationSampler {
    m: u32,
    spacing: f64,
    cdf: Vec<f64>,
}

/// Table resolution of [`OrientationSampler`].
pub const SAMPLER_INTERVALS: usize = 8192;

impl OrientationSampler {
    pub fn new(m: u32) -> Self {
        let n = SAMPLER_INTERVALS;
        let spacing = PI / n as f64;
        let p = 2 * m as i32;
        let values: Vec<f64> = (0..=n).map(|i| (i as f64 * spacing).cos().powi(p)).collect();
        let mut cdf = cumulative_trapezoid(&values, spacing);
        let total = *cdf.last().expect("table is non-empty");
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { m, spacing, cdf }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PolarAngle {
        let u: f64 = rng.random();
        if self.m == 0 {
            return PolarAngle(u * PI);
        }
        let idx = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1) - 1;
        let (lo, hi) = (self.cdf[idx], self.cdf[idx + 1]);
        let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.5 };
        PolarAngle(((idx as f64 + frac) * self.spacing).clamp(0.0, PI))
    }
}

/// One draw from `p_m`; build an [`OrientationSampler`] for repeated draws.
pub fn sample_theta<R: Rng + ?Sized>(m: u32, rng: &mut R) -> PolarAngle {
    OrientationSampler::new(m).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_values() {
        assert_eq!(alpha_from_m(1).unwrap(), 1.5);
        assert_eq!(alpha_from_m(2).unwrap(), 1.25);
        assert!((alpha_from_m(10).unwrap() - 1.05).abs() < 1e-15);
        assert!(alpha_from_m(0).is_err());
        assert_eq!(DivergenceOrder::new(0).alpha(), None);
    }

    #[test]
    fn polar_angle_bounds() {
        assert!(PolarAngle::new(-1e-9).is_err());
        assert!(PolarAngle::new(PI + 1e-9).is_err());
        assert!((PolarAngle::folded(1.5 * PI).value() - 0.5 * PI).abs() < 1e-15);
        assert!((PolarAngle::folded(-0.25).value() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn density_examples() {
        assert!(eval_density(1, PolarAngle::new(FRAC_PI_2).unwrap()) < 1e-30);
        assert!((eval_density(0, PolarAngle::new(1.0).unwrap()) - 1.0 / PI).abs() < 1e-15);
        assert!((eval_density(2, PolarAngle::new(0.0).unwrap()) - 0.848_826_363_156_775).abs() < 1e-9);
    }

    #[test]
    fn grid_density_validation() {
        let grid = ThetaGrid::new(64).unwrap();
        assert!(GridDensity::new(grid, vec![1.0; grid.len()]).is_err());
        assert!(GridDensity::new(grid, vec![1.0; 3]).is_err());
        let mut v = vec![1.0 / PI; grid.len()];
        v[3] = -0.1;
        assert!(GridDensity::from_unnormalized(grid, v).is_err());
        assert!(GridDensity::from_unnormalized(grid, vec![0.0; grid.len()]).is_err());
        let u = GridDensity::uniform(grid);
        assert!((u.integral() - 1.0).abs() < 1e-14);
        assert!(GridDensity::new(grid, u.values().to_vec()).is_ok());
    }

    #[test]
    fn two_point_weights() {
        let t = TwoPointDensity::from_weights(3.0, 1.0).unwrap();
        assert_eq!(t.weight_up() + t.weight_down(), 1.0);
        assert_eq!(t.weight_up(), 0.75);
        assert!(TwoPointDensity::new(1.2).is_err());
        assert!(TwoPointDensity::from_weights(0.0, 0.0).is_err());
    }

    #[test]
    fn limit_density_examples() {
        let grid = ThetaGrid::default();
        let u = limit_density(&GridDensity::uniform(grid));
        assert!((u.weight_up() - 0.5).abs() < 1e-12);
        let upper = GridDensity::from_fn(grid, |t| if t <= FRAC_PI_2 { (2.0 * t).sin() } else { 0.0 }).unwrap();
        let l = limit_density(&upper);
        assert!((l.weight_up() - 1.0).abs() < 1e-12 && l.weight_down() < 1e-12);
        let p1 = limit_density(&CosPowerDensity::new(1).on_grid(grid));
        assert!((p1.weight_up() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn total_action_rejects_bad_input() {
        let grid = ThetaGrid::new(128).unwrap();
        let u = GridDensity::uniform(grid);
        assert!(total_action(&u, &ActionSpec::new(Divergence::Tsallis, 0)).is_err());
        assert!(total_action(&u, &ActionSpec::new(Divergence::Renyi, 0)).is_err());
        let mut spec = ActionSpec::new(Divergence::Tsallis, 1);
        spec.delta_phi = 0.0;
        assert!(total_action(&u, &spec).is_err());
        let mut raw = GridDensity::uniform(grid);
        raw.values.iter_mut().for_each(|v| *v *= 1.01);
        let spec = ActionSpec::new(Divergence::Tsallis, 1);
        assert!(matches!(total_action(&raw, &spec), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn uniform_density_has_zero_action() {
        let grid = ThetaGrid::default();
        let u = GridDensity::uniform(grid);
        for m in [1, 2, 5] {
            for d in [Divergence::Tsallis, Divergence::Renyi, Divergence::KullbackLeibler] {
                let a = total_action(&u, &ActionSpec::new(d, m)).unwrap();
                assert!(a.abs() < 1e-12, "{d:?} m={m}: {a}");
            }
        }
    }

    #[test]
    fn power_divergence_requires_positive_order() {
        let spec = ActionSpec::new(Divergence::Tsallis, 0);
        assert!(variational_solve(&spec, ThetaGrid::default()).is_err());
    }

    #[test]
    fn sampler_stays_in_range() {
        let mut rng = crate::rng::Streams::new(1, "sampler").stream(0);
        let s = OrientationSampler::new(200);
        for _ in 0..10_000 {
            let t = s.sample(&mut rng).value();
            assert!((0.0..=PI).contains(&t));
        }
    }
}
