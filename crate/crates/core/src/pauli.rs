//! Two-component Pauli equation on a periodic grid.
//!
//! `i hbar dPsi/dt = [(p + eA)^2 / 2m + (e hbar / 2m) sigma_z B_z - e phi] Psi`
//! with `p = -i hbar grad`. The Hamiltonian is diagonal in spin, so the two
//! components evolve independently under potentials
//! `V_+- = -e phi +- (e hbar / 2m) B_z`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64 as C;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{neumaier_sum, Spectral};

pub const DEFAULT_NODES: usize = 256;
pub const DEFAULT_EXTENT: f64 = 20.0;
pub const DEFAULT_DT: f64 = 1e-3;
/// Densities below this are excluded from Madelung residuals.
pub const DENSITY_MASK: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    dimension: usize,
    nodes: usize,
    extent: f64,
}

impl SpatialGrid {
    pub fn new(dimension: usize, nodes: usize, extent: f64) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(invalid("dimension", "must be 1 or 2"));
        }
        if nodes < 16 || !nodes.is_power_of_two() {
            return Err(invalid("nodes", format!("need a power of two >= 16, got {nodes}")));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(invalid("extent", "must be positive"));
        }
        Ok(Self {
            dimension,
            nodes,
            extent,
        })
    }

    pub fn line(nodes: usize, extent: f64) -> Result<Self> {
        Self::new(1, nodes, extent)
    }

    pub fn plane(nodes: usize, extent: f64) -> Result<Self> {
        Self::new(2, nodes, extent)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.nodes as f64
    }

    pub fn len(&self) -> usize {
        self.nodes.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    /// Node coordinate along one axis; the grid spans `[-extent/2, extent/2)`.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.extent + j as f64 * self.spacing()
    }

    /// `[x, y]` of a flat index (row-major, x fastest); `y = 0` in 1D.
    pub fn point(&self, index: usize) -> [f64; 2] {
        let n = self.nodes;
        match self.dimension {
            1 => [self.coordinate(index), 0.0],
            _ => [self.coordinate(index % n), self.coordinate(index / n)],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Periodic neighbour of `index` along `axis` at offset +-1.
    fn neighbour(&self, index: usize, axis: usize, forward: bool) -> usize {
        let n = self.nodes;
        let stride = if axis == 0 { 1 } else { n };
        let j = (index / stride) % n;
        let jn = if forward { (j + 1) % n } else { (j + n - 1) % n };
        index - j * stride + jn * stride
    }

    /// FFT wavenumbers with the Nyquist mode at `-pi/dx`.
    fn kinetic_wavenumbers(&self) -> Vec<f64> {
        let n = self.nodes;
        let dk = 2.0 * PI / self.extent;
        (0..n)
            .map(|j| {
                if j < n / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - n as f64) * dk
                }
            })
            .collect()
    }
}

impl Default for SpatialGrid {
    fn default() -> Self {
        Self {
            dimension: 1,
            nodes: DEFAULT_NODES,
            extent: DEFAULT_EXTENT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Spin {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinorField {
    grid: SpatialGrid,
    plus: Vec<C>,
    minus: Vec<C>,
}

impl SpinorField {
    pub fn new(grid: SpatialGrid, plus: Vec<C>, minus: Vec<C>) -> Result<Self> {
        if plus.len() != grid.len() || minus.len() != grid.len() {
            return Err(invalid("field", "component length must match the grid"));
        }
        if plus
            .iter()
            .chain(&minus)
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(invalid("field", "values must be finite"));
        }
        Ok(Self { grid, plus, minus })
    }

    /// Build from amplitude functions of `[x, y]` and normalize the result.
    pub fn from_fn<F, G>(grid: SpatialGrid, plus: F, minus: G) -> Result<Self>
    where
        F: Fn([f64; 2]) -> C,
        G: Fn([f64; 2]) -> C,
    {
        let mut f = Self::new(
            grid,
            grid.points().map(&plus).collect(),
            grid.points().map(&minus).collect(),
        )?;
        let n = f.norm();
        if !(n > 0.0) {
            return Err(invalid("field", "zero norm"));
        }
        f.scale(1.0 / n.sqrt());
        Ok(f)
    }

    /// Gaussian packet `exp(-|x - x0|^2 / 4 s^2 + i k.x)` placed in one
    /// component, or split equally between both when `spin` is `None`.
    pub fn gaussian(
        grid: SpatialGrid,
        center: [f64; 2],
        width: f64,
        momentum: [f64; 2],
        spin: Option<Spin>,
    ) -> Result<Self> {
        if !(width > 0.0) {
            return Err(invalid("width", "must be positive"));
        }
        let packet = move |p: [f64; 2]| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            let r2 = dx * dx + if grid.dimension == 2 { dy * dy } else { 0.0 };
            let phase = momentum[0] * p[0] + if grid.dimension == 2 { momentum[1] * p[1] } else { 0.0 };
            C::from_polar((-r2 / (4.0 * width * width)).exp(), phase)
        };
        let zero = |_: [f64; 2]| C::new(0.0, 0.0);
        match spin {
            Some(Spin::Plus) => Self::from_fn(grid, packet, zero),
            Some(Spin::Minus) => Self::from_fn(grid, zero, packet),
            None => Self::from_fn(grid, packet, packet),
        }
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn component(&self, spin: Spin) -> &[C] {
        match spin {
            Spin::Plus => &self.plus,
            Spin::Minus => &self.minus,
        }
    }

    fn component_mut(&mut self, spin: Spin) -> &mut Vec<C> {
        match spin {
            Spin::Plus => &mut self.plus,
            Spin::Minus => &mut self.minus,
        }
    }

    fn scale(&mut self, s: f64) {
        self.plus.iter_mut().chain(self.minus.iter_mut()).for_each(|z| *z *= s);
    }

    pub fn density(&self, spin: Spin) -> Vec<f64> {
        self.component(spin).iter().map(|z| z.norm_sqr()).collect()
    }

    /// `(int |Psi_+|^2, int |Psi_-|^2)`.
    pub fn spin_populations(&self) -> (f64, f64) {
        let cell = self.grid.cell();
        let pop = |v: &[C]| neumaier_sum(v.iter().map(|z| z.norm_sqr())) * cell;
        (pop(&self.plus), pop(&self.minus))
    }

    pub fn norm(&self) -> f64 {
        let (a, b) = self.spin_populations();
        a + b
    }

    /// `<x>` (and `<y>` in 2D) over both components.
    pub fn mean_position(&self) -> [f64; 2] {
        let cell = self.grid.cell();
        let mut out = [0.0; 2];
        for (axis, slot) in out.iter_mut().enumerate().take(self.grid.dimension) {
            *slot = neumaier_sum(
                self.grid
                    .points()
                    .zip(self.plus.iter().zip(&self.minus))
                    .map(|(p, (a, b))| p[axis] * (a.norm_sqr() + b.norm_sqr())),
            ) * cell;
        }
        out
    }

    /// Variance of `x` for one component, normalized by that component's population.
    pub fn position_variance(&self, spin: Spin) -> f64 {
        let rho = self.density(spin);
        let total = neumaier_sum(rho.iter().copied());
        let x: Vec<f64> = self.grid.points().map(|p| p[0]).collect();
        let mean = neumaier_sum(x.iter().zip(&rho).map(|(x, r)| x * r)) / total;
        neumaier_sum(x.iter().zip(&rho).map(|(x, r)| (x - mean).powi(2) * r)) / total
    }

    /// `arg int conj(Psi_+) Psi_-`.
    pub fn relative_phase(&self) -> f64 {
        let mut s = C::new(0.0, 0.0);
        for (a, b) in self.plus.iter().zip(&self.minus) {
            s += a.conj() * b;
        }
        s.arg()
    }

    fn check_finite(&self, step: usize) -> Result<()> {
        if self
            .plus
            .iter()
            .chain(&self.minus)
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite { step });
        }
        Ok(())
    }

    fn require_normalized(&self) -> Result<()> {
        let integral = self.norm();
        if (integral - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { integral });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub grid: SpatialGrid,
    /// `A_x`, and `A_y` in 2D, at each node.
    pub vector_potential: [Vec<f64>; 2],
    pub scalar_potential: Vec<f64>,
    pub bz: Vec<f64>,
    pub charge: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl FieldConfig {
    pub fn free(grid: SpatialGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            vector_potential: [vec![0.0; n], vec![0.0; n]],
            scalar_potential: vec![0.0; n],
            bz: vec![0.0; n],
            charge: 1.0,
            mass: 1.0,
            hbar: 1.0,
        }
    }

    pub fn with_uniform_bz(mut self, bz: f64) -> Self {
        self.bz = vec![bz; self.grid.len()];
        self
    }

    /// Scalar potential giving the well `-e phi = m omega^2 |x|^2 / 2`.
    pub fn with_harmonic_well(mut self, omega: f64) -> Self {
        let k = 0.5 * self.mass * omega * omega / self.charge;
        self.scalar_potential = self
            .grid
            .points()
            .map(|p| {
                let r2 = p[0] * p[0] + if self.grid.dimension == 2 { p[1] * p[1] } else { 0.0 };
                -k * r2
            })
            .collect();
        self
    }

    pub fn with_vector_potential(mut self, ax: Vec<f64>, ay: Vec<f64>) -> Self {
        self.vector_potential = [ax, ay];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        let fields = [
            &self.vector_potential[0],
            &self.vector_potential[1],
            &self.scalar_potential,
            &self.bz,
        ];
        if fields.iter().any(|f| f.len() != n) {
            return Err(invalid("config", "field arrays must match the grid"));
        }
        if fields.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
            return Err(invalid("config", "fields must be finite"));
        }
        for (name, v) in [("charge", self.charge), ("mass", self.mass), ("hbar", self.hbar)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn potential(&self, spin: Spin) -> Vec<f64> {
        let zeeman = self.charge * self.hbar / (2.0 * self.mass);
        let sign = match spin {
            Spin::Plus => 1.0,
            Spin::Minus => -1.0,
        };
        self.scalar_potential
            .iter()
            .zip(&self.bz)
            .map(|(phi, b)| -self.charge * phi + sign * zeeman * b)
            .collect()
    }

    fn mean_vector_potential(&self) -> [f64; 2] {
        let n = self.grid.len() as f64;
        [
            neumaier_sum(self.vector_potential[0].iter().copied()) / n,
            neumaier_sum(self.vector_potential[1].iter().copied()) / n,
        ]
    }

    fn uniform_vector_potential(&self) -> bool {
        let mean = self.mean_vector_potential();
        (0..2).all(|a| {
            self.vector_potential[a]
                .iter()
                .all(|v| (v - mean[a]).abs() <= 1e-14 * (1.0 + mean[a].abs()))
        })
    }

    /// `chi` with `grad chi = A - mean(A)` in 1D, so that `exp(i e chi / hbar) Psi`
    /// sees the uniform potential `mean(A)`.
    fn gauge_function(&self) -> Result<Option<Vec<f64>>> {
        if self.uniform_vector_potential() {
            return Ok(None);
        }
        if self.grid.dimension != 1 {
            return Err(Error::Unsupported(
                "non-uniform vector potential is only supported in 1D".into(),
            ));
        }
        let mean = self.mean_vector_potential()[0];
        let centred: Vec<f64> = self.vector_potential[0].iter().map(|a| a - mean).collect();
        let spectral = Spectral::new(self.grid.nodes, self.grid.extent);
        Ok(Some(spectral.filter(&centred, |k| {
            if k == 0.0 {
                C::new(0.0, 0.0)
            } else {
                C::new(0.0, -1.0 / k)
            }
        })))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Strang splitting with the kinetic factor applied in Fourier space.
    SplitStep,
    /// Crank-Nicolson with second-order differences (1D only).
    CrankNicolson,
}

struct Fft2 {
    n: usize,
    dimension: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(grid: &SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n: grid.nodes,
            dimension: grid.dimension,
            forward: planner.plan_fft_forward(grid.nodes),
            inverse: planner.plan_fft_inverse(grid.nodes),
        }
    }

    fn run(&self, data: &mut [C], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        fft.process(data);
        if self.dimension == 2 {
            let mut column = vec![C::new(0.0, 0.0); n];
            for x in 0..n {
                for y in 0..n {
                    column[y] = data[y * n + x];
                }
                fft.process(&mut column);
                for y in 0..n {
                    data[y * n + x] = column[y];
                }
            }
        }
    }

    fn forward(&self, data: &mut [C]) {
        self.run(data, &self.forward);
    }

    fn inverse(&self, data: &mut [C]) {
        self.run(data, &self.inverse);
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }
}

/// Kinetic energy `(hbar k + e A)^2 / 2m` at each Fourier mode.
fn kinetic_symbol(config: &FieldConfig) -> Vec<f64> {
    let grid = config.grid;
    let k = grid.kinetic_wavenumbers();
    let a = config.mean_vector_potential();
    let n = grid.nodes;
    let shifted = |kk: f64, axis: usize| config.hbar * kk + config.charge * a[axis];
    (0..grid.len())
        .map(|i| {
            let px = shifted(k[i % n], 0);
            let p2 = if grid.dimension == 2 {
                let py = shifted(k[i / n], 1);
                px * px + py * py
            } else {
                px * px
            };
            p2 / (2.0 * config.mass)
        })
        .collect()
}

/// Precomputed stepping operator for one configuration and time step.
pub struct Propagator {
    grid: SpatialGrid,
    scheme: Scheme,
    fft: Fft2,
    gauge: Option<Vec<C>>,
    half_potential: [Vec<C>; 2],
    kinetic: Vec<C>,
    crank: Option<[CrankNicolson; 2]>,
}

impl Propagator {
    /// Real-time propagator for `exp(-i H dt / hbar)`.
    pub fn new(config: &FieldConfig, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dt", "must be positive"));
        }
        Self::build(config, C::new(0.0, -dt / config.hbar), dt, scheme)
    }

    /// Imaginary-time propagator for `exp(-H dtau / hbar)`.
    pub fn imaginary(config: &FieldConfig, dtau: f64) -> Result<Self> {
        if !(dtau > 0.0) || !dtau.is_finite() {
            return Err(invalid("dtau", "must be positive"));
        }
        Self::build(config, C::new(-dtau / config.hbar, 0.0), dtau, Scheme::SplitStep)
    }

    fn build(config: &FieldConfig, factor: C, dt: f64, scheme: Scheme) -> Result<Self> {
        config.validate()?;
        let grid = config.grid;
        let gauge = config.gauge_function()?.map(|chi| {
            chi.iter()
                .map(|c| C::from_polar(1.0, config.charge * c / config.hbar))
                .collect()
        });
        let half = |spin| {
            config
                .potential(spin)
                .iter()
                .map(|v| (0.5 * factor * v).exp())
                .collect()
        };
        let crank = match scheme {
            Scheme::SplitStep => None,
            Scheme::CrankNicolson => {
                if grid.dimension != 1 {
                    return Err(Error::Unsupported("Crank-Nicolson is implemented for 1D grids".into()));
                }
                Some([
                    CrankNicolson::new(config, Spin::Plus, dt),
                    CrankNicolson::new(config, Spin::Minus, dt),
                ])
            }
        };
        Ok(Self {
            grid,
            scheme,
            fft: Fft2::new(&grid),
            gauge,
            half_potential: [half(Spin::Plus), half(Spin::Minus)],
            kinetic: kinetic_symbol(config).iter().map(|t| (factor * t).exp()).collect(),
            crank,
        })
    }

    fn step_component(&self, psi: &mut [C], index: usize) {
        match self.scheme {
            Scheme::SplitStep => {
                let half = &self.half_potential[index];
                psi.iter_mut().zip(half).for_each(|(z, h)| *z *= h);
                self.fft.forward(psi);
                psi.iter_mut().zip(&self.kinetic).for_each(|(z, k)| *z *= k);
                self.fft.inverse(psi);
                psi.iter_mut().zip(half).for_each(|(z, h)| *z *= h);
            }
            Scheme::CrankNicolson => {
                let cn = &self.crank.as_ref().expect("built for Crank-Nicolson")[index];
                let next = cn.step(psi);
                psi.copy_from_slice(&next);
            }
        }
    }

    pub fn step(&self, field: &mut SpinorField) {
        debug_assert_eq!(field.grid, self.grid);
        for (index, spin) in [Spin::Plus, Spin::Minus].into_iter().enumerate() {
            let psi = field.component_mut(spin);
            if let Some(g) = &self.gauge {
                psi.iter_mut().zip(g).for_each(|(z, g)| *z *= g);
            }
            self.step_component(psi, index);
            if let Some(g) = &self.gauge {
                psi.iter_mut().zip(g).for_each(|(z, g)| *z *= g.conj());
            }
        }
    }
}

/// Cyclic tridiagonal Crank-Nicolson stepper for one spin component.
struct CrankNicolson {
    diag_lhs: Vec<C>,
    diag_rhs: Vec<C>,
    /// Coefficients of `psi_{j+1}` and `psi_{j-1}` in `H`.
    upper: C,
    lower: C,
    c: C,
}

impl CrankNicolson {
    fn new(config: &FieldConfig, spin: Spin, dt: f64) -> Self {
        let dx = config.grid.spacing();
        let (hbar, m, e) = (config.hbar, config.mass, config.charge);
        let a = config.mean_vector_potential()[0];
        let second = hbar * hbar / (2.0 * m * dx * dx);
        let first = e * a * hbar / (2.0 * m * dx);
        let upper = C::new(-second, -first);
        let lower = C::new(-second, first);
        let t0 = 2.0 * second + e * e * a * a / (2.0 * m);
        let c = C::new(0.0, dt / (2.0 * hbar));
        let v = config.potential(spin);
        Self {
            diag_lhs: v.iter().map(|v| 1.0 + c * (t0 + v)).collect(),
            diag_rhs: v.iter().map(|v| 1.0 - c * (t0 + v)).collect(),
            upper,
            lower,
            c,
        }
    }

    fn step(&self, psi: &[C]) -> Vec<C> {
        let n = psi.len();
        let rhs: Vec<C> = (0..n)
            .map(|j| {
                let up = psi[(j + 1) % n];
                let down = psi[(j + n - 1) % n];
                self.diag_rhs[j] * psi[j] - self.c * (self.upper * up + self.lower * down)
            })
            .collect();
        solve_cyclic(&self.diag_lhs, self.c * self.lower, self.c * self.upper, &rhs)
    }
}

/// Solve a cyclic tridiagonal system with constant off-diagonals: row `j` is
/// `lower x_{j-1} + diag_j x_j + upper x_{j+1}` with periodic wrap.
fn solve_cyclic(diag: &[C], lower: C, upper: C, rhs: &[C]) -> Vec<C> {
    let n = diag.len();
    // corners: row 0 couples to x_{n-1} via `lower`, row n-1 to x_0 via `upper`
    let alpha = upper;
    let beta = lower;
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(&b, lower, upper, rhs);
    let mut u = vec![C::new(0.0, 0.0); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(&b, lower, upper, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(x, z)| x - fact * z).collect()
}

fn solve_tridiagonal(diag: &[C], lower: C, upper: C, rhs: &[C]) -> Vec<C> {
    let n = diag.len();
    let mut c_prime = vec![C::new(0.0, 0.0); n];
    let mut d_prime = vec![C::new(0.0, 0.0); n];
    c_prime[0] = upper / diag[0];
    d_prime[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower * c_prime[i - 1];
        c_prime[i] = upper / denom;
        d_prime[i] = (rhs[i] - lower * d_prime[i - 1]) / denom;
    }
    let mut x = vec![C::new(0.0, 0.0); n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    x
}

/// Advance `steps` steps of size `dt`.
pub fn evolve(field: &SpinorField, config: &FieldConfig, dt: f64, steps: usize, scheme: Scheme) -> Result<SpinorField> {
    evolve_with(field, config, dt, steps, scheme, |_, _| {})
}

/// Like [`evolve`], calling `observe(step, field)` after every step and once at step 0.
pub fn evolve_with<F: FnMut(usize, &SpinorField)>(
    field: &SpinorField,
    config: &FieldConfig,
    dt: f64,
    steps: usize,
    scheme: Scheme,
    mut observe: F,
) -> Result<SpinorField> {
    if field.grid != config.grid {
        return Err(invalid("field", "grid differs from the configuration grid"));
    }
    field.require_normalized()?;
    let propagator = Propagator::new(config, dt, scheme)?;
    let mut current = field.clone();
    observe(0, &current);
    for step in 1..=steps {
        propagator.step(&mut current);
        current.check_finite(step)?;
        observe(step, &current);
    }
    Ok(current)
}

/// `(e hbar / 2m) int B_z (|Psi_+|^2 - |Psi_-|^2)`.
pub fn zeeman_energy(field: &SpinorField, config: &FieldConfig) -> f64 {
    let zeeman = config.charge * config.hbar / (2.0 * config.mass);
    zeeman
        * neumaier_sum(
            config
                .bz
                .iter()
                .zip(field.plus.iter().zip(&field.minus))
                .map(|(b, (p, m))| b * (p.norm_sqr() - m.norm_sqr())),
        )
        * field.grid.cell()
}

/// `<H>`, with the kinetic part evaluated spectrally.
pub fn energy(field: &SpinorField, config: &FieldConfig) -> Result<f64> {
    config.validate()?;
    let grid = field.grid;
    let fft = Fft2::new(&grid);
    let symbol = kinetic_symbol(config);
    let gauge = config.gauge_function()?;
    let mut total = 0.0;
    for spin in [Spin::Plus, Spin::Minus] {
        let mut psi = field.component(spin).to_vec();
        if let Some(chi) = &gauge {
            psi.iter_mut()
                .zip(chi)
                .for_each(|(z, c)| *z *= C::from_polar(1.0, config.charge * c / config.hbar));
        }
        let potential = config.potential(spin);
        let pot = neumaier_sum(psi.iter().zip(&potential).map(|(z, v)| z.norm_sqr() * v)) * grid.cell();
        fft.forward(&mut psi);
        let kin =
            neumaier_sum(psi.iter().zip(&symbol).map(|(z, t)| z.norm_sqr() * t)) * grid.cell() / grid.len() as f64;
        total += pot + kin;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub field: SpinorField,
    pub energy: f64,
    pub steps: usize,
}

/// Imaginary-time relaxation of a single-component Gaussian seed until the
/// energy changes by less than `tol` between checks.
pub fn ground_state(config: &FieldConfig, spin: Spin, dtau: f64, tol: f64, max_steps: usize) -> Result<GroundState> {
    let grid = config.grid;
    let mut field = SpinorField::gaussian(grid, [0.0; 2], 0.1 * grid.extent, [0.0; 2], Some(spin))?;
    let propagator = Propagator::imaginary(config, dtau)?;
    let mut last = energy(&field, config)?;
    const CHECK_EVERY: usize = 50;
    let mut residual = f64::INFINITY;
    for step in 1..=max_steps {
        propagator.step(&mut field);
        field.check_finite(step)?;
        let n = field.norm();
        field.scale(1.0 / n.sqrt());
        if step % CHECK_EVERY == 0 {
            let e = energy(&field, config)?;
            residual = (e - last).abs();
            last = e;
            if residual < tol {
                return Ok(GroundState {
                    field,
                    energy: e,
                    steps: step,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        what: "ground_state",
        iterations: max_steps,
        residual,
    })
}

/// Least-squares slope of the unwrapped relative phase `arg <Psi_+|Psi_->`.
pub fn larmor_rate(field: &SpinorField, config: &FieldConfig, dt: f64, steps: usize) -> Result<f64> {
    let mut phases = Vec::with_capacity(steps + 1);
    evolve_with(field, config, dt, steps, Scheme::SplitStep, |_, f| {
        phases.push(f.relative_phase())
    })?;
    let unwrapped = unwrap(&phases);
    let t: Vec<f64> = (0..unwrapped.len()).map(|i| i as f64 * dt).collect();
    Ok(linear_slope(&t, &unwrapped))
}

fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Remove `2 pi` jumps so successive differences lie in `(-pi, pi]`.
pub fn unwrap(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let d = p - phases[i - 1];
            if d > PI {
                offset -= 2.0 * PI;
            } else if d <= -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(p + offset);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MadelungDecomposition {
    pub rho_plus: Vec<f64>,
    pub rho_minus: Vec<f64>,
    /// `hbar` times the unwrapped phase.
    pub s_plus: Vec<f64>,
    pub s_minus: Vec<f64>,
}

/// Path-unwrapped phase: along x in 1D; in 2D down the first column, then along each row.
fn unwrapped_phase(grid: &SpatialGrid, psi: &[C]) -> Vec<f64> {
    let raw: Vec<f64> = psi.iter().map(|z| z.arg()).collect();
    if grid.dimension == 1 {
        return unwrap(&raw);
    }
    let n = grid.nodes;
    let column: Vec<f64> = (0..n).map(|y| raw[y * n]).collect();
    let column = unwrap(&column);
    let mut out = vec![0.0; raw.len()];
    for y in 0..n {
        let mut row = unwrap(&raw[y * n..(y + 1) * n]);
        let shift = column[y] - row[0];
        row.iter_mut().for_each(|v| *v += shift);
        out[y * n..(y + 1) * n].copy_from_slice(&row);
    }
    out
}

pub fn madelung(field: &SpinorField, hbar: f64) -> MadelungDecomposition {
    let s = |spin| {
        unwrapped_phase(&field.grid, field.component(spin))
            .iter()
            .map(|v| hbar * v)
            .collect()
    };
    MadelungDecomposition {
        rho_plus: field.density(Spin::Plus),
        rho_minus: field.density(Spin::Minus),
        s_plus: s(Spin::Plus),
        s_minus: s(Spin::Minus),
    }
}

/// `grad S` along `axis` from `hbar arg(psi_{j+1} conj(psi_{j-1})) / 2dx`,
/// which needs no unwrapping and is second-order accurate.
pub fn phase_gradient(field: &SpinorField, spin: Spin, axis: usize, hbar: f64) -> Vec<f64> {
    let grid = field.grid;
    let psi = field.component(spin);
    let dx = grid.spacing();
    (0..grid.len())
        .map(|i| {
            let f = psi[grid.neighbour(i, axis, true)];
            let b = psi[grid.neighbour(i, axis, false)];
            hbar * (f * b.conj()).arg() / (2.0 * dx)
        })
        .collect()
}

fn central_difference(grid: &SpatialGrid, values: &[f64], axis: usize) -> Vec<f64> {
    let dx = grid.spacing();
    (0..grid.len())
        .map(|i| (values[grid.neighbour(i, axis, true)] - values[grid.neighbour(i, axis, false)]) / (2.0 * dx))
        .collect()
}

fn laplacian(grid: &SpatialGrid, values: &[f64]) -> Vec<f64> {
    let dx2 = grid.spacing().powi(2);
    (0..grid.len())
        .map(|i| {
            (0..grid.dimension)
                .map(|axis| {
                    values[grid.neighbour(i, axis, true)] + values[grid.neighbour(i, axis, false)] - 2.0 * values[i]
                })
                .sum::<f64>()
                / dx2
        })
        .collect()
}

fn check_sequence(fields: &[SpinorField], config: &FieldConfig, dt: f64) -> Result<()> {
    if fields.len() < 3 {
        return Err(invalid("fields", "need at least three consecutive snapshots"));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    if fields.iter().any(|f| f.grid != config.grid) {
        return Err(invalid("fields", "grid differs from the configuration grid"));
    }
    config.validate()
}

/// RMS over unmasked nodes and interior times of
/// `d rho/dt + (1/m) div(rho (grad S + e A))`, both components pooled.
///
/// `fields` are snapshots spaced `dt` apart; time derivatives are central.
pub fn continuity_residual(fields: &[SpinorField], config: &FieldConfig, dt: f64) -> Result<f64> {
    check_sequence(fields, config, dt)?;
    let grid = config.grid;
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in 1..fields.len() - 1 {
        for spin in [Spin::Plus, Spin::Minus] {
            let rho = fields[t].density(spin);
            let before = fields[t - 1].density(spin);
            let after = fields[t + 1].density(spin);
            let mut divergence = vec![0.0; grid.len()];
            for axis in 0..grid.dimension {
                let grad_s = phase_gradient(&fields[t], spin, axis, config.hbar);
                let flux: Vec<f64> = (0..grid.len())
                    .map(|i| rho[i] * (grad_s[i] + config.charge * config.vector_potential[axis][i]) / config.mass)
                    .collect();
                let d = central_difference(&grid, &flux, axis);
                divergence.iter_mut().zip(d).for_each(|(a, b)| *a += b);
            }
            for i in 0..grid.len() {
                if rho[i] < DENSITY_MASK {
                    continue;
                }
                let r = (after[i] - before[i]) / (2.0 * dt) + divergence[i];
                sum += r * r;
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { (sum / count as f64).sqrt() })
}

/// Density-weighted RMS of the Hamilton-Jacobi residual
/// `dS/dt + |grad S + eA|^2 / 2m + V_+- + Q`, `Q = -(hbar^2/2m) lap(sqrt rho)/sqrt rho`.
pub fn hj_residual(fields: &[SpinorField], config: &FieldConfig, dt: f64) -> Result<f64> {
    check_sequence(fields, config, dt)?;
    let grid = config.grid;
    let (hbar, m, e) = (config.hbar, config.mass, config.charge);
    let mut weighted = 0.0;
    let mut weight = 0.0;
    for t in 1..fields.len() - 1 {
        for spin in [Spin::Plus, Spin::Minus] {
            let psi = fields[t].component(spin);
            let before = fields[t - 1].component(spin);
            let after = fields[t + 1].component(spin);
            let rho = fields[t].density(spin);
            let amplitude: Vec<f64> = rho.iter().map(|r| r.sqrt()).collect();
            let lap = laplacian(&grid, &amplitude);
            let potential = config.potential(spin);
            let grads: Vec<Vec<f64>> = (0..grid.dimension)
                .map(|a| phase_gradient(&fields[t], spin, a, hbar))
                .collect();
            for i in 0..grid.len() {
                if rho[i] < DENSITY_MASK {
                    continue;
                }
                let ds_dt = hbar * (after[i] * before[i].conj()).arg() / (2.0 * dt);
                let kinetic: f64 = (0..grid.dimension)
                    .map(|a| (grads[a][i] + e * config.vector_potential[a][i]).powi(2))
                    .sum::<f64>()
                    / (2.0 * m);
                let quantum = -hbar * hbar / (2.0 * m) * lap[i] / amplitude[i];
                let r = ds_dt + kinetic + potential[i] + quantum;
                let w = psi[i].norm_sqr();
                weighted += w * r * r;
                weight += w;
            }
        }
    }
    Ok(if weight == 0.0 { 0.0 } else { (weighted / weight).sqrt() })
}

/// CSV snapshot with columns `x[,y],rho_plus,rho_minus,s_plus,s_minus`.
pub fn snapshot_csv(field: &SpinorField, hbar: f64) -> String {
    let d = madelung(field, hbar);
    let grid = field.grid;
    let mut out = String::from(if grid.dimension == 1 {
        "x,rho_plus,rho_minus,s_plus,s_minus\n"
    } else {
        "x,y,rho_plus,rho_minus,s_plus,s_minus\n"
    });
    for (i, p) in grid.points().enumerate() {
        if grid.dimension == 1 {
            let _ = write!(out, "{}", p[0]);
        } else {
            let _ = write!(out, "{},{}", p[0], p[1]);
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            d.rho_plus[i], d.rho_minus[i], d.s_plus[i], d.s_minus[i]
        );
    }
    out
}
