//! Python module `spinlap`.

// `!(x > 0.0)` guards are written that way so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spinlap_core::entanglement::{self, BellPairModel, BellState, Delay, DelayDegradation, MeasurementPlan, Mode};
use spinlap_core::error::Error;
use spinlap_core::fluctuations::{self, RotationParams, TranslationParams};
use spinlap_core::oracle;
use spinlap_core::orientation::{self, ActionSpec, CosPowerDensity, Divergence, ThetaGrid};
use spinlap_core::pauli::{self, FieldConfig, Scheme, SpatialGrid, Spin, SpinorField};
use spinlap_core::rng::Streams;
use spinlap_core::stern_gerlach::{self, Order, Units};
use spinlap_core::telegraph::{self, DwellModel, Trend};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonConvergence { .. } | Error::NonFinite { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn bell_state(name: &str) -> PyResult<BellState> {
    name.parse().map_err(to_py)
}

fn divergence(name: &str) -> PyResult<Divergence> {
    match name {
        "tsallis" => Ok(Divergence::Tsallis),
        "renyi" => Ok(Divergence::Renyi),
        "kl" => Ok(Divergence::KullbackLeibler),
        _ => Err(PyValueError::new_err(format!(
            "unknown divergence {name:?}; use tsallis, renyi or kl"
        ))),
    }
}

/// `1 + 1/(2m)`.
#[pyfunction]
fn alpha_from_m(m: u32) -> PyResult<f64> {
    orientation::alpha_from_m(m).map_err(to_py)
}

/// `Z_m = int_0^pi cos^{2m}`.
#[pyfunction]
fn normalization_constant(m: u32) -> f64 {
    orientation::normalization_constant(m)
}

/// `cos^{2m}(theta) / Z_m`.
#[pyfunction]
fn density(m: u32, theta: f64) -> f64 {
    CosPowerDensity::new(m).eval(theta)
}

/// Probability mass within `eps` of either pole.
#[pyfunction]
#[pyo3(signature = (m, eps=0.1))]
fn pole_mass(m: u32, eps: f64) -> f64 {
    CosPowerDensity::new(m).pole_mass(eps)
}

/// Extremize the total action; returns `(thetas, density, iterations, residual)`.
#[pyfunction]
#[pyo3(signature = (divergence_name, m, grid_intervals=2048))]
fn variational_solve(
    divergence_name: &str,
    m: u32,
    grid_intervals: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, usize, f64)> {
    let grid = ThetaGrid::new(grid_intervals).map_err(to_py)?;
    let sol = orientation::variational_solve(&ActionSpec::new(divergence(divergence_name)?, m), grid).map_err(to_py)?;
    Ok((
        grid.thetas().collect(),
        sol.density.values().to_vec(),
        sol.iterations,
        sol.residual,
    ))
}

#[pyfunction]
fn rotated_up_probability(beta: f64) -> f64 {
    stern_gerlach::rotated_up_probability(beta)
}

#[pyfunction]
fn two_apparatus_up_probability(beta1: f64, beta2: f64) -> f64 {
    stern_gerlach::two_apparatus_up_probability(beta1, beta2)
}

/// Monte Carlo up fraction behind a tilted apparatus; returns `(fraction, standard_error)`.
#[pyfunction]
#[pyo3(signature = (beta, samples, seed=42))]
fn rotated_up_fraction(beta: f64, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
    stern_gerlach::rotated_up_fraction(beta, samples, &Streams::new(seed, "py/rotated")).map_err(to_py)
}

/// Deflection of an electron with polar angle `theta` at order `m`.
#[pyfunction]
#[pyo3(signature = (theta, m, eta=1.0, transit_time=1.0))]
fn displacement(theta: f64, m: u32, eta: f64, transit_time: f64) -> PyResult<f64> {
    let theta = orientation::PolarAngle::new(theta).map_err(to_py)?;
    stern_gerlach::displacement(theta, Order::Finite(m), eta, transit_time, Units::default()).map_err(to_py)
}

/// `E(a, b)` of the per-axis pair model.
#[pyfunction]
fn correlation(state: &str, a: f64, b: f64) -> PyResult<f64> {
    Ok(entanglement::correlation(BellPairModel::from(bell_state(state)?), a, b))
}

#[pyfunction]
fn oracle_correlation(state: &str, a: f64, b: f64) -> PyResult<f64> {
    Ok(oracle::bell_correlation(bell_state(state)?, a, b))
}

#[pyfunction]
fn oracle_overlap_prob(beta1: f64, beta2: f64) -> f64 {
    oracle::overlap_prob(beta1, beta2)
}

/// CHSH statistic. `samples=0` gives the closed form; a positive `delay`
/// scrambles Bob's sub-state with a telegraph process of means `tau_plus`, `tau_minus`.
#[pyfunction]
#[pyo3(signature = (state="psi-", angles=None, samples=0, seed=42, delay=0.0, tau_plus=1.0, tau_minus=1.0, degradation="z-only"))]
#[allow(clippy::too_many_arguments)]
fn chsh<'py>(
    py: Python<'py>,
    state: &str,
    angles: Option<(f64, f64, f64, f64)>,
    samples: usize,
    seed: u64,
    delay: f64,
    tau_plus: f64,
    tau_minus: f64,
    degradation: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let model = BellPairModel::from(bell_state(state)?);
    let (a, ap, b, bp) = angles.unwrap_or((
        0.0,
        std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_4,
        3.0 * std::f64::consts::FRAC_PI_4,
    ));
    let mode = if samples == 0 { Mode::Analytic } else { Mode::MonteCarlo };
    let mut plan = MeasurementPlan::new((a, ap), (b, bp), samples.max(1)).map_err(to_py)?;
    if delay > 0.0 {
        let degradation = match degradation {
            "z-only" => DelayDegradation::ZOnly,
            "both" => DelayDegradation::Both,
            _ => return Err(PyValueError::new_err("degradation must be 'z-only' or 'both'")),
        };
        let dwell = DwellModel::exponential(tau_plus, tau_minus).map_err(to_py)?;
        plan = plan.with_delay(Delay::new(delay, dwell, degradation).map_err(to_py)?);
    }
    let r = entanglement::chsh(&plan, model, mode, &Streams::new(seed, "py/chsh")).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("s", r.s)?;
    d.set_item("s_standard_error", r.s_standard_error)?;
    d.set_item("correlations", r.correlations.to_vec())?;
    d.set_item("standard_errors", r.standard_errors.to_vec())?;
    Ok(d)
}

/// Telegraph trajectory as a list of `(start_time, +1 | -1)`.
#[pyfunction]
#[pyo3(signature = (tau_plus, tau_minus, duration, seed=42, start_up=true))]
fn simulate_telegraph(
    tau_plus: f64,
    tau_minus: f64,
    duration: f64,
    seed: u64,
    start_up: bool,
) -> PyResult<Vec<(f64, i8)>> {
    let model = DwellModel::exponential(tau_plus, tau_minus).map_err(to_py)?;
    let start = if start_up { Trend::Up } else { Trend::Down };
    let mut rng = Streams::new(seed, "py/telegraph").stream(0);
    let traj = telegraph::simulate(&model, duration, start, &mut rng).map_err(to_py)?;
    Ok(traj
        .segments()
        .iter()
        .map(|s| (s.start, s.trend.sign() as i8))
        .collect())
}

/// `<dx dp>` from `samples` Gaussian translation steps.
#[pyfunction]
#[pyo3(signature = (samples=1_000_000, mass=1.0, dt=1.0, seed=42))]
fn uncertainty_product(samples: usize, mass: f64, dt: f64, seed: u64) -> PyResult<f64> {
    let p = TranslationParams::new(mass, dt).map_err(to_py)?;
    let w = fluctuations::sample_displacements(&p, samples, &Streams::new(seed, "py/translation"));
    Ok(fluctuations::uncertainty_product(&w, &p).map_err(to_py)?.product)
}

/// `<L_s>` with its standard error.
#[pyfunction]
#[pyo3(signature = (samples=1_000_000, mass=1.0, omega=1.0, seed=42))]
fn expected_angular_momentum(samples: usize, mass: f64, omega: f64, seed: u64) -> PyResult<(f64, f64)> {
    let p = RotationParams::new(mass, omega).map_err(to_py)?;
    let e = fluctuations::expected_angular_momentum(&p, samples, &Streams::new(seed, "py/rotation")).map_err(to_py)?;
    Ok((e.mean, e.standard_error))
}

/// 1D spinor field under a uniform `B_z` and an optional harmonic well.
#[pyclass(module = "spinlap")]
struct PauliSimulation {
    config: FieldConfig,
    field: SpinorField,
    dt: f64,
    scheme: Scheme,
    time: f64,
}

#[pymethods]
impl PauliSimulation {
    #[new]
    #[pyo3(signature = (nodes=256, extent=20.0, dt=1e-3, bz=1.0, omega=0.0, x0=0.0, width=1.0, momentum=0.0, spin=None, crank_nicolson=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        nodes: usize,
        extent: f64,
        dt: f64,
        bz: f64,
        omega: f64,
        x0: f64,
        width: f64,
        momentum: f64,
        spin: Option<&str>,
        crank_nicolson: bool,
    ) -> PyResult<Self> {
        let grid = SpatialGrid::line(nodes, extent).map_err(to_py)?;
        let mut config = FieldConfig::free(grid).with_uniform_bz(bz);
        if omega > 0.0 {
            config = config.with_harmonic_well(omega);
        }
        config.validate().map_err(to_py)?;
        let spin = match spin {
            None => None,
            Some("plus") => Some(Spin::Plus),
            Some("minus") => Some(Spin::Minus),
            Some(other) => {
                return Err(PyValueError::new_err(format!(
                    "spin must be 'plus', 'minus' or None, got {other:?}"
                )))
            }
        };
        if !(dt > 0.0) {
            return Err(PyValueError::new_err("dt must be positive"));
        }
        let field = SpinorField::gaussian(grid, [x0, 0.0], width, [momentum, 0.0], spin).map_err(to_py)?;
        let scheme = if crank_nicolson {
            Scheme::CrankNicolson
        } else {
            Scheme::SplitStep
        };
        Ok(Self {
            config,
            field,
            dt,
            scheme,
            time: 0.0,
        })
    }

    /// Advance `steps` steps.
    fn step(&mut self, steps: usize) -> PyResult<()> {
        self.field = pauli::evolve(&self.field, &self.config, self.dt, steps, self.scheme).map_err(to_py)?;
        self.time += steps as f64 * self.dt;
        Ok(())
    }

    #[getter]
    fn time(&self) -> f64 {
        self.time
    }

    fn norm(&self) -> f64 {
        self.field.norm()
    }

    fn spin_populations(&self) -> (f64, f64) {
        self.field.spin_populations()
    }

    fn relative_phase(&self) -> f64 {
        self.field.relative_phase()
    }

    fn energy(&self) -> PyResult<f64> {
        pauli::energy(&self.field, &self.config).map_err(to_py)
    }

    fn mean_position(&self) -> f64 {
        self.field.mean_position()[0]
    }

    fn coordinates(&self) -> Vec<f64> {
        let grid = self.field.grid();
        (0..grid.len()).map(|j| grid.coordinate(j)).collect()
    }

    /// `(rho_plus, rho_minus, s_plus, s_minus)`.
    fn madelung(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let d = pauli::madelung(&self.field, self.config.hbar);
        (d.rho_plus, d.rho_minus, d.s_plus, d.s_minus)
    }
}

#[pymodule]
fn spinlap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(alpha_from_m, m)?)?;
    m.add_function(wrap_pyfunction!(normalization_constant, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(pole_mass, m)?)?;
    m.add_function(wrap_pyfunction!(variational_solve, m)?)?;
    m.add_function(wrap_pyfunction!(rotated_up_probability, m)?)?;
    m.add_function(wrap_pyfunction!(two_apparatus_up_probability, m)?)?;
    m.add_function(wrap_pyfunction!(rotated_up_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(displacement, m)?)?;
    m.add_function(wrap_pyfunction!(correlation, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_overlap_prob, m)?)?;
    m.add_function(wrap_pyfunction!(chsh, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_telegraph, m)?)?;
    m.add_function(wrap_pyfunction!(uncertainty_product, m)?)?;
    m.add_function(wrap_pyfunction!(expected_angular_momentum, m)?)?;
    m.add_class::<PauliSimulation>()?;
    Ok(())
}
