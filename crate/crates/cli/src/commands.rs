//! Subcommand dispatch and the experiments behind each subcommand.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};
use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use serde_json::Value;
use spinlap_core::entanglement::{
    self, BellPairModel, BellState, ChshResult, Delay, DelayDegradation, MeasurementPlan, Mode, SETTING_LABELS,
};
use spinlap_core::fluctuations::{self, PeriodicDensity, RadiusGrid, RotationParams, TranslationParams};
use spinlap_core::numerics::integrate;
use spinlap_core::orientation::{
    total_action, variational_solve, ActionSpec, CosPowerDensity, Divergence, GridDensity, ThetaGrid,
};
use spinlap_core::pauli::{self, FieldConfig, Scheme, SpatialGrid, Spin, SpinorField};
use spinlap_core::rng::Streams;
use spinlap_core::stern_gerlach::{self, ApparatusConfig, Order};
use spinlap_core::telegraph::DwellModel;
use spinlap_core::{oracle, orientation};

use crate::config::{
    self, echo, parse_orders, resolve, BellDelayParams, BellTestParams, Common, FluctuationsParams, OracleCheckParams,
    Params, PauliParams, RawSettings, SternGerlachParams, VariationalParams,
};
use crate::output::{self, sha256_hex, Cell, FileRecord, Report, RunManifest, Table};
use crate::{Cli, CliError, Command};

/// Where a run wrote its files.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub files: Vec<FileRecord>,
    pub manifest: RunManifest,
}

impl Outcome {
    pub fn summary_line(&self) -> String {
        let names: Vec<&str> = self.files.iter().map(|f| f.path.as_str()).collect();
        format!("wrote {} to {}", names.join(", "), self.dir.display())
    }
}

fn load_raw(cli: &Cli) -> Result<RawSettings, CliError> {
    let g = &cli.global;
    let mut raw = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RawSettings::parse(&text).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
        None => RawSettings::default(),
    };
    if let Some(seed) = g.seed {
        raw.set_value("seed", seed.into());
    }
    if let Some(n) = g.samples {
        raw.set_value("samples", n.into());
    }
    if let Some(f) = &g.format {
        raw.set_value("format", Value::String(f.clone()));
    }
    let num = |v: f64| {
        serde_json::Number::from_f64(v)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    };
    match &cli.command {
        Command::Variational => {}
        Command::SternGerlach { beta, order } => {
            if let Some(b) = beta {
                raw.set_value("beta", num(*b));
            }
            if let Some(o) = order {
                raw.set_value("order", (*o).into());
            }
        }
        Command::BellTest { state } => {
            if let Some(s) = state {
                raw.set_value("state", Value::String(s.clone()));
            }
        }
        Command::BellDelay {
            tau_plus,
            tau_minus,
            max_ratio,
        } => {
            for (k, v) in [
                ("tau_plus", tau_plus),
                ("tau_minus", tau_minus),
                ("max_ratio", max_ratio),
            ] {
                if let Some(v) = v {
                    raw.set_value(k, num(*v));
                }
            }
        }
        Command::Pauli { steps, dt, bz } => {
            if let Some(s) = steps {
                raw.set_value("steps", (*s).into());
            }
            for (k, v) in [("dt", dt), ("bz", bz)] {
                if let Some(v) = v {
                    raw.set_value(k, num(*v));
                }
            }
        }
        Command::Fluctuations { omega } => {
            if let Some(w) = omega {
                raw.set_value("omega", num(*w));
            }
        }
        Command::OracleCheck { pairs } => {
            if let Some(p) = pairs {
                raw.set_value("pairs", (*p).into());
            }
        }
    }
    for p in &g.params {
        raw.set_flag(p)?;
    }
    Ok(raw)
}

fn out_dir(cli: &Cli, common: &Common) -> PathBuf {
    if let Some(p) = &cli.global.out {
        return p.clone();
    }
    if let Some(p) = std::env::var_os(config::OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    PathBuf::from(
        common
            .out
            .clone()
            .unwrap_or_else(|| config::DEFAULT_OUT_DIR.to_string()),
    )
}

/// Resolve the configuration, run the subcommand and write results plus manifest.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let raw = load_raw(cli)?;
    let name = cli.command.name();
    match &cli.command {
        Command::Variational => execute::<VariationalParams>(cli, name, raw, |_, p| variational(p)),
        Command::SternGerlach { .. } => execute::<SternGerlachParams>(cli, name, raw, stern_gerlach_run),
        Command::BellTest { .. } => execute::<BellTestParams>(cli, name, raw, bell_test),
        Command::BellDelay { .. } => execute::<BellDelayParams>(cli, name, raw, bell_delay),
        Command::Pauli { .. } => execute::<PauliParams>(cli, name, raw, |_, p| pauli_run(p)),
        Command::Fluctuations { .. } => execute::<FluctuationsParams>(cli, name, raw, fluctuations_run),
        Command::OracleCheck { .. } => execute::<OracleCheckParams>(cli, name, raw, oracle_check),
    }
}

fn execute<P: Params>(
    cli: &Cli,
    name: &str,
    raw: RawSettings,
    body: impl FnOnce(u64, &P) -> Result<Report, CliError>,
) -> Result<Outcome, CliError> {
    let (common, params) = resolve::<P>(name, raw)?;
    let dir = out_dir(cli, &common);
    let mut resolved = echo(&params);
    resolved.insert("seed".into(), common.seed.into());
    resolved.insert("format".into(), serde_json::to_value(common.format).expect("format"));
    let config_sha256 = sha256_hex(serde_json::to_string(&resolved).expect("config").as_bytes());

    let started = Instant::now();
    let report = body(common.seed, &params)?;
    let files = output::write_report(&dir, name, common.format, &report)?;
    let manifest = RunManifest {
        tool: "spinlap".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: name.into(),
        seed: common.seed,
        format: common.format,
        config: resolved,
        config_sha256,
        files: files.clone(),
        summary: report.summary.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    output::write_manifest(&dir, &manifest)?;
    if let Some(Value::Bool(false)) = report.summary.get("passed") {
        return Err(CliError::Check(format!(
            "{name} reported a mismatch; see {}",
            dir.join(output::MANIFEST_NAME).display()
        )));
    }
    Ok(Outcome { dir, files, manifest })
}

fn divergence_name(d: Divergence) -> &'static str {
    match d {
        Divergence::Tsallis => "tsallis",
        Divergence::Renyi => "renyi",
        Divergence::KullbackLeibler => "kl",
    }
}

fn pole_mass(d: &GridDensity, eps: f64) -> f64 {
    d.mass_between(0.0, eps) + d.mass_between(PI - eps, PI)
}

fn variational(p: &VariationalParams) -> Result<Report, CliError> {
    let orders = parse_orders(&p.orders).map_err(CliError::Config)?;
    if orders.contains(&0) {
        return Err(CliError::Config("orders: the order m must be at least 1".into()));
    }
    let grid = ThetaGrid::new(p.grid_intervals as usize)?;
    let mut divergences = Vec::new();
    for d in p.divergences.split(',').map(str::trim) {
        let d = match d {
            "tsallis" => Divergence::Tsallis,
            "renyi" => Divergence::Renyi,
            _ => Divergence::KullbackLeibler,
        };
        if !divergences.contains(&d) {
            divergences.push(d);
        }
    }
    let coupling = p.g_factor * p.spin_magnitude / orientation::HBAR;
    let kl_z = integrate(|t: f64| (coupling * t.cos()).exp(), 0.0, PI, 1e-13, 1e-15)?;

    let mut solutions = Table::new(
        "solutions",
        &[
            "divergence",
            "m",
            "iterations",
            "residual",
            "linf_to_closed_form",
            "action_solution",
            "action_closed_form",
            "min_density",
            "pole_mass_0.1",
        ],
    );
    let mut columns: Vec<(String, GridDensity)> = Vec::new();
    let mut max_power_linf = 0.0f64;
    let mut kl_positive = true;
    for &d in &divergences {
        // the K-L solution does not depend on the order
        let ms: Vec<u32> = if d == Divergence::KullbackLeibler {
            vec![orders[0]]
        } else {
            orders.clone()
        };
        for m in ms {
            let mut spec = ActionSpec::new(d, m);
            spec.g_factor = p.g_factor;
            spec.spin_magnitude = p.spin_magnitude;
            spec.delta_phi = p.delta_phi;
            let sol = variational_solve(&spec, grid)?;
            let closed = if d == Divergence::KullbackLeibler {
                GridDensity::from_fn(grid, |t| (coupling * t.cos()).exp() / kl_z)?
            } else {
                CosPowerDensity::new(m).on_grid(grid)
            };
            let linf = sol.density.linf_distance(|t| closed.eval(t));
            let min = sol.density.values().iter().copied().fold(f64::INFINITY, f64::min);
            if d == Divergence::KullbackLeibler {
                kl_positive &= min > 0.0;
            } else {
                max_power_linf = max_power_linf.max(linf);
            }
            let label_m: Cell = if d == Divergence::KullbackLeibler {
                "".into()
            } else {
                m.into()
            };
            solutions.push(vec![
                divergence_name(d).into(),
                label_m,
                sol.iterations.into(),
                sol.residual.into(),
                linf.into(),
                total_action(&sol.density, &spec)?.into(),
                total_action(&closed, &spec)?.into(),
                min.into(),
                pole_mass(&sol.density, 0.1).into(),
            ]);
            let col = if d == Divergence::KullbackLeibler {
                "kl".to_string()
            } else {
                format!("{}_m{m}", divergence_name(d))
            };
            columns.push((col, sol.density));
        }
    }
    let mut header = vec!["theta"];
    header.extend(columns.iter().map(|c| c.0.as_str()));
    let mut densities = Table::new("densities", &header);
    for (i, theta) in grid.thetas().enumerate() {
        let mut row = vec![Cell::from(theta)];
        row.extend(columns.iter().map(|c| Cell::from(c.1.values()[i])));
        densities.push(row);
    }
    let mut report = Report::default();
    report.set("grid_intervals", p.grid_intervals);
    if divergences.iter().any(|d| *d != Divergence::KullbackLeibler) {
        report.set("max_linf_power_divergences", max_power_linf);
    }
    if divergences.contains(&Divergence::KullbackLeibler) {
        report.set("kl_strictly_positive", kl_positive);
    }
    report.tables = vec![solutions, densities];
    Ok(report)
}

const POLE_MASS_ORDERS: [u32; 8] = [1, 3, 10, 20, 50, 100, 200, 1000];

fn stern_gerlach_run(seed: u64, p: &SternGerlachParams) -> Result<Report, CliError> {
    let streams = Streams::new(seed, "stern-gerlach");
    let n = p.samples as usize;
    let order = u32::try_from(p.order).map_err(|_| CliError::Config("order out of range".into()))?;
    let mut report = Report::default();

    let (f, se) = stern_gerlach::rotated_up_fraction(p.beta, n, &streams.child("rotated", 0))?;
    let expected = stern_gerlach::rotated_up_probability(p.beta);
    report.set("beta", p.beta);
    report.set("rotated_up_fraction", f);
    report.set("rotated_up_standard_error", se);
    report.set("rotated_up_expected", expected);

    let limit = orientation::limit_density(&CosPowerDensity::new(order).on_grid(ThetaGrid::default()));
    let (fz, sez) = stern_gerlach::up_fraction(&limit, n, &streams.child("aligned", 0))?;
    report.set("aligned_up_weight", limit.weight_up());
    report.set("aligned_up_fraction", fz);
    report.set("aligned_up_standard_error", sez);

    let mut poles = Table::new("pole_mass", &["m", "mass_within_0.1", "mass_within_0.01"]);
    for m in POLE_MASS_ORDERS {
        let d = CosPowerDensity::new(m);
        poles.push(vec![m.into(), d.pole_mass(0.1).into(), d.pole_mass(0.01).into()]);
    }

    let cfg = ApparatusConfig::new(p.eta, p.transit_time, Order::Finite(order))?;
    let hist = stern_gerlach::displacement_distribution(&cfg, n, p.bins as usize, &streams.child("displacement", 0))?;
    let expected_bins = stern_gerlach::pushforward_bin_probabilities(order, p.bins as usize);
    let mut disp = Table::new(
        "displacement",
        &["bin_left", "bin_right", "count", "density", "expected_probability"],
    );
    let density = hist.density();
    let mut max_dev = 0.0f64;
    for k in 0..hist.bins() {
        let (a, b) = hist.edges(k);
        let frac = hist.counts[k] as f64 / hist.total() as f64;
        max_dev = max_dev.max((frac - expected_bins[k]).abs());
        disp.push(vec![
            a.into(),
            b.into(),
            hist.counts[k].into(),
            density[k].into(),
            expected_bins[k].into(),
        ]);
    }
    report.set("order", order);
    report.set(
        "displacement_scale",
        stern_gerlach::displacement_scale(order, p.eta, p.transit_time, cfg.units),
    );
    report.set("displacement_mean", hist.mean());
    report.set("displacement_max_bin_deviation", max_dev);
    report.tables = vec![poles, disp];
    Ok(report)
}

fn bell_model(state: &str) -> Result<(BellState, BellPairModel), CliError> {
    let s: BellState = state
        .parse()
        .map_err(|e: spinlap_core::error::Error| CliError::Config(e.to_string()))?;
    Ok((s, BellPairModel::from(s)))
}

fn settings_table(plan: &MeasurementPlan, state: BellState, analytic: &ChshResult, mc: &ChshResult) -> Table {
    let mut t = Table::new(
        "settings",
        &[
            "setting",
            "alice",
            "bob",
            "pp",
            "pm",
            "mp",
            "mm",
            "E",
            "se",
            "E_analytic",
            "E_oracle",
        ],
    );
    let counts = mc.counts.unwrap_or_default();
    for (k, (a, b)) in plan.settings().iter().enumerate() {
        let c = counts[k];
        t.push(vec![
            SETTING_LABELS[k].into(),
            (*a).into(),
            (*b).into(),
            c.pp.into(),
            c.pm.into(),
            c.mp.into(),
            c.mm.into(),
            mc.correlations[k].into(),
            mc.standard_errors[k].into(),
            analytic.correlations[k].into(),
            oracle::bell_correlation(state, *a, *b).into(),
        ]);
    }
    t
}

fn bell_test(seed: u64, p: &BellTestParams) -> Result<Report, CliError> {
    let (state, model) = bell_model(&p.state)?;
    let plan = MeasurementPlan::new((p.a, p.a_prime), (p.b, p.b_prime), p.samples as usize)?;
    let streams = Streams::new(seed, "bell-test");
    let analytic = entanglement::chsh(&plan, model, Mode::Analytic, &streams)?;
    let mc = entanglement::chsh(&plan, model, Mode::MonteCarlo, &streams)?;
    let mut report = Report::default();
    report.set("state", state.name());
    report.set("samples_per_setting", p.samples);
    report.set("s_analytic", analytic.s);
    report.set("s_oracle", oracle::chsh_value(state, p.a, p.a_prime, p.b, p.b_prime));
    report.set("s_monte_carlo", mc.s);
    report.set("s_standard_error", mc.s_standard_error);
    report.set("violates_classical_bound", mc.s > 2.0);
    report.tables = vec![settings_table(&plan, state, &analytic, &mc)];
    Ok(report)
}

/// `k * step` rounded to 12 significant decimals so the sweep prints cleanly.
fn sweep_point(k: usize, step: f64) -> f64 {
    let x = k as f64 * step;
    (x * 1e12).round() / 1e12
}

fn bell_delay(seed: u64, p: &BellDelayParams) -> Result<Report, CliError> {
    let (state, model) = bell_model(&p.state)?;
    let dwell = match p.dwell.as_str() {
        "fixed" => DwellModel::fixed(p.tau_plus, p.tau_minus)?,
        _ => DwellModel::exponential(p.tau_plus, p.tau_minus)?,
    };
    let degradation = match p.degradation.as_str() {
        "both" => DelayDegradation::Both,
        _ => DelayDegradation::ZOnly,
    };
    let points = (p.max_ratio / p.step + 1e-9).floor() as usize;
    let streams = Streams::new(seed, "bell-delay");
    let base = MeasurementPlan::new((p.a, p.a_prime), (p.b, p.b_prime), p.samples as usize)?;

    let mut table = Table::new(
        "sweep",
        &[
            "ratio",
            "delay",
            "persistence",
            "s_analytic",
            "s_monte_carlo",
            "s_standard_error",
        ],
    );
    let mut analytic_s = Vec::with_capacity(points + 1);
    let mut mc_s = Vec::with_capacity(points + 1);
    for k in 0..=points {
        let ratio = sweep_point(k, p.step);
        let delay = Delay::new(ratio * p.tau_plus, dwell, degradation)?;
        let plan = base.with_delay(delay);
        let analytic = entanglement::chsh(&plan, model, Mode::Analytic, &streams)?;
        let mc = entanglement::chsh(&plan, model, Mode::MonteCarlo, &streams.child("delay", k as u64))?;
        table.push(vec![
            ratio.into(),
            delay.duration.into(),
            dwell.persistence(delay.duration).into(),
            analytic.s.into(),
            mc.s.into(),
            mc.s_standard_error.into(),
        ]);
        analytic_s.push(analytic.s);
        mc_s.push((mc.s, mc.s_standard_error));
    }
    let analytic_monotone = analytic_s.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    // pairwise comparisons of ~100 noisy points would trip on chance alone;
    // test each estimate against the monotone closed form instead
    let mc_consistent = mc_s
        .iter()
        .zip(&analytic_s)
        .all(|((s, se), exact)| (s - exact).abs() <= 4.0 * se);
    let mut report = Report::default();
    report.set("state", state.name());
    report.set("degradation", &p.degradation);
    report.set("dwell", &p.dwell);
    report.set("points", points + 1);
    report.set("s_analytic_start", analytic_s[0]);
    report.set("s_analytic_end", *analytic_s.last().expect("non-empty"));
    report.set("s_monte_carlo_start", mc_s[0].0);
    report.set("s_monte_carlo_end", mc_s.last().expect("non-empty").0);
    report.set("s_standard_error_end", mc_s.last().expect("non-empty").1);
    report.set("analytic_monotone", analytic_monotone);
    report.set("monte_carlo_within_4se_of_analytic", mc_consistent);
    report.tables = vec![table];
    Ok(report)
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn snapshot_table(step: usize, field: &SpinorField, hbar: f64) -> Table {
    let grid = field.grid();
    let d = pauli::madelung(field, hbar);
    let mut t = if grid.dimension() == 1 {
        Table::new(
            format!("snapshot_{step:06}"),
            &["x", "rho_plus", "rho_minus", "s_plus", "s_minus"],
        )
    } else {
        Table::new(
            format!("snapshot_{step:06}"),
            &["x", "y", "rho_plus", "rho_minus", "s_plus", "s_minus"],
        )
    };
    for (i, p) in grid.points().enumerate() {
        let mut row: Vec<Cell> = vec![p[0].into()];
        if grid.dimension() == 2 {
            row.push(p[1].into());
        }
        row.extend([d.rho_plus[i], d.rho_minus[i], d.s_plus[i], d.s_minus[i]].map(Cell::from));
        t.push(row);
    }
    t
}

fn pauli_run(p: &PauliParams) -> Result<Report, CliError> {
    let grid = SpatialGrid::new(p.dimension as usize, p.nodes as usize, p.extent)?;
    let mut config = FieldConfig::free(grid).with_uniform_bz(p.bz);
    if p.omega > 0.0 {
        config = config.with_harmonic_well(p.omega);
    }
    config.validate()?;
    let scheme = match p.scheme.as_str() {
        "crank-nicolson" => Scheme::CrankNicolson,
        _ => Scheme::SplitStep,
    };
    let spin = match p.spin.as_str() {
        "plus" => Some(Spin::Plus),
        "minus" => Some(Spin::Minus),
        _ => None,
    };
    let mut report = Report::default();
    let initial = match p.initial.as_str() {
        "ground" => {
            let gs = pauli::ground_state(
                &config,
                spin.unwrap_or(Spin::Plus),
                p.dt,
                p.ground_tolerance,
                p.ground_max_steps as usize,
            )?;
            report.set("ground_energy", gs.energy);
            report.set("ground_steps", gs.steps);
            match spin {
                Some(_) => gs.field,
                None => {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    let source = gs.field.component(Spin::Plus);
                    let half: Vec<_> = source.iter().map(|z| z * s).collect();
                    SpinorField::new(grid, half.clone(), half)?
                }
            }
        }
        _ => SpinorField::gaussian(grid, [p.x0, 0.0], p.width, [p.momentum, 0.0], spin)?,
    };

    let stride = p.stride as usize;
    let steps = p.steps as usize;
    let mut snapshots = Vec::new();
    let mut diagnostics = Table::new(
        "diagnostics",
        &[
            "step",
            "time",
            "norm",
            "population_plus",
            "population_minus",
            "mean_x",
            "relative_phase",
            "energy",
        ],
    );
    let mut phases = Vec::with_capacity(steps + 1);
    let mut recent: VecDeque<SpinorField> = VecDeque::with_capacity(3);
    let (pop0, _) = initial.spin_populations();
    let mut max_norm_drift = 0.0f64;
    let mut max_pop_drift = 0.0f64;
    let mut energy_err = None;
    pauli::evolve_with(&initial, &config, p.dt, steps, scheme, |step, f| {
        let (pp, pm) = f.spin_populations();
        max_norm_drift = max_norm_drift.max((f.norm() - 1.0).abs());
        max_pop_drift = max_pop_drift.max((pp - pop0).abs());
        phases.push(f.relative_phase());
        if recent.len() == 3 {
            recent.pop_front();
        }
        recent.push_back(f.clone());
        if step % stride == 0 || step == steps {
            let e = match pauli::energy(f, &config) {
                Ok(e) => e,
                Err(err) => {
                    energy_err.get_or_insert(err);
                    f64::NAN
                }
            };
            diagnostics.push(vec![
                step.into(),
                (step as f64 * p.dt).into(),
                f.norm().into(),
                pp.into(),
                pm.into(),
                f.mean_position()[0].into(),
                f.relative_phase().into(),
                e.into(),
            ]);
            snapshots.push(snapshot_table(step, f, config.hbar));
        }
    })?;
    if let Some(err) = energy_err {
        return Err(err.into());
    }
    report.set("steps", steps);
    report.set("dt", p.dt);
    report.set("max_norm_drift", max_norm_drift);
    report.set("max_population_drift", max_pop_drift);
    if spin.is_none() {
        let unwrapped = pauli::unwrap(&phases);
        let t: Vec<f64> = (0..unwrapped.len()).map(|i| i as f64 * p.dt).collect();
        report.set("larmor_rate", least_squares_slope(&t, &unwrapped));
        report.set("larmor_rate_expected", config.charge * p.bz / config.mass);
    }
    if recent.len() == 3 {
        let fields: Vec<SpinorField> = recent.into_iter().collect();
        report.set(
            "continuity_residual_final",
            pauli::continuity_residual(&fields, &config, p.dt)?,
        );
        report.set("hj_residual_final", pauli::hj_residual(&fields, &config, p.dt)?);
    }
    report.tables.push(diagnostics);
    report.tables.extend(snapshots);
    Ok(report)
}

fn fluctuations_run(seed: u64, p: &FluctuationsParams) -> Result<Report, CliError> {
    let streams = Streams::new(seed, "fluctuations");
    let n = p.samples as usize;
    let mut report = Report::default();

    let tp = TranslationParams::with_hbar(p.mass, p.dt, p.hbar)?;
    let w = fluctuations::sample_displacements(&tp, n, &streams.child("translation", 0));
    let u = fluctuations::uncertainty_product(&w, &tp)?;
    report.set("uncertainty_product", u.product);
    report.set("uncertainty_standard_error", u.standard_error);
    report.set("uncertainty_expected", 0.5 * p.hbar);

    let mut lt = Table::new(
        "angular_momentum",
        &[
            "mass",
            "omega",
            "mean",
            "standard_error",
            "variational_mean_square_radius",
            "sigma_squared",
        ],
    );
    let pairs = [(p.mass, p.omega), (2.0 * p.mass, p.omega), (p.mass, 3.0 * p.omega)];
    let mut means = Vec::new();
    for (k, (mass, omega)) in pairs.into_iter().enumerate() {
        let rp = RotationParams::with_hbar(mass, omega, p.hbar)?;
        let est = fluctuations::expected_angular_momentum(&rp, n, &streams.child("rotation", k as u64))?;
        let sol = fluctuations::variational_radius_solve(&rp, RadiusGrid::for_params(&rp), 1.0)?;
        means.push(est.mean);
        lt.push(vec![
            mass.into(),
            omega.into(),
            est.mean.into(),
            est.standard_error.into(),
            sol.mean_square_radius().into(),
            (rp.sigma() * rp.sigma()).into(),
        ]);
    }
    report.set("angular_momentum", means[0]);
    report.set("angular_momentum_expected", 0.5 * p.hbar);
    let spread =
        means.iter().copied().fold(f64::NEG_INFINITY, f64::max) - means.iter().copied().fold(f64::INFINITY, f64::min);
    report.set("angular_momentum_spread", spread);

    let kappa = p.kappa;
    let rho = PeriodicDensity::from_fn(-PI, TAU, p.fisher_nodes as usize, |x| (kappa * x.cos()).exp())?;
    let dts = [1e-1, 1e-2, 1e-3, 1e-4];
    let study = fluctuations::kl_shift_limit(&rho, p.mass, p.hbar, &dts)?;
    let mut kt = Table::new("kl_shift", &["dt", "rate", "fisher", "ratio"]);
    for (dt, rate) in study.dts.iter().zip(&study.rates) {
        kt.push(vec![
            (*dt).into(),
            (*rate).into(),
            study.fisher.into(),
            (rate / study.fisher).into(),
        ]);
    }
    report.set("fisher_functional", study.fisher);
    report.set("kl_rate_to_fisher_finest", study.finest_ratio());
    report.tables = vec![lt, kt];
    Ok(report)
}

fn oracle_check(seed: u64, p: &OracleCheckParams) -> Result<Report, CliError> {
    let streams = Streams::new(seed, "oracle-check");
    let mut rng = streams.stream(0);
    let mut rot = Table::new("rotation", &["beta1", "beta2", "model", "oracle", "abs_diff"]);
    let mut max_rot = 0.0f64;
    for _ in 0..p.pairs {
        let b1 = rng.random::<f64>() * TAU;
        let b2 = rng.random::<f64>() * TAU;
        let model = stern_gerlach::two_apparatus_up_probability(b1, b2);
        let exact = oracle::overlap_prob(b1, b2);
        let d = (model - exact).abs();
        max_rot = max_rot.max(d);
        rot.push(vec![b1.into(), b2.into(), model.into(), exact.into(), d.into()]);
    }
    let mut bell = Table::new("bell", &["state", "a", "b", "model", "oracle", "abs_diff"]);
    let mut max_bell = 0.0f64;
    for state in BellState::ALL {
        let model = BellPairModel::from(state);
        for _ in 0..p.pairs {
            let a = rng.random::<f64>() * TAU;
            let b = rng.random::<f64>() * TAU;
            let e = entanglement::correlation(model, a, b);
            let exact = oracle::bell_correlation(state, a, b);
            let d = (e - exact).abs();
            max_bell = max_bell.max(d);
            bell.push(vec![
                state.name().into(),
                a.into(),
                b.into(),
                e.into(),
                exact.into(),
                d.into(),
            ]);
        }
    }
    let mut report = Report::default();
    report.set("pairs", p.pairs);
    report.set("tolerance", p.tolerance);
    report.set("max_abs_diff_rotation", max_rot);
    report.set("max_abs_diff_bell", max_bell);
    report.set("passed", max_rot <= p.tolerance && max_bell <= p.tolerance);
    report.tables = vec![rot, bell];
    Ok(report)
}
