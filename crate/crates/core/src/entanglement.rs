//! Bell pairs as per-axis joint two-point densities.
//!
//! Each Bell state is a pair of axis correlations, one for z and one for y.
//! A trial picks the z or y branch with equal probability. The correlation
//! is the *sum* of the two branch expectations, so the Monte Carlo
//! estimator doubles the sample mean of `S_A * S_B`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::export::csv_table;
use crate::rng::Streams;
use crate::telegraph::{DwellModel, Trend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxisCorrelation {
    Anti,
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Z,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellState {
    PsiMinus,
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PsiMinus,
        BellState::PsiPlus,
        BellState::PhiMinus,
        BellState::PhiPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BellState::PsiMinus => "psi-",
            BellState::PsiPlus => "psi+",
            BellState::PhiMinus => "phi-",
            BellState::PhiPlus => "phi+",
        }
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psi-" | "psi_minus" | "singlet" => Ok(BellState::PsiMinus),
            "psi+" | "psi_plus" => Ok(BellState::PsiPlus),
            "phi-" | "phi_minus" => Ok(BellState::PhiMinus),
            "phi+" | "phi_plus" => Ok(BellState::PhiPlus),
            _ => Err(invalid("state", format!("unknown Bell state {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellPairModel {
    pub z_correlation: AxisCorrelation,
    pub y_correlation: AxisCorrelation,
}

impl BellPairModel {
    pub fn new(z_correlation: AxisCorrelation, y_correlation: AxisCorrelation) -> Self {
        Self {
            z_correlation,
            y_correlation,
        }
    }

    pub fn axis(&self, axis: Axis) -> AxisCorrelation {
        match axis {
            Axis::Z => self.z_correlation,
            Axis::Y => self.y_correlation,
        }
    }

    pub fn state(&self) -> BellState {
        use AxisCorrelation::*;
        match (self.z_correlation, self.y_correlation) {
            (Anti, Anti) => BellState::PsiMinus,
            (Anti, Same) => BellState::PsiPlus,
            (Same, Anti) => BellState::PhiMinus,
            (Same, Same) => BellState::PhiPlus,
        }
    }
}

impl From<BellState> for BellPairModel {
    fn from(s: BellState) -> Self {
        use AxisCorrelation::*;
        match s {
            BellState::PsiMinus => Self::new(Anti, Anti),
            BellState::PsiPlus => Self::new(Anti, Same),
            BellState::PhiMinus => Self::new(Same, Anti),
            BellState::PhiPlus => Self::new(Same, Same),
        }
    }
}

/// Weights on `(theta_A, theta_B)` in `{0, pi}^2`, indexed `[A][B]` with
/// index 0 for `0` and 1 for `pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointTwoPointDensity {
    pub weights: [[f64; 2]; 2],
}

impl JointTwoPointDensity {
    pub fn new(weights: [[f64; 2]; 2]) -> Result<Self> {
        let flat = weights.iter().flatten();
        if flat.clone().any(|w| !(*w >= 0.0)) {
            return Err(invalid("weights", "must be non-negative"));
        }
        let total: f64 = flat.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("sum to {total}, expected 1")));
        }
        Ok(Self { weights })
    }

    pub fn of(correlation: AxisCorrelation) -> Self {
        let weights = match correlation {
            AxisCorrelation::Anti => [[0.0, 0.5], [0.5, 0.0]],
            AxisCorrelation::Same => [[0.5, 0.0], [0.0, 0.5]],
        };
        Self { weights }
    }

    pub fn product(alice_up: f64, bob_up: f64) -> Result<Self> {
        let a = [alice_up, 1.0 - alice_up];
        let b = [bob_up, 1.0 - bob_up];
        Self::new([[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]])
    }

    pub fn weight(&self, alice_at_pi: bool, bob_at_pi: bool) -> f64 {
        self.weights[alice_at_pi as usize][bob_at_pi as usize]
    }

    /// Frobenius distance to the best rank-one (factorized) approximation,
    /// i.e. the smaller singular value of the 2x2 weight matrix.
    pub fn factorization_residual(&self) -> f64 {
        let [[a, b], [c, d]] = self.weights;
        let frob2 = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        let disc = (frob2 * frob2 - 4.0 * det * det).max(0.0).sqrt();
        (0.5 * (frob2 - disc)).max(0.0).sqrt()
    }
}

pub fn joint_density(model: BellPairModel, axis: Axis) -> JointTwoPointDensity {
    JointTwoPointDensity::of(model.axis(axis))
}

/// Branch expectation with both apparatus angles measured from the branch axis.
pub fn branch_expectation(correlation: AxisCorrelation, alpha: f64, beta: f64) -> f64 {
    let product = alpha.cos() * beta.cos();
    match correlation {
        AxisCorrelation::Anti => -product,
        AxisCorrelation::Same => product,
    }
}

/// Apparatus angles relative to the branch axis, from angles measured from z.
pub fn branch_angles(axis: Axis, a: f64, b: f64) -> (f64, f64) {
    match axis {
        Axis::Z => (a, b),
        Axis::Y => (FRAC_PI_2 - a, FRAC_PI_2 - b),
    }
}

/// `E(a, b) = E_z + E_y`.
pub fn correlation(model: BellPairModel, a: f64, b: f64) -> f64 {
    [Axis::Z, Axis::Y]
        .into_iter()
        .map(|axis| {
            let (alpha, beta) = branch_angles(axis, a, b);
            branch_expectation(model.axis(axis), alpha, beta)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DelayDegradation {
    /// Bob's z-branch sub-state follows his trend process; y is kept.
    ZOnly,
    /// Both branch sub-states follow the trend process.
    Both,
}

impl DelayDegradation {
    fn affects(self, axis: Axis) -> bool {
        matches!(
            (self, axis),
            (DelayDegradation::Both, _) | (DelayDegradation::ZOnly, Axis::Z)
        )
    }
}

/// Delay seen by Bob, with the process that scrambles his sub-state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delay {
    pub duration: f64,
    pub dwell: DwellModel,
    pub degradation: DelayDegradation,
}

impl Delay {
    pub fn new(duration: f64, dwell: DwellModel, degradation: DelayDegradation) -> Result<Self> {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(invalid("delay", "must be finite and non-negative"));
        }
        Ok(Self {
            duration,
            dwell,
            degradation,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub alice: i8,
    pub bob: i8,
    pub branch: Axis,
}

fn outcome_at<R: Rng + ?Sized>(angle: f64, at_pi: bool, rng: &mut R) -> i8 {
    // up probability cos^2((angle - theta)/2) for theta in {0, pi}
    let half = 0.5 * angle;
    let p_up = if at_pi { half.sin().powi(2) } else { half.cos().powi(2) };
    if rng.random::<f64>() < p_up {
        1
    } else {
        -1
    }
}

fn sample_with_delay<R: Rng + ?Sized>(
    model: BellPairModel,
    a: f64,
    b: f64,
    delay: Option<&Delay>,
    rng: &mut R,
) -> PairOutcome {
    let branch = if rng.random::<bool>() { Axis::Z } else { Axis::Y };
    let alice_at_pi: bool = rng.random();
    let mut bob_at_pi = match model.axis(branch) {
        AxisCorrelation::Anti => !alice_at_pi,
        AxisCorrelation::Same => alice_at_pi,
    };
    if let Some(d) = delay {
        if d.degradation.affects(branch) && d.duration > 0.0 {
            let start = if bob_at_pi { Trend::Down } else { Trend::Up };
            bob_at_pi = d.dwell.evolve(start, d.duration, rng) == Trend::Down;
        }
    }
    let (alpha, beta) = branch_angles(branch, a, b);
    let alice = outcome_at(alpha, alice_at_pi, rng);
    let bob = outcome_at(beta, bob_at_pi, rng);
    PairOutcome { alice, bob, branch }
}

/// One simultaneous trial.
pub fn sample_pair_outcome<R: Rng + ?Sized>(model: BellPairModel, a: f64, b: f64, rng: &mut R) -> PairOutcome {
    sample_with_delay(model, a, b, None, rng)
}

/// One trial with Bob measuring after `delay`.
pub fn sample_delayed_pair_outcome<R: Rng + ?Sized>(
    model: BellPairModel,
    a: f64,
    b: f64,
    delay: &Delay,
    rng: &mut R,
) -> PairOutcome {
    sample_with_delay(model, a, b, Some(delay), rng)
}

/// Outcome tallies for one setting pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

impl OutcomeCounts {
    pub fn record(&mut self, o: PairOutcome) {
        match (o.alice > 0, o.bob > 0) {
            (true, true) => self.pp += 1,
            (true, false) => self.pm += 1,
            (false, true) => self.mp += 1,
            (false, false) => self.mm += 1,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.pp += other.pp;
        self.pm += other.pm;
        self.mp += other.mp;
        self.mm += other.mm;
    }

    pub fn total(&self) -> u64 {
        self.pp + self.pm + self.mp + self.mm
    }

    /// Sample mean of `S_A * S_B`.
    pub fn product_mean(&self) -> f64 {
        let same = (self.pp + self.mm) as i128;
        let diff = (self.pm + self.mp) as i128;
        (same - diff) as f64 / self.total() as f64
    }

    /// Branch-sum estimate `2 * mean(S_A S_B)` and its standard error.
    pub fn estimate(&self) -> (f64, f64) {
        let m = self.product_mean();
        let n = self.total() as f64;
        (2.0 * m, 2.0 * ((1.0 - m * m).max(0.0) / n).sqrt())
    }
}

/// Monte Carlo correlation estimate; results depend only on the streams.
pub fn estimate_correlation(
    model: BellPairModel,
    a: f64,
    b: f64,
    samples: usize,
    delay: Option<&Delay>,
    streams: &Streams,
) -> Result<OutcomeCounts> {
    if samples == 0 {
        return Err(invalid("samples", "at least one trial"));
    }
    let blocks = streams.map_blocks(samples, |rng, len| {
        let mut counts = OutcomeCounts::default();
        for _ in 0..len {
            counts.record(sample_with_delay(model, a, b, delay, rng));
        }
        counts
    });
    let mut total = OutcomeCounts::default();
    for c in &blocks {
        total.merge(c);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub alice_angles: (f64, f64),
    pub bob_angles: (f64, f64),
    pub samples: usize,
    pub delay: Option<Delay>,
}

impl MeasurementPlan {
    pub fn new(alice_angles: (f64, f64), bob_angles: (f64, f64), samples: usize) -> Result<Self> {
        let plan = Self {
            alice_angles,
            bob_angles,
            samples,
            delay: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// `a = 0, a' = pi/2, b = pi/4, b' = 3 pi/4`.
    pub fn canonical(samples: usize) -> Result<Self> {
        use std::f64::consts::FRAC_PI_4;
        Self::new((0.0, FRAC_PI_2), (FRAC_PI_4, 3.0 * FRAC_PI_4), samples)
    }

    pub fn with_delay(mut self, delay: Delay) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("samples", "at least one trial"));
        }
        let angles = [
            self.alice_angles.0,
            self.alice_angles.1,
            self.bob_angles.0,
            self.bob_angles.1,
        ];
        if angles.iter().any(|x| !x.is_finite()) {
            return Err(invalid("angles", "must be finite"));
        }
        Ok(())
    }

    /// Setting pairs in the order `(a,b), (a,b'), (a',b), (a',b')`.
    pub fn settings(&self) -> [(f64, f64); 4] {
        let (a, ap) = self.alice_angles;
        let (b, bp) = self.bob_angles;
        [(a, b), (a, bp), (ap, b), (ap, bp)]
    }
}

pub const SETTING_LABELS: [&str; 4] = ["ab", "ab'", "a'b", "a'b'"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub state: BellState,
    pub mode: Mode,
    /// `E(a,b), E(a,b'), E(a',b), E(a',b')`.
    pub correlations: [f64; 4],
    pub standard_errors: [f64; 4],
    /// Present for Monte Carlo runs.
    pub counts: Option<[OutcomeCounts; 4]>,
    pub s: f64,
    pub s_standard_error: f64,
}

impl ChshResult {
    fn from_terms(state: BellState, mode: Mode, e: [f64; 4], se: [f64; 4], counts: Option<[OutcomeCounts; 4]>) -> Self {
        let s = (e[0] - e[1] + e[2] + e[3]).abs();
        let s_standard_error = se.iter().map(|x| x * x).sum::<f64>().sqrt();
        Self {
            state,
            mode,
            correlations: e,
            standard_errors: se,
            counts,
            s,
            s_standard_error,
        }
    }

    /// One row per setting: `setting,alice,bob,pp,pm,mp,mm,E,se`, then a row with `S`.
    pub fn to_csv(&self, plan: &MeasurementPlan) -> String {
        let mut rows = Vec::new();
        for (k, (a, b)) in plan.settings().iter().enumerate() {
            let c = self.counts.map(|c| c[k]).unwrap_or_default();
            rows.push(vec![
                SETTING_LABELS[k].to_string(),
                a.to_string(),
                b.to_string(),
                c.pp.to_string(),
                c.pm.to_string(),
                c.mp.to_string(),
                c.mm.to_string(),
                self.correlations[k].to_string(),
                self.standard_errors[k].to_string(),
            ]);
        }
        let mut s_row = vec![String::new(); 9];
        s_row[0] = "S".into();
        s_row[7] = self.s.to_string();
        s_row[8] = self.s_standard_error.to_string();
        rows.push(s_row);
        csv_table(&["setting", "alice", "bob", "pp", "pm", "mp", "mm", "E", "se"], &rows)
    }
}

/// Closed-form correlation with an optional delay: each degraded axis is
/// scaled by the trend persistence over the delay.
pub fn analytic_correlation(model: BellPairModel, a: f64, b: f64, delay: Option<&Delay>) -> f64 {
    [Axis::Z, Axis::Y]
        .into_iter()
        .map(|axis| {
            let (alpha, beta) = branch_angles(axis, a, b);
            let factor = match delay {
                Some(d) if d.degradation.affects(axis) => d.dwell.persistence(d.duration),
                _ => 1.0,
            };
            factor * branch_expectation(model.axis(axis), alpha, beta)
        })
        .sum()
}

pub fn chsh(plan: &MeasurementPlan, model: BellPairModel, mode: Mode, streams: &Streams) -> Result<ChshResult> {
    plan.validate()?;
    let settings = plan.settings();
    let delay = plan.delay.as_ref();
    match mode {
        Mode::Analytic => {
            let e = settings.map(|(a, b)| analytic_correlation(model, a, b, delay));
            Ok(ChshResult::from_terms(model.state(), mode, e, [0.0; 4], None))
        }
        Mode::MonteCarlo => {
            let mut counts = [OutcomeCounts::default(); 4];
            for (k, (a, b)) in settings.iter().enumerate() {
                let sub = streams.child(SETTING_LABELS[k], k as u64);
                counts[k] = estimate_correlation(model, *a, *b, plan.samples, delay, &sub)?;
            }
            let est = counts.map(|c| c.estimate());
            Ok(ChshResult::from_terms(
                model.state(),
                mode,
                est.map(|x| x.0),
                est.map(|x| x.1),
                Some(counts),
            ))
        }
    }
}

/// Correlation with Bob measuring `delay.duration` after Alice.
pub fn delayed_correlation(
    model: BellPairModel,
    a: f64,
    b: f64,
    delay: &Delay,
    mode: Mode,
    samples: usize,
    streams: &Streams,
) -> Result<(f64, f64)> {
    match mode {
        Mode::Analytic => Ok((analytic_correlation(model, a, b, Some(delay)), 0.0)),
        Mode::MonteCarlo => Ok(estimate_correlation(model, a, b, samples, Some(delay), streams)?.estimate()),
    }
}

/// Whether Bob's measurement falls within one upward dwell of Alice's.
pub fn time_constraint_satisfied(t_alice: f64, t_bob: f64, tau_plus: f64) -> Result<bool> {
    if t_bob < t_alice {
        return Err(invalid("t_bob", "must not precede t_alice"));
    }
    if !(tau_plus > 0.0) {
        return Err(invalid("tau_plus", "must be positive"));
    }
    Ok(t_bob - t_alice < tau_plus)
}
