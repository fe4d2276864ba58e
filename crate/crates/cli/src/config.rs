//! Run configuration: `key = value` files or a flat JSON object, merged
//! with command-line overrides and checked against the known keys of the
//! selected subcommand.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::CliError;

/// Where a setting came from, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Line(usize),
    Json,
    Flag,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Json => f.write_str("json document"),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RawSettings {
    entries: BTreeMap<String, (Value, Origin)>,
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

fn scalar(text: &str) -> Value {
    let t = text.trim();
    if let Some(inner) = t.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
        return Value::String(inner.to_string());
    }
    if let Ok(u) = t.parse::<u64>() {
        return Value::Number(u.into());
    }
    if let Ok(i) = t.parse::<i64>() {
        return Value::Number(i.into());
    }
    if let Ok(x) = t.parse::<f64>() {
        if let Some(n) = Number::from_f64(x) {
            return Value::Number(n);
        }
    }
    match t {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(t.to_string()),
    }
}

impl RawSettings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_lines(text)
        }
    }

    fn parse_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        let Value::Object(map) = value else {
            return Err(CliError::Config("config document must be a JSON object".into()));
        };
        let mut out = Self::default();
        for (k, v) in map {
            if v.is_object() || v.is_array() || v.is_null() {
                return Err(CliError::Config(format!("key '{k}': expected a scalar value")));
            }
            out.entries.insert(normalize_key(&k), (v, Origin::Json));
        }
        Ok(out)
    }

    fn parse_lines(text: &str) -> Result<Self, CliError> {
        let mut out = Self::default();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {n}: expected 'key = value', got {line:?}"
                )));
            };
            let key = normalize_key(k);
            if key.is_empty() {
                return Err(CliError::Config(format!("line {n}: empty key")));
            }
            if out.entries.insert(key.clone(), (scalar(v), Origin::Line(n))).is_some() {
                return Err(CliError::Config(format!("line {n}: duplicate key '{key}'")));
            }
        }
        Ok(out)
    }

    /// Parse `key=value` from the command line, replacing any file value.
    pub fn set_flag(&mut self, assignment: &str) -> Result<(), CliError> {
        let Some((k, v)) = assignment.split_once('=') else {
            return Err(CliError::Config(format!(
                "--param expects key=value, got {assignment:?}"
            )));
        };
        self.entries.insert(normalize_key(k), (scalar(v), Origin::Flag));
        Ok(())
    }

    pub fn set_value(&mut self, key: &str, value: Value) {
        self.entries.insert(normalize_key(key), (value, Origin::Flag));
    }

    fn take(&mut self, key: &str) -> Option<(Value, Origin)> {
        self.entries.remove(key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT_DIR: &str = "spinlap-out";
pub const OUT_DIR_ENV: &str = "SPINLAP_OUT_DIR";

/// Settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Common {
    pub seed: u64,
    pub format: Format,
    /// Output directory named in the config file, if any.
    pub out: Option<String>,
}

impl Common {
    fn extract(raw: &mut RawSettings) -> Result<Self, CliError> {
        let seed = match raw.take("seed") {
            None => DEFAULT_SEED,
            Some((v, origin)) => v
                .as_u64()
                .ok_or_else(|| CliError::Config(format!("{origin}: seed must be a non-negative integer, got {v}")))?,
        };
        let format = match raw.take("format") {
            None => Format::Csv,
            Some((Value::String(s), origin)) => match s.as_str() {
                "csv" => Format::Csv,
                "json" => Format::Json,
                _ => {
                    return Err(CliError::Config(format!(
                        "{origin}: format must be csv or json, got {s:?}"
                    )))
                }
            },
            Some((v, origin)) => {
                return Err(CliError::Config(format!(
                    "{origin}: format must be csv or json, got {v}"
                )))
            }
        };
        let out = match raw.take("out") {
            None => None,
            Some((Value::String(s), _)) => Some(s),
            Some((v, origin)) => return Err(CliError::Config(format!("{origin}: out must be a path, got {v}"))),
        };
        Ok(Self { seed, format, out })
    }
}

fn type_matches(default: &Value, given: &Value) -> bool {
    match (default, given) {
        (Value::Number(d), Value::Number(g)) => {
            if d.is_f64() {
                true
            } else {
                g.is_u64()
            }
        }
        (Value::String(_), Value::String(_)) | (Value::Bool(_), Value::Bool(_)) => true,
        _ => false,
    }
}

fn describe(v: &Value) -> &'static str {
    match v {
        Value::Number(n) if !n.is_f64() => "a non-negative integer",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Bool(_) => "true or false",
        _ => "a scalar",
    }
}

pub trait Params: Default + Serialize + DeserializeOwned {
    /// Physical validation, run before any computation.
    fn validate(&self) -> Result<(), String>;
}

/// Merge `raw` over the defaults of `P`, rejecting unknown keys and type mismatches.
pub fn resolve<P: Params>(subcommand: &str, mut raw: RawSettings) -> Result<(Common, P), CliError> {
    let common = Common::extract(&mut raw)?;
    let Value::Object(mut map) = serde_json::to_value(P::default()).expect("params serialize") else {
        unreachable!("params are structs");
    };
    for (key, (value, origin)) in raw.entries {
        let Some(default) = map.get(&key) else {
            let known: Vec<&String> = map.keys().collect();
            return Err(CliError::Config(format!(
                "{origin}: unknown key '{key}' for {subcommand}; known keys: seed, format, out, {}",
                known.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            )));
        };
        let value = match (default, &value) {
            // integers are acceptable wherever a float is expected
            (Value::Number(d), Value::Number(g)) if d.is_f64() && !g.is_f64() => {
                Value::Number(Number::from_f64(g.as_f64().expect("finite")).expect("finite"))
            }
            _ => value,
        };
        if !type_matches(default, &value) {
            return Err(CliError::Config(format!(
                "{origin}: key '{key}' must be {}, got {value}",
                describe(default)
            )));
        }
        map.insert(key, value);
    }
    let params: P = serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Config(e.to_string()))?;
    params.validate().map_err(CliError::Config)?;
    Ok((common, params))
}

pub fn echo<P: Serialize>(p: &P) -> Map<String, Value> {
    match serde_json::to_value(p).expect("params serialize") {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive, got {v}"))
    }
}

fn at_least(name: &str, v: u64, min: u64) -> Result<(), String> {
    if v >= min {
        Ok(())
    } else {
        Err(format!("{name} must be at least {min}, got {v}"))
    }
}

fn finite(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be finite"))
    }
}

fn one_of(name: &str, v: &str, allowed: &[&str]) -> Result<(), String> {
    if allowed.contains(&v) {
        Ok(())
    } else {
        Err(format!("{name} must be one of {allowed:?}, got {v:?}"))
    }
}

/// Comma-separated list of non-negative integers.
pub fn parse_orders(s: &str) -> Result<Vec<u32>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| format!("orders: {t:?} is not a non-negative integer"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationalParams {
    /// Comma-separated orders `m`.
    pub orders: String,
    /// Comma-separated subset of `tsallis,renyi,kl`.
    pub divergences: String,
    pub grid_intervals: u64,
    pub g_factor: f64,
    pub spin_magnitude: f64,
    pub delta_phi: f64,
}

impl Default for VariationalParams {
    fn default() -> Self {
        Self {
            orders: "1,2,3".into(),
            divergences: "tsallis,renyi,kl".into(),
            grid_intervals: 2048,
            g_factor: 2.0,
            spin_magnitude: 0.5,
            delta_phi: 1.0,
        }
    }
}

impl Params for VariationalParams {
    fn validate(&self) -> Result<(), String> {
        let orders = parse_orders(&self.orders)?;
        if orders.is_empty() {
            return Err("orders must not be empty".into());
        }
        for d in self.divergences.split(',') {
            one_of("divergences", d.trim(), &["tsallis", "renyi", "kl"])?;
        }
        at_least("grid_intervals", self.grid_intervals, 2)?;
        if !self.grid_intervals.is_multiple_of(2) {
            return Err("grid_intervals must be even so pi/2 is a node".into());
        }
        positive("g_factor", self.g_factor)?;
        positive("spin_magnitude", self.spin_magnitude)?;
        positive("delta_phi", self.delta_phi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SternGerlachParams {
    /// Tilt of the second apparatus for the rotated-measurement run.
    pub beta: f64,
    pub samples: u64,
    pub order: u64,
    pub eta: f64,
    pub transit_time: f64,
    pub bins: u64,
}

impl Default for SternGerlachParams {
    fn default() -> Self {
        Self {
            beta: PI / 3.0,
            samples: 1_000_000,
            order: 3,
            eta: 1.0,
            transit_time: 1.0,
            bins: 60,
        }
    }
}

impl Params for SternGerlachParams {
    fn validate(&self) -> Result<(), String> {
        finite("beta", self.beta)?;
        at_least("samples", self.samples, 1)?;
        positive("eta", self.eta)?;
        positive("transit_time", self.transit_time)?;
        at_least("bins", self.bins, 1)?;
        if self.order > 10_000 {
            return Err("order must be at most 10000".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BellTestParams {
    pub state: String,
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    /// Trials per setting pair.
    pub samples: u64,
}

impl Default for BellTestParams {
    fn default() -> Self {
        Self {
            state: "psi-".into(),
            a: 0.0,
            a_prime: FRAC_PI_2,
            b: FRAC_PI_4,
            b_prime: 3.0 * FRAC_PI_4,
            samples: 1_000_000,
        }
    }
}

impl Params for BellTestParams {
    fn validate(&self) -> Result<(), String> {
        self.state
            .parse::<spinlap_core::entanglement::BellState>()
            .map_err(|e| e.to_string())?;
        for (n, v) in [
            ("a", self.a),
            ("a_prime", self.a_prime),
            ("b", self.b),
            ("b_prime", self.b_prime),
        ] {
            finite(n, v)?;
        }
        at_least("samples", self.samples, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BellDelayParams {
    pub state: String,
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    /// Trials per setting pair at each delay.
    pub samples: u64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    /// `exponential` or `fixed`.
    pub dwell: String,
    /// `z-only` or `both`.
    pub degradation: String,
    /// Sweep `delay / tau_plus` from 0 to `max_ratio` in steps of `step`.
    pub max_ratio: f64,
    pub step: f64,
}

impl Default for BellDelayParams {
    fn default() -> Self {
        let b = BellTestParams::default();
        Self {
            state: b.state,
            a: b.a,
            a_prime: b.a_prime,
            b: b.b,
            b_prime: b.b_prime,
            samples: 100_000,
            tau_plus: 1.0,
            tau_minus: 1.0,
            dwell: "exponential".into(),
            degradation: "z-only".into(),
            max_ratio: 10.0,
            step: 0.1,
        }
    }
}

impl Params for BellDelayParams {
    fn validate(&self) -> Result<(), String> {
        self.state
            .parse::<spinlap_core::entanglement::BellState>()
            .map_err(|e| e.to_string())?;
        for (n, v) in [
            ("a", self.a),
            ("a_prime", self.a_prime),
            ("b", self.b),
            ("b_prime", self.b_prime),
        ] {
            finite(n, v)?;
        }
        at_least("samples", self.samples, 1)?;
        positive("tau_plus", self.tau_plus)?;
        positive("tau_minus", self.tau_minus)?;
        one_of("dwell", &self.dwell, &["exponential", "fixed"])?;
        one_of("degradation", &self.degradation, &["z-only", "both"])?;
        if !(self.max_ratio >= 0.0) || !self.max_ratio.is_finite() {
            return Err(format!("max_ratio must be non-negative, got {}", self.max_ratio));
        }
        positive("step", self.step)?;
        if self.max_ratio / self.step > 100_000.0 {
            return Err("sweep has more than 100000 points".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PauliParams {
    pub dimension: u64,
    pub nodes: u64,
    pub extent: f64,
    pub dt: f64,
    pub steps: u64,
    /// Snapshot every `stride` steps.
    pub stride: u64,
    /// Harmonic well frequency; 0 for a free particle.
    pub omega: f64,
    pub bz: f64,
    /// `gaussian` or `ground` (imaginary-time relaxed state of the well).
    pub initial: String,
    pub x0: f64,
    pub width: f64,
    pub momentum: f64,
    /// `plus`, `minus` or `both`.
    pub spin: String,
    /// `split-step` or `crank-nicolson`.
    pub scheme: String,
    pub ground_tolerance: f64,
    pub ground_max_steps: u64,
}

impl Default for PauliParams {
    fn default() -> Self {
        Self {
            dimension: 1,
            nodes: 256,
            extent: 20.0,
            dt: 1e-3,
            steps: 1000,
            stride: 100,
            omega: 1.0,
            bz: 1.0,
            initial: "gaussian".into(),
            x0: 1.0,
            width: std::f64::consts::FRAC_1_SQRT_2,
            momentum: 0.0,
            spin: "both".into(),
            scheme: "split-step".into(),
            ground_tolerance: 1e-12,
            ground_max_steps: 200_000,
        }
    }
}

impl Params for PauliParams {
    fn validate(&self) -> Result<(), String> {
        if !(1..=2).contains(&self.dimension) {
            return Err(format!("dimension must be 1 or 2, got {}", self.dimension));
        }
        if self.nodes < 16 || !self.nodes.is_power_of_two() {
            return Err(format!("nodes must be a power of two >= 16, got {}", self.nodes));
        }
        positive("extent", self.extent)?;
        positive("dt", self.dt)?;
        at_least("stride", self.stride, 1)?;
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return Err(format!("omega must be non-negative, got {}", self.omega));
        }
        finite("bz", self.bz)?;
        finite("x0", self.x0)?;
        finite("momentum", self.momentum)?;
        positive("width", self.width)?;
        one_of("initial", &self.initial, &["gaussian", "ground"])?;
        one_of("spin", &self.spin, &["plus", "minus", "both"])?;
        one_of("scheme", &self.scheme, &["split-step", "crank-nicolson"])?;
        positive("ground_tolerance", self.ground_tolerance)?;
        if self.initial == "ground" && self.omega == 0.0 {
            return Err("initial = ground needs a confining well (omega > 0)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluctuationsParams {
    pub samples: u64,
    pub mass: f64,
    pub dt: f64,
    pub omega: f64,
    pub hbar: f64,
    /// Concentration of the periodic test density for the Fisher check.
    pub kappa: f64,
    pub fisher_nodes: u64,
}

impl Default for FluctuationsParams {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            mass: 1.0,
            dt: 1.0,
            omega: 1.0,
            hbar: 1.0,
            kappa: 2.0,
            fisher_nodes: 256,
        }
    }
}

impl Params for FluctuationsParams {
    fn validate(&self) -> Result<(), String> {
        at_least(
            "samples",
            self.samples,
            spinlap_core::fluctuations::MIN_UNCERTAINTY_SAMPLES as u64,
        )?;
        positive("mass", self.mass)?;
        positive("dt", self.dt)?;
        positive("omega", self.omega)?;
        positive("hbar", self.hbar)?;
        positive("kappa", self.kappa)?;
        at_least("fisher_nodes", self.fisher_nodes, 16)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleCheckParams {
    pub pairs: u64,
    pub tolerance: f64,
}

impl Default for OracleCheckParams {
    fn default() -> Self {
        Self {
            pairs: 100,
            tolerance: 1e-12,
        }
    }
}

impl Params for OracleCheckParams {
    fn validate(&self) -> Result<(), String> {
        at_least("pairs", self.pairs, 1)?;
        positive("tolerance", self.tolerance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_and_json_agree() {
        let a = RawSettings::parse("# comment\nseed = 7\nsamples=1000\nstate = \"phi+\"\n").unwrap();
        let b = RawSettings::parse(r#"{"seed": 7, "samples": 1000, "state": "phi+"}"#).unwrap();
        let (ca, pa) = resolve::<BellTestParams>("bell-test", a).unwrap();
        let (cb, pb) = resolve::<BellTestParams>("bell-test", b).unwrap();
        assert_eq!((ca, pa.clone()), (cb, pb));
        assert_eq!(pa.samples, 1000);
        assert_eq!(pa.state, "phi+");
    }

    #[test]
    fn unknown_key_reports_line() {
        let raw = RawSettings::parse("seed = 1\n\nfoo = 2\n").unwrap();
        let err = resolve::<BellTestParams>("bell-test", raw).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("foo"));
    }

    #[test]
    fn type_and_range_errors() {
        let raw = RawSettings::parse("samples = -5\n").unwrap();
        assert!(resolve::<BellTestParams>("bell-test", raw).is_err());
        let raw = RawSettings::parse("tau_plus = -1\n").unwrap();
        let err = resolve::<BellDelayParams>("bell-delay", raw).unwrap_err();
        assert!(err.to_string().contains("tau_plus"));
        let raw = RawSettings::parse("a = 1\n").unwrap();
        let (_, p) = resolve::<BellTestParams>("bell-test", raw).unwrap();
        assert_eq!(p.a, 1.0);
        assert!(RawSettings::parse("no equals sign").is_err());
        assert!(RawSettings::parse("{\"seed\": [1]}").is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut raw = RawSettings::parse("samples = 10\n").unwrap();
        raw.set_flag("samples=20").unwrap();
        let (_, p) = resolve::<BellTestParams>("bell-test", raw).unwrap();
        assert_eq!(p.samples, 20);
    }
}
