//! Up/down orientation-trend process.
//!
//! The orientation alternates between trending upward (`theta` in the upper
//! half sphere) and downward, with random dwell times of means `tau_plus`
//! and `tau_minus`. A measurement at time `t` reports the trend in force.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trend {
    Up,
    Down,
}

impl Trend {
    pub fn flipped(self) -> Self {
        match self {
            Trend::Up => Trend::Down,
            Trend::Down => Trend::Up,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Trend::Up => 1.0,
            Trend::Down => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Trend::Up => '+',
            Trend::Down => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DwellDistribution {
    Exponential,
    /// Every dwell lasts exactly its mean; for deterministic checks.
    FixedDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellModel {
    tau_plus: f64,
    tau_minus: f64,
    distribution: DwellDistribution,
}

impl DwellModel {
    pub fn new(tau_plus: f64, tau_minus: f64, distribution: DwellDistribution) -> Result<Self> {
        for (name, v) in [("tau_plus", tau_plus), ("tau_minus", tau_minus)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("mean dwell must be positive, got {v}")));
            }
        }
        Ok(Self {
            tau_plus,
            tau_minus,
            distribution,
        })
    }

    pub fn exponential(tau_plus: f64, tau_minus: f64) -> Result<Self> {
        Self::new(tau_plus, tau_minus, DwellDistribution::Exponential)
    }

    pub fn fixed(tau_plus: f64, tau_minus: f64) -> Result<Self> {
        Self::new(tau_plus, tau_minus, DwellDistribution::FixedDuration)
    }

    pub fn tau_plus(&self) -> f64 {
        self.tau_plus
    }

    pub fn tau_minus(&self) -> f64 {
        self.tau_minus
    }

    pub fn distribution(&self) -> DwellDistribution {
        self.distribution
    }

    pub fn mean(&self, trend: Trend) -> f64 {
        match trend {
            Trend::Up => self.tau_plus,
            Trend::Down => self.tau_minus,
        }
    }

    /// Long-run fraction of time spent trending up.
    pub fn up_fraction(&self) -> f64 {
        self.tau_plus / (self.tau_plus + self.tau_minus)
    }

    pub fn draw<R: Rng + ?Sized>(&self, trend: Trend, rng: &mut R) -> f64 {
        let mean = self.mean(trend);
        match self.distribution {
            DwellDistribution::FixedDuration => mean,
            DwellDistribution::Exponential => Exp::new(1.0 / mean).expect("positive rate").sample(rng),
        }
    }

    /// Final trend after `delay` for a fresh process started in `initial`.
    ///
    /// Only the flip parity matters, so no segment list is kept.
    pub fn evolve<R: Rng + ?Sized>(&self, initial: Trend, delay: f64, rng: &mut R) -> Trend {
        let mut trend = initial;
        let mut t = self.draw(trend, rng);
        while t <= delay {
            trend = trend.flipped();
            t += self.draw(trend, rng);
        }
        trend
    }

    /// `<X(0) X(delay)>` with `X = +/-1`, averaged over an equiprobable
    /// initial trend for a process that starts a fresh dwell at time 0.
    pub fn persistence(&self, delay: f64) -> f64 {
        if delay <= 0.0 {
            return 1.0;
        }
        match self.distribution {
            // two-state Markov chain: the initial-state average of the
            // autocorrelation is exp(-(1/tau+ + 1/tau-) t)
            DwellDistribution::Exponential => (-(1.0 / self.tau_plus + 1.0 / self.tau_minus) * delay).exp(),
            DwellDistribution::FixedDuration => {
                let parity = |start: Trend| {
                    let mut trend = start;
                    let mut t = self.mean(trend);
                    while t <= delay {
                        trend = trend.flipped();
                        t += self.mean(trend);
                    }
                    if trend == start {
                        1.0
                    } else {
                        -1.0
                    }
                };
                0.5 * (parity(Trend::Up) + parity(Trend::Down))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub trend: Trend,
}

/// Piecewise-constant trend over `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelegraphTrajectory {
    segments: Vec<Segment>,
    duration: f64,
}

pub fn simulate<R: Rng + ?Sized>(
    model: &DwellModel,
    duration: f64,
    initial: Trend,
    rng: &mut R,
) -> Result<TelegraphTrajectory> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(invalid("duration", format!("must be positive, got {duration}")));
    }
    let mut segments = vec![Segment {
        start: 0.0,
        trend: initial,
    }];
    let mut trend = initial;
    let mut t = model.draw(trend, rng);
    while t < duration {
        trend = trend.flipped();
        segments.push(Segment { start: t, trend });
        t += model.draw(trend, rng);
    }
    Ok(TelegraphTrajectory { segments, duration })
}

impl TelegraphTrajectory {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    fn segment_end(&self, i: usize) -> f64 {
        self.segments.get(i + 1).map_or(self.duration, |s| s.start)
    }

    /// `(Delta T^+, Delta T^-)`; the two add up to the window length.
    pub fn time_in_trends(&self) -> (f64, f64) {
        let up: f64 = self
            .segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.trend == Trend::Up)
            .map(|(i, s)| self.segment_end(i) - s.start)
            .sum();
        let up = up.min(self.duration);
        (up, self.duration - up)
    }

    /// `(Delta T^+ / Delta T, Delta T^- / Delta T)`.
    pub fn empirical_fractions(&self) -> (f64, f64) {
        let (up, _) = self.time_in_trends();
        let f = up / self.duration;
        (f, 1.0 - f)
    }

    /// Trend at time `t`; a boundary instant belongs to the later segment.
    pub fn trend_at(&self, t: f64) -> Result<Trend> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(invalid("t", format!("{t} is outside [0, {}]", self.duration)));
        }
        let idx = self.segments.partition_point(|s| s.start <= t) - 1;
        Ok(self.segments[idx].trend)
    }

    /// CSV with header `start_time,trend`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("start_time,trend\n");
        for s in &self.segments {
            let _ = writeln!(out, "{},{}", s.start, s.trend.symbol());
        }
        out
    }
}
