//! Quadrature and summation helpers shared by the solvers.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let estimate = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (estimate, error)
}

struct Interval {
    a: f64,
    b: f64,
    estimate: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate satisfies `error <= max(abs_tol, rel_tol * |integral|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (estimate, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, estimate, error });
    let mut total = estimate;
    let mut total_err = error;
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::NonConvergence {
                what: "adaptive quadrature",
                iterations: heap.len(),
                residual: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (e1, r1) = gk15(&f, worst.a, mid);
        let (e2, r2) = gk15(&f, mid, worst.b);
        total += e1 + e2 - worst.estimate;
        total_err += r1 + r2 - worst.error;
        heap.push(Interval {
            a: worst.a,
            b: mid,
            estimate: e1,
            error: r1,
        });
        heap.push(Interval {
            a: mid,
            b: worst.b,
            estimate: e2,
            error: r2,
        });
    }
    // re-sum to shed the drift accumulated by the running updates
    Ok(heap.iter().map(|iv| iv.estimate).sum())
}

/// Integral of `f` over `[a, inf)` through the substitution `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    integrate(
        |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let interior: f64 = neumaier_sum(values[1..n - 1].iter().copied());
            spacing * (interior + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Running trapezoid integral; element `i` holds the integral up to node `i`.
pub fn cumulative_trapezoid(values: &[f64], spacing: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = NeumaierSum::default();
    out.push(0.0);
    for w in values.windows(2) {
        acc.add(0.5 * spacing * (w[0] + w[1]));
        out.push(acc.value());
    }
    out.truncate(values.len());
    out
}

/// Compensated (Kahan-Babuska-Neumaier) accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(items: I) -> f64 {
    let mut acc = NeumaierSum::default();
    for x in items {
        acc.add(x);
    }
    acc.value()
}

/// Gauss-Hermite nodes and weights for the weight function `exp(-x^2)`.
///
/// Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Angular wavenumbers in FFT order for `n` points over a period `length`.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / length;
    (0..n)
        .map(|j| {
            let signed = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            // the Nyquist mode has no well-defined sign for odd derivatives
            if n.is_multiple_of(2) && j == n / 2 {
                0.0
            } else {
                signed * dk
            }
        })
        .collect()
}

/// FFT pair for one periodic grid size.
pub struct Spectral {
    n: usize,
    length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl Spectral {
    pub fn new(n: usize, length: f64) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            length,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            k: wavenumbers(n, length),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// Inverse transform including the `1/n` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let s = 1.0 / self.n as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Apply a diagonal Fourier multiplier `f(k)` to real data.
    pub fn filter<F: Fn(f64) -> Complex64>(&self, values: &[f64], f: F) -> Vec<f64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        for (z, &k) in buf.iter_mut().zip(&self.k) {
            *z *= f(k);
        }
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        self.filter(values, |k| Complex64::new(0.0, k))
    }

    /// `g(x + shift)` for periodic `g`.
    pub fn shift(&self, values: &[f64], shift: f64) -> Vec<f64> {
        self.filter(values, |k| Complex64::from_polar(1.0, k * shift))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn adaptive_matches_closed_forms() {
        let v = integrate(|x: f64| x.sin(), 0.0, PI, 1e-12, 0.0).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate(|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-12, 0.0).unwrap();
        assert!((v - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_gaussian() {
        let v = integrate_to_infinity(|x: f64| (-x * x).exp(), 0.0, 1e-12, 0.0).unwrap();
        assert!((v - 0.5 * PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let xs: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 + 1.0).collect();
        assert!((trapezoid(&xs, 0.1) - 0.1 * (10.0 * 11.0)).abs() < 1e-12);
        let c = cumulative_trapezoid(&xs, 0.1);
        assert_eq!(c.len(), xs.len());
        assert!((c[10] - trapezoid(&xs, 0.1)).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1.0e16];
        v.extend(std::iter::repeat_n(1.0, 1000));
        v.push(-1.0e16);
        assert_eq!(neumaier_sum(v), 1000.0);
    }

    #[test]
    fn gauss_hermite_integrates_moments() {
        let (x, w) = gauss_hermite(20);
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m0 - PI.sqrt()).abs() < 1e-12);
        assert!((m2 - 0.5 * PI.sqrt()).abs() < 1e-12);
        assert!((m4 - 0.75 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spectral_derivative_and_shift() {
        let n = 64;
        let l = 2.0 * std::f64::consts::PI;
        let sp = Spectral::new(n, l);
        let x: Vec<f64> = (0..n).map(|j| l * j as f64 / n as f64).collect();
        let f: Vec<f64> = x.iter().map(|t| (3.0 * t).sin()).collect();
        let d = sp.derivative(&f);
        let s = sp.shift(&f, 0.3);
        for j in 0..n {
            assert!((d[j] - 3.0 * (3.0 * x[j]).cos()).abs() < 1e-12);
            assert!((s[j] - (3.0 * (x[j] + 0.3)).sin()).abs() < 1e-12);
        }
    }
}
