//! Standard quantum-mechanics reference for cross-validation.
//!
//! Fixed-size complex linear algebra only (2- and 4-dimensional), kept
//! separate from the orientation-model code paths it is used to check.
//! Measurement directions lie in the plane spanned by the z axis and the
//! transverse in-plane axis, parameterized by the angle from z.

use num_complex::Complex64 as C;

use crate::entanglement::BellState;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

pub type Matrix2 = [[C; 2]; 2];
pub type Matrix4 = [[C; 4]; 4];

pub const SIGMA_X: Matrix2 = [[ZERO, ONE], [ONE, ZERO]];
pub const SIGMA_Y: Matrix2 = [[ZERO, C::new(0.0, -1.0)], [C::new(0.0, 1.0), ZERO]];
pub const SIGMA_Z: Matrix2 = [[ONE, ZERO], [ZERO, C::new(-1.0, 0.0)]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor2(pub [C; 2]);

impl Spinor2 {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> C {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }
}

/// Amplitudes in the tensor basis `(up up, up down, down up, down down)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState(pub [C; 4]);

impl PairState {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn bell(kind: BellState) -> Self {
        let h = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let amps = match kind {
            BellState::PsiMinus => [ZERO, h, -h, ZERO],
            BellState::PsiPlus => [ZERO, h, h, ZERO],
            BellState::PhiMinus => [h, ZERO, ZERO, -h],
            BellState::PhiPlus => [h, ZERO, ZERO, h],
        };
        Self(amps)
    }

    pub fn expectation(&self, op: &Matrix4) -> C {
        let mut acc = ZERO;
        for (row, a) in op.iter().zip(&self.0) {
            for (entry, b) in row.iter().zip(&self.0) {
                acc += a.conj() * entry * b;
            }
        }
        acc
    }
}

/// Spin-up state along an axis tilted by `beta` from z:
/// `cos(beta/2)|up> + sin(beta/2)|down>`.
pub fn rotated_up_state(beta: f64) -> Spinor2 {
    Spinor2([C::new((0.5 * beta).cos(), 0.0), C::new((0.5 * beta).sin(), 0.0)])
}

/// Spin-down state along the same axis, orthogonal to [`rotated_up_state`].
pub fn rotated_down_state(beta: f64) -> Spinor2 {
    Spinor2([C::new((0.5 * beta).sin(), 0.0), C::new(-(0.5 * beta).cos(), 0.0)])
}

/// `|<up_beta1 | up_beta2>|^2`.
pub fn overlap_prob(beta1: f64, beta2: f64) -> f64 {
    rotated_up_state(beta1).inner(&rotated_up_state(beta2)).norm_sqr()
}

/// `|<up_beta1 | down_beta2>|^2`.
pub fn overlap_prob_down(beta1: f64, beta2: f64) -> f64 {
    rotated_up_state(beta1).inner(&rotated_down_state(beta2)).norm_sqr()
}

/// `sigma . n` for `n = (sin a, 0, cos a)`.
pub fn spin_operator(angle: f64) -> Matrix2 {
    let (s, c) = angle.sin_cos();
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = SIGMA_X[i][j] * s + SIGMA_Z[i][j] * c;
        }
    }
    out
}

pub fn kron(a: &Matrix2, b: &Matrix2) -> Matrix4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// `<state| (sigma.a) (x) (sigma.b) |state>` by explicit 4x4 algebra.
pub fn bell_correlation(kind: BellState, a: f64, b: f64) -> f64 {
    let op = kron(&spin_operator(a), &spin_operator(b));
    PairState::bell(kind).expectation(&op).re
}

pub fn singlet_correlation(a: f64, b: f64) -> f64 {
    bell_correlation(BellState::PsiMinus, a, b)
}

/// CHSH combination `|E(a,b) - E(a,b') + E(a',b) + E(a',b')|` from the oracle.
pub fn chsh_value(kind: BellState, a: f64, a_prime: f64, b: f64, b_prime: f64) -> f64 {
    let e = |x, y| bell_correlation(kind, x, y);
    (e(a, b) - e(a, b_prime) + e(a_prime, b) + e(a_prime, b_prime)).abs()
}
