//! Spin orientation model built on an extended least-action principle.
//!
//! * [`orientation`] - orientation densities and the variational solver
//! * [`stern_gerlach`] - single-electron measurement statistics
//! * [`telegraph`] - up/down trend renewal process
//! * [`entanglement`] - Bell pairs as joint two-point densities, CHSH estimation
//! * [`pauli`] - two-component Schrodinger-Pauli grid solver
//! * [`fluctuations`] - translational and rotational vacuum-fluctuation models
//! * [`oracle`] - independent standard-QM reference
//!
//! Units: `hbar = e = m_e = 1` unless a configuration overrides them.

// `!(x > 0.0)` guards are written that way so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entanglement;
pub mod error;
pub mod export;
pub mod fluctuations;
pub mod numerics;
pub mod oracle;
pub mod orientation;
pub mod pauli;
pub mod rng;
pub mod stern_gerlach;
pub mod telegraph;

pub use error::{Error, Result};
