//! Simulation of quantum heat engines built from the NV⁻ centre level system.
//!
//! Modules, lowest layer first:
//!
//! * [`numerics`]: dense linear algebra, matrix exponentials, an adaptive ODE
//!   integrator kept as an independent oracle, and detuning quadrature.
//! * [`nv_model`]: the seven-level optical rate model, spin Hamiltonians,
//!   Zeeman mixing of the rates, steady states and saturation calibration.
//! * [`thermal`]: reduction of the optical cycle to a four-level thermal operator.
//! * [`engine`]: Liouville-space two-stroke and continuous engines, the
//!   stochastic bound and the dephased reference engine.
//! * [`fluorescence`]: periodic-drive response linking fluorescence contrast to power.
//! * [`uncertainty`]: Monte-Carlo propagation and the one-sided bound-violation test.
//! * [`reference`]: golden values used by the self-test.
//!
//! Units throughout: time in µs, rates in MHz (1/µs), angular frequencies in
//! rad/µs (= Mrad/s). ħ = 1 internally; energies are angular frequencies.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod fluorescence;
pub mod numerics;
pub mod nv_model;
pub mod reference;
pub mod thermal;
pub mod uncertainty;

pub use error::{Error, Result};
pub use numerics::{CMatrix, EigenDecomposition, RMatrix, C64};

/// 2π, for converting cyclic frequencies (MHz) to angular ones (rad/µs).
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// FWHM of a Gaussian divided by its standard deviation, 2√(2 ln 2).
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
