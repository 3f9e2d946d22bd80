//! Dense numerical kernels shared by every other module.
//!
//! Everything here works on small (n ≤ 32) dense matrices. Complex matrices are
//! the common currency; real generators are promoted with [`to_complex`] when a
//! spectral decomposition is needed.

mod linalg;
mod ode;
mod quadrature;

pub use linalg::{
    check_finite, eig, eig_real, eigenvalues, mat_exp, mat_exp_real, pseudo_inverse,
    pseudo_inverse_real, spectral_norm, spectral_norm_real, to_complex, EigenDecomposition,
    CONDITION_LIMIT,
};
pub use ode::{integrate, ode_propagate, propagate_piecewise, OdeOptions};
pub use quadrature::{
    gauss_average, gaussian_density, simpson, AdaptiveAverage, GaussHermite, GaussKronrod,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;
pub type CVector = DVector<C64>;
pub type RVector = DVector<f64>;
