//! Seven-level optical rate model of the NV⁻ centre.
//!
//! Basis order is fixed: {G₀, G₋₁, G₊₁, E₀, E₋₁, E₊₁, S}. A rate matrix `R`
//! holds `R[(i, j)]` = rate i→j; the population generator is
//! `M_ij = R_ji − δ_ij Σ_k R_ik`, so ∂ₜσ = Mσ with σ a column of populations.

mod calibration;
mod rates;
mod spin;
mod temperature;

pub use calibration::{
    fit_gamma_calibration, pump_rate, saturation_curve, saturation_fluorescence, spot_diameter_um,
    CalibrationFit, CalibrationParams, FitOptions,
};
pub use rates::{
    build_m, build_rate_matrix, fluorescence_rate, null_space, optical_matrix, steady_state,
    RateConstants, RATE_SIGMAS,
};
pub use spin::{
    level_mixing, spin_hamiltonian, zeeman_transform, Manifold, SpinParams, ZfsMode, D_ES_TABLE,
    D_GS_TABLE,
};
pub use temperature::{
    effective_temperatures, splitting_temperature, BathTemperature, Temperatures,
};

pub const G0: usize = 0;
pub const GM1: usize = 1;
pub const GP1: usize = 2;
pub const E0: usize = 3;
pub const EM1: usize = 4;
pub const EP1: usize = 5;
pub const S: usize = 6;
pub const N_LEVELS: usize = 7;

pub const LEVEL_LABELS: [&str; N_LEVELS] = ["G0", "G-1", "G+1", "E0", "E-1", "E+1", "S"];

/// Excited-state population projector Ω_E.
pub const EXCITED_PROJECTOR: [f64; N_LEVELS] = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0];
