//! Emulated thermal bath: reduction of the seven-level optical cycle to a
//! four-level generator on {G₀, G₋₁, G₊₁, S}.
//!
//! The optical generator M has four slow modes (ground + singlet dynamics)
//! and three fast ones (excited-state decay, ~10² MHz). The reduced operator
//! L is the unique 4×4 matrix with eigenpairs (Pσᵢ, λᵢ) for the slow modes, so
//! that e^{Lt}P ≈ P·e^{Mt} once the fast transients have died out.

mod reduction;

pub use reduction::{
    bath_rates, build_l, build_l_uncorrected, emulation_error, emulation_error_surface,
    initial_state, partition_eigenpairs, population_transfer_rate, singlet_decay_operator,
    thermal_operator, BathRates, EmulationPoint, Expansion, ReductionProjector, SlowFastPartition,
    ThermalOperator, FD_STEP, GAMMA_REF, MIN_PARTITION_MARGIN,
};
