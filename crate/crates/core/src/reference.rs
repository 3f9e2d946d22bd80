//! Reference values used as golden checks.

/// Eigenvalues of M at Γ = 0.5 MHz with the default rates, MHz, in
/// descending order.
pub const EIGENVALUES_AT_HALF_MHZ: [f64; 7] = [0.0, -0.15, -0.22, -1.84, -74.28, -119.47, -119.48];

/// Reduced operator at Γ = 0.5 MHz, rows/columns {G₀, G₋₁, G₊₁, S}, MHz.
pub const L0: [[f64; 4]; 4] = [
    [-0.05, 0.0, 0.0, 0.97],
    [0.0, -0.22, 0.0, 0.36],
    [0.0, 0.0, -0.22, 0.36],
    [0.05, 0.22, 0.22, -1.71],
];

/// dL/dΓ at Γ = 0.5 MHz.
pub const L1: [[f64; 4]; 4] = [
    [-0.11, 0.0, 0.0, -0.01],
    [0.0, -0.45, 0.0, 0.0],
    [0.0, 0.0, -0.45, 0.0],
    [0.11, 0.45, 0.45, 0.0],
];

/// Entrywise tolerance for the values above, MHz.
pub const TOLERANCE_MHZ: f64 = 0.02;
pub const MATRIX_TOLERANCE_MHZ: f64 = 0.01;

/// One-sided test statistic and its expected p-value.
pub const T_STATISTIC: f64 = 2.4;
pub const P_VALUE: f64 = 0.0082;
pub const P_TOLERANCE: f64 = 1e-4;

/// Largest laser power used, mW.
pub const MAX_LASER_POWER_MW: f64 = 4.0;
/// Longest engine cycle used, µs.
pub const LONGEST_CYCLE_US: f64 = 0.18;
