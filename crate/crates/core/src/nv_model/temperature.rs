use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::RMatrix;

const PLANCK: f64 = 6.626_070_15e-34;
const BOLTZMANN: f64 = 1.380_649e-23;

/// h·ν/k_B in kelvin for a splitting ν given in THz.
pub fn splitting_temperature(omega_gs_thz: f64) -> f64 {
    PLANCK * omega_gs_thz * 1e12 / BOLTZMANN
}

/// Effective temperature of one level pair from its up/down rate ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BathTemperature {
    /// T in kelvin; infinite for equal rates, negative under inversion.
    pub kelvin: f64,
    /// rate_up / rate_down.
    pub ratio: f64,
    /// Set when ratio ≥ 1 (infinite or negative temperature).
    pub inverted: bool,
}

impl BathTemperature {
    fn from_rates(up: f64, down: f64, theta: f64) -> Result<Self> {
        if !(up > 0.0 && down > 0.0) {
            return Err(Error::Domain(format!(
                "temperature needs positive rates, got up = {up:.3e}, down = {down:.3e}"
            )));
        }
        let ratio = up / down;
        let ln = (down / up).ln();
        let kelvin = if ln == 0.0 { f64::INFINITY } else { theta / ln };
        Ok(Self {
            kelvin,
            ratio,
            inverted: ratio >= 1.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Temperatures {
    /// Singlet ↔ G₀.
    pub cold: BathTemperature,
    /// Singlet ↔ G±₁ (both pairs together).
    pub hot: BathTemperature,
}

/// Bath temperatures from a 4×4 thermal generator in the order {G₀, G₋₁, G₊₁, S}.
///
/// rate_up/rate_down = exp(−ΔE/k_B T) with ΔE = h·ω_GS, the ground–singlet splitting.
pub fn effective_temperatures(l: &RMatrix, omega_gs_thz: f64) -> Result<Temperatures> {
    if l.nrows() != 4 || l.ncols() != 4 {
        return Err(Error::Dimension(format!(
            "thermal generator must be 4×4, got {}×{}",
            l.nrows(),
            l.ncols()
        )));
    }
    let theta = splitting_temperature(omega_gs_thz);
    let cold = BathTemperature::from_rates(l[(3, 0)], l[(0, 3)], theta)?;
    let hot = BathTemperature::from_rates(l[(3, 1)] + l[(3, 2)], l[(1, 3)] + l[(2, 3)], theta)?;
    Ok(Temperatures { cold, hot })
}
