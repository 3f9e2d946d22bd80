//! Two-stroke and continuous heat engines in Liouville space.
//!
//! States are vectors `[ρ₀₁, ρ₁₀, ρ₀₀, ρ₁₁, ρ₋₁₋₁, …]`: the coherence pair of
//! the microwave transition followed by populations. With the reduced thermal
//! operator the tail is just ρ_ss (dimension 6); with the full optical matrix
//! it is E₀, E₋₁, E₊₁, S (dimension 9). The engine transition couples G₀ (|0⟩)
//! and G₊₁ (|1⟩).

mod liouville;
mod power;
mod sweep;

pub use liouville::{
    continuous_generator, cycle_propagator, dephasing_projector, fixed_point, null_state,
    periodic_steady_state, population_state, populations, thermal_generator, work_generator,
    work_superoperator, CyclePropagators, PopulationGenerator, R00, R01, R10, R11,
};
pub use power::{
    action_per_cycle, continuous_power, continuous_power_at, dephased_work_expansion,
    ensemble_power, ensemble_power_with, resonance_breakpoints, stochastic_bound, work_per_cycle,
    Action, PowerResult,
};
pub use sweep::{
    action_sweep, decoherence_sweep, homogeneous_t2_estimate, solve_pump_for_action, ActionPoint,
    DecoherencePoint, DecoherenceSettings, T2Estimate,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{FWHM_PER_SIGMA, TWO_PI};

/// Energies entering H₀ = diag(0, ω₁₀, ω₁₂), rad/µs.
///
/// ω₁₂ multiplies a population the work stroke never touches, so it does not
/// affect any computed work or power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineLevels {
    pub omega_10: f64,
    pub omega_12: f64,
}

impl Default for EngineLevels {
    fn default() -> Self {
        Self {
            omega_10: TWO_PI * 2600.0,
            omega_12: TWO_PI * 2600.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    TwoStroke,
    Continuous,
    DephasedTwoStroke,
}

impl EngineMode {
    pub fn label(&self) -> &'static str {
        match self {
            EngineMode::TwoStroke => "two_stroke",
            EngineMode::Continuous => "continuous",
            EngineMode::DephasedTwoStroke => "dephased_two_stroke",
        }
    }
}

impl std::str::FromStr for EngineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_stroke" | "two-stroke" => Ok(Self::TwoStroke),
            "continuous" => Ok(Self::Continuous),
            "dephased" | "dephased_two_stroke" | "dephased-two-stroke" => {
                Ok(Self::DephasedTwoStroke)
            }
            other => Err(Error::Domain(format!("unknown engine mode '{other}'"))),
        }
    }
}

/// One engine cycle. Times in µs, Ω and δ in rad/µs, Γ in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    pub omega: f64,
    pub detuning: f64,
    pub tau_w: f64,
    pub tau_th: f64,
    pub pump: f64,
    pub mode: EngineMode,
}

impl CycleConfig {
    /// Cycle with duty cycle `d` whose simplified action is `s` (units of ħ).
    pub fn from_action(
        s: f64,
        omega: f64,
        d: f64,
        gamma_th: f64,
        pump: f64,
        mode: EngineMode,
    ) -> Result<Self> {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::Domain(format!(
                "duty cycle must lie in (0, 1), got {d}"
            )));
        }
        let rate = omega * d + gamma_th * (1.0 - d);
        if !(rate > 0.0) || s < 0.0 {
            return Err(Error::Domain(format!(
                "cannot reach action {s} with Ωd + γ_th(1−d) = {rate}"
            )));
        }
        let tau_cyc = s / rate;
        Ok(Self {
            omega,
            detuning: 0.0,
            tau_w: d * tau_cyc,
            tau_th: (1.0 - d) * tau_cyc,
            pump,
            mode,
        })
    }

    pub fn tau_cyc(&self) -> f64 {
        self.tau_w + self.tau_th
    }

    pub fn duty(&self) -> f64 {
        let t = self.tau_cyc();
        if t == 0.0 {
            0.0
        } else {
            self.tau_w / t
        }
    }

    pub fn with_detuning(self, detuning: f64) -> Self {
        Self { detuning, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega,
            self.detuning,
            self.tau_w,
            self.tau_th,
            self.pump,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite("cycle configuration"));
        }
        if self.tau_w < 0.0 || self.tau_th < 0.0 {
            return Err(Error::Domain(
                "stroke durations must be non-negative".into(),
            ));
        }
        if self.pump < 0.0 {
            return Err(Error::Domain(format!(
                "pump rate must be ≥ 0, got {}",
                self.pump
            )));
        }
        Ok(())
    }
}

/// Gaussian distribution of microwave detunings across the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetuningDistribution {
    /// Full width at half maximum, rad/µs.
    pub fwhm: f64,
    /// 1/e ensemble coherence time, µs; used to normalise thermal-stroke durations.
    pub t2_star: f64,
}

impl Default for DetuningDistribution {
    fn default() -> Self {
        Self {
            fwhm: TWO_PI * 7.0,
            t2_star: 0.075,
        }
    }
}

impl DetuningDistribution {
    pub fn sigma(&self) -> f64 {
        self.fwhm / FWHM_PER_SIGMA
    }

    /// 1/e decay time of the free-induction envelope exp(−σ²t²/2): √2/σ.
    pub fn t2_star_from_fwhm(fwhm: f64) -> f64 {
        std::f64::consts::SQRT_2 * FWHM_PER_SIGMA / fwhm
    }
}
