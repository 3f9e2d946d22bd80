use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::liouville::PopulationGenerator;
use super::power::{ensemble_power, stochastic_bound};
use super::{CycleConfig, DetuningDistribution, EngineLevels, EngineMode};
use crate::error::{Error, Result};
use crate::nv_model::RateConstants;
use crate::thermal::population_transfer_rate;

/// One point of a power-versus-action sweep at fixed Ω and duty cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionPoint {
    pub action: f64,
    pub formal_action: f64,
    pub tau_cyc: f64,
    pub omega: f64,
    pub two_stroke: f64,
    pub dephased: f64,
    pub continuous: f64,
    pub bound: f64,
}

/// Two-stroke, dephased and continuous power over an action grid.
#[allow(clippy::too_many_arguments)]
pub fn action_sweep(
    rc: &RateConstants,
    pump: f64,
    omega: f64,
    duty: f64,
    gamma_th: f64,
    actions: &[f64],
    levels: &EngineLevels,
    dist: &DetuningDistribution,
) -> Result<Vec<ActionPoint>> {
    let pg = PopulationGenerator::reduced(rc, pump)?;
    let cont_cfg =
        CycleConfig::from_action(1.0, omega, duty, gamma_th, pump, EngineMode::Continuous)?;
    let continuous = ensemble_power(&cont_cfg, &pg, levels, dist, gamma_th)?.power;
    actions
        .par_iter()
        .map(|&s| {
            let two =
                CycleConfig::from_action(s, omega, duty, gamma_th, pump, EngineMode::TwoStroke)?;
            let deph = CycleConfig {
                mode: EngineMode::DephasedTwoStroke,
                ..two
            };
            let r = ensemble_power(&two, &pg, levels, dist, gamma_th)?;
            let rd = ensemble_power(&deph, &pg, levels, dist, gamma_th)?;
            Ok(ActionPoint {
                action: r.action,
                formal_action: r.formal_action,
                tau_cyc: r.tau_cyc,
                omega,
                two_stroke: r.power,
                dephased: rd.power,
                continuous,
                bound: r.bound,
            })
        })
        .collect()
}

/// Pump rate Γ at which Ωτ_w + γ_pop(Γ)·τ_th equals `action`, with γ_pop the
/// population-transfer rate of L(Γ). Returns (Γ, action residual).
pub fn solve_pump_for_action(
    rc: &RateConstants,
    omega: f64,
    tau_w: f64,
    tau_th: f64,
    action: f64,
) -> Result<(f64, f64)> {
    if !(tau_th > 0.0) {
        return Err(Error::Constraint(format!(
            "thermal stroke duration must be > 0, got {tau_th}"
        )));
    }
    let residual = |g: f64| -> Result<f64> {
        Ok(omega.abs() * tau_w + population_transfer_rate(rc, g)? * tau_th - action)
    };
    let (mut lo, mut hi) = (1e-3f64.ln(), 20.0f64.ln());
    let (r_lo, r_hi) = (residual(lo.exp())?, residual(hi.exp())?);
    if r_lo > 0.0 || r_hi < 0.0 {
        return Err(Error::Constraint(format!(
            "population-transfer action {action} not bracketed for τ_th = {tau_th} µs \
             (residuals {r_lo:.3e} at Γ = 1e-3, {r_hi:.3e} at Γ = 20)"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid.exp())? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let g = (0.5 * (lo + hi)).exp();
    let r = residual(g)?;
    if r.abs() > 1e-6 {
        return Err(Error::Constraint(format!(
            "action residual {r:.3e} after bisection"
        )));
    }
    Ok((g, r))
}

/// Parameters of the decoherence sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoherenceSettings {
    pub tau_w: f64,
    pub omega: f64,
    /// Non-dephasing action held fixed, units of ħ.
    pub action: f64,
    /// Thermal-stroke durations in units of T₂*.
    pub x_grid: Vec<f64>,
}

impl Default for DecoherenceSettings {
    fn default() -> Self {
        Self {
            tau_w: 0.01,
            omega: 1.6,
            action: 0.05,
            x_grid: vec![0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoherencePoint {
    /// τ_th / T₂*.
    pub x: f64,
    pub tau_th: f64,
    /// Solved pump rate, MHz.
    pub pump: f64,
    pub action_residual: f64,
    /// Ensemble-averaged work per cycle.
    pub work: f64,
    /// Stochastic bound on the work per cycle, ¼ω₁₀Ω²τ_w².
    pub work_bound: f64,
}

/// Work per cycle as the thermal stroke lengthens at fixed population-transfer action.
pub fn decoherence_sweep(
    rc: &RateConstants,
    settings: &DecoherenceSettings,
    levels: &EngineLevels,
    dist: &DetuningDistribution,
    gamma_th: f64,
) -> Result<Vec<DecoherencePoint>> {
    settings
        .x_grid
        .par_iter()
        .map(|&x| {
            let tau_th = x * dist.t2_star;
            let (pump, residual) =
                solve_pump_for_action(rc, settings.omega, settings.tau_w, tau_th, settings.action)?;
            let pg = PopulationGenerator::reduced(rc, pump)?;
            let cfg = CycleConfig {
                omega: settings.omega,
                detuning: 0.0,
                tau_w: settings.tau_w,
                tau_th,
                pump,
                mode: EngineMode::TwoStroke,
            };
            let r = ensemble_power(&cfg, &pg, levels, dist, gamma_th)?;
            Ok(DecoherencePoint {
                x,
                tau_th,
                pump,
                action_residual: residual,
                work: r.work_per_cycle,
                work_bound: stochastic_bound(&cfg, levels) * cfg.tau_cyc(),
            })
        })
        .collect()
}

/// Homogeneous dipolar dephasing time of the spin bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct T2Estimate {
    /// NV density, cm⁻³.
    pub density: f64,
    pub t2_us: f64,
    /// Longest cycle time it is compared against, µs.
    pub longest_cycle_us: f64,
    /// True when T₂ exceeds the longest cycle, so homogeneous dephasing can be ignored.
    pub negligible: bool,
}

/// T₂ = 1/(αn) with α = μ₀g²μ_B²/(4πħ), g = 2.
pub fn homogeneous_t2_estimate(density_cm3: f64) -> Result<T2Estimate> {
    if !(density_cm3 > 0.0 && density_cm3.is_finite()) {
        return Err(Error::Domain(format!(
            "density must be > 0, got {density_cm3}"
        )));
    }
    const MU0_OVER_4PI: f64 = 1e-7;
    const MU_B: f64 = 9.274_010_078_3e-24;
    const HBAR: f64 = 1.054_571_817e-34;
    let g = 2.0;
    let alpha = MU0_OVER_4PI * g * g * MU_B * MU_B / HBAR; // m³/s
    let n_m3 = density_cm3 * 1e6;
    let t2_us = 1e6 / (alpha * n_m3);
    let longest = 0.18;
    Ok(T2Estimate {
        density: density_cm3,
        t2_us,
        longest_cycle_us: longest,
        negligible: t2_us > longest,
    })
}
