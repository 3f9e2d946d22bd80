use serde::Serialize;

use super::liouville::{
    continuous_generator, fixed_point, null_state, stroke_propagators, thermal_generator,
    work_generator, PopulationGenerator, R00, R11,
};
use super::{CycleConfig, DetuningDistribution, EngineLevels, EngineMode};
use crate::error::Result;
use crate::numerics::{spectral_norm, AdaptiveAverage, CVector, C64};
use crate::TWO_PI;

/// Engine output for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerResult {
    pub mode: EngineMode,
    /// Work per cycle, ħ·rad/µs.
    pub work_per_cycle: f64,
    /// Average power W/τ_cyc, ħ·rad/µs².
    pub power: f64,
    /// Simplified action [Ωd + γ_th(1−d)]τ_cyc, units of ħ.
    pub action: f64,
    /// Integrated generator norm over the cycle, units of ħ.
    pub formal_action: f64,
    /// Stochastic power bound for the same cycle.
    pub bound: f64,
    pub tau_cyc: f64,
    pub omega: f64,
    pub gamma_th: f64,
}

/// Both action measures of a cycle, units of ħ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Action {
    pub simplified: f64,
    pub formal: f64,
}

/// Per-detuning work of a two-stroke cycle at `cfg.detuning`:
/// W = ⟨H₀|(U_w − I)|ρ⟩ = ω₁₀·Δρ₁₁ at the periodic state ρ.
///
/// For the continuous engine this is the power times τ_cyc.
pub fn work_per_cycle(
    cfg: &CycleConfig,
    pg: &PopulationGenerator,
    levels: &EngineLevels,
) -> Result<f64> {
    if cfg.mode == EngineMode::Continuous {
        return Ok(continuous_power_at(cfg, pg, levels)? * cfg.tau_cyc());
    }
    let props = stroke_propagators(cfg, pg)?;
    let rho = fixed_point(&props.cycle)?;
    let after = &props.work * &rho;
    Ok(levels.omega_10 * (after[R11] - rho[R11]).re)
}

/// Power of the continuous engine at `cfg.detuning`, using only the duty cycle
/// of `cfg`: P = ⟨H₀|(−i·d·H_w(Ω, 0))|ρ_ss⟩.
pub fn continuous_power_at(
    cfg: &CycleConfig,
    pg: &PopulationGenerator,
    levels: &EngineLevels,
) -> Result<f64> {
    cfg.validate()?;
    let d = cfg.duty();
    let g = continuous_generator(cfg.omega, cfg.detuning, d, pg);
    let rho = null_state(&g)?;
    let flow = work_generator(cfg.omega, 0.0, pg.dim()) * C64::new(d, 0.0) * rho;
    Ok(levels.omega_10 * flow[R11].re)
}

/// Simplified and formal action of one cycle.
///
/// The formal value is Ωτ_w + ‖G_th(δ = 0)‖₂·τ_th with G_th the thermal-stroke
/// generator including its coherence-decay block.
pub fn action_per_cycle(cfg: &CycleConfig, pg: &PopulationGenerator, gamma_th: f64) -> Action {
    let d = cfg.duty();
    let tc = cfg.tau_cyc();
    Action {
        simplified: (cfg.omega.abs() * d + gamma_th * (1.0 - d)) * tc,
        formal: cfg.omega.abs() * cfg.tau_w
            + spectral_norm(&thermal_generator(pg, 0.0)) * cfg.tau_th,
    }
}

/// Maximum power of a fully dephased engine: ¼ω₁₀d²Ω²τ_cyc.
pub fn stochastic_bound(cfg: &CycleConfig, levels: &EngineLevels) -> f64 {
    let d = cfg.duty();
    0.25 * levels.omega_10 * d * d * cfg.omega * cfg.omega * cfg.tau_cyc()
}

/// Second-order dephased work ¼ω₁₀τ_w²Ω²(ρ₀₀ − ρ₁₁) for the state `rho`.
pub fn dephased_work_expansion(cfg: &CycleConfig, rho: &CVector, levels: &EngineLevels) -> f64 {
    let x = cfg.omega * cfg.tau_w;
    0.25 * levels.omega_10 * x * x * (rho[R00] - rho[R11]).re
}

/// Ensemble-averaged power over the detuning distribution, default quadrature.
pub fn ensemble_power(
    cfg: &CycleConfig,
    pg: &PopulationGenerator,
    levels: &EngineLevels,
    dist: &DetuningDistribution,
    gamma_th: f64,
) -> Result<PowerResult> {
    ensemble_power_with(cfg, pg, levels, dist, gamma_th, &AdaptiveAverage::default())
}

/// Ensemble-averaged continuous-engine power.
pub fn continuous_power(
    cfg: &CycleConfig,
    pg: &PopulationGenerator,
    levels: &EngineLevels,
    dist: &DetuningDistribution,
    gamma_th: f64,
) -> Result<PowerResult> {
    let cfg = CycleConfig {
        mode: EngineMode::Continuous,
        ..*cfg
    };
    ensemble_power(&cfg, pg, levels, dist, gamma_th)
}

/// Detuning offsets within ±`reach` at which the total detuning completes a
/// whole number of turns per cycle, δ = 2πk/τ_cyc − `cfg.detuning`.
pub fn resonance_breakpoints(cfg: &CycleConfig, reach: f64) -> Vec<f64> {
    let tc = cfg.tau_cyc();
    if !(tc > 0.0) {
        return Vec::new();
    }
    let spacing = TWO_PI / tc;
    let kmax = ((reach + cfg.detuning.abs()) / spacing).floor() as i64;
    (-kmax..=kmax)
        .map(|k| k as f64 * spacing - cfg.detuning)
        .collect()
}

/// Ensemble average with explicit quadrature settings.
///
/// The per-detuning work of a stroke engine has resonances wherever the total
/// precession per cycle is a multiple of 2π, so those detunings are used as
/// initial breakpoints. A zero FWHM evaluates the single centre at `cfg.detuning`.
pub fn ensemble_power_with(
    cfg: &CycleConfig,
    pg: &PopulationGenerator,
    levels: &EngineLevels,
    dist: &DetuningDistribution,
    gamma_th: f64,
    quad: &AdaptiveAverage,
) -> Result<PowerResult> {
    cfg.validate()?;
    let tc = cfg.tau_cyc();
    let continuous = cfg.mode == EngineMode::Continuous;
    let rate = |c: &CycleConfig| -> Result<f64> {
        if continuous {
            continuous_power_at(c, pg, levels)
        } else if tc > 0.0 {
            Ok(work_per_cycle(c, pg, levels)? / tc)
        } else {
            Ok(0.0)
        }
    };

    let power = if dist.fwhm == 0.0 {
        rate(cfg)?
    } else {
        let sigma = dist.sigma();
        let breaks = if continuous {
            Vec::new()
        } else {
            resonance_breakpoints(cfg, quad.cutoff_sigmas * sigma)
        };
        quad.average(
            |d| rate(&cfg.with_detuning(cfg.detuning + d)),
            sigma,
            &breaks,
        )?
    };

    let action = action_per_cycle(cfg, pg, gamma_th);
    Ok(PowerResult {
        mode: cfg.mode,
        work_per_cycle: power * tc,
        power,
        action: action.simplified,
        formal_action: action.formal,
        bound: stochastic_bound(cfg, levels),
        tau_cyc: tc,
        omega: cfg.omega,
        gamma_th,
    })
}
