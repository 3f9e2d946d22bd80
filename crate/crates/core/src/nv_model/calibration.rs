use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::{fluorescence_rate, optical_matrix, steady_state, RateConstants};
use crate::error::{Error, Result};
use crate::TWO_PI;

/// Optical and microwave calibration constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationParams {
    /// Γ per laser power before the objective, kHz/mW.
    pub r_khz_per_mw: f64,
    pub r_sigma: f64,
    /// Rabi frequency per √(MW power), rad/µs per √mW.
    pub rabi_per_sqrt_mw: f64,
    pub rabi_sigma: f64,
    /// NV⁻ absorption cross-section at 532 nm, cm².
    pub cross_section_cm2: f64,
    pub cross_section_sigma: f64,
    pub wavelength_nm: f64,
    /// Objective, surface and in-sample transmission, multiplied.
    pub transmission: f64,
    /// Ground–singlet splitting, THz.
    pub omega_gs_thz: f64,
    pub omega_gs_sigma: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self {
            r_khz_per_mw: 436.0,
            r_sigma: 25.0,
            rabi_per_sqrt_mw: TWO_PI * 0.244,
            rabi_sigma: TWO_PI * 0.002,
            cross_section_cm2: 3.1e-17,
            cross_section_sigma: 0.8e-17,
            wavelength_nm: 532.0,
            transmission: 0.81 * 0.83 * 0.45,
            omega_gs_thz: 89.0,
            omega_gs_sigma: 10.0,
        }
    }
}

impl CalibrationParams {
    /// Rabi frequency (rad/µs) for a microwave power in mW.
    pub fn rabi_frequency(&self, mw_power_mw: f64) -> f64 {
        self.rabi_per_sqrt_mw * mw_power_mw.max(0.0).sqrt()
    }
}

/// Γ in MHz for a laser power in mW.
pub fn pump_rate(power_mw: f64, r_khz_per_mw: f64) -> f64 {
    r_khz_per_mw * power_mw * 1e-3
}

/// Focal spot diameter (µm) implied by a measured Γ-per-power ratio: r = ς·T/(A·ε_L).
pub fn spot_diameter_um(r_khz_per_mw: f64, cal: &CalibrationParams) -> f64 {
    const H: f64 = 6.626_070_15e-34;
    const C: f64 = 299_792_458.0;
    let photon = H * C / (cal.wavelength_nm * 1e-9);
    // kHz/mW → 1/(s·W) = 1/J
    let r_si = r_khz_per_mw * 1e6;
    let area = cal.cross_section_cm2 * 1e-4 * cal.transmission / (r_si * photon);
    (4.0 * area / std::f64::consts::PI).sqrt() * 1e6
}

/// Steady-state excited population Ω_E·σ at optical pump rate `pump` (MHz).
pub fn saturation_fluorescence(rc: &RateConstants, pump: f64) -> Result<f64> {
    if pump == 0.0 {
        return Ok(0.0);
    }
    let m = optical_matrix(&rc.with_pump(pump))?;
    Ok(fluorescence_rate(&steady_state(&m)?))
}

pub fn saturation_curve(rc: &RateConstants, r_khz_per_mw: f64, powers: &[f64]) -> Result<Vec<f64>> {
    powers
        .iter()
        .map(|&p| saturation_fluorescence(rc, pump_rate(p, r_khz_per_mw)))
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Convergence when every parameter step is below this relative size.
    pub rel_tol: f64,
    /// Starting r; `None` scans 10–10⁵ kHz/mW on a log grid.
    pub initial_r: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_tol: 1e-10,
            initial_r: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationFit {
    pub r_khz_per_mw: f64,
    pub r_sigma: f64,
    /// Counts per unit excited population.
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    pub n_points: usize,
}

/// Least-squares fit of A·Ω_E·σ_ss(Γ = r·P) to (power mW, counts) pairs.
///
/// Uncertainties come from the residual-scaled covariance s²·(JᵀJ)⁻¹.
pub fn fit_gamma_calibration(
    data: &[(f64, f64)],
    rc: &RateConstants,
    opts: &FitOptions,
) -> Result<CalibrationFit> {
    if data.len() < 5 {
        return Err(Error::Domain(format!(
            "calibration fit needs at least 5 points, got {}",
            data.len()
        )));
    }
    for &(p, y) in data {
        if !(p.is_finite() && y.is_finite()) || p < 0.0 {
            return Err(Error::Domain(format!(
                "invalid calibration point ({p}, {y})"
            )));
        }
    }
    let powers: Vec<f64> = data.iter().map(|d| d.0).collect();
    let counts: Vec<f64> = data.iter().map(|d| d.1).collect();

    let shape = |r: f64| saturation_curve(rc, r, &powers);
    let best_amplitude = |f: &[f64]| {
        let num: f64 = f.iter().zip(&counts).map(|(a, b)| a * b).sum();
        let den: f64 = f.iter().map(|a| a * a).sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    let ssr = |f: &[f64], a: f64| -> f64 {
        f.iter()
            .zip(&counts)
            .map(|(fi, yi)| (a * fi - yi).powi(2))
            .sum()
    };

    let mut r = match opts.initial_r {
        Some(r) if r > 0.0 => r,
        Some(r) => {
            return Err(Error::Domain(format!(
                "initial r must be positive, got {r}"
            )))
        }
        None => {
            let mut best = (f64::INFINITY, 436.0);
            for k in 0..=48 {
                let r = 10f64.powf(1.0 + 4.0 * k as f64 / 48.0);
                let f = shape(r)?;
                let a = best_amplitude(&f);
                let s = ssr(&f, a);
                if s < best.0 {
                    best = (s, r);
                }
            }
            best.1
        }
    };
    let f0 = shape(r)?;
    let mut a = best_amplitude(&f0);
    let mut f = f0;
    let mut cost = ssr(&f, a);

    let jacobian = |r: f64, a: f64, f: &[f64]| -> Result<Vec<[f64; 2]>> {
        let h = 1e-6 * r;
        let fp = shape(r + h)?;
        let fm = shape(r - h)?;
        Ok(f.iter()
            .enumerate()
            .map(|(i, &fi)| [a * (fp[i] - fm[i]) / (2.0 * h), fi])
            .collect())
    };

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iterations {
        iterations = it;
        let j = jacobian(r, a, &f)?;
        let mut jtj = Matrix2::<f64>::zeros();
        let mut jte = Vector2::<f64>::zeros();
        for (ji, (fi, yi)) in j.iter().zip(f.iter().zip(&counts)) {
            let e = a * fi - yi;
            for p in 0..2 {
                jte[p] += ji[p] * e;
                for q in 0..2 {
                    jtj[(p, q)] += ji[p] * ji[q];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = jtj;
            for p in 0..2 {
                damped[(p, p)] *= 1.0 + lambda;
            }
            let step = match damped.try_inverse() {
                Some(inv) => -(inv * jte),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let r_new = r + step[0];
            if r_new <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let a_new = a + step[1];
            let f_new = shape(r_new)?;
            let c_new = ssr(&f_new, a_new);
            if c_new <= cost {
                let small = step[0].abs() <= opts.rel_tol * r.abs()
                    && step[1].abs() <= opts.rel_tol * a.abs().max(f64::MIN_POSITIVE);
                r = r_new;
                a = a_new;
                f = f_new;
                cost = c_new;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                converged = small || cost == 0.0;
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No downhill step at any damping: a minimum to working precision.
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Fit {
            iterations,
            residual: cost.sqrt(),
        });
    }

    let j = jacobian(r, a, &f)?;
    let mut jtj = Matrix2::<f64>::zeros();
    for ji in &j {
        for p in 0..2 {
            for q in 0..2 {
                jtj[(p, q)] += ji[p] * ji[q];
            }
        }
    }
    let s2 = cost / (data.len() - 2) as f64;
    let cov = jtj.try_inverse().ok_or(Error::Fit {
        iterations,
        residual: cost.sqrt(),
    })? * s2;
    Ok(CalibrationFit {
        r_khz_per_mw: r,
        r_sigma: cov[(0, 0)].max(0.0).sqrt(),
        amplitude: a,
        amplitude_sigma: cov[(1, 1)].max(0.0).sqrt(),
        iterations,
        residual_norm: cost.sqrt(),
        n_points: data.len(),
    })
}
