use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{eig_real, mat_exp_real, spectral_norm_real, RMatrix, RVector};
use crate::nv_model::{optical_matrix, RateConstants, E0, EM1, EP1, G0, GM1, GP1, N_LEVELS, S};

/// Expansion point for L(Γ) ≈ L₀ + (Γ − Γ_ref)·L₁, MHz.
pub const GAMMA_REF: f64 = 0.5;
/// Central finite-difference step for L₁, MHz.
pub const FD_STEP: f64 = 0.01;
/// Slow/fast classification must separate the groups by at least this factor.
pub const MIN_PARTITION_MARGIN: f64 = 2.0;

/// Selects the reduced levels from the seven-level basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionProjector {
    pub levels: [usize; 4],
}

impl Default for ReductionProjector {
    fn default() -> Self {
        Self {
            levels: [G0, GM1, GP1, S],
        }
    }
}

impl ReductionProjector {
    pub fn matrix(&self) -> RMatrix {
        let mut p = RMatrix::zeros(4, N_LEVELS);
        for (row, &lvl) in self.levels.iter().enumerate() {
            p[(row, lvl)] = 1.0;
        }
        p
    }
}

/// The four slow and three fast eigenpairs of M.
#[derive(Debug, Clone)]
pub struct SlowFastPartition {
    /// Slow eigenvalues, descending (the first is the stationary mode, ≈ 0).
    pub slow_values: Vec<f64>,
    /// Slow eigenvectors as columns (7×4), unit norm, largest component positive.
    pub slow_vectors: RMatrix,
    pub fast_values: Vec<f64>,
    pub fast_vectors: RMatrix,
    /// Smallest fast excited weight over largest slow excited weight.
    pub margin: f64,
}

fn excited_weight(v: nalgebra::DVectorView<'_, f64>) -> f64 {
    let max = v.amax();
    let exc = [E0, EM1, EP1]
        .iter()
        .map(|&i| v[i].abs())
        .fold(0.0, f64::max);
    exc / max
}

/// Split M's eigenpairs by the weight of their excited-state components.
pub fn partition_eigenpairs(m: &RMatrix) -> Result<SlowFastPartition> {
    if m.nrows() != N_LEVELS || m.ncols() != N_LEVELS {
        return Err(Error::Dimension(format!(
            "optical generator must be 7×7, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let dec = eig_real(m)?;
    let scale = spectral_norm_real(m);
    for (i, l) in dec.values.iter().enumerate() {
        if l.im.abs() > 1e-9 * scale {
            return Err(Error::Degeneracy(format!(
                "eigenvalue {i} of the optical generator is complex ({l})"
            )));
        }
    }
    let vecs = dec.vectors.map(|z| z.re);
    let mut weights: Vec<(f64, usize)> = (0..N_LEVELS)
        .map(|i| (excited_weight(vecs.column(i)), i))
        .collect();
    weights.sort_by(|a, b| a.0.total_cmp(&b.0));
    let margin = if weights[3].0 == 0.0 {
        f64::INFINITY
    } else {
        weights[4].0 / weights[3].0
    };
    if margin < MIN_PARTITION_MARGIN {
        return Err(Error::Partition {
            margin,
            required: MIN_PARTITION_MARGIN,
        });
    }
    // Keep descending-eigenvalue order inside each group.
    let mut slow: Vec<usize> = weights[..4].iter().map(|w| w.1).collect();
    let mut fast: Vec<usize> = weights[4..].iter().map(|w| w.1).collect();
    slow.sort_unstable();
    fast.sort_unstable();
    let pick = |idx: &[usize]| {
        let cols: Vec<RVector> = idx.iter().map(|&i| vecs.column(i).into_owned()).collect();
        (
            idx.iter().map(|&i| dec.values[i].re).collect::<Vec<_>>(),
            RMatrix::from_columns(&cols),
        )
    };
    let (slow_values, slow_vectors) = pick(&slow);
    let (fast_values, fast_vectors) = pick(&fast);
    Ok(SlowFastPartition {
        slow_values,
        slow_vectors,
        fast_values,
        fast_vectors,
        margin,
    })
}

/// Reduced 4×4 generator in the order {G₀, G₋₁, G₊₁, S}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalOperator {
    pub matrix: RMatrix,
    /// Optical pump rate Γ the operator was built at, MHz.
    pub pump: f64,
    pub conservation_corrected: bool,
}

impl ThermalOperator {
    /// Subtract each column's residual sum from its diagonal entry.
    pub fn corrected(&self) -> Self {
        let mut l = self.matrix.clone();
        for j in 0..4 {
            let s = l.column(j).sum();
            l[(j, j)] -= s;
        }
        Self {
            matrix: l,
            pump: self.pump,
            conservation_corrected: true,
        }
    }

    /// Descriptions of every violated thermal-operator requirement (empty if none).
    ///
    /// Off-diagonals non-negative, diagonals non-positive, zero column sums when
    /// corrected, and upward rates no larger than downward ones (levels are
    /// ordered by energy: G₀ < G₋₁ ≈ G₊₁ < S).
    pub fn violations(&self, tol: f64) -> Vec<String> {
        let l = &self.matrix;
        let mut out = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if i != j && l[(i, j)] < -tol {
                    out.push(format!("L[{i},{j}] = {:.3e} < 0", l[(i, j)]));
                }
                if i > j && l[(i, j)] > l[(j, i)] + tol {
                    out.push(format!(
                        "upward rate L[{i},{j}] = {:.4} exceeds downward L[{j},{i}] = {:.4}",
                        l[(i, j)],
                        l[(j, i)]
                    ));
                }
            }
            if l[(i, i)] > tol {
                out.push(format!("L[{i},{i}] = {:.3e} > 0", l[(i, i)]));
            }
            if self.conservation_corrected && l.column(i).sum().abs() > 1e-10 {
                out.push(format!("column {i} sums to {:.3e}", l.column(i).sum()));
            }
        }
        out
    }
}

/// L from the slow eigenpairs without the conservation correction.
pub fn build_l_uncorrected(m: &RMatrix, proj: &ReductionProjector) -> Result<ThermalOperator> {
    let part = partition_eigenpairs(m)?;
    let s = proj.matrix() * &part.slow_vectors;
    let sv = s.clone().svd(false, false).singular_values;
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::Reduction);
    }
    let s_inv = s.clone().try_inverse().ok_or(Error::Reduction)?;
    let lambda = RMatrix::from_diagonal(&RVector::from_vec(part.slow_values.clone()));
    let pump = pump_of(m);
    Ok(ThermalOperator {
        matrix: &s * lambda * s_inv,
        pump,
        conservation_corrected: false,
    })
}

/// Conservation-corrected L.
pub fn build_l(m: &RMatrix, proj: &ReductionProjector) -> Result<ThermalOperator> {
    Ok(build_l_uncorrected(m, proj)?.corrected())
}

// Γ can be read back from the G₀ → E₀ entry of M.
fn pump_of(m: &RMatrix) -> f64 {
    m[(E0, G0)]
}

/// Corrected L(Γ) for the given rates.
pub fn thermal_operator(rc: &RateConstants, pump: f64) -> Result<ThermalOperator> {
    build_l(
        &optical_matrix(&rc.with_pump(pump))?,
        &ReductionProjector::default(),
    )
}

/// L(Γ) ≈ L₀ + (Γ − Γ_ref)·L₁ with L₁ by central differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expansion {
    pub gamma_ref: f64,
    pub l0: RMatrix,
    pub l1: RMatrix,
    pub conservation_corrected: bool,
}

impl Expansion {
    pub fn new(rc: &RateConstants, gamma_ref: f64, step: f64, corrected: bool) -> Result<Self> {
        if !(step > 0.0 && step < gamma_ref) {
            return Err(Error::Domain(format!(
                "finite-difference step {step} must lie in (0, Γ_ref = {gamma_ref})"
            )));
        }
        let op = |g: f64| -> Result<RMatrix> {
            let m = optical_matrix(&rc.with_pump(g))?;
            let l = build_l_uncorrected(&m, &ReductionProjector::default())?;
            Ok(if corrected {
                l.corrected().matrix
            } else {
                l.matrix
            })
        };
        let l0 = op(gamma_ref)?;
        let l1 = (op(gamma_ref + step)? - op(gamma_ref - step)?) / (2.0 * step);
        Ok(Self {
            gamma_ref,
            l0,
            l1,
            conservation_corrected: corrected,
        })
    }

    pub fn at(&self, pump: f64) -> RMatrix {
        &self.l0 + &self.l1 * (pump - self.gamma_ref)
    }
}

/// Seven-level start state with `excited` population spread evenly over the
/// excited levels and the rest evenly over the reduced levels.
pub fn initial_state(excited: f64) -> RVector {
    let mut s = RVector::zeros(N_LEVELS);
    for i in [G0, GM1, GP1, S] {
        s[i] = (1.0 - excited) / 4.0;
    }
    for i in [E0, EM1, EP1] {
        s[i] = excited / 3.0;
    }
    s
}

/// Percentage population difference ‖P·e^{Mt}σ₀ − e^{Lt}·Pσ₀‖₁ × 100.
pub fn emulation_error(m: &RMatrix, l: &RMatrix, sigma0: &RVector, t: f64) -> Result<f64> {
    let p = ReductionProjector::default().matrix();
    let full = &p * mat_exp_real(m, t)? * sigma0;
    let reduced = mat_exp_real(l, t)? * (&p * sigma0);
    Ok(100.0 * (full - reduced).iter().map(|x| x.abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmulationPoint {
    pub pump: f64,
    pub t: f64,
    pub percent_error: f64,
}

/// Emulation error over a (Γ, t) grid; L is rebuilt at every Γ.
pub fn emulation_error_surface(
    rc: &RateConstants,
    corrected: bool,
    sigma0: &RVector,
    t_grid: &[f64],
    gamma_grid: &[f64],
) -> Result<Vec<EmulationPoint>> {
    let rows: Vec<Result<Vec<EmulationPoint>>> = gamma_grid
        .par_iter()
        .map(|&g| {
            let m = optical_matrix(&rc.with_pump(g))?;
            let l = build_l_uncorrected(&m, &ReductionProjector::default())?;
            let l = if corrected { l.corrected() } else { l };
            t_grid
                .iter()
                .map(|&t| {
                    Ok(EmulationPoint {
                        pump: g,
                        t,
                        percent_error: emulation_error(&m, &l.matrix, sigma0, t)?,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(t_grid.len() * gamma_grid.len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Effective coupling rates of the two emulated baths, MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BathRates {
    /// G±₁ ↔ S, both directions, both pairs.
    pub hot: f64,
    /// G₀ ↔ S, both directions.
    pub cold: f64,
}

pub fn bath_rates(l: &ThermalOperator) -> BathRates {
    let m = &l.matrix;
    BathRates {
        cold: m[(0, 3)] + m[(3, 0)],
        hot: m[(1, 3)] + m[(3, 1)] + m[(2, 3)] + m[(3, 2)],
    }
}

/// Γ-independent part of L: singlet decay into the ground levels.
pub fn singlet_decay_operator(rc: &RateConstants) -> RMatrix {
    let mut l = RMatrix::zeros(4, 4);
    l[(0, 3)] = rc.ks0;
    l[(1, 3)] = 0.5 * rc.ks1;
    l[(2, 3)] = 0.5 * rc.ks1;
    l[(3, 3)] = -(rc.ks0 + rc.ks1);
    l
}

/// Spectral norm of the pump-driven part of L(Γ), MHz.
pub fn population_transfer_rate(rc: &RateConstants, pump: f64) -> Result<f64> {
    let l = thermal_operator(rc, pump)?;
    Ok(spectral_norm_real(&(l.matrix - singlet_decay_operator(rc))))
}
