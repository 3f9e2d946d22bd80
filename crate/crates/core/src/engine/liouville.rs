use nalgebra::DVector;

use super::{CycleConfig, EngineMode};
use crate::error::{Error, Result};
use crate::numerics::{eigenvalues, mat_exp, CMatrix, CVector, RMatrix, C64};
use crate::nv_model::{optical_matrix, RateConstants, N_LEVELS};
use crate::thermal::{thermal_operator, ThermalOperator};

/// Liouville index of ρ₀₁.
pub const R01: usize = 0;
/// Liouville index of ρ₁₀.
pub const R10: usize = 1;
/// Liouville index of ρ₀₀ (G₀).
pub const R00: usize = 2;
/// Liouville index of ρ₁₁ (G₊₁).
pub const R11: usize = 3;

/// Population dynamics acting on the tail of the Liouville vector.
///
/// Either the reduced 4×4 thermal operator on {G₀, G₋₁, G₊₁, S} or the full
/// 7×7 optical generator in model order. Both are mapped into the Liouville
/// basis by the same rule: G₀ → ρ₀₀, G₊₁ → ρ₁₁, G₋₁ → ρ₋₁₋₁, then the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGenerator {
    pub matrix: RMatrix,
    /// Optical pump rate Γ, MHz; also the coherence decay rate while pumping.
    pub pump: f64,
}

impl PopulationGenerator {
    /// Conservation-corrected reduced operator L(Γ).
    pub fn reduced(rc: &RateConstants, pump: f64) -> Result<Self> {
        Ok(Self::from(thermal_operator(rc, pump)?))
    }

    /// Full optical generator M(Γ).
    pub fn full(rc: &RateConstants, pump: f64) -> Result<Self> {
        Ok(Self {
            matrix: optical_matrix(&rc.with_pump(pump))?,
            pump,
        })
    }

    pub fn new(matrix: RMatrix, pump: f64) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || !(n == 4 || n == N_LEVELS) {
            return Err(Error::Dimension(format!(
                "population generator must be 4×4 or 7×7, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !pump.is_finite() || pump < 0.0 {
            return Err(Error::Domain(format!("pump rate must be ≥ 0, got {pump}")));
        }
        Ok(Self { matrix, pump })
    }

    /// Dimension of the Liouville space this generator lives in (6 or 9).
    pub fn dim(&self) -> usize {
        self.matrix.nrows() + 2
    }

    pub fn n_populations(&self) -> usize {
        self.matrix.nrows()
    }
}

impl From<ThermalOperator> for PopulationGenerator {
    fn from(l: ThermalOperator) -> Self {
        Self {
            matrix: l.matrix,
            pump: l.pump,
        }
    }
}

// Population index (model order) to Liouville index.
fn liouville_index(k: usize) -> usize {
    match k {
        0 => R00,
        1 => 4,
        2 => R11,
        k => k + 2,
    }
}

/// The ½-scaled drive operator H_w(Ω, δ) on {ρ₀₁, ρ₁₀, ρ₀₀, ρ₁₁}, zero elsewhere.
pub fn work_superoperator(omega: f64, delta: f64, dim: usize) -> CMatrix {
    let mut h = CMatrix::zeros(dim, dim);
    let block = [
        [-2.0 * delta, 0.0, -omega, omega],
        [0.0, 2.0 * delta, omega, -omega],
        [-omega, omega, 0.0, 0.0],
        [omega, -omega, 0.0, 0.0],
    ];
    for (i, row) in block.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            h[(i, j)] = C64::new(0.5 * v, 0.0);
        }
    }
    h
}

/// Work-stroke generator −i·H_w(Ω, δ).
pub fn work_generator(omega: f64, delta: f64, dim: usize) -> CMatrix {
    work_superoperator(omega, delta, dim) * C64::new(0.0, -1.0)
}

/// Thermal-stroke generator: coherences decay at Γ and precess at δ, populations
/// evolve under the population generator.
pub fn thermal_generator(pg: &PopulationGenerator, delta: f64) -> CMatrix {
    let dim = pg.dim();
    let mut g = work_generator(0.0, delta, dim);
    g[(R01, R01)] -= pg.pump;
    g[(R10, R10)] -= pg.pump;
    let n = pg.n_populations();
    for a in 0..n {
        for b in 0..n {
            g[(liouville_index(a), liouville_index(b))] += pg.matrix[(a, b)];
        }
    }
    g
}

/// Projector removing the coherence block.
pub fn dephasing_projector(dim: usize) -> CMatrix {
    let mut d = CMatrix::identity(dim, dim);
    d[(R01, R01)] = C64::new(0.0, 0.0);
    d[(R10, R10)] = C64::new(0.0, 0.0);
    d
}

/// Stroke propagators of one cycle.
#[derive(Debug, Clone)]
pub struct CyclePropagators {
    /// Work stroke e^{G₁τ_w}; dephased at both ends for the dephased engine.
    pub work: CMatrix,
    pub thermal: CMatrix,
    /// Thermal ∘ work.
    pub cycle: CMatrix,
}

pub(crate) fn stroke_propagators(
    cfg: &CycleConfig,
    pg: &PopulationGenerator,
) -> Result<CyclePropagators> {
    cfg.validate()?;
    let dim = pg.dim();
    let mut work = mat_exp(&work_generator(cfg.omega, cfg.detuning, dim), cfg.tau_w)?;
    let thermal = mat_exp(&thermal_generator(pg, cfg.detuning), cfg.tau_th)?;
    match cfg.mode {
        EngineMode::TwoStroke => {}
        EngineMode::DephasedTwoStroke => {
            let d = dephasing_projector(dim);
            work = &d * work * &d;
        }
        EngineMode::Continuous => {
            return Err(Error::Domain(
                "the continuous engine has no cycle propagator".into(),
            ))
        }
    }
    let cycle = &thermal * &work;
    let cycle = if cfg.mode == EngineMode::DephasedTwoStroke {
        let d = dephasing_projector(dim);
        &d * cycle * &d
    } else {
        cycle
    };
    Ok(CyclePropagators {
        work,
        thermal,
        cycle,
    })
}

/// One-cycle propagator U = e^{G₂τ_th}·e^{G₁τ_w}, with the coherences removed at
/// both stroke boundaries in dephased mode.
pub fn cycle_propagator(cfg: &CycleConfig, pg: &PopulationGenerator) -> Result<CMatrix> {
    Ok(stroke_propagators(cfg, pg)?.cycle)
}

// Solve A·ρ = 0 with the ρ₀₀ equation replaced by unit population sum.
fn bordered_solve(a: &CMatrix) -> Result<CVector> {
    let n = a.nrows();
    let mut b = a.clone();
    for j in 0..n {
        b[(R00, j)] = if j >= R00 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
    }
    let mut rhs = CVector::zeros(n);
    rhs[R00] = C64::new(1.0, 0.0);
    let rho = b
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degeneracy("bordered fixed-point system is singular".into()))?;
    if rho.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::NonFinite("fixed point"));
    }
    Ok(rho)
}

fn normalise(mut rho: CVector) -> CVector {
    let s: C64 = rho.iter().skip(R00).sum();
    rho /= s;
    rho
}

/// Fixed point of a cycle propagator, normalised to unit population sum.
///
/// Fails with a degeneracy error when a second eigenvalue lies within 1e-9 of 1.
pub fn fixed_point(u: &CMatrix) -> Result<CVector> {
    if u.nrows() != u.ncols() || u.nrows() <= R11 {
        return Err(Error::Dimension(format!(
            "cycle propagator must be square with dimension ≥ 4, got {}×{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let near_one = eigenvalues(u)?
        .iter()
        .filter(|z| (*z - C64::new(1.0, 0.0)).norm() < 1e-9)
        .count();
    if near_one > 1 {
        return Err(Error::Degeneracy(format!(
            "{near_one} propagator eigenvalues within 1e-9 of 1; the periodic state is not unique"
        )));
    }
    let a = u - CMatrix::identity(u.nrows(), u.ncols());
    Ok(normalise(bordered_solve(&a)?))
}

/// Fixed point with its residual checked: ‖Uρ − ρ‖∞ ≤ 1e-9.
pub fn periodic_steady_state(u: &CMatrix) -> Result<CVector> {
    let rho = fixed_point(u)?;
    let res = (u * &rho - &rho).camax();
    if res > 1e-9 {
        return Err(Error::Degeneracy(format!(
            "fixed-point residual {res:.3e} exceeds 1e-9"
        )));
    }
    Ok(rho)
}

/// Normalised null vector of a continuous-time generator.
pub fn null_state(g: &CMatrix) -> Result<CVector> {
    if g.nrows() != g.ncols() || g.nrows() <= R11 {
        return Err(Error::Dimension(format!(
            "generator must be square with dimension ≥ 4, got {}×{}",
            g.nrows(),
            g.ncols()
        )));
    }
    let scale = g.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let near_zero = eigenvalues(g)?
        .iter()
        .filter(|z| z.norm() < 1e-9 * scale)
        .count();
    if near_zero > 1 {
        return Err(Error::Degeneracy(format!(
            "{near_zero}-dimensional null space; the steady state is not unique"
        )));
    }
    Ok(normalise(bordered_solve(g)?))
}

/// Time-averaged generator of the continuous engine with duty cycle `d`.
///
/// The drive runs at dΩ and the bath coupling is scaled by (1 − d); the
/// detuning acts all the time.
pub fn continuous_generator(
    omega: f64,
    delta: f64,
    duty: f64,
    pg: &PopulationGenerator,
) -> CMatrix {
    let dim = pg.dim();
    work_generator(omega, 0.0, dim) * C64::new(duty, 0.0)
        + thermal_generator(pg, 0.0) * C64::new(1.0 - duty, 0.0)
        + work_generator(0.0, delta, dim)
}

/// Real part of the populations of a Liouville state, in model order.
pub fn populations(rho: &CVector) -> DVector<f64> {
    let n = rho.len() - 2;
    DVector::from_iterator(n, (0..n).map(|k| rho[liouville_index(k)].re))
}

/// Embed model-order populations into a coherence-free Liouville state.
pub fn population_state(p: &DVector<f64>) -> CVector {
    let mut rho = CVector::zeros(p.len() + 2);
    for k in 0..p.len() {
        rho[liouville_index(k)] = C64::new(p[k], 0.0);
    }
    rho
}
