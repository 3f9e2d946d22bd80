use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::N_LEVELS;
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, RMatrix, C64};
use crate::TWO_PI;

/// Ground-state zero-field parameter as tabulated, rad/µs (2π × 2870/3 MHz).
pub const D_GS_TABLE: f64 = TWO_PI * 2870.0 / 3.0;
/// Excited-state zero-field parameter as tabulated, rad/µs (2π × 1440/3 MHz).
pub const D_ES_TABLE: f64 = TWO_PI * 1440.0 / 3.0;

/// How the tabulated zero-field parameters enter `D·S_z²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZfsMode {
    /// Use the tabulated values as they stand (zero-field gap 2π × 957 MHz).
    TableS2,
    /// Scale by 3 so the ground zero-field gap is 2π × 2.87 GHz.
    #[default]
    #[serde(rename = "physical_2.87GHz", alias = "physical")]
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    Ground,
    Excited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpinParams {
    pub g: f64,
    /// Bohr magneton in rad/µs per tesla.
    pub mu_b: f64,
    pub zfs_mode: ZfsMode,
    /// Field magnitude, T.
    pub b: f64,
    /// Field angle from the NV axis, degrees.
    pub theta_deg: f64,
}

impl Default for SpinParams {
    fn default() -> Self {
        Self {
            g: 2.0,
            mu_b: TWO_PI * 14_000.0,
            zfs_mode: ZfsMode::Physical,
            b: 0.2,
            theta_deg: 0.6,
        }
    }
}

impl SpinParams {
    pub fn with_field(self, b: f64) -> Self {
        Self { b, ..self }
    }

    pub fn d(&self, manifold: Manifold) -> f64 {
        let table = match manifold {
            Manifold::Ground => D_GS_TABLE,
            Manifold::Excited => D_ES_TABLE,
        };
        match self.zfs_mode {
            ZfsMode::TableS2 => table,
            ZfsMode::Physical => 3.0 * table,
        }
    }
}

/// D·S_z² + gμ_B B⃗·S⃗ in the S_z basis {+1, 0, −1}, rad/µs.
pub fn spin_hamiltonian(sp: &SpinParams, manifold: Manifold) -> CMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64| C64::new(x, 0.0);
    let sx = CMatrix::from_row_slice(
        3,
        3,
        &[
            c(0.0),
            c(r),
            c(0.0),
            c(r),
            c(0.0),
            c(r),
            c(0.0),
            c(r),
            c(0.0),
        ],
    );
    // The field lies in the x–z plane, so S_y never enters.
    let sz = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(0.0), c(-1.0)]));
    let th = sp.theta_deg.to_radians();
    let zeeman = sp.g * sp.mu_b * sp.b;
    &sz * &sz * c(sp.d(manifold)) + (sx * c(th.sin()) + sz * c(th.cos())) * c(zeeman)
}

// Model order within a manifold is (m_s = 0, −1, +1); S_z basis order is (+1, 0, −1).
const MODEL_TO_SZ: [usize; 3] = [1, 2, 0];

/// Overlap weights |⟨k|ψᵢ⟩|² and energies of the field eigenstates.
///
/// Row i belongs to the eigenstate labelled as model level i (0, −1, +1) by
/// largest zero-field overlap; column k is zero-field level k. At B = 0 the
/// zero-field states are the eigenbasis and the identity is returned.
pub fn level_mixing(sp: &SpinParams, manifold: Manifold) -> Result<(RMatrix, [f64; 3])> {
    let h = spin_hamiltonian(sp, manifold);
    if sp.b == 0.0 {
        let e = [0, 1, 2].map(|k| h[(MODEL_TO_SZ[k], MODEL_TO_SZ[k])].re);
        return Ok((RMatrix::identity(3, 3), e));
    }
    let eig = SymmetricEigen::new(h);
    let vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    let mut sorted = vals.clone();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        if w[1] - w[0] < 1e-6 {
            return Err(Error::Degeneracy(format!(
                "{manifold:?} spin levels cross at B = {} T (gap {:.2e} rad/µs); perturb the field",
                sp.b,
                w[1] - w[0]
            )));
        }
    }

    let mut weights = RMatrix::zeros(3, 3);
    let mut energies = [0.0; 3];
    let mut taken = [false; 3];
    #[allow(clippy::needless_range_loop)] // col indexes both eigenvectors and eigenvalues
    for col in 0..3 {
        let v = eig.eigenvectors.column(col);
        let overlaps = [0, 1, 2].map(|k| v[MODEL_TO_SZ[k]].norm_sqr());
        let label = (0..3)
            .max_by(|&a, &b| overlaps[a].total_cmp(&overlaps[b]))
            .expect("three levels");
        if taken[label] {
            return Err(Error::Degeneracy(format!(
                "two {manifold:?} eigenstates map onto the same zero-field level at B = {} T",
                sp.b
            )));
        }
        taken[label] = true;
        for k in 0..3 {
            weights[(label, k)] = overlaps[k];
        }
        energies[label] = vals[col];
    }
    Ok((weights, energies))
}

/// Rates in the field eigenbasis: R → |U|² R |U|²ᵀ with |U|² block diagonal.
pub fn zeeman_transform(r: &RMatrix, sp: &SpinParams) -> Result<RMatrix> {
    if r.nrows() != N_LEVELS || r.ncols() != N_LEVELS {
        return Err(Error::Dimension(format!(
            "rate matrix must be 7×7, got {}×{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let (wg, _) = level_mixing(sp, Manifold::Ground)?;
    let (we, _) = level_mixing(sp, Manifold::Excited)?;
    let mut w = RMatrix::identity(N_LEVELS, N_LEVELS);
    w.view_mut((0, 0), (3, 3)).copy_from(&wg);
    w.view_mut((3, 3), (3, 3)).copy_from(&we);
    Ok(&w * r * w.transpose())
}
