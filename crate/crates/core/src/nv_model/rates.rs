use nalgebra::{DVector, SVD};
use serde::{Deserialize, Serialize};

use super::{E0, EM1, EP1, EXCITED_PROJECTOR, G0, GM1, GP1, N_LEVELS, S};
use crate::error::{Error, Result};
use crate::numerics::{RMatrix, RVector};

/// Spontaneous decay rates and the optical pump rate, all in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateConstants {
    /// Radiative decay E → G (spin conserving).
    pub gamma: f64,
    /// Intersystem crossing E±1 → S.
    pub k1s: f64,
    /// Intersystem crossing E0 → S.
    pub k0s: f64,
    /// Singlet decay S → G0.
    pub ks0: f64,
    /// Singlet decay S → G±1, split evenly between the two.
    pub ks1: f64,
    /// Optical excitation rate Γ (G → E, spin conserving).
    pub pump: f64,
}

impl Default for RateConstants {
    fn default() -> Self {
        Self {
            gamma: 65.9,
            k1s: 53.3,
            k0s: 7.9,
            ks0: 0.98,
            ks1: 0.73,
            pump: 0.5,
        }
    }
}

/// One-standard-deviation uncertainties of the default rates.
pub const RATE_SIGMAS: RateConstants = RateConstants {
    gamma: 1.9,
    k1s: 2.5,
    k0s: 1.4,
    ks0: 0.31,
    ks1: 0.11,
    pump: 0.0,
};

impl RateConstants {
    pub fn with_pump(self, pump: f64) -> Self {
        Self { pump, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("gamma", self.gamma),
            ("k1s", self.k1s),
            ("k0s", self.k0s),
            ("ks0", self.ks0),
            ("ks1", self.ks1),
            ("pump", self.pump),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!("rate {name} must be ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Rate matrix R with R[(i, j)] = rate i → j.
pub fn build_rate_matrix(rc: &RateConstants) -> Result<RMatrix> {
    rc.validate()?;
    let mut r = RMatrix::zeros(N_LEVELS, N_LEVELS);
    for (g, e) in [(G0, E0), (GM1, EM1), (GP1, EP1)] {
        r[(g, e)] = rc.pump;
        r[(e, g)] = rc.gamma;
    }
    r[(E0, S)] = rc.k0s;
    r[(EM1, S)] = rc.k1s;
    r[(EP1, S)] = rc.k1s;
    r[(S, G0)] = rc.ks0;
    r[(S, GM1)] = 0.5 * rc.ks1;
    r[(S, GP1)] = 0.5 * rc.ks1;
    Ok(r)
}

/// Population generator from a rate matrix: M = Rᵀ − diag(row sums of R).
pub fn build_m(r: &RMatrix) -> RMatrix {
    let mut m = r.transpose();
    for i in 0..r.nrows() {
        let out: f64 = r.row(i).sum();
        m[(i, i)] -= out;
    }
    m
}

/// Zero-field optical generator M for the given rates.
pub fn optical_matrix(rc: &RateConstants) -> Result<RMatrix> {
    Ok(build_m(&build_rate_matrix(rc)?))
}

/// Orthonormal basis (columns) of the numerical null space of `m`.
///
/// Singular values below `rel_tol·σ_max` count as zero.
pub fn null_space(m: &RMatrix, rel_tol: f64) -> RMatrix {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let cols: Vec<RVector> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= rel_tol * smax)
        .map(|i| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        return RMatrix::zeros(n, 0);
    }
    RMatrix::from_columns(&cols)
}

/// Normalised stationary populations of a conservative generator.
pub fn steady_state(m: &RMatrix) -> Result<RVector> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "generator must be square, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("generator"));
    }
    let ns = null_space(m, 1e-11);
    match ns.ncols() {
        0 => Err(Error::Degeneracy(
            "generator has no stationary state (column sums not zero?)".into(),
        )),
        1 => {
            let v = ns.column(0);
            let sum: f64 = v.sum();
            if sum.abs() < 1e-12 {
                return Err(Error::Degeneracy("null vector has zero population".into()));
            }
            let mut p: RVector = v / sum;
            let min = p.min();
            if min < -1e-10 {
                return Err(Error::Domain(format!(
                    "stationary state has negative population {min:.3e}"
                )));
            }
            p.apply(|x| *x = x.max(0.0));
            let s = p.sum();
            Ok(p / s)
        }
        k => Err(Error::Degeneracy(format!(
            "{k}-dimensional stationary subspace; the steady state depends on the initial state"
        ))),
    }
}

/// Ω_E·σ, proportional to the fluorescence rate.
pub fn fluorescence_rate(sigma: &RVector) -> f64 {
    DVector::from_row_slice(&EXCITED_PROJECTOR).dot(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{mat_exp_real, ode_propagate, to_complex, OdeOptions};
    use proptest::prelude::*;

    #[test]
    fn rate_matrix_structure() {
        let r = build_rate_matrix(&RateConstants::default()).unwrap();
        assert_eq!(r[(E0, S)], 7.9);
        assert_eq!(r[(EP1, S)], 53.3);
        assert_eq!(r[(S, G0)], 0.98);
        assert!((r[(S, GP1)] - 0.365).abs() < 1e-15);
        // 3 pump + 3 radiative + 3 intersystem + 3 singlet decay
        assert_eq!(r.iter().filter(|&&x| x != 0.0).count(), 12);

        let r0 = build_rate_matrix(&RateConstants::default().with_pump(0.0)).unwrap();
        for g in 0..3 {
            for e in 3..6 {
                assert_eq!(r0[(g, e)], 0.0);
            }
        }
    }

    #[test]
    fn negative_rate_is_rejected() {
        let rc = RateConstants {
            k0s: -1.0,
            ..Default::default()
        };
        assert!(matches!(build_rate_matrix(&rc), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_rates_give_zero_generator() {
        assert_eq!(build_m(&RMatrix::zeros(7, 7)), RMatrix::zeros(7, 7));
    }

    #[test]
    fn zero_pump_has_degenerate_ground_null_space() {
        let m = optical_matrix(&RateConstants::default().with_pump(0.0)).unwrap();
        assert!(matches!(steady_state(&m), Err(Error::Degeneracy(_))));
        let ns = null_space(&m, 1e-11);
        assert_eq!(ns.ncols(), 3);
        for c in ns.column_iter() {
            for i in 3..7 {
                assert!(c[i].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn steady_state_matches_long_time_ode() {
        let m = optical_matrix(&RateConstants::default()).unwrap();
        let ss = steady_state(&m).unwrap();
        let y0 = to_complex(&RMatrix::from_element(7, 1, 1.0 / 7.0))
            .column(0)
            .into_owned();
        let mc = to_complex(&m);
        let opts = OdeOptions::default();
        let y = ode_propagate(|_| mc.clone(), &y0, 0.0, 1e3, &opts).unwrap();
        for i in 0..7 {
            assert!((y[i].re - ss[i]).abs() < 1e-8, "level {i}");
        }
    }

    #[test]
    fn fluorescence_of_pure_states() {
        let mut g = RVector::zeros(7);
        g[G0] = 1.0;
        assert_eq!(fluorescence_rate(&g), 0.0);
        let mut e = RVector::zeros(7);
        e[E0] = 0.5;
        e[EP1] = 0.5;
        assert_eq!(fluorescence_rate(&e), 1.0);
    }

    fn arb_rates() -> impl Strategy<Value = RateConstants> {
        (
            10.0..120.0f64,
            1.0..80.0f64,
            0.5..20.0f64,
            0.1..3.0f64,
            0.05..2.0f64,
            0.01..5.0f64,
        )
            .prop_map(|(gamma, k1s, k0s, ks0, ks1, pump)| RateConstants {
                gamma,
                k1s,
                k0s,
                ks0,
                ks1,
                pump,
            })
    }

    proptest! {
        #[test]
        fn generator_is_conservative(rc in arb_rates()) {
            let m = optical_matrix(&rc).unwrap();
            for j in 0..7 {
                prop_assert!(m.column(j).sum().abs() < 1e-12);
                for i in 0..7 {
                    if i != j { prop_assert!(m[(i, j)] >= 0.0); }
                }
            }
        }

        #[test]
        fn steady_state_is_a_distribution(rc in arb_rates()) {
            let m = optical_matrix(&rc).unwrap();
            let ss = steady_state(&m).unwrap();
            prop_assert!((ss.sum() - 1.0).abs() < 1e-9);
            prop_assert!(ss.iter().all(|&x| x >= -1e-12));
            prop_assert!((&m * &ss).amax() < 1e-9);
        }

        #[test]
        fn exponential_preserves_population(rc in arb_rates(), t in 0.0..20.0f64) {
            let m = optical_matrix(&rc).unwrap();
            let e = mat_exp_real(&m, t).unwrap();
            for j in 0..7 {
                prop_assert!((e.column(j).sum() - 1.0).abs() < 1e-10);
            }
        }
    }
}
