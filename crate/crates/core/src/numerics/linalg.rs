use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{CMatrix, RMatrix, C64};
use crate::error::{Error, Result};

/// Eigenvector matrices with a larger 2-norm condition number are treated as
/// defective.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Eigenpairs of a square matrix.
///
/// Eigenvalues are ordered by descending real part (ties broken by descending
/// imaginary part). Each eigenvector has unit 2-norm and its largest-magnitude
/// component is real and positive.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: CMatrix,
    /// 2-norm condition number of `vectors`.
    pub condition: f64,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, i: usize) -> nalgebra::DVector<C64> {
        self.vectors.column(i).into_owned()
    }

    /// U·diag(λ)·U⁻¹.
    pub fn reconstruct(&self) -> Result<CMatrix> {
        let inv = self
            .vectors
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degeneracy("eigenvector matrix is singular".into()))?;
        let d = CMatrix::from_diagonal(&DVector::from_vec(self.values.clone()));
        Ok(&self.vectors * d * inv)
    }
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn check_finite(m: &CMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_finite_real(m: &RMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn require_square(rows: usize, cols: usize, op: &str) -> Result<()> {
    if rows != cols {
        return Err(Error::Dimension(format!(
            "{op} needs a square matrix, got {rows}×{cols}"
        )));
    }
    Ok(())
}

/// exp(A·t) by scaling-and-squaring with Padé approximants.
pub fn mat_exp(a: &CMatrix, t: f64) -> Result<CMatrix> {
    require_square(a.nrows(), a.ncols(), "mat_exp")?;
    check_finite(a, "mat_exp input")?;
    if !t.is_finite() {
        return Err(Error::Domain(format!(
            "mat_exp time must be finite, got {t}"
        )));
    }
    if t == 0.0 || a.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(CMatrix::identity(a.nrows(), a.ncols()));
    }
    let out = (a * Complex64::new(t, 0.0)).exp();
    check_finite(&out, "mat_exp output")?;
    Ok(out)
}

/// Real counterpart of [`mat_exp`].
pub fn mat_exp_real(a: &RMatrix, t: f64) -> Result<RMatrix> {
    require_square(a.nrows(), a.ncols(), "mat_exp")?;
    check_finite_real(a, "mat_exp input")?;
    if !t.is_finite() {
        return Err(Error::Domain(format!(
            "mat_exp time must be finite, got {t}"
        )));
    }
    if t == 0.0 || a.iter().all(|&x| x == 0.0) {
        return Ok(RMatrix::identity(a.nrows(), a.ncols()));
    }
    let out = (a * t).exp();
    check_finite_real(&out, "mat_exp output")?;
    Ok(out)
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn spectral_norm_real(a: &RMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

fn condition_number(v: &CMatrix) -> f64 {
    let sv = v.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Full eigendecomposition of a general complex matrix.
///
/// The complex Schur form A = Q·T·Q* is computed first; eigenvectors of the
/// triangular factor follow by back-substitution and are rotated back with Q.
pub fn eig(a: &CMatrix) -> Result<EigenDecomposition> {
    let n = a.nrows();
    require_square(n, a.ncols(), "eig")?;
    check_finite(a, "eig input")?;
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
            condition: 1.0,
        });
    }

    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Degeneracy("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();

    // Back-substitution floor, as in LAPACK's xTREVC.
    let smin = (f64::EPSILON * scale).max(f64::MIN_POSITIVE * 1e3);

    let mut vecs = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        values.push(lambda);
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < smin {
                denom = C64::new(smin, 0.0);
            }
            y[i] = -acc / denom;
        }
        let yv = DVector::from_vec(y);
        let v = &q * yv;
        vecs.set_column(k, &normalize_phase(v));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .re
            .partial_cmp(&values[i].re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                values[j]
                    .im
                    .partial_cmp(&values[i].im)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
    let values: Vec<C64> = order.iter().map(|&i| values[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &vecs.column(src));
    }

    let condition = condition_number(&vectors);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::Degeneracy(format!(
            "eigenvector matrix condition number {condition:.3e} exceeds {CONDITION_LIMIT:.0e}"
        )));
    }
    Ok(EigenDecomposition {
        values,
        vectors,
        condition,
    })
}

/// Eigenvalues only (diagonal of the complex Schur form), unordered.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    require_square(a.nrows(), a.ncols(), "eigenvalues")?;
    check_finite(a, "eigenvalues input")?;
    if a.nrows() == 0 {
        return Ok(vec![]);
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Degeneracy("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..a.nrows()).map(|i| t[(i, i)]).collect())
}

pub fn eig_real(a: &RMatrix) -> Result<EigenDecomposition> {
    eig(&to_complex(a))
}

/// Unit 2-norm, largest-magnitude component rotated onto the positive real axis.
fn normalize_phase(v: DVector<C64>) -> DVector<C64> {
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    let v = v / C64::new(norm, 0.0);
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // First component within rounding of the maximum, so ties resolve by index.
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-9))
        .unwrap_or(0);
    let phase = v[pivot] / C64::new(v[pivot].norm(), 0.0);
    v / phase
}

/// A⁻ = U·D⁻·U⁻¹ with D⁻ᵢᵢ = 1/Dᵢᵢ when |Dᵢᵢ| > `zero_tol`, else 0.
///
/// `zero_tol` defaults to 1e-9·max|Dᵢᵢ|.
pub fn pseudo_inverse(a: &CMatrix, zero_tol: Option<f64>) -> Result<CMatrix> {
    let dec = eig(a)?;
    let max = dec.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = zero_tol.unwrap_or(1e-9 * max);
    let inv_vals: Vec<C64> = dec
        .values
        .iter()
        .map(|&d| {
            if d.norm() > tol {
                C64::new(1.0, 0.0) / d
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let u_inv = dec
        .vectors
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degeneracy("eigenvector matrix is singular".into()))?;
    let d = DMatrix::from_diagonal(&DVector::from_vec(inv_vals));
    Ok(&dec.vectors * d * u_inv)
}

/// Real part of [`pseudo_inverse`] for real input (eigenvectors of a real
/// matrix come in conjugate pairs, so the imaginary part is rounding noise).
pub fn pseudo_inverse_real(a: &RMatrix, zero_tol: Option<f64>) -> Result<RMatrix> {
    let p = pseudo_inverse(&to_complex(a), zero_tol)?;
    Ok(p.map(|z| z.re))
}
