//! Averages over a Gaussian detuning distribution.
//!
//! [`GaussHermite`] is exact for polynomials and fast for smooth integrands.
//! Engine work as a function of detuning is a comb of narrow resonances, so
//! engine averages go through [`AdaptiveAverage`], a globally adaptive
//! Gauss–Kronrod 7/15 scheme that accepts breakpoints at known resonances.

use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::FWHM_PER_SIGMA;

/// Normal density N(δ; 0, σ).
pub fn gaussian_density(delta: f64, sigma: f64) -> f64 {
    let z = delta / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Gauss–Hermite rule for the weight e^{−x²}, built by Golub–Welsch.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain(
                "Gauss–Hermite needs at least one node".into(),
            ));
        }
        let mut j = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64 / 2.0).sqrt();
            j[(k - 1, k)] = b;
            j[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Symmetrise to remove eigen-solver asymmetry.
        for i in 0..n / 2 {
            let k = n - 1 - i;
            let x = 0.5 * (pairs[k].0 - pairs[i].0);
            let w = 0.5 * (pairs[k].1 + pairs[i].1);
            pairs[i] = (-x, w);
            pairs[k] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// E[f(δ)] for δ ~ N(0, σ).
    pub fn average<F: FnMut(f64) -> f64>(&self, sigma: f64, mut f: F) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sigma;
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(scale * x))
            .sum();
        s / std::f64::consts::PI.sqrt()
    }
}

/// Gauss–Hermite average of `f` over a zero-centred normal with the given FWHM.
pub fn gauss_average<F: FnMut(f64) -> f64>(f: F, fwhm: f64, n_points: usize) -> Result<f64> {
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(Error::Domain(format!("fwhm must be positive, got {fwhm}")));
    }
    if n_points < 3 {
        return Err(Error::Domain(format!(
            "need at least 3 quadrature points, got {n_points}"
        )));
    }
    let rule = GaussHermite::new(n_points)?;
    Ok(rule.average(fwhm / FWHM_PER_SIGMA, f))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single-interval Gauss–Kronrod 7/15 rule for vector-valued integrands.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussKronrod;

impl GaussKronrod {
    /// Returns (Kronrod estimate, error estimate ‖K − G‖∞).
    pub fn integrate<F>(&self, f: &mut F, a: f64, b: f64) -> Result<(DVector<f64>, f64)>
    where
        F: FnMut(f64) -> Result<DVector<f64>>,
    {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c)?;
        let mut k = &fc * WGK[7];
        let mut g = &fc * WG[3];
        for i in 0..7 {
            let dx = h * XGK[i];
            let s = f(c - dx)? + f(c + dx)?;
            k += &s * WGK[i];
            if i % 2 == 1 {
                g += &s * WG[i / 2];
            }
        }
        k *= h;
        g *= h;
        let err = (&k - &g).amax();
        if k.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("quadrature integrand"));
        }
        Ok((k, err))
    }
}

struct Piece {
    a: f64,
    b: f64,
    value: DVector<f64>,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration and Gaussian averaging.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveAverage {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// The Gaussian average is truncated at ±`cutoff_sigmas`·σ.
    pub cutoff_sigmas: f64,
    /// Breakpoint lists longer than this are thinned to every k-th point.
    pub max_breakpoints: usize,
}

impl Default for AdaptiveAverage {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_intervals: 4000,
            cutoff_sigmas: 8.0,
            max_breakpoints: 400,
        }
    }
}

impl AdaptiveAverage {
    /// ∫ₐᵇ f over the interval, split first at `breakpoints` inside (a, b).
    pub fn integrate_vec<F>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        breakpoints: &[f64],
    ) -> Result<DVector<f64>>
    where
        F: FnMut(f64) -> Result<DVector<f64>>,
    {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::Domain(format!(
                "bad integration interval [{a}, {b}]"
            )));
        }
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .cloned()
            .filter(|&x| x > a && x < b)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        if cuts.len() > self.max_breakpoints {
            let step = cuts.len().div_ceil(self.max_breakpoints);
            cuts = cuts.into_iter().step_by(step).collect();
        }
        let mut edges = vec![a];
        edges.extend(cuts);
        edges.push(b);

        let rule = GaussKronrod;
        let mut heap = BinaryHeap::new();
        let mut total: Option<DVector<f64>> = None;
        let mut total_err = 0.0;
        for w in edges.windows(2) {
            let (v, e) = rule.integrate(&mut f, w[0], w[1])?;
            total = Some(match total {
                None => v.clone(),
                Some(t) => t + &v,
            });
            total_err += e;
            heap.push(Piece {
                a: w[0],
                b: w[1],
                value: v,
                error: e,
            });
        }
        let mut total = total.expect("at least one interval");

        loop {
            let target = self.abs_tol.max(self.rel_tol * total.amax());
            if total_err <= target {
                return Ok(total);
            }
            if heap.len() >= self.max_intervals {
                return Err(Error::Quadrature {
                    error: total_err,
                    intervals: heap.len(),
                });
            }
            let worst = heap.pop().expect("non-empty heap");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                return Err(Error::Quadrature {
                    error: total_err,
                    intervals: heap.len() + 1,
                });
            }
            let (v1, e1) = rule.integrate(&mut f, worst.a, mid)?;
            let (v2, e2) = rule.integrate(&mut f, mid, worst.b)?;
            total = total - &worst.value + &v1 + &v2;
            total_err += e1 + e2 - worst.error;
            heap.push(Piece {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Piece {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
        }
    }

    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64, breakpoints: &[f64]) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let v = self.integrate_vec(|x| Ok(DVector::from_element(1, f(x)?)), a, b, breakpoints)?;
        Ok(v[0])
    }

    /// E[f(δ)] for δ ~ N(0, σ), vector valued.
    pub fn average_vec<F>(&self, mut f: F, sigma: f64, breakpoints: &[f64]) -> Result<DVector<f64>>
    where
        F: FnMut(f64) -> Result<DVector<f64>>,
    {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("σ must be positive, got {sigma}")));
        }
        let cut = self.cutoff_sigmas * sigma;
        let mut pts = vec![0.0];
        pts.extend_from_slice(breakpoints);
        self.integrate_vec(|d| Ok(f(d)? * gaussian_density(d, sigma)), -cut, cut, &pts)
    }

    pub fn average<F>(&self, mut f: F, sigma: f64, breakpoints: &[f64]) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let v = self.average_vec(|d| Ok(DVector::from_element(1, f(d)?)), sigma, breakpoints)?;
        Ok(v[0])
    }
}

/// Composite Simpson rule on equally spaced samples `y` with spacing `dx`.
///
/// An odd number of intervals closes with the 3/8 rule on the last three; a
/// single interval falls back to the trapezoid.
pub fn simpson(y: &[f64], dx: f64) -> f64 {
    let n = y.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * dx * (y[0] + y[1]),
        _ => {
            let even = if n.is_multiple_of(2) { n } else { n - 3 };
            let mut s = 0.0;
            if even > 0 {
                let mut acc = y[0] + y[even];
                for (i, v) in y.iter().enumerate().take(even).skip(1) {
                    acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
                }
                s += acc * dx / 3.0;
            }
            if even < n {
                let t = &y[even..];
                s += 3.0 * dx / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3]);
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_rule_is_symmetric_and_normalised() {
        let r = GaussHermite::new(41).unwrap();
        let s: f64 = r.weights.iter().sum();
        assert_relative_eq!(s, std::f64::consts::PI.sqrt(), max_relative = 1e-13);
        for i in 0..20 {
            assert_eq!(r.nodes[i], -r.nodes[40 - i]);
        }
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let f = |x: f64| 2.0 * x * x * x - x * x + 3.0;
        for n in 2..9 {
            let dx = 1.5 / n as f64;
            let y: Vec<f64> = (0..=n).map(|i| f(i as f64 * dx)).collect();
            let exact = 0.5 * 1.5f64.powi(4) - 1.5f64.powi(3) / 3.0 + 4.5;
            assert_relative_eq!(simpson(&y, dx), exact, max_relative = 1e-13);
        }
        assert_eq!(simpson(&[1.0], 0.1), 0.0);
        assert_relative_eq!(simpson(&[1.0, 3.0], 0.5), 1.0);
    }

    #[test]
    fn gaussian_moments() {
        let fwhm = crate::TWO_PI * 7.0;
        assert_relative_eq!(
            gauss_average(|_| 1.0, fwhm, 9).unwrap(),
            1.0,
            max_relative = 1e-13
        );
        assert!(gauss_average(|d| d, fwhm, 9).unwrap().abs() < 1e-12);
        let var = (fwhm / FWHM_PER_SIGMA).powi(2);
        assert_relative_eq!(
            gauss_average(|d| d * d, fwhm, 9).unwrap(),
            var,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            gauss_average(|d| d.powi(4), fwhm, 9).unwrap(),
            3.0 * var * var,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(gauss_average(|_| 1.0, 0.0, 9).is_err());
        assert!(gauss_average(|_| 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn kronrod_is_exact_for_high_degree_polynomials() {
        let (v, _) = GaussKronrod
            .integrate(
                &mut |x: f64| Ok(DVector::from_element(1, x.powi(20))),
                -1.0,
                1.0,
            )
            .unwrap();
        assert_relative_eq!(v[0], 2.0 / 21.0, max_relative = 1e-13);
    }

    #[test]
    fn adaptive_handles_narrow_peaks() {
        let q = AdaptiveAverage::default();
        let w = 1e-3;
        // Lorentzian of width w at 0.3; integral over the real line is π.
        let v = q
            .integrate(|x| Ok(w / ((x - 0.3).powi(2) + w * w)), -50.0, 50.0, &[])
            .unwrap();
        let exact = ((50.0 - 0.3) / w).atan() + ((50.0 + 0.3) / w).atan();
        assert_relative_eq!(v, exact, max_relative = 1e-7);
    }

    #[test]
    fn adaptive_average_matches_hermite_for_smooth_function() {
        let sigma = 3.0;
        let q = AdaptiveAverage::default();
        let a = q.average(|d| Ok((0.2 * d).cos()), sigma, &[]).unwrap();
        let exact = (-0.5 * (0.2 * sigma).powi(2)).exp();
        assert_relative_eq!(a, exact, max_relative = 1e-8);
    }
}
