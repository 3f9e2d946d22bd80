//! Monte-Carlo propagation of parameter uncertainties and the one-sided test
//! for a power exceeding its bound.
//!
//! Every sample draws from its own ChaCha stream (`seed`, stream = sample
//! index), so results do not depend on how rayon schedules the work.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics, Statistics};

use crate::engine::DetuningDistribution;
use crate::error::{Error, Result};
use crate::nv_model::{CalibrationParams, RateConstants, RATE_SIGMAS};

pub const DEFAULT_SAMPLES: usize = 4096;
pub const MIN_SAMPLES: usize = 100;
/// Largest tolerated fraction of failed quantity evaluations.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Percentiles reported by [`propagate`].
pub const PERCENTILES: [f64; 5] = [2.5, 16.0, 50.0, 84.0, 97.5];

/// One draw of the uncertain inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSample {
    pub rates: RateConstants,
    /// Γ per laser power, kHz/mW.
    pub r_khz_per_mw: f64,
    /// Rabi frequency per √mW, rad/µs.
    pub rabi_per_sqrt_mw: f64,
    /// Detuning FWHM, rad/µs.
    pub fwhm: f64,
}

/// Nominal values and independent 1σ uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParameterPrior {
    pub nominal: ParameterSample,
    pub sigma: ParameterSample,
}

impl Default for ParameterPrior {
    fn default() -> Self {
        let cal = CalibrationParams::default();
        let dist = DetuningDistribution::default();
        Self {
            nominal: ParameterSample {
                rates: RateConstants::default(),
                r_khz_per_mw: cal.r_khz_per_mw,
                rabi_per_sqrt_mw: cal.rabi_per_sqrt_mw,
                fwhm: dist.fwhm,
            },
            sigma: ParameterSample {
                rates: RATE_SIGMAS,
                r_khz_per_mw: cal.r_sigma,
                rabi_per_sqrt_mw: cal.rabi_sigma,
                // the linewidth is held fixed by default
                fwhm: 0.0,
            },
        }
    }
}

// Gaussian draw with negative values rejected and redrawn.
fn truncated<R: Rng>(rng: &mut R, mean: f64, sigma: f64) -> Result<f64> {
    if sigma == 0.0 {
        return Ok(mean);
    }
    let normal = Normal::new(mean, sigma)
        .map_err(|e| Error::Domain(format!("invalid Gaussian ({mean}, {sigma}): {e}")))?;
    if mean + 8.0 * sigma < 0.0 {
        return Err(Error::Domain(format!(
            "truncated Gaussian ({mean}, {sigma}) has negligible positive mass"
        )));
    }
    loop {
        let x = normal.sample(rng);
        if x >= 0.0 {
            return Ok(x);
        }
    }
}

impl ParameterPrior {
    pub fn validate(&self) -> Result<()> {
        let s = &self.sigma;
        let r = &s.rates;
        let all = [
            r.gamma,
            r.k1s,
            r.k0s,
            r.ks0,
            r.ks1,
            r.pump,
            s.r_khz_per_mw,
            s.rabi_per_sqrt_mw,
            s.fwhm,
        ];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Domain("uncertainties must be finite and ≥ 0".into()));
        }
        self.nominal.rates.validate()
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<ParameterSample> {
        let (m, s) = (&self.nominal, &self.sigma);
        let (mr, sr) = (&m.rates, &s.rates);
        Ok(ParameterSample {
            rates: RateConstants {
                gamma: truncated(rng, mr.gamma, sr.gamma)?,
                k1s: truncated(rng, mr.k1s, sr.k1s)?,
                k0s: truncated(rng, mr.k0s, sr.k0s)?,
                ks0: truncated(rng, mr.ks0, sr.ks0)?,
                ks1: truncated(rng, mr.ks1, sr.ks1)?,
                pump: truncated(rng, mr.pump, sr.pump)?,
            },
            r_khz_per_mw: truncated(rng, m.r_khz_per_mw, s.r_khz_per_mw)?,
            rabi_per_sqrt_mw: truncated(rng, m.rabi_per_sqrt_mw, s.rabi_per_sqrt_mw)?,
            fwhm: truncated(rng, m.fwhm, s.fwhm)?,
        })
    }

    /// The `i`-th sample of the sequence selected by `seed`.
    pub fn sample(&self, seed: u64, i: u64) -> Result<ParameterSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i);
        self.draw(&mut rng)
    }
}

/// Sample statistics of a propagated quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Propagation {
    pub mean: f64,
    /// Sample standard deviation (n − 1 normalisation).
    pub sigma: f64,
    /// Values at [`PERCENTILES`].
    pub percentiles: Vec<(f64, f64)>,
    pub n_samples: usize,
    pub n_failed: usize,
    pub seed: u64,
}

/// Evaluate `quantity` on `n_samples` draws of `prior` in parallel.
///
/// Failed evaluations are dropped from the statistics; more than 1% of them is
/// an error.
pub fn propagate<F>(
    prior: &ParameterPrior,
    quantity: F,
    n_samples: usize,
    seed: u64,
) -> Result<Propagation>
where
    F: Fn(&ParameterSample) -> Result<f64> + Sync,
{
    if n_samples < MIN_SAMPLES {
        return Err(Error::Domain(format!(
            "need at least {MIN_SAMPLES} Monte-Carlo samples, got {n_samples}"
        )));
    }
    prior.validate()?;
    let outcomes: Vec<Result<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let v = quantity(&prior.sample(seed, i)?)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite("propagated quantity"))
            }
        })
        .collect();

    let mut values = Vec::with_capacity(n_samples);
    let mut failed = 0;
    let mut first = None;
    for o in outcomes {
        match o {
            Ok(v) => values.push(v),
            Err(e) => {
                failed += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failed as f64 > MAX_FAILURE_FRACTION * n_samples as f64 {
        return Err(Error::Propagation {
            failed,
            total: n_samples,
            first: first.unwrap_or_default(),
        });
    }

    let mean = values.iter().mean();
    let sigma = if values.iter().all(|&v| v == values[0]) {
        0.0
    } else {
        values.iter().std_dev()
    };
    let mut data = Data::new(values);
    let percentiles = PERCENTILES
        .iter()
        .map(|&q| (q, data.quantile(q / 100.0)))
        .collect();
    Ok(Propagation {
        mean,
        sigma,
        percentiles,
        n_samples,
        n_failed: failed,
        seed,
    })
}

/// Outcome of the one-sided test of H₀: P_measured − P_bound ≤ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub t: f64,
    /// One-sided upper tail probability 1 − Φ(t).
    pub p: f64,
    /// Monte-Carlo samples behind the uncertainties, when they came from [`propagate`].
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
}

/// Upper tail of the standard normal, ½·erfc(t/√2).
pub fn one_sided_p(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// t = (P_meas − P_bound)/√(σ_meas² + σ_bound²) and its one-sided p-value.
pub fn bound_violation_test(
    measured: f64,
    sigma_measured: f64,
    bound: f64,
    sigma_bound: f64,
) -> Result<TestResult> {
    if !(sigma_measured > 0.0 && sigma_bound > 0.0) {
        return Err(Error::Domain(format!(
            "uncertainties must be > 0, got {sigma_measured} and {sigma_bound}"
        )));
    }
    if !(measured.is_finite() && bound.is_finite()) {
        return Err(Error::NonFinite("bound violation test input"));
    }
    let t = (measured - bound) / sigma_measured.hypot(sigma_bound);
    Ok(TestResult {
        t,
        p: one_sided_p(t),
        n_samples: None,
        seed: None,
    })
}

/// The same test with both uncertainties taken from Monte-Carlo runs.
pub fn bound_violation_from(measured: &Propagation, bound: &Propagation) -> Result<TestResult> {
    let r = bound_violation_test(measured.mean, measured.sigma, bound.mean, bound.sigma)?;
    Ok(TestResult {
        n_samples: Some(measured.n_samples.min(bound.n_samples)),
        seed: Some(measured.seed),
        ..r
    })
}
