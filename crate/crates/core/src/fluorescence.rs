//! Linking the MW-induced fluorescence change to the engine power.
//!
//! Under a microwave transfer rate R(t) from G₀ to G₊₁ the seven-level
//! populations obey ∂ₜσ = M(t)σ + R(t)ν. The periodic solution is assembled
//! from the fundamental matrix Φ of the undriven, piecewise-constant M(t) and
//! the pseudo-inverse 𝒜 = (I − Φ(τ_cyc))⁻. Integrating the fluorescence
//! response over a period gives the kernel H(τ); when H is flat the mean
//! transfer rate is ⟨R⟩ = κ·⟨F₀ − F⟩/⟨F₀⟩.
//!
//! All kernel integrals use composite Simpson rules on a grid aligned with the
//! stroke boundaries, and Φ between grid points is only ever propagated
//! forward, never inverted.

use nalgebra::{DVector, SMatrix, SVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::engine::{
    cycle_propagator, ensemble_power, fixed_point, resonance_breakpoints, work_superoperator,
    CycleConfig, DetuningDistribution, EngineLevels, EngineMode, PopulationGenerator, R11,
};
use crate::error::{Error, Result};
use crate::numerics::{mat_exp_real, pseudo_inverse_real, simpson, AdaptiveAverage, RMatrix, C64};
use crate::nv_model::{
    optical_matrix, steady_state, RateConstants, EXCITED_PROJECTOR, G0, GP1, N_LEVELS,
};

type M7 = SMatrix<f64, N_LEVELS, N_LEVELS>;
type V7 = SVector<f64, N_LEVELS>;

/// Default number of grid intervals per period.
pub const DEFAULT_INTERVALS: usize = 256;
/// Largest relative variation of H(τ) for which κ is reported.
pub const MAX_KERNEL_VARIATION: f64 = 1e-2;

fn omega_e() -> V7 {
    V7::from_column_slice(&EXCITED_PROJECTOR)
}

/// Population change per unit MW transfer: −1 on G₀, +1 on G₊₁.
pub fn transfer_vector() -> DVector<f64> {
    let mut v = DVector::zeros(N_LEVELS);
    v[G0] = -1.0;
    v[GP1] = 1.0;
    v
}

fn nu() -> V7 {
    V7::from_column_slice(transfer_vector().as_slice())
}

fn to_m7(m: &RMatrix) -> M7 {
    M7::from_iterator(m.iter().cloned())
}

/// Laser schedule of the engine whose fluorescence is observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaMode {
    /// Constant optical pumping.
    Continuous,
    /// Laser off for the first `duty`·τ_cyc (work stroke), on for the rest.
    TwoStroke { duty: f64 },
}

impl KappaMode {
    pub fn label(&self) -> String {
        match self {
            KappaMode::Continuous => "continuous".into(),
            KappaMode::TwoStroke { duty } => format!("two_stroke(d={duty})"),
        }
    }
}

/// Piecewise-constant optical generator over one period, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    segments: Vec<(RMatrix, f64)>,
}

impl Schedule {
    pub fn new(segments: Vec<(RMatrix, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Domain("schedule needs at least one segment".into()));
        }
        for (m, dt) in &segments {
            if m.nrows() != N_LEVELS || m.ncols() != N_LEVELS {
                return Err(Error::Dimension(format!(
                    "schedule generators must be 7×7, got {}×{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !dt.is_finite() || *dt < 0.0 {
                return Err(Error::Domain(format!(
                    "segment duration must be ≥ 0, got {dt}"
                )));
            }
        }
        let s = Self { segments };
        if !(s.tau_cyc() > 0.0) {
            return Err(Error::Domain("schedule period must be positive".into()));
        }
        Ok(s)
    }

    pub fn constant(m: RMatrix, tau_cyc: f64) -> Result<Self> {
        Self::new(vec![(m, tau_cyc)])
    }

    /// Schedule of an engine pumped at Γ: M(0) during the work stroke, M(Γ)
    /// during the thermal stroke; M(Γ) throughout for the continuous engine.
    pub fn engine(rc: &RateConstants, pump: f64, mode: KappaMode, tau_cyc: f64) -> Result<Self> {
        let on = optical_matrix(&rc.with_pump(pump))?;
        match mode {
            KappaMode::Continuous => Self::constant(on, tau_cyc),
            KappaMode::TwoStroke { duty } => {
                if !(duty > 0.0 && duty < 1.0) {
                    return Err(Error::Domain(format!(
                        "duty cycle must lie in (0, 1), got {duty}"
                    )));
                }
                let off = optical_matrix(&rc.with_pump(0.0))?;
                Self::new(vec![(off, duty * tau_cyc), (on, (1.0 - duty) * tau_cyc)])
            }
        }
    }

    pub fn tau_cyc(&self) -> f64 {
        self.segments.iter().map(|s| s.1).sum()
    }

    pub fn segments(&self) -> &[(RMatrix, f64)] {
        &self.segments
    }
}

/// Two-time propagator Φ(t, s) of the undriven rate equations.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    schedule: Schedule,
}

/// Φ for a schedule covering one period.
pub fn fundamental_solution(schedule: Schedule) -> FundamentalSolution {
    FundamentalSolution { schedule }
}

impl FundamentalSolution {
    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn tau_cyc(&self) -> f64 {
        self.schedule.tau_cyc()
    }

    /// Φ(t, s) for 0 ≤ s ≤ t ≤ τ_cyc.
    pub fn phi(&self, t: f64, s: f64) -> Result<RMatrix> {
        let tc = self.tau_cyc();
        let slack = 1e-12 * tc;
        if !(s >= -slack && t >= s && t <= tc + slack) {
            return Err(Error::Domain(format!(
                "Φ(t, s) needs 0 ≤ s ≤ t ≤ τ_cyc, got t = {t}, s = {s}"
            )));
        }
        let mut out = RMatrix::identity(N_LEVELS, N_LEVELS);
        let mut start = 0.0;
        for (m, dt) in self.schedule.segments() {
            let end = start + dt;
            let a = s.max(start);
            let b = t.min(end);
            if b > a {
                out = mat_exp_real(m, b - a)? * out;
            }
            start = end;
        }
        Ok(out)
    }

    /// Φ(τ_cyc, 0).
    pub fn period_map(&self) -> Result<RMatrix> {
        self.phi(self.tau_cyc(), 0.0)
    }
}

/// Grid over one period whose nodes include every stroke boundary.
#[derive(Debug, Clone)]
pub struct PeriodGrid {
    /// Node times, boundaries shared between neighbouring segments.
    pub times: Vec<f64>,
    /// (first node, last node, step, schedule segment) for each non-empty segment.
    pieces: Vec<(usize, usize, f64, usize)>,
}

impl PeriodGrid {
    /// About `n_intervals` intervals, shared among segments in proportion to
    /// their duration (at least two each).
    pub fn new(schedule: &Schedule, n_intervals: usize) -> Result<Self> {
        if n_intervals < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 grid intervals, got {n_intervals}"
            )));
        }
        let tc = schedule.tau_cyc();
        let mut times = vec![0.0];
        let mut pieces = Vec::new();
        let mut start = 0.0;
        for (k, (_, dt)) in schedule.segments().iter().enumerate() {
            if *dt <= 0.0 {
                continue;
            }
            let n = ((n_intervals as f64 * dt / tc).round() as usize).max(2);
            let h = dt / n as f64;
            let first = times.len() - 1;
            for i in 1..=n {
                times.push(if i == n {
                    start + dt
                } else {
                    start + i as f64 * h
                });
            }
            pieces.push((first, first + n, h, k));
            start += dt;
        }
        Ok(Self { times, pieces })
    }

    pub fn n_nodes(&self) -> usize {
        self.times.len()
    }

    /// Times at which a rate function is sampled: each segment's nodes, with
    /// the endpoints nudged inside so a jump at a stroke boundary is resolved.
    pub fn sample_times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for &(a, b, h, _) in &self.pieces {
            let eps = 1e-9 * h;
            for i in a..=b {
                let t = self.times[i];
                out.push(if i == a {
                    t + eps
                } else if i == b {
                    t - eps
                } else {
                    t
                });
            }
        }
        out
    }

    /// ∫ over nodes [lo, hi] of a continuous function sampled at the nodes,
    /// split at segment boundaries and at `cut`.
    fn integrate(&self, vals: &[f64], lo: usize, hi: usize, cut: Option<usize>) -> f64 {
        let mut total = 0.0;
        for &(a, b, h, _) in &self.pieces {
            let (a, b) = (a.max(lo), b.min(hi));
            if b <= a {
                continue;
            }
            match cut {
                Some(c) if c > a && c < b => {
                    total += simpson(&vals[a..=c], h) + simpson(&vals[c..=b], h);
                }
                _ => total += simpson(&vals[a..=b], h),
            }
        }
        total
    }
}

// Propagators on the grid, shared by the kernels and the periodic response.
struct GridPropagators {
    grid: PeriodGrid,
    /// Φ(t_j, 0).
    from_start: Vec<M7>,
    /// Φ(τ_cyc, t_i)·ν.
    to_end_nu: Vec<V7>,
    /// Φ(t_j, t_i)·ν for j ≥ i, row-major by i.
    forward_nu: Vec<Vec<V7>>,
    pinv: M7,
    rho0: V7,
}

impl GridPropagators {
    fn new(fs: &FundamentalSolution, n_intervals: usize) -> Result<Self> {
        let grid = PeriodGrid::new(fs.schedule(), n_intervals)?;
        let n = grid.n_nodes();
        // step propagator for each interval j → j+1
        let mut steps = vec![M7::identity(); n - 1];
        for &(a, b, h, k) in &grid.pieces {
            let e = to_m7(&mat_exp_real(&fs.schedule().segments()[k].0, h)?);
            for s in steps.iter_mut().take(b).skip(a) {
                *s = e;
            }
        }
        let mut from_start = Vec::with_capacity(n);
        from_start.push(M7::identity());
        for j in 0..n - 1 {
            let next = steps[j] * from_start[j];
            from_start.push(next);
        }
        let nu = nu();
        let mut forward_nu = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n - i);
            let mut w = nu;
            row.push(w);
            for step in steps.iter().skip(i) {
                w = step * w;
                row.push(w);
            }
            forward_nu.push(row);
        }
        let to_end_nu = forward_nu
            .iter()
            .map(|r| *r.last().expect("non-empty"))
            .collect();

        let period = from_start[n - 1];
        let dyn_period = RMatrix::from_iterator(N_LEVELS, N_LEVELS, period.iter().cloned());
        let i_minus = RMatrix::identity(N_LEVELS, N_LEVELS) - &dyn_period;
        let pinv = to_m7(&pseudo_inverse_real(&i_minus, None)?);
        let rho0 = steady_state(&(&dyn_period - RMatrix::identity(N_LEVELS, N_LEVELS)))?;
        Ok(Self {
            grid,
            from_start,
            to_end_nu,
            forward_nu,
            pinv,
            rho0: V7::from_column_slice(rho0.as_slice()),
        })
    }

    fn forward(&self, i: usize, j: usize) -> &V7 {
        &self.forward_nu[i][j - i]
    }

    /// Mean of Ω_E·ρ(t) over the undriven periodic orbit.
    fn mean_fluorescence(&self) -> f64 {
        let oe = omega_e();
        let vals: Vec<f64> = self
            .from_start
            .iter()
            .map(|p| oe.dot(&(p * self.rho0)))
            .collect();
        self.grid.integrate(&vals, 0, vals.len() - 1, None) / self.tau_cyc()
    }

    fn tau_cyc(&self) -> f64 {
        *self.grid.times.last().expect("non-empty grid")
    }
}

/// Response kernels tabulated on the period grid.
#[derive(Debug, Clone, Serialize)]
pub struct Kernels {
    pub times: Vec<f64>,
    /// g(t_j, τ_i) with rows j (observation time) and columns i (drive time).
    pub g: RMatrix,
    /// f(t_j, τ_i), zero for t_j ≤ τ_i.
    pub f: RMatrix,
    /// h = g + f.
    pub h: RMatrix,
    /// H(τ_i) = ∫ h(t, τ_i) dt.
    pub big_h: Vec<f64>,
    /// Period average of H.
    pub h_mean: f64,
    /// (max H − min H)/|mean H|.
    pub h_variation: f64,
}

/// Kernels g, f, h and H on a grid of about `n_intervals` intervals.
pub fn kernels(fs: &FundamentalSolution, n_intervals: usize) -> Result<Kernels> {
    let gp = GridPropagators::new(fs, n_intervals)?;
    Ok(kernels_from(&gp))
}

fn kernels_from(gp: &GridPropagators) -> Kernels {
    let n = gp.grid.n_nodes();
    let oe = omega_e();
    let rows: Vec<V7> = gp
        .from_start
        .iter()
        .map(|p| (oe.transpose() * p * gp.pinv).transpose())
        .collect();
    let mut g = RMatrix::zeros(n, n);
    let mut f = RMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            g[(j, i)] = rows[j].dot(&gp.to_end_nu[i]);
            if j > i {
                f[(j, i)] = oe.dot(gp.forward(i, j));
            }
        }
    }
    let h = &g + &f;
    let big_h: Vec<f64> = (0..n)
        .map(|i| {
            let col: Vec<f64> = h.column(i).iter().cloned().collect();
            gp.grid.integrate(&col, 0, n - 1, Some(i))
        })
        .collect();
    let tc = gp.tau_cyc();
    let h_mean = gp.grid.integrate(&big_h, 0, n - 1, None) / tc;
    let max = big_h.iter().cloned().fold(f64::MIN, f64::max);
    let min = big_h.iter().cloned().fold(f64::MAX, f64::min);
    Kernels {
        times: gp.grid.times.clone(),
        g,
        f,
        h,
        big_h,
        h_mean,
        h_variation: (max - min) / h_mean.abs(),
    }
}

/// Periodic populations with and without the MW transfer rate.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodicResponse {
    pub times: Vec<f64>,
    /// Driven populations σ(t_j).
    pub sigma: Vec<DVector<f64>>,
    /// Undriven populations ρ(t_j).
    pub rho: Vec<DVector<f64>>,
    /// Particular solution σ̃₀ at t = 0; its components sum to zero.
    pub sigma_tilde0: DVector<f64>,
}

/// Periodic solution for a rate sampled at [`PeriodGrid::sample_times`].
pub fn periodic_response_sampled(
    fs: &FundamentalSolution,
    n_intervals: usize,
    rate_samples: &[f64],
) -> Result<PeriodicResponse> {
    let gp = GridPropagators::new(fs, n_intervals)?;
    response_from(&gp, rate_samples)
}

/// Periodic solution σ(t) = ρ(t) + σ̃(t) for a transfer rate R(t).
pub fn periodic_response<R: Fn(f64) -> f64>(
    fs: &FundamentalSolution,
    n_intervals: usize,
    rate: R,
) -> Result<PeriodicResponse> {
    let gp = GridPropagators::new(fs, n_intervals)?;
    let samples: Vec<f64> = gp.grid.sample_times().into_iter().map(rate).collect();
    response_from(&gp, &samples)
}

fn response_from(gp: &GridPropagators, samples: &[f64]) -> Result<PeriodicResponse> {
    let grid = &gp.grid;
    let expected: usize = grid.pieces.iter().map(|p| p.1 - p.0 + 1).sum();
    if samples.len() != expected {
        return Err(Error::Dimension(format!(
            "expected {expected} rate samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("transfer rate"));
    }
    // rate sample for node i inside piece p
    let mut offsets = Vec::with_capacity(grid.pieces.len());
    let mut off = 0;
    for p in &grid.pieces {
        offsets.push(off);
        off += p.1 - p.0 + 1;
    }
    let vec_simpson = |vals: &[V7], h: f64| -> V7 {
        let mut out = V7::zeros();
        for c in 0..N_LEVELS {
            let comp: Vec<f64> = vals.iter().map(|v| v[c]).collect();
            out[c] = simpson(&comp, h);
        }
        out
    };

    let mut q = V7::zeros();
    for (p, &(a, b, h, _)) in grid.pieces.iter().enumerate() {
        let vals: Vec<V7> = (a..=b)
            .map(|i| gp.to_end_nu[i] * samples[offsets[p] + i - a])
            .collect();
        q += vec_simpson(&vals, h);
    }
    let tilde0 = gp.pinv * q;

    let n = grid.n_nodes();
    let mut sigma = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    for j in 0..n {
        let mut part = V7::zeros();
        for (p, &(a, b, h, _)) in grid.pieces.iter().enumerate() {
            let b = b.min(j);
            if b <= a {
                continue;
            }
            let vals: Vec<V7> = (a..=b)
                .map(|i| gp.forward(i, j) * samples[offsets[p] + i - a])
                .collect();
            part += vec_simpson(&vals, h);
        }
        let r = gp.from_start[j] * gp.rho0;
        let s = r + gp.from_start[j] * tilde0 + part;
        rho.push(DVector::from_column_slice(r.as_slice()));
        sigma.push(DVector::from_column_slice(s.as_slice()));
    }
    Ok(PeriodicResponse {
        times: grid.times.clone(),
        sigma,
        rho,
        sigma_tilde0: DVector::from_column_slice(tilde0.as_slice()),
    })
}

/// Conversion factor between relative fluorescence change and transfer rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaResult {
    /// κ, MHz.
    pub kappa: f64,
    pub pump: f64,
    pub mode: KappaMode,
    pub tau_cyc: f64,
    pub h_mean: f64,
    pub h_variation: f64,
    /// ⟨Ω_E·ρ⟩ over the undriven period.
    pub mean_fluorescence: f64,
    /// One-standard-deviation uncertainty, when propagated.
    pub sigma: Option<f64>,
}

/// κ(Γ) = ⟨Ω_E·ρ⟩/|H̄| on the default grid.
pub fn kappa(rc: &RateConstants, pump: f64, mode: KappaMode, tau_cyc: f64) -> Result<KappaResult> {
    kappa_with(rc, pump, mode, tau_cyc, DEFAULT_INTERVALS)
}

/// κ with an explicit grid size. Fails when H varies by more than 1 % over
/// the period, since then no single conversion factor exists.
pub fn kappa_with(
    rc: &RateConstants,
    pump: f64,
    mode: KappaMode,
    tau_cyc: f64,
    n_intervals: usize,
) -> Result<KappaResult> {
    let fs = fundamental_solution(Schedule::engine(rc, pump, mode, tau_cyc)?);
    let gp = GridPropagators::new(&fs, n_intervals)?;
    let k = kernels_from(&gp);
    if !(k.h_variation <= MAX_KERNEL_VARIATION) {
        return Err(Error::Kernel {
            variation: k.h_variation,
            limit: MAX_KERNEL_VARIATION,
        });
    }
    let f0 = gp.mean_fluorescence();
    Ok(KappaResult {
        kappa: f0 / k.h_mean.abs(),
        pump,
        mode,
        tau_cyc,
        h_mean: k.h_mean,
        h_variation: k.h_variation,
        mean_fluorescence: f0,
        sigma: None,
    })
}

/// ⟨P⟩ = ω₁₀·κ·⟨F₀ − F⟩/⟨F₀⟩, with `fluorescence_drop` = ⟨F₀ − F⟩.
pub fn power_from_fluorescence(
    fluorescence_drop: f64,
    mean_f0: f64,
    kappa: &KappaResult,
    levels: &EngineLevels,
) -> Result<f64> {
    if !(mean_f0 > 0.0) {
        return Err(Error::Domain(format!(
            "mean fluorescence must be > 0, got {mean_f0}"
        )));
    }
    Ok(levels.omega_10 * kappa.kappa * fluorescence_drop / mean_f0)
}

/// Period-resolved fluorescence (in units of excited population) with and
/// without the MW transfer.
#[derive(Debug, Clone, Serialize)]
pub struct Synthesis {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub f0: Vec<f64>,
    pub mean_f: f64,
    pub mean_f0: f64,
    /// ⟨F₀ − F⟩.
    pub drop: f64,
    /// ⟨F₀ − F⟩/⟨F₀⟩.
    pub contrast: f64,
    /// Period-averaged transfer rate ⟨R⟩ that produced the traces.
    pub mean_rate: f64,
}

/// Forward model: fluorescence traces for a rate sampled at the grid's sample times.
pub fn synthesize_fluorescence(
    fs: &FundamentalSolution,
    n_intervals: usize,
    rate_samples: &[f64],
) -> Result<Synthesis> {
    let gp = GridPropagators::new(fs, n_intervals)?;
    let resp = response_from(&gp, rate_samples)?;
    let oe = DVector::from_column_slice(&EXCITED_PROJECTOR);
    let f: Vec<f64> = resp.sigma.iter().map(|s| oe.dot(s)).collect();
    let f0: Vec<f64> = resp.rho.iter().map(|s| oe.dot(s)).collect();
    let n = f.len();
    let tc = gp.tau_cyc();
    let mean_f = gp.grid.integrate(&f, 0, n - 1, None) / tc;
    let mean_f0 = gp.grid.integrate(&f0, 0, n - 1, None) / tc;

    let mut mean_rate = 0.0;
    let mut off = 0;
    for &(a, b, h, _) in &gp.grid.pieces {
        mean_rate += simpson(&rate_samples[off..off + b - a + 1], h);
        off += b - a + 1;
    }
    Ok(Synthesis {
        times: resp.times,
        f,
        f0,
        mean_f,
        mean_f0,
        drop: mean_f0 - mean_f,
        contrast: (mean_f0 - mean_f) / mean_f0,
        mean_rate: mean_rate / tc,
    })
}

/// Instantaneous G₀ → G₊₁ transfer rate during the work stroke of an engine
/// running at its periodic state; zero during the thermal stroke.
#[derive(Debug, Clone)]
pub struct TransferRate {
    tau_w: f64,
    freqs: Vec<f64>,
    coeffs: Vec<C64>,
}

impl TransferRate {
    /// R(t) = d/dt ρ₁₁ = [−iH_w e^{−iH_w t} ρ*]₁₁ with ρ* the cycle fixed point.
    pub fn from_engine(cfg: &CycleConfig, pg: &PopulationGenerator) -> Result<Self> {
        let rho = fixed_point(&cycle_propagator(cfg, pg)?)?;
        let h = work_superoperator(cfg.omega, cfg.detuning, pg.dim());
        let eig = SymmetricEigen::new(h.clone());
        let q = &eig.eigenvectors;
        let proj = q.adjoint() * rho;
        let hq = &h * q;
        let coeffs = (0..q.ncols())
            .map(|k| C64::new(0.0, -1.0) * hq[(R11, k)] * proj[k])
            .collect();
        Ok(Self {
            tau_w: cfg.tau_w,
            freqs: eig.eigenvalues.iter().cloned().collect(),
            coeffs,
        })
    }

    pub fn at(&self, t: f64) -> f64 {
        if !(t >= 0.0 && t < self.tau_w) {
            return 0.0;
        }
        self.freqs
            .iter()
            .zip(&self.coeffs)
            .map(|(&w, &c)| (c * C64::new(0.0, -w * t).exp()).re)
            .sum()
    }
}

/// Ensemble-averaged transfer rate at the given times.
pub fn ensemble_transfer_rate(
    cfg: &CycleConfig,
    pg: &PopulationGenerator,
    dist: &DetuningDistribution,
    times: &[f64],
) -> Result<DVector<f64>> {
    let eval = |c: &CycleConfig| -> Result<DVector<f64>> {
        let r = TransferRate::from_engine(c, pg)?;
        Ok(DVector::from_iterator(
            times.len(),
            times.iter().map(|&t| r.at(t)),
        ))
    };
    if dist.fwhm == 0.0 {
        return eval(cfg);
    }
    let quad = AdaptiveAverage::default();
    let sigma = dist.sigma();
    let breaks = resonance_breakpoints(cfg, quad.cutoff_sigmas * sigma);
    quad.average_vec(
        |d| eval(&cfg.with_detuning(cfg.detuning + d)),
        sigma,
        &breaks,
    )
}

/// Direct engine power against the power recovered from its synthetic fluorescence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Closure {
    pub direct: f64,
    pub recovered: f64,
    pub relative_error: f64,
    pub contrast: f64,
    pub kappa: f64,
    /// ω₁₀·⟨R⟩ from the sampled transfer rate; equals `direct` up to quadrature error.
    pub rate_power: f64,
}

/// Run the engine, synthesise the fluorescence its transfer rate produces,
/// and convert the contrast back to power through κ.
pub fn fluorescence_closure(
    rc: &RateConstants,
    cfg: &CycleConfig,
    levels: &EngineLevels,
    dist: &DetuningDistribution,
    gamma_th: f64,
    n_intervals: usize,
) -> Result<Closure> {
    if cfg.mode != EngineMode::TwoStroke {
        return Err(Error::Domain(
            "closure is defined for the coherent two-stroke engine".into(),
        ));
    }
    let pg = PopulationGenerator::reduced(rc, cfg.pump)?;
    let direct = ensemble_power(cfg, &pg, levels, dist, gamma_th)?.power;
    let tc = cfg.tau_cyc();
    let mode = KappaMode::TwoStroke { duty: cfg.duty() };
    let fs = fundamental_solution(Schedule::engine(rc, cfg.pump, mode, tc)?);
    let grid = PeriodGrid::new(fs.schedule(), n_intervals)?;
    let rate = ensemble_transfer_rate(cfg, &pg, dist, &grid.sample_times())?;
    let syn = synthesize_fluorescence(&fs, n_intervals, rate.as_slice())?;
    let k = kappa_with(rc, cfg.pump, mode, tc, n_intervals)?;
    let recovered = power_from_fluorescence(syn.drop, syn.mean_f0, &k, levels)?;
    Ok(Closure {
        direct,
        recovered,
        relative_error: (recovered - direct).abs() / direct.abs(),
        contrast: syn.contrast,
        kappa: k.kappa,
        rate_power: levels.omega_10 * syn.mean_rate,
    })
}
