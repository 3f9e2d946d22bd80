//! Acceptance criteria, one line per criterion.
//!
//! Exits non-zero when any criterion fails, either on its numerical check or
//! on its runtime budget.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use nvheat::engine::{
    action_sweep, cycle_propagator, decoherence_sweep, dephased_work_expansion, fixed_point,
    periodic_steady_state, population_state, thermal_generator, work_generator, work_per_cycle,
    CycleConfig, DecoherenceSettings, DetuningDistribution, EngineLevels, EngineMode,
    PopulationGenerator,
};
use nvheat::fluorescence::{fluorescence_closure, kappa, KappaMode, DEFAULT_INTERVALS};
use nvheat::numerics::{
    eig_real, mat_exp, mat_exp_real, ode_propagate, to_complex, CMatrix, CVector, OdeOptions,
    RMatrix, C64,
};
use nvheat::nv_model::{
    build_m, fit_gamma_calibration, optical_matrix, pump_rate, saturation_curve, FitOptions,
    RateConstants,
};
use nvheat::reference;
use nvheat::thermal::{emulation_error_surface, initial_state, Expansion, FD_STEP, GAMMA_REF};
use nvheat::uncertainty::bound_violation_test;

const GAMMA_TH: f64 = 0.41;
const PUMP: f64 = 0.76;
const DUTY: f64 = 1.0 / 3.0;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> nvheat::Result<Outcome>;

fn outcome(pass: bool, detail: String) -> nvheat::Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn rc() -> RateConstants {
    RateConstants::default()
}

fn eigenvalue_golden() -> nvheat::Result<Outcome> {
    let m = optical_matrix(&rc().with_pump(0.5))?;
    let mut ev: Vec<f64> = eig_real(&m)?.values.iter().map(|z| z.re).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut worst = (0.0, 0);
    for (i, (a, b)) in ev
        .iter()
        .zip(reference::EIGENVALUES_AT_HALF_MHZ)
        .enumerate()
    {
        if (a - b).abs() > worst.0 {
            worst = ((a - b).abs(), i);
        }
    }
    let (d, i) = worst;
    outcome(
        d <= reference::TOLERANCE_MHZ,
        format!(
            "max |Δλ| = {d:.4} MHz at λ{i} ({:.4} vs {:.2}), tol {}",
            ev[i],
            reference::EIGENVALUES_AT_HALF_MHZ[i],
            reference::TOLERANCE_MHZ
        ),
    )
}

fn max_entry_deviation(m: &RMatrix, golden: &[[f64; 4]; 4]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, row) in golden.iter().enumerate() {
        for (j, &g) in row.iter().enumerate() {
            d = d.max((m[(i, j)] - g).abs());
        }
    }
    d
}

fn l_matrices_golden() -> nvheat::Result<Outcome> {
    let e = Expansion::new(&rc(), GAMMA_REF, FD_STEP, false)?;
    let d0 = max_entry_deviation(&e.l0, &reference::L0);
    let d1 = max_entry_deviation(&e.l1, &reference::L1);
    let tol = reference::MATRIX_TOLERANCE_MHZ;
    outcome(
        d0 <= tol && d1 <= tol,
        format!("max entry deviation L0 {d0:.4}, L1 {d1:.4} MHz, tol {tol}"),
    )
}

fn emulation_validity() -> nvheat::Result<Outcome> {
    let mut t_grid: Vec<f64> = (0..=100).map(|k| 1e-3 * k as f64).collect();
    t_grid.extend((1..=200).map(|k| 0.05 * k as f64));
    let gammas: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
    let surface = emulation_error_surface(&rc(), false, &initial_state(0.005), &t_grid, &gammas)?;
    let worst = surface
        .iter()
        .max_by(|a, b| a.percent_error.partial_cmp(&b.percent_error).unwrap())
        .unwrap();
    outcome(
        worst.percent_error < 0.5,
        format!(
            "max error {:.4}% at Γ = {:.2} MHz, t = {:.3} µs over Γ ∈ [0.05, 1.0], t ≤ 10 µs",
            worst.percent_error, worst.pump, worst.t
        ),
    )
}

fn heat_machine_equivalence() -> nvheat::Result<Outcome> {
    let actions = [1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01];
    let mut pass = true;
    let mut parts = Vec::new();
    for omega in [0.8, 1.6, 3.2] {
        let pts = action_sweep(
            &rc(),
            PUMP,
            omega,
            DUTY,
            GAMMA_TH,
            &actions,
            &EngineLevels::default(),
            &DetuningDistribution::default(),
        )?;
        let gap: Vec<f64> = pts
            .iter()
            .map(|p| (p.two_stroke - p.continuous).abs() / p.continuous.abs())
            .collect();
        let n = gap.len();
        let at_002 = gap[n - 2];
        let shrinking = gap[n - 3] > gap[n - 2] && gap[n - 2] > gap[n - 1];
        pass &= at_002 <= 0.05 && shrinking;
        parts.push(format!(
            "Ω={omega}: gaps {:.2e},{:.2e},{:.2e}",
            gap[n - 3],
            gap[n - 2],
            gap[n - 1]
        ));
    }
    outcome(pass, format!("{} (s = 0.05, 0.02, 0.01)", parts.join("; ")))
}

fn quantum_signature() -> nvheat::Result<Outcome> {
    let actions = [0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5];
    let pts = action_sweep(
        &rc(),
        PUMP,
        1.6,
        DUTY,
        GAMMA_TH,
        &actions,
        &EngineLevels::default(),
        &DetuningDistribution::default(),
    )?;
    let first = &pts[0];
    let exceeds = first.two_stroke > first.bound;
    let worst_dephased = pts
        .iter()
        .map(|p| p.dephased - p.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        exceeds && worst_dephased <= 1e-10,
        format!(
            "s = {:.3}: coherent {:.4} vs bound {:.4}; max(dephased − bound) = {:.3e}",
            first.action, first.two_stroke, first.bound, worst_dephased
        ),
    )
}

fn expansion_consistency() -> nvheat::Result<Outcome> {
    let pg = PopulationGenerator::reduced(&rc(), PUMP)?;
    let levels = EngineLevels::default();
    let actions = [0.01, 0.02, 0.03, 0.05, 0.07, 0.1];
    let mut errs = Vec::new();
    for &s in &actions {
        let cfg =
            CycleConfig::from_action(s, 1.6, DUTY, GAMMA_TH, PUMP, EngineMode::DephasedTwoStroke)?;
        let exact = work_per_cycle(&cfg, &pg, &levels)?;
        let rho = fixed_point(&cycle_propagator(&cfg, &pg)?)?;
        let approx = dephased_work_expansion(&cfg, &rho, &levels);
        errs.push((approx - exact).abs() / exact.abs());
    }
    let x: Vec<f64> = actions.iter().map(|s| s.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let at_005 = errs[3];
    outcome(
        at_005 <= 0.01 && (slope - 2.0).abs() <= 0.2,
        format!(
            "relative error {at_005:.2e} at s = 0.05, log-log slope {slope:.3} over [0.01, 0.1]"
        ),
    )
}

fn decoherence_trend() -> nvheat::Result<Outcome> {
    let settings = DecoherenceSettings::default();
    let dist = DetuningDistribution::default();
    let pts = decoherence_sweep(&rc(), &settings, &EngineLevels::default(), &dist, GAMMA_TH)?;
    let monotone = pts.windows(2).all(|w| w[1].work < w[0].work);
    let below = pts
        .iter()
        .filter(|p| p.x >= 2.0)
        .all(|p| p.work < p.work_bound);
    let residual = pts
        .iter()
        .map(|p| p.action_residual.abs())
        .fold(0.0, f64::max);
    let works: Vec<String> = pts.iter().map(|p| format!("{:.3}", p.work)).collect();
    outcome(
        monotone && below && residual <= 1e-6,
        format!(
            "W(τ_th/T2* = {}) = [{}], bound {:.4}, max action residual {residual:.1e}",
            pts.iter()
                .map(|p| p.x.to_string())
                .collect::<Vec<_>>()
                .join(","),
            works.join(", "),
            pts[0].work_bound
        ),
    )
}

fn kernel_flatness() -> nvheat::Result<Outcome> {
    let g = pump_rate(reference::MAX_LASER_POWER_MW, 436.0);
    let k = kappa(
        &rc(),
        g,
        KappaMode::TwoStroke { duty: DUTY },
        reference::LONGEST_CYCLE_US,
    )?;
    outcome(
        k.h_variation <= 1e-3,
        format!(
            "H variation {:.2e} at Γ = {g:.3} MHz, τ_cyc = {} µs",
            k.h_variation,
            reference::LONGEST_CYCLE_US
        ),
    )
}

fn end_to_end_closure() -> nvheat::Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for s in [0.02, 0.05, 0.1] {
        let cfg = CycleConfig::from_action(s, 1.6, DUTY, GAMMA_TH, PUMP, EngineMode::TwoStroke)?;
        let c = fluorescence_closure(
            &rc(),
            &cfg,
            &EngineLevels::default(),
            &DetuningDistribution::default(),
            GAMMA_TH,
            DEFAULT_INTERVALS,
        )?;
        worst = worst.max(c.relative_error);
        parts.push(format!("s={s}: {:.4} vs {:.4}", c.recovered, c.direct));
    }
    outcome(
        worst <= 0.02,
        format!("{}; max relative error {worst:.2e}", parts.join("; ")),
    )
}

fn statistics_golden() -> nvheat::Result<Outcome> {
    let r = bound_violation_test(reference::T_STATISTIC, 0.6, 0.0, 0.8)?;
    outcome(
        (r.p - reference::P_VALUE).abs() <= reference::P_TOLERANCE,
        format!("t = {:.3} → p = {:.6}", r.t, r.p),
    )
}

fn calibration_round_trip() -> nvheat::Result<Outcome> {
    let r_true = 436.0;
    let powers: Vec<f64> = (1..=20).map(|k| 0.5 * k as f64).collect();
    let clean: Vec<f64> = saturation_curve(&rc(), r_true, &powers)?
        .iter()
        .map(|f| 1e5 * f)
        .collect();
    let data: Vec<(f64, f64)> = powers.iter().cloned().zip(clean.iter().cloned()).collect();
    let fit = fit_gamma_calibration(&data, &rc(), &FitOptions::default())?;
    let noiseless = (fit.r_khz_per_mw / r_true - 1.0).abs();

    let mut covered = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let noisy: Vec<(f64, f64)> = powers
            .iter()
            .zip(&clean)
            .map(|(&p, &y)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (p, y * (1.0 + 0.01 * z))
            })
            .collect();
        let f = fit_gamma_calibration(&noisy, &rc(), &FitOptions::default())?;
        if (f.r_khz_per_mw - r_true).abs() <= 3.0 * f.r_sigma {
            covered += 1;
        }
    }
    outcome(
        noiseless <= 1e-3 && covered >= 95,
        format!(
            "noiseless relative error {noiseless:.2e}; 1% noise: {covered}/100 trials within 3σ"
        ),
    )
}

fn tight_ode() -> OdeOptions {
    OdeOptions {
        rtol: 1e-12,
        atol: 1e-14,
        ..OdeOptions::default()
    }
}

fn random_generator(rng: &mut ChaCha8Rng, real_rates: bool) -> CMatrix {
    let n = rng.random_range(2..=9);
    if real_rates {
        let r = RMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                rng.random_range(0.0..5.0)
            }
        });
        return to_complex(&build_m(&r));
    }
    let a = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    // shift so every mode decays
    let herm = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    let top = herm.symmetric_eigenvalues().max();
    a - CMatrix::identity(n, n) * C64::new(top + 0.1, 0.0)
}

fn oracle_equivalence() -> nvheat::Result<Outcome> {
    let opts = tight_ode();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_random: f64 = 0.0;
    for i in 0..100 {
        let g = random_generator(&mut rng, i % 2 == 0);
        let n = g.nrows();
        let y0 = CVector::from_fn(n, |_, _| C64::new(rng.random_range(0.0..1.0), 0.0));
        let y0 = &y0 / C64::new(y0.iter().map(|z| z.re).sum(), 0.0);
        let t = rng.random_range(0.1..2.0);
        let a = mat_exp(&g, t)? * &y0;
        let b = ode_propagate(|_| g.clone(), &y0, 0.0, t, &opts)?;
        worst_random = worst_random.max((a - b).camax());
    }

    let m = optical_matrix(&rc().with_pump(0.5))?;
    let mc = to_complex(&m);
    let s0 = CVector::from_iterator(7, initial_state(0.005).iter().map(|&x| C64::new(x, 0.0)));
    let mut worst_m: f64 = 0.0;
    for t in [0.01, 0.1, 1.0, 10.0] {
        let a = to_complex(&mat_exp_real(&m, t)?) * &s0;
        let b = ode_propagate(|_| mc.clone(), &s0, 0.0, t, &opts)?;
        worst_m = worst_m.max((a - b).camax());
    }

    let pg = PopulationGenerator::reduced(&rc(), PUMP)?;
    let cfg = CycleConfig::from_action(0.05, 1.6, DUTY, GAMMA_TH, PUMP, EngineMode::TwoStroke)?
        .with_detuning(3.0);
    let rho = periodic_steady_state(&cycle_propagator(&cfg, &pg)?)?;
    let g1 = work_generator(cfg.omega, cfg.detuning, pg.dim());
    let g2 = thermal_generator(&pg, cfg.detuning);
    let mut y = population_state(&DVector::from_element(4, 0.25));
    for _ in 0..10_000 {
        y = ode_propagate(|_| g1.clone(), &y, 0.0, cfg.tau_w, &opts)?;
        y = ode_propagate(|_| g2.clone(), &y, 0.0, cfg.tau_th, &opts)?;
    }
    let fp = (y - rho).camax();
    outcome(
        worst_random <= 1e-8 && worst_m <= 1e-8 && fp <= 1e-7,
        format!(
            "max |exp − ODE|: random {worst_random:.1e}, M(0.5) {worst_m:.1e}; fixed point vs 10⁴ cycles {fp:.1e}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check, f64); 12] = [
        ("eigenvalue golden", eigenvalue_golden, 1.0),
        ("L0/L1 golden", l_matrices_golden, 1.0),
        ("emulation validity", emulation_validity, 10.0),
        ("heat-machine equivalence", heat_machine_equivalence, 30.0),
        ("quantum signature", quantum_signature, 10.0),
        ("bound expansion", expansion_consistency, 10.0),
        ("decoherence trend", decoherence_trend, 30.0),
        ("kernel flatness", kernel_flatness, 10.0),
        ("end-to-end closure", end_to_end_closure, 30.0),
        ("p-value golden", statistics_golden, 1.0),
        ("calibration round trip", calibration_round_trip, 30.0),
        ("oracle equivalence", oracle_equivalence, 60.0),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs_f64(*budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {:<26} {:>7.3} s / {:>4} s  {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            elapsed.as_secs_f64(),
            budget,
            detail
        );
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
