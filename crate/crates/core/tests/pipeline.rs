//! Cross-module behaviour: thermal operator → engine → fluorescence → uncertainty.

use nvheat::engine::{
    continuous_power, cycle_propagator, ensemble_power, fixed_point, populations, CycleConfig,
    DetuningDistribution, EngineLevels, EngineMode, PopulationGenerator,
};
use nvheat::fluorescence::{fluorescence_closure, kappa, KappaMode, DEFAULT_INTERVALS};
use nvheat::nv_model::{pump_rate, steady_state, RateConstants};
use nvheat::thermal::thermal_operator;
use nvheat::uncertainty::{bound_violation_from, propagate, ParameterPrior};

fn rc() -> RateConstants {
    RateConstants::default()
}

fn cfg(s: f64, mode: EngineMode) -> CycleConfig {
    CycleConfig::from_action(s, 1.6, 1.0 / 3.0, 0.41, 0.76, mode).unwrap()
}

#[test]
fn undriven_engine_sits_at_the_emulated_steady_state() {
    let l = thermal_operator(&rc(), 0.76).unwrap();
    let pg = PopulationGenerator::from(l.clone());
    let c = CycleConfig {
        omega: 0.0,
        ..cfg(0.1, EngineMode::TwoStroke)
    };
    let rho = fixed_point(&cycle_propagator(&c, &pg).unwrap()).unwrap();
    let ss = steady_state(&l.matrix).unwrap();
    assert!((populations(&rho) - ss).amax() < 1e-9);
}

#[test]
fn full_and_reduced_engines_agree_closely() {
    let dist = DetuningDistribution {
        fwhm: 0.0,
        ..Default::default()
    };
    let lv = EngineLevels::default();
    let c = cfg(0.05, EngineMode::TwoStroke);
    let reduced = PopulationGenerator::reduced(&rc(), 0.76).unwrap();
    let full = PopulationGenerator::full(&rc(), 0.76).unwrap();
    let a = ensemble_power(&c, &reduced, &lv, &dist, 0.41)
        .unwrap()
        .power;
    let b = ensemble_power(&c, &full, &lv, &dist, 0.41).unwrap().power;
    // the reduction drops the ~1% excited-state population
    assert!((a - b).abs() / b < 0.03, "reduced {a}, full {b}");
}

#[test]
fn continuous_power_is_independent_of_cycle_time() {
    let pg = PopulationGenerator::reduced(&rc(), 0.76).unwrap();
    let dist = DetuningDistribution::default();
    let lv = EngineLevels::default();
    let a = continuous_power(&cfg(0.05, EngineMode::Continuous), &pg, &lv, &dist, 0.41).unwrap();
    let b = continuous_power(&cfg(0.5, EngineMode::Continuous), &pg, &lv, &dist, 0.41).unwrap();
    assert!((a.power - b.power).abs() < 1e-9 * a.power);
}

#[test]
fn broad_distribution_reduces_power() {
    let pg = PopulationGenerator::reduced(&rc(), 0.76).unwrap();
    let lv = EngineLevels::default();
    let c = cfg(0.05, EngineMode::TwoStroke);
    let narrow = DetuningDistribution {
        fwhm: 0.0,
        ..Default::default()
    };
    let broad = DetuningDistribution {
        fwhm: 60.0,
        ..Default::default()
    };
    let p0 = ensemble_power(&c, &pg, &lv, &narrow, 0.41).unwrap().power;
    let p1 = ensemble_power(&c, &pg, &lv, &broad, 0.41).unwrap().power;
    assert!(p1 < p0, "{p1} vs {p0}");
}

#[test]
fn closure_holds_without_inhomogeneous_broadening() {
    let dist = DetuningDistribution {
        fwhm: 0.0,
        ..Default::default()
    };
    let c = fluorescence_closure(
        &rc(),
        &cfg(0.05, EngineMode::TwoStroke),
        &EngineLevels::default(),
        &dist,
        0.41,
        DEFAULT_INTERVALS,
    )
    .unwrap();
    assert!(c.relative_error < 0.02);
    assert!((c.rate_power - c.direct).abs() < 1e-6 * c.direct);
    assert!(c.contrast > 0.0);
}

#[test]
fn kappa_band_is_nonzero_and_smooth() {
    let prior = ParameterPrior::default();
    let mode = KappaMode::TwoStroke { duty: 1.0 / 3.0 };
    let band: Vec<(f64, f64)> = [0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&g| {
            let r = propagate(
                &prior,
                |s| Ok(kappa(&s.rates, g, mode, 0.06)?.kappa),
                200,
                11,
            )
            .unwrap();
            (r.mean, r.sigma)
        })
        .collect();
    for w in band.windows(2) {
        assert!(w[0].1 > 0.0);
        // neighbouring relative widths stay within a factor of two
        let (a, b) = (w[0].1 / w[0].0, w[1].1 / w[1].0);
        assert!(a / b < 2.0 && b / a < 2.0, "{band:?}");
    }
}

#[test]
fn power_uncertainty_feeds_the_bound_test() {
    let prior = ParameterPrior::default();
    let lv = EngineLevels::default();
    let dist = DetuningDistribution {
        fwhm: 0.0,
        ..Default::default()
    };
    let p = propagate(
        &prior,
        |s| {
            let pg = PopulationGenerator::reduced(&s.rates, 0.76)?;
            Ok(ensemble_power(&cfg(0.05, EngineMode::TwoStroke), &pg, &lv, &dist, 0.41)?.power)
        },
        100,
        5,
    )
    .unwrap();
    let b = propagate(
        &prior,
        |s| {
            let omega = s.rabi_per_sqrt_mw / prior.nominal.rabi_per_sqrt_mw * 1.6;
            let c = CycleConfig::from_action(
                0.05,
                omega,
                1.0 / 3.0,
                0.41,
                0.76,
                EngineMode::TwoStroke,
            )?;
            Ok(nvheat::engine::stochastic_bound(&c, &lv))
        },
        100,
        5,
    )
    .unwrap();
    let t = bound_violation_from(&p, &b).unwrap();
    assert_eq!(t.n_samples, Some(100));
    assert!(t.p > 0.0 && t.p < 1.0);
    assert!(pump_rate(4.0, 436.0) > 1.7);
}
