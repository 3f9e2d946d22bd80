//! `nvheat`: figure reproduction and single-point engine evaluations.
//!
//! Exit codes: 0 success, 1 computation error or failed self-test, 2 usage error.

mod config;
mod figures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use nvheat::engine::{ensemble_power_with, CycleConfig, EngineMode, PopulationGenerator};
use nvheat::fluorescence::{kappa_with, KappaMode};
use nvheat::numerics::{eig_real, AdaptiveAverage};
use nvheat::nv_model::{fit_gamma_calibration, optical_matrix, spot_diameter_um, FitOptions};
use nvheat::reference;
use nvheat::thermal::{Expansion, FD_STEP, GAMMA_REF};
use nvheat::uncertainty::{bound_violation_from, bound_violation_test, one_sided_p, propagate};

use config::{Format, RunConfig};
use figures::Figure;
use output::{print_checks, render, render_csv, render_json, write_file, Cell, Check, Table};

/// Error class mapped to exit code 2.
#[derive(Debug)]
pub struct UsageError(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

impl From<anyhow::Error> for UsageError {
    fn from(e: anyhow::Error) -> Self {
        UsageError(e)
    }
}

fn usage(msg: String) -> anyhow::Error {
    UsageError(anyhow::anyhow!(msg)).into()
}

/// A list of values given as `a,b,c`, `start:stop:n` (linear) or `log:start:stop:n`.
#[derive(Debug, Clone, PartialEq)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("'{t}' is not a number"))
    };
    let count = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("'{t}' is not a point count"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        [a, b, n] => {
            let (a, b, n) = (num(a)?, num(b)?, count(n)?);
            if n < 2 {
                return Err("a range needs at least 2 points".into());
            }
            (0..n)
                .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                .collect()
        }
        ["log", a, b, n] => {
            let (a, b, n) = (num(a)?, num(b)?, count(n)?);
            if !(a > 0.0 && b > 0.0) || n < 2 {
                return Err("a log range needs positive ends and at least 2 points".into());
            }
            (0..n)
                .map(|k| a * (b / a).powf(k as f64 / (n - 1) as f64))
                .collect()
        }
        _ => return Err(format!("cannot parse grid '{s}'")),
    };
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        return Err(format!("grid '{s}' is empty or not finite"));
    }
    Ok(Grid(grid))
}

#[derive(Parser, Debug)]
#[command(
    name = "nvheat",
    version,
    about = "NV-centre quantum heat engine simulator"
)]
struct Cli {
    /// JSON config file (an output file of this tool also works).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the data behind a figure (CSV and JSON) and print its checks.
    Reproduce(ReproduceArgs),
    /// Power, work and bound of single engine configurations.
    Engine(EngineArgs),
    /// Fluorescence-to-power conversion factor κ(Γ).
    Kappa(KappaArgs),
    /// Fit the pump-rate calibration to a saturation curve.
    Calibrate(CalibrateArgs),
    /// Monte-Carlo uncertainties and the bound-violation test.
    Uncertainty(UncertaintyArgs),
    /// Check the model against golden reference values.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(value_enum)]
    figure: Figure,
    /// Rabi frequencies for fig3.
    #[arg(long, value_parser = parse_grid)]
    omega_grid: Option<Grid>,
    /// Action grid for fig3/fig4a.
    #[arg(long, value_parser = parse_grid)]
    actions: Option<Grid>,
    /// Pump grid for s11/s15/s16.
    #[arg(long, value_parser = parse_grid)]
    pumps: Option<Grid>,
}

#[derive(Args, Debug)]
struct EngineArgs {
    #[arg(long, default_value = "two_stroke")]
    mode: String,
    #[arg(long, value_parser = parse_grid)]
    omega: Option<Grid>,
    #[arg(long, value_parser = parse_grid)]
    action: Option<Grid>,
    #[arg(long)]
    duty: Option<f64>,
    #[arg(long)]
    pump: Option<f64>,
    #[arg(long)]
    gamma_th: Option<f64>,
    /// Detuning FWHM in rad/µs; 0 evaluates the resonant centre only.
    #[arg(long)]
    fwhm: Option<f64>,
}

#[derive(Args, Debug)]
struct KappaArgs {
    #[arg(long, value_parser = parse_grid)]
    pump: Option<Grid>,
    /// continuous or two_stroke.
    #[arg(long, default_value = "two_stroke")]
    mode: String,
    #[arg(long)]
    tau_cyc: Option<f64>,
    #[arg(long)]
    duty: Option<f64>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// CSV of (laser power mW, counts); synthetic data from the config when absent.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct UncertaintyArgs {
    /// Only convert a test statistic to its one-sided p-value.
    #[arg(long, allow_negative_numbers = true)]
    t: Option<f64>,
    /// power (engine power vs bound) or kappa.
    #[arg(long, default_value = "power")]
    quantity: String,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    pump: Option<f64>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    #[arg(long)]
    json: bool,
}

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
}

fn resolve(cli: &Cli) -> anyhow::Result<Ctx> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(s) = cli.seed {
        cfg.output.seed = s;
    }
    let env_dir = std::env::var_os("NVHEAT_OUT_DIR").map(PathBuf::from);
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .or(env_dir);
    if let Some(o) = &cli.out {
        cfg.output.dir = Some(o.clone());
    }
    Ok(Ctx { cfg, out })
}

fn emit(ctx: &Ctx, command: &str, table: &Table) -> anyhow::Result<()> {
    let text = render(ctx.cfg.output.format, command, &ctx.cfg, table)?;
    print!("{text}");
    if let Some(dir) = &ctx.out {
        let ext = match ctx.cfg.output.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        write_file(dir, &format!("{}.{ext}", table.name), &text)?;
    }
    Ok(())
}

fn cmd_reproduce(ctx: &mut Ctx, args: &ReproduceArgs) -> anyhow::Result<()> {
    if let Some(Grid(g)) = &args.omega_grid {
        ctx.cfg.engine.omega_grid = g.clone();
    }
    if let Some(Grid(a)) = &args.actions {
        ctx.cfg.engine.fig3_actions = a.clone();
        ctx.cfg.engine.fig4a_actions = a.clone();
    }
    if let Some(Grid(p)) = &args.pumps {
        ctx.cfg.emulation.pumps = p.clone();
        ctx.cfg.kappa.pumps = p.clone();
    }
    let id = args.figure.id();
    let data = figures::reproduce(args.figure, &ctx.cfg)?;
    let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let command = format!("reproduce {id}");
    for t in &data.tables {
        write_file(
            &dir,
            &format!("{}.csv", t.name),
            &render_csv(&command, &ctx.cfg, t)?,
        )?;
    }
    let tables: Vec<&Table> = data.tables.iter().collect();
    write_file(
        &dir,
        &format!("{id}.json"),
        &render_json(&command, &ctx.cfg, &tables, &data.checks)?,
    )?;
    for t in &data.tables {
        println!(
            "{}: {} rows × {} columns → {}",
            t.name,
            t.rows.len(),
            t.columns.len(),
            dir.join(format!("{}.csv", t.name)).display()
        );
    }
    print_checks(&format!("{id} checks"), &data.checks);
    Ok(())
}

fn parse_mode(s: &str) -> anyhow::Result<EngineMode> {
    s.parse::<EngineMode>().map_err(|e| usage(e.to_string()))
}

fn cmd_engine(ctx: &mut Ctx, args: &EngineArgs) -> anyhow::Result<()> {
    let e = &mut ctx.cfg.engine;
    if let Some(d) = args.duty {
        e.duty = d;
    }
    if let Some(p) = args.pump {
        e.pump = p;
    }
    if let Some(g) = args.gamma_th {
        e.gamma_th = g;
    }
    if let Some(f) = args.fwhm {
        e.detuning.fwhm = f;
    }
    let mode = parse_mode(&args.mode)?;
    let omegas = args
        .omega
        .clone()
        .map(|g| g.0)
        .unwrap_or_else(|| vec![e.omega]);
    let actions = args.action.clone().map(|g| g.0).unwrap_or_else(|| {
        vec![e
            .fig4a_actions
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)]
    });
    if !(e.duty > 0.0 && e.duty < 1.0) {
        return Err(usage(format!(
            "duty cycle must lie in (0, 1), got {}",
            e.duty
        )));
    }
    let e = ctx.cfg.engine.clone();
    let pg = PopulationGenerator::reduced(&ctx.cfg.rates, e.pump)?;
    let mut t = Table::new(
        "engine",
        &[
            "mode",
            "omega",
            "action",
            "formal_action",
            "tau_cyc",
            "work_per_cycle",
            "power",
            "bound",
            "exceeds_bound",
        ],
    );
    for &omega in &omegas {
        for &s in &actions {
            let c = CycleConfig::from_action(s, omega, e.duty, e.gamma_th, e.pump, mode)?;
            let r = ensemble_power_with(
                &c,
                &pg,
                &e.levels,
                &e.detuning,
                e.gamma_th,
                &AdaptiveAverage::default(),
            )?;
            t.push(vec![
                mode.label().into(),
                omega.into(),
                r.action.into(),
                r.formal_action.into(),
                r.tau_cyc.into(),
                r.work_per_cycle.into(),
                r.power.into(),
                r.bound.into(),
                (r.power > r.bound).into(),
            ]);
        }
    }
    emit(ctx, "engine", &t)
}

fn parse_kappa_mode(s: &str, duty: f64) -> anyhow::Result<KappaMode> {
    match s {
        "continuous" => Ok(KappaMode::Continuous),
        "two_stroke" | "two-stroke" => Ok(KappaMode::TwoStroke { duty }),
        other => Err(usage(format!(
            "unknown κ mode '{other}' (continuous or two_stroke)"
        ))),
    }
}

fn cmd_kappa(ctx: &mut Ctx, args: &KappaArgs) -> anyhow::Result<()> {
    let k = &mut ctx.cfg.kappa;
    if let Some(Grid(p)) = &args.pump {
        k.pumps = p.clone();
    }
    if let Some(t) = args.tau_cyc {
        k.tau_cyc = t;
    }
    if let Some(d) = args.duty {
        k.duty = d;
    }
    let k = ctx.cfg.kappa.clone();
    let mode = parse_kappa_mode(&args.mode, k.duty)?;
    let mut t = Table::new(
        "kappa",
        &[
            "mode",
            "pump",
            "tau_cyc",
            "kappa",
            "h_mean",
            "h_variation",
            "mean_fluorescence",
        ],
    );
    for &g in &k.pumps {
        let r = kappa_with(&ctx.cfg.rates, g, mode, k.tau_cyc, k.intervals)?;
        t.push(vec![
            mode.label().into(),
            g.into(),
            k.tau_cyc.into(),
            r.kappa.into(),
            r.h_mean.into(),
            r.h_variation.into(),
            r.mean_fluorescence.into(),
        ]);
    }
    emit(ctx, "kappa", &t)
}

fn read_saturation_csv(path: &PathBuf) -> anyhow::Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parsed = (cols.len() >= 2)
            .then(|| {
                Some((
                    cols[0].trim().parse::<f64>().ok()?,
                    cols[1].trim().parse::<f64>().ok()?,
                ))
            })
            .flatten();
        match parsed {
            Some(p) => out.push(p),
            // a header row is allowed first
            None if out.is_empty() => continue,
            None => {
                return Err(usage(format!(
                    "{}:{}: expected 'power,counts'",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

fn cmd_calibrate(ctx: &mut Ctx, args: &CalibrateArgs) -> anyhow::Result<()> {
    let (data, source) = match &args.data {
        Some(p) => (read_saturation_csv(p)?, p.display().to_string()),
        None => (
            figures::synthetic_saturation(&ctx.cfg)?,
            "synthetic".to_string(),
        ),
    };
    let fit = fit_gamma_calibration(&data, &ctx.cfg.rates, &FitOptions::default())?;
    let mut t = Table::new(
        "calibrate",
        &[
            "source",
            "n_points",
            "r",
            "r_sigma",
            "amplitude",
            "amplitude_sigma",
            "iterations",
            "residual_norm",
            "spot_diameter_um",
        ],
    );
    t.push(vec![
        source.into(),
        fit.n_points.into(),
        fit.r_khz_per_mw.into(),
        fit.r_sigma.into(),
        fit.amplitude.into(),
        fit.amplitude_sigma.into(),
        fit.iterations.into(),
        fit.residual_norm.into(),
        spot_diameter_um(fit.r_khz_per_mw, &ctx.cfg.calibration).into(),
    ]);
    emit(ctx, "calibrate", &t)
}

const STAT_COLUMNS: [&str; 11] = [
    "quantity",
    "mean",
    "sigma",
    "p2_5",
    "p16",
    "p50",
    "p84",
    "p97_5",
    "n_samples",
    "n_failed",
    "seed",
];

fn stat_row(name: &str, p: &nvheat::uncertainty::Propagation) -> Vec<Cell> {
    let mut row: Vec<Cell> = vec![name.into(), p.mean.into(), p.sigma.into()];
    row.extend(p.percentiles.iter().map(|q| Cell::Num(q.1)));
    row.extend([
        p.n_samples.into(),
        p.n_failed.into(),
        Cell::Int(p.seed as i64),
    ]);
    row
}

fn cmd_uncertainty(ctx: &mut Ctx, args: &UncertaintyArgs) -> anyhow::Result<()> {
    if let Some(t) = args.t {
        let mut table = Table::new("p_value", &["t", "p"]);
        table.push(vec![t.into(), one_sided_p(t).into()]);
        return emit(ctx, "uncertainty", &table);
    }
    if let Some(n) = args.samples {
        ctx.cfg.uncertainty.samples = n;
    }
    let cfg = ctx.cfg.clone();
    let u = &cfg.uncertainty;
    let e = &cfg.engine;
    let seed = cfg.output.seed;
    let mut t = Table::new("uncertainty", &STAT_COLUMNS);
    match args.quantity.as_str() {
        "kappa" => {
            let g = args.pump.unwrap_or(e.pump);
            let mode = KappaMode::TwoStroke {
                duty: cfg.kappa.duty,
            };
            let k = &cfg.kappa;
            let r = propagate(
                &u.prior,
                |s| Ok(kappa_with(&s.rates, g, mode, k.tau_cyc, k.intervals)?.kappa),
                u.samples,
                seed,
            )?;
            t.push(stat_row("kappa", &r));
        }
        "power" => {
            let pump = args.pump.unwrap_or(e.pump);
            let nominal_rabi = u.prior.nominal.rabi_per_sqrt_mw;
            let quad = AdaptiveAverage {
                rel_tol: 1e-6,
                ..AdaptiveAverage::default()
            };
            let cycle = |s: &nvheat::uncertainty::ParameterSample| {
                let omega = e.omega * s.rabi_per_sqrt_mw / nominal_rabi;
                CycleConfig::from_action(
                    u.action,
                    omega,
                    e.duty,
                    e.gamma_th,
                    pump,
                    EngineMode::TwoStroke,
                )
            };
            let power = propagate(
                &u.prior,
                |s| {
                    let pg = PopulationGenerator::reduced(&s.rates, pump)?;
                    let dist = nvheat::engine::DetuningDistribution {
                        fwhm: s.fwhm,
                        ..e.detuning
                    };
                    Ok(
                        ensemble_power_with(&cycle(s)?, &pg, &e.levels, &dist, e.gamma_th, &quad)?
                            .power,
                    )
                },
                u.samples,
                seed,
            )?;
            let bound = propagate(
                &u.prior,
                |s| Ok(nvheat::engine::stochastic_bound(&cycle(s)?, &e.levels)),
                u.samples,
                seed,
            )?;
            t.push(stat_row("power", &power));
            t.push(stat_row("bound", &bound));
            if power.sigma > 0.0 && bound.sigma > 0.0 {
                let test = bound_violation_from(&power, &bound)?;
                eprintln!(
                    "bound violation test: t = {:.4}, one-sided p = {:.6}",
                    test.t, test.p
                );
            }
        }
        other => {
            return Err(usage(format!(
                "unknown quantity '{other}' (power or kappa)"
            )))
        }
    }
    emit(ctx, "uncertainty", &t)
}

#[derive(Serialize)]
struct GoldenCheck {
    name: String,
    value: f64,
    reference: f64,
    deviation: f64,
    tolerance: f64,
    pass: bool,
}

fn golden(name: String, value: f64, reference: f64, tolerance: f64) -> GoldenCheck {
    let deviation = (value - reference).abs();
    GoldenCheck {
        name,
        value,
        reference,
        deviation,
        tolerance,
        pass: deviation <= tolerance,
    }
}

fn selftest_checks(cfg: &RunConfig) -> anyhow::Result<Vec<GoldenCheck>> {
    let mut out = Vec::new();
    let m = optical_matrix(&cfg.rates.with_pump(0.5))?;
    let mut ev: Vec<f64> = eig_real(&m)?.values.iter().map(|z| z.re).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    for (i, (v, r)) in ev
        .iter()
        .zip(reference::EIGENVALUES_AT_HALF_MHZ)
        .enumerate()
    {
        out.push(golden(
            format!("eigenvalue {i}"),
            *v,
            r,
            reference::TOLERANCE_MHZ,
        ));
    }
    let e = Expansion::new(&cfg.rates, GAMMA_REF, FD_STEP, false)?;
    for (label, mat, gold) in [("L0", &e.l0, &reference::L0), ("L1", &e.l1, &reference::L1)] {
        let mut worst = (0.0, 0.0, 0.0);
        for (i, row) in gold.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                if (mat[(i, j)] - g).abs() >= worst.0 {
                    worst = ((mat[(i, j)] - g).abs(), mat[(i, j)], g);
                }
            }
        }
        out.push(golden(
            format!("{label} worst entry"),
            worst.1,
            worst.2,
            reference::MATRIX_TOLERANCE_MHZ,
        ));
    }
    let p = bound_violation_test(reference::T_STATISTIC, 0.6, 0.0, 0.8)?.p;
    out.push(golden(
        "p-value at t = 2.4".into(),
        p,
        reference::P_VALUE,
        reference::P_TOLERANCE,
    ));
    Ok(out)
}

fn cmd_selftest(ctx: &Ctx, args: &SelftestArgs) -> anyhow::Result<bool> {
    let checks = selftest_checks(&ctx.cfg)?;
    let all = checks.iter().all(|c| c.pass);
    if args.json || ctx.cfg.output.format == Format::Json {
        let doc = serde_json::json!({ "pass": all, "checks": checks, "rates": ctx.cfg.rates });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        let rows: Vec<Check> = checks
            .iter()
            .map(|c| {
                Check::new(
                    &c.name,
                    c.pass,
                    format!(
                        "{:>10.4} vs {:>9.4}  Δ {:.4} (tol {})",
                        c.value, c.reference, c.deviation, c.tolerance
                    ),
                )
            })
            .collect();
        print_checks("golden checks", &rows);
        println!(
            "{}",
            if all {
                "all checks pass"
            } else {
                "some checks FAILED"
            }
        );
    }
    Ok(all)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut ctx = resolve(&cli)?;
    match &cli.command {
        Command::Reproduce(a) => cmd_reproduce(&mut ctx, a)?,
        Command::Engine(a) => cmd_engine(&mut ctx, a)?,
        Command::Kappa(a) => cmd_kappa(&mut ctx, a)?,
        Command::Calibrate(a) => cmd_calibrate(&mut ctx, a)?,
        Command::Uncertainty(a) => cmd_uncertainty(&mut ctx, a)?,
        Command::Selftest(a) => return cmd_selftest(&ctx, a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
