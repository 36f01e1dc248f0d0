//! The subcommands and their artifacts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use obss::fixedpoint::{
    check_exponents, picard_solve, require_feasible, write_picard_log, ExponentParams, FixedPointContext, TauGrid,
    VelocityPropagator,
};
use obss::grid::{write_snapshot, PeriodicGrid, SobolevIndex, Snapshot};
use obss::nonuniq::{
    bundle_from_report, family_separations, initial_data_check, residual_check, separation, write_residuals_csv,
    write_separation_csv, Frame, Mode, SolutionBundle,
};
use obss::profiles::{synthesize_forcing, BackgroundProfile, ForcingPair};
use obss::semigroups::{probe_smoothing_multi, write_probe_csv, Generator, LinearStepper, ProbeSettings, SyntheticPropagator};
use obss::spectra::{amplitude_sweep, estimate_eigenpair, estimate_eigenpair_bg, write_sweep_csv, EigenEstimate};
use obss::{ObssError, Result};

use crate::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    CheckExponents,
    Spectrum,
    SemigroupProbe,
    Construct,
    Demo,
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subcommand::CheckExponents => "check-exponents",
            Subcommand::Spectrum => "spectrum",
            Subcommand::SemigroupProbe => "semigroup-probe",
            Subcommand::Construct => "construct",
            Subcommand::Demo => "demo",
        })
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit status plus the human-readable lines printed for it.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub lines: Vec<String>,
}

impl Outcome {
    fn from_checks(mut lines: Vec<String>, failures: Vec<String>) -> Self {
        let code = if failures.is_empty() { EXIT_OK } else { EXIT_INVARIANT };
        lines.extend(failures.into_iter().map(|f| format!("FAILED: {f}")));
        Self { code, lines }
    }
}

/// Exit code for an error escaping a subcommand.
pub fn exit_code(err: &ObssError) -> i32 {
    match err {
        ObssError::Infeasible(_) | ObssError::Config(_) | ObssError::Json(_) => EXIT_INFEASIBLE,
        _ => EXIT_NUMERICAL,
    }
}

pub fn run(cmd: Subcommand, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    if cmd == Subcommand::CheckExponents {
        return check(cfg);
    }
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    match cmd {
        Subcommand::CheckExponents => unreachable!(),
        Subcommand::Spectrum => spectrum(cfg, out),
        Subcommand::SemigroupProbe => probe(cfg, out),
        Subcommand::Construct => construct(cfg, out),
        Subcommand::Demo => demo(cfg, out),
    }
}

fn check(cfg: &RunConfig) -> Result<Outcome> {
    let violated = check_exponents(&cfg.exponents)?;
    if violated.is_empty() {
        Ok(Outcome { code: EXIT_OK, lines: vec!["feasible".into()] })
    } else {
        let list: Vec<String> = violated.iter().map(|c| c.to_string()).collect();
        Ok(Outcome { code: EXIT_INFEASIBLE, lines: vec![format!("infeasible: {}", list.join(", "))] })
    }
}

#[derive(Serialize)]
struct SpectrumSummary {
    mode: Mode,
    amplitude: f64,
    re_lambda: f64,
    im_lambda: f64,
    residual: f64,
    converged: bool,
    tau_star: f64,
}

fn background(cfg: &RunConfig, grid: &PeriodicGrid, amplitude: f64, b: f64) -> Result<BackgroundProfile> {
    let mut pc = cfg.profile_config(b);
    pc.amplitude = amplitude;
    BackgroundProfile::new(grid, &pc, cfg.exponents.n)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn spectrum(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let arnoldi = cfg.arnoldi_config();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    let (est, amplitude) = match cfg.mode {
        Mode::Synthetic => {
            let lambda = Complex64::new(cfg.exponents.a, 0.0);
            let prop = SyntheticPropagator::new(&grid, lambda, cfg.exponents.n)?;
            let est = estimate_eigenpair(&prop, &grid, &arnoldi)?;
            let err = (est.lambda - lambda).norm();
            lines.push(format!("synthetic spectrum: injected λ = {}, recovered {:.8}{:+.8}i", cfg.exponents.a, est.lambda.re, est.lambda.im));
            if err > 1e-6 {
                failures.push(format!("synthetic eigenvalue recovered to {err:.2e} only"));
            }
            (est, cfg.profile.amplitude)
        }
        Mode::Computed => {
            let bg = background(cfg, &grid, cfg.profile.amplitude, cfg.exponents.b)?;
            let est = estimate_eigenpair_bg(&bg, &obss::semigroups::StepperConfig::with_dt(cfg.spectra.dt), &arnoldi)?;
            lines.push(format!(
                "L_ss at A = {}: λ = {:.5}{:+.5}i, residual {:.2e}",
                cfg.profile.amplitude, est.lambda.re, est.lambda.im, est.residual
            ));
            (est, cfg.profile.amplitude)
        }
    };
    write_json(
        &out.join("spectrum.json"),
        &SpectrumSummary {
            mode: cfg.mode,
            amplitude,
            re_lambda: est.lambda.re,
            im_lambda: est.lambda.im,
            residual: est.residual,
            converged: est.converged,
            tau_star: est.tau_star,
        },
    )?;
    if !cfg.spectra.sweep_amplitudes.is_empty() {
        let recs = sweep(cfg, &grid)?;
        write_sweep_csv(&out.join("sweep.csv"), &recs)?;
        for r in &recs {
            lines.push(match &r.estimate {
                Some(e) => format!("A = {}: a = {:.4}, residual {:.2e}", r.amplitude, e.a, e.residual),
                None => format!("A = {}: {}", r.amplitude, r.error.as_deref().unwrap_or("failed")),
            });
        }
    }
    Ok(Outcome::from_checks(lines, failures))
}

fn sweep(cfg: &RunConfig, grid: &PeriodicGrid) -> Result<Vec<obss::spectra::SweepRecord>> {
    amplitude_sweep(
        grid,
        cfg.profile.shape,
        &cfg.spectra.sweep_amplitudes,
        &cfg.profile_config(cfg.exponents.b),
        cfg.exponents.n,
        &obss::semigroups::StepperConfig::with_dt(cfg.spectra.dt),
        &cfg.arnoldi_config(),
    )
}

#[derive(Serialize)]
struct FitRow {
    generator: Generator,
    m: f64,
    k: f64,
    small_exponent: f64,
    prefactor: f64,
    large_rate: Option<f64>,
}

fn probe(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let pb = &cfg.probe;
    let grid = PeriodicGrid::new(pb.box_side, cfg.grid.n)?;
    let mut pc = cfg.profile_config(cfg.exponents.b);
    pc.support_radius = pb.support_radius;
    let bg = BackgroundProfile::new(&grid, &pc, cfg.exponents.n)?;
    let stepper = LinearStepper::from_background(&bg, cfg.stepper_config()?)?;
    let settings = ProbeSettings { seeds: pb.seeds, base_seed: cfg.spectra.seed, ..ProbeSettings::default() };
    let m = SobolevIndex::new(pb.m)?;
    let ks = pb.k.iter().map(|k| SobolevIndex::new(*k)).collect::<Result<Vec<_>>>()?;
    let reports = probe_smoothing_multi(&stepper, pb.generator, m, &ks, &settings)?;
    write_probe_csv(&out.join("probe.csv"), &reports)?;
    let mut w = csv::Writer::from_path(out.join("probe_fit.csv")).map_err(|e| ObssError::Format(e.to_string()))?;
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for r in &reports {
        w.serialize(FitRow {
            generator: r.generator,
            m: r.m,
            k: r.k,
            small_exponent: r.small_exponent,
            prefactor: r.prefactor,
            large_rate: r.large_rate,
        })
        .map_err(|e| ObssError::Format(e.to_string()))?;
        lines.push(format!(
            "{} (m, k) = ({}, {}): small-τ exponent {:.3}, large-τ rate {}",
            r.generator,
            r.m,
            r.k,
            r.small_exponent,
            r.large_rate.map_or("n/a".into(), |x| format!("{x:.3}"))
        ));
        if r.generator == Generator::L {
            let target = -(r.k - r.m) / 2.0;
            let tol = (0.1 * (r.k - r.m)).max(0.15);
            if (r.small_exponent - target).abs() > tol {
                failures.push(format!("exponent {:.3} outside {target} ± {tol}", r.small_exponent));
            }
            if r.large_rate.is_some_and(|x| x > 0.05) {
                failures.push(format!("large-τ growth {:.3} > 0.05", r.large_rate.unwrap_or_default()));
            }
        }
    }
    w.flush()?;
    Ok(Outcome::from_checks(lines, failures))
}

/// The eigenpair, propagator and exponents feeding the construction.
struct Instability {
    mode: Mode,
    params: ExponentParams,
    amplitude: f64,
    estimate: Option<EigenEstimate>,
    note: String,
}

fn find_instability(cfg: &RunConfig, grid: &PeriodicGrid, search: bool) -> Result<Instability> {
    let synthetic = |note: String| Instability {
        mode: Mode::Synthetic,
        params: cfg.exponents,
        amplitude: cfg.profile.amplitude,
        estimate: None,
        note,
    };
    let mut found: Option<(f64, EigenEstimate)> = None;
    if search && !cfg.spectra.sweep_amplitudes.is_empty() {
        for r in sweep(cfg, grid)? {
            if let (true, Some(e)) = (r.usable, r.estimate) {
                if found.as_ref().is_none_or(|(_, f)| e.a > f.a) {
                    found = Some((r.amplitude, e));
                }
            }
        }
    } else if cfg.mode == Mode::Computed {
        let bg = background(cfg, grid, cfg.profile.amplitude, cfg.exponents.b)?;
        let e = estimate_eigenpair_bg(&bg, &obss::semigroups::StepperConfig::with_dt(cfg.spectra.dt), &cfg.arnoldi_config())?;
        if e.a > 0.0 && e.residual <= obss::spectra::USABLE_RESIDUAL {
            found = Some((cfg.profile.amplitude, e));
        } else {
            log::warn!("no usable unstable pair at A = {}: λ = {}", cfg.profile.amplitude, e.lambda);
        }
    }
    match found {
        Some((amplitude, e)) => {
            let mut params = ExponentParams::suggest(e.a, cfg.exponents.delta.min(0.4 * e.a));
            params.n = cfg.exponents.n;
            params.tau0 = cfg.exponents.tau0;
            params.m = cfg.exponents.m;
            require_feasible(&params)?;
            let note = format!("computed: unstable pair a = {:.4} at A = {amplitude}", e.a);
            Ok(Instability { mode: Mode::Computed, params, amplitude, estimate: Some(e), note })
        }
        None if cfg.mode == Mode::Computed => Err(ObssError::Numerical(
            "no usable unstable eigenpair of L_ss at this resolution; rerun with --mode synthetic".into(),
        )),
        None => Ok(synthetic(format!("synthetic: injected a = {}", cfg.exponents.a))),
    }
}

fn context(cfg: &RunConfig, grid: &PeriodicGrid, inst: &Instability) -> Result<FixedPointContext> {
    let bg = background(cfg, grid, inst.amplitude, inst.params.b)?;
    let stepper = LinearStepper::from_background(&bg, cfg.stepper_config()?)?;
    let tol = cfg.construct.tol;
    let mut ctx = match (&inst.estimate, inst.mode) {
        (Some(e), Mode::Computed) => {
            let vel = VelocityPropagator::Computed(stepper.clone());
            FixedPointContext::new(inst.params, bg, e.clone(), vel, stepper, tol)?
        }
        _ => FixedPointContext::synthetic(inst.params, bg, stepper, tol)?,
    };
    if let Some(tmin) = cfg.stepper.tau_min {
        ctx.taus = TauGrid::new(tmin, ctx.params.tau0, TauGrid::SPACING)?;
    }
    Ok(ctx)
}

fn coefficient_tag(c: f64) -> String {
    format!("{c}")
}

fn bundle_snapshot(ctx: &FixedPointContext, b: &SolutionBundle) -> Result<Snapshot> {
    let last = b.taus().len() - 1;
    Snapshot::stack(&[
        Snapshot::from_vector(&b.velocity(ctx, last)),
        Snapshot::from_scalar(&b.temperature(ctx, last)),
    ])
}

fn forcing_snapshot(f: &ForcingPair) -> Result<Snapshot> {
    Snapshot::stack(&[
        Snapshot::from_vector(&f.f_steady),
        Snapshot::from_vector(&f.f_thermal),
        Snapshot::from_scalar(&f.h_core),
    ])
}

struct Built {
    ctx: FixedPointContext,
    forcing: Arc<ForcingPair>,
    bundles: Vec<SolutionBundle>,
    failures: Vec<String>,
}

fn build_bundles(cfg: &RunConfig, inst: &Instability, out: &Path) -> Result<Built> {
    let grid = cfg.grid()?;
    let ctx = context(cfg, &grid, inst)?;
    let forcing = Arc::new(synthesize_forcing(&ctx.background)?);
    write_snapshot(&out.join("forcing.obss"), &forcing_snapshot(&forcing)?)?;
    let mut bundles = Vec::new();
    let mut failures = Vec::new();
    let p = ctx.params;
    for &c in &cfg.construct.coefficients {
        let cx = ctx.clone().with_coefficient(c);
        let report = picard_solve(&cx, cfg.construct.max_iter, cfg.construct.tol)?;
        let tag = coefficient_tag(c);
        write_picard_log(&out.join(format!("picard_{tag}.csv")), &report.log)?;
        if !report.converged {
            failures.push(format!("c = {tag}: Picard stopped at residual {:.3e}", report.residual));
        }
        if report.contraction_factor >= 1.0 {
            failures.push(format!("c = {tag}: contraction factor {:.3}", report.contraction_factor));
        }
        let (nx, ny) = (report.u.norm_x(&p)?, report.theta.norm_y(&p)?);
        if nx > p.m || ny > p.m {
            failures.push(format!("c = {tag}: fixed point leaves the ball (|U|_X = {nx:.3e}, |Θ|_Y = {ny:.3e}, M = {})", p.m));
        }
        let b = bundle_from_report(&cx, forcing.clone(), report);
        write_snapshot(&out.join(format!("bundle_{tag}.obss")), &bundle_snapshot(&cx, &b)?)?;
        bundles.push(b);
    }
    Ok(Built { ctx, forcing, bundles, failures })
}

fn construct(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    require_feasible(&cfg.exponents)?;
    let grid = cfg.grid()?;
    let inst = find_instability(cfg, &grid, false)?;
    let built = build_bundles(cfg, &inst, out)?;
    let lines = built
        .bundles
        .iter()
        .map(|b| {
            format!(
                "c = {}: contraction factor {:.3e}, fixed-point residual {:.3e}",
                b.c, b.contraction_factor, b.fixed_point_residual
            )
        })
        .chain(std::iter::once(inst.note))
        .collect();
    Ok(Outcome::from_checks(lines, built.failures))
}

#[derive(Serialize)]
struct Summary {
    a: f64,
    beta: f64,
    gamma: f64,
    b: f64,
    tau0: f64,
    residual_max: f64,
    separation_min: f64,
    mode: Mode,
    generated_at: String,
    coefficients: Vec<f64>,
    contraction_factor: f64,
    fixed_point_residual: f64,
    divergence_max: f64,
    early_rate: Option<f64>,
    initial_data_slope: f64,
    l2_time_integral: f64,
}

/// Residual bound of a converged bundle.
pub const RESIDUAL_BOUND: f64 = 1e-3;

fn demo(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    require_feasible(&cfg.exponents)?;
    let mut coeffs = cfg.construct.coefficients.clone();
    coeffs.dedup();
    if coeffs.len() < 2 {
        return Err(ObssError::Config("the demo needs at least two distinct coefficients".into()));
    }
    let grid = cfg.grid()?;
    let inst = find_instability(cfg, &grid, true)?;
    let mut lines = vec![inst.note.clone()];
    let built = build_bundles(cfg, &inst, out)?;
    let mut failures = built.failures;
    let ctx = &built.ctx;
    let p = ctx.params;
    for b in &built.bundles {
        if !Arc::ptr_eq(&b.forcing, &built.forcing) || *b.forcing != *built.forcing {
            failures.push(format!("c = {}: forcing differs from the shared one", b.c));
        }
    }

    let stride = cfg.construct.residual_stride;
    let taus: Vec<f64> = ctx.taus.nodes().into_iter().step_by(stride).collect();
    let mut residuals = Vec::new();
    for b in &built.bundles {
        residuals.push(residual_check(ctx, b, Frame::SelfSimilar, &taus)?);
    }
    write_residuals_csv(&out.join("residuals.csv"), &residuals)?;
    let residual_max = residuals.iter().map(|r| r.max()).fold(0.0, f64::max);
    let divergence_max = residuals.iter().map(|r| r.divergence_max).fold(0.0, f64::max);
    lines.push(format!("residual max {residual_max:.3e}, divergence max {divergence_max:.3e}"));
    if residual_max > RESIDUAL_BOUND {
        failures.push(format!("residual {residual_max:.3e} > {RESIDUAL_BOUND:e}"));
    }
    if divergence_max > 1e-10 {
        failures.push(format!("divergence {divergence_max:.3e} > 1e-10"));
    }

    let seps = built
        .bundles
        .windows(2)
        .map(|w| separation(ctx, &w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    write_separation_csv(&out.join("separation.csv"), &seps)?;
    let separation_min = seps.iter().map(|s| s.min_separation).fold(f64::INFINITY, f64::min);
    let early_rate = seps[0].early_rate;
    lines.push(format!(
        "separation min {separation_min:.3e}, early-branch rate {}",
        early_rate.map_or("n/a".into(), |r| format!("{r:.4}"))
    ));
    if !(separation_min > 0.0) {
        failures.push("two solutions coincide somewhere on the grid".into());
    }
    for s in &seps {
        match s.early_rate {
            Some(r) if (r - p.a).abs() <= 0.2 => {}
            other => failures.push(format!("early-branch rate {other:?} is not a = {} ± 0.2", p.a)),
        }
    }
    for (c1, c2, m) in family_separations(ctx, &built.bundles)? {
        if !(m > 0.0) {
            failures.push(format!("bundles c = {c1} and c = {c2} touch"));
        }
    }

    let t_lo = 1e-3f64.max(2.0 * ctx.taus.tau_min().exp());
    let mut slope = f64::INFINITY;
    let mut l2t = 0.0f64;
    for b in &built.bundles {
        let id = initial_data_check(ctx, b, t_lo, 8)?;
        slope = slope.min(id.velocity_slope);
        l2t = l2t.max(id.l2_time_integral);
        if !id.monotone {
            failures.push(format!("c = {}: norms do not decrease as t → 0", b.c));
        }
    }
    lines.push(format!("zero-data slope {slope:.4}, ∫‖u‖² dt = {l2t:.4e}"));
    if slope < 0.25 - 0.05 {
        failures.push(format!("zero-data slope {slope:.4} < 0.2"));
    }

    let summary = Summary {
        a: p.a,
        beta: p.beta,
        gamma: p.gamma,
        b: p.b,
        tau0: p.tau0,
        residual_max,
        separation_min,
        mode: inst.mode,
        generated_at: chrono::Utc::now().to_rfc3339(),
        coefficients: built.bundles.iter().map(|b| b.c).collect(),
        contraction_factor: built.bundles.iter().map(|b| b.contraction_factor).fold(0.0, f64::max),
        fixed_point_residual: built.bundles.iter().map(|b| b.fixed_point_residual).fold(0.0, f64::max),
        divergence_max,
        early_rate,
        initial_data_slope: slope,
        l2_time_integral: l2t,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(Outcome::from_checks(lines, failures))
}

/// Default output directory for a subcommand.
pub fn default_out(cmd: Subcommand) -> PathBuf {
    PathBuf::from(format!("obss-{cmd}"))
}
