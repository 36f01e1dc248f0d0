//! Assembly of solutions `U = Ū + cU_l + U_p(c)`, `Θ = Θ̄ + Θ_p(c)` sharing one
//! forcing, their equation residuals, and how far apart they are.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ObssError, Result};
use crate::fixedpoint::{
    picard_solve, FixedPointContext, PicardReport, TauGrid, Trajectory, TrajectoryX, TrajectoryY, VelocityPropagator,
};
use crate::grid::{
    advect, advect_vector, dilate, gravity_gradient, hs_norm, leray_project, LinearField, SobolevIndex,
    SpectralField, SpectralScalarField, SpectralVectorField,
};
use crate::profiles::{linear_fit, log_spaced, ForcingPair};
use crate::selfsim::{natural_residual, to_natural, FieldWeight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Computed,
    Synthetic,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Computed => "computed",
            Mode::Synthetic => "synthetic",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolutionBundle {
    pub c: f64,
    pub mode: Mode,
    pub u_p: TrajectoryX,
    pub theta_p: TrajectoryY,
    pub forcing: Arc<ForcingPair>,
    pub contraction_factor: f64,
    pub fixed_point_residual: f64,
}

impl SolutionBundle {
    pub fn taus(&self) -> &TauGrid {
        self.u_p.taus()
    }

    /// `cU_l + U_p` at node `i`.
    pub fn perturbation(&self, ctx: &FixedPointContext, i: usize) -> SpectralVectorField {
        let mut w = ctx.estimate.mode_at(self.taus().node(i)).scaled(self.c);
        w.axpy(1.0, self.u_p.node(i));
        w
    }

    /// Full `U = Ū + cU_l + U_p` at node `i`.
    pub fn velocity(&self, ctx: &FixedPointContext, i: usize) -> SpectralVectorField {
        let mut u = self.perturbation(ctx, i);
        u.axpy(1.0, &ctx.background.u_bar);
        u
    }

    /// Full `Θ = Θ̄ + Θ_p` at node `i`.
    pub fn temperature(&self, ctx: &FixedPointContext, i: usize) -> SpectralScalarField {
        let mut th = ctx.theta_bar(self.taus().node(i));
        th.axpy(1.0, self.theta_p.node(i));
        th
    }

    /// `(u, θ, f, h)` at natural time `t = e^{τ_i}`, on the box of side `L√t`.
    pub fn natural_at(
        &self,
        ctx: &FixedPointContext,
        i: usize,
    ) -> Result<(SpectralVectorField, SpectralScalarField, SpectralVectorField, SpectralScalarField)> {
        let tau = self.taus().node(i);
        let t = tau.exp();
        Ok((
            to_natural(&self.velocity(ctx, i), t, FieldWeight::Velocity)?,
            to_natural(&self.temperature(ctx, i), t, FieldWeight::Velocity)?,
            to_natural(&self.forcing.f_at(tau), t, FieldWeight::Forcing)?,
            to_natural(&self.forcing.h_at(tau), t, FieldWeight::Forcing)?,
        ))
    }
}

/// Runs the fixed point for `ctx.coefficient` and wraps it with the shared forcing.
pub fn assemble_solution(
    ctx: &FixedPointContext,
    forcing: Arc<ForcingPair>,
    max_iter: usize,
    tol: f64,
) -> Result<SolutionBundle> {
    let report = picard_solve(ctx, max_iter, tol)?;
    if !report.converged {
        return Err(ObssError::Numerical(format!(
            "Picard did not reach {tol:e} in {max_iter} iterations for c = {} (residual {:.3e})",
            ctx.coefficient, report.residual
        )));
    }
    Ok(bundle_from_report(ctx, forcing, report))
}

pub fn bundle_from_report(ctx: &FixedPointContext, forcing: Arc<ForcingPair>, report: PicardReport) -> SolutionBundle {
    SolutionBundle {
        c: ctx.coefficient,
        mode: if ctx.is_synthetic() { Mode::Synthetic } else { Mode::Computed },
        u_p: report.u,
        theta_p: report.theta,
        forcing,
        contraction_factor: report.contraction_factor,
        fixed_point_residual: report.residual,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Natural,
    SelfSimilar,
}

/// Residuals at one node, each divided by the sum of its terms' norms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualRow {
    pub c: f64,
    pub frame: Frame,
    pub tau: f64,
    pub momentum: f64,
    pub temperature: f64,
    pub divergence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    pub momentum_max: f64,
    pub temperature_max: f64,
    pub divergence_max: f64,
}

impl ResidualReport {
    /// Largest of the momentum and temperature residuals.
    pub fn max(&self) -> f64 {
        self.momentum_max.max(self.temperature_max)
    }
}

fn rel(r: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

fn divergence_ratio(u: &SpectralVectorField) -> f64 {
    let g = u.h1_seminorm();
    if g > 0.0 {
        u.divergence().l2_norm() / g
    } else {
        0.0
    }
}

/// Self-similar temperature equation
/// `∂_τΘ − ½(1+ξ·∇)Θ − ΔΘ + U·∇Θ − H`.
fn temperature_residual(
    ctx: &FixedPointContext,
    b: &SolutionBundle,
    i: usize,
    u: &SpectralVectorField,
) -> Result<f64> {
    let tau = b.taus().node(i);
    let th = b.temperature(ctx, i);
    let mut dt = ctx.theta_bar(tau).scaled(ctx.params.b);
    dt.axpy(1.0, &b.theta_p.time_derivative(i));
    let drift = ctx.background.drift_scalar(&th);
    let lap = th.laplacian();
    let adv = advect(u, &th)?;
    let h = b.forcing.h_at(tau);
    let mut r = dt.clone();
    r.axpy(-1.0, &drift);
    r.axpy(-1.0, &lap);
    r.axpy(1.0, &adv);
    r.axpy(-1.0, &h);
    let scale = dt.l2_norm() + drift.l2_norm() + lap.l2_norm() + adv.l2_norm() + h.l2_norm();
    Ok(rel(r.dealiased().l2_norm(), scale))
}

/// Self-similar momentum equation after projection,
/// `∂_τU − ½(1+ξ·∇)U − ΔU + ℙ(U·∇U) − ℙ(Θ∇(1/|ξ|)) − F`.
fn momentum_residual_full(ctx: &FixedPointContext, b: &SolutionBundle, i: usize, u: &SpectralVectorField) -> Result<f64> {
    let tau = b.taus().node(i);
    let mut dt = ctx.estimate.mode_rate_at(tau).scaled(b.c);
    dt.axpy(1.0, &b.u_p.time_derivative(i));
    let drift = leray_project(&ctx.background.drift_vector(u));
    let lap = u.laplacian();
    let conv = leray_project(&advect_vector(u, u)?);
    let grav = gravity_gradient(&b.temperature(ctx, i));
    let f = b.forcing.f_at(tau);
    let mut r = leray_project(&dt);
    r.axpy(-1.0, &drift);
    r.axpy(-1.0, &lap);
    r.axpy(1.0, &conv);
    r.axpy(-1.0, &grav);
    r.axpy(-1.0, &f);
    let scale = dt.l2_norm() + drift.l2_norm() + lap.l2_norm() + conv.l2_norm() + grav.l2_norm() + f.l2_norm();
    Ok(rel(r.dealiased().l2_norm(), scale))
}

/// Perturbation momentum equation with the injected generator,
/// `∂_τW − L_syn W + ℙ(W·∇W) − ℙ(Θ_p∇(1/|ξ|))` for `W = cU_l + U_p`.
fn momentum_residual_synthetic(ctx: &FixedPointContext, b: &SolutionBundle, i: usize) -> Result<f64> {
    let VelocityPropagator::Synthetic(prop) = &ctx.velocity else {
        return Err(ObssError::FrameUnavailable("synthetic residual needs the injected propagator".into()));
    };
    let tau = b.taus().node(i);
    let w = b.perturbation(ctx, i);
    let mut dt = ctx.estimate.mode_rate_at(tau).scaled(b.c);
    dt.axpy(1.0, &b.u_p.time_derivative(i));
    let gen = prop.generator(&w);
    let conv = leray_project(&advect_vector(&w, &w)?);
    let grav = gravity_gradient(b.theta_p.node(i));
    let mut r = dt.clone();
    r.axpy(-1.0, &gen);
    r.axpy(1.0, &conv);
    r.axpy(-1.0, &grav);
    let scale = dt.l2_norm() + gen.l2_norm() + conv.l2_norm() + grav.l2_norm();
    Ok(rel(r.dealiased().l2_norm(), scale))
}

/// Weights of the derivative at `x[k]` of the interpolant through `x`.
fn derivative_weights(x: &[f64], k: usize) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|j| {
            if j == k {
                (0..n).filter(|&m| m != k).map(|m| 1.0 / (x[k] - x[m])).sum()
            } else {
                let mut w = 1.0 / (x[j] - x[k]);
                for m in 0..n {
                    if m != j && m != k {
                        w *= (x[k] - x[m]) / (x[j] - x[m]);
                    }
                }
                w
            }
        })
        .collect()
}

/// Natural-variable residual at `t_i = e^{τ_i}`: neighbouring nodes are
/// dilated onto the box of side `L√t_i` and differenced in `t`.
fn natural_row(ctx: &FixedPointContext, b: &SolutionBundle, i: usize) -> Result<ResidualRow> {
    let taus = b.taus();
    let n = taus.len();
    let lo = i.saturating_sub(2).min(n - 5);
    let idx: Vec<usize> = (lo..lo + 5).collect();
    let ti = taus.node(i).exp();
    let ts: Vec<f64> = idx.iter().map(|&j| taus.node(j).exp()).collect();
    let w = derivative_weights(&ts, i - lo);
    let pull = |j: usize| -> Result<(SpectralVectorField, SpectralScalarField)> {
        let tj = taus.node(j).exp();
        let s = (ti / tj).sqrt();
        let u = b.velocity(ctx, j);
        let comps = u.components().clone().map(|c| dilate(&c, s, s).0);
        let u = to_natural(&SpectralVectorField::from_components(comps), ti, FieldWeight::Velocity)?;
        let th = to_natural(&dilate(&b.temperature(ctx, j), s, s).0, ti, FieldWeight::Velocity)?;
        Ok((u, th))
    };
    let (u, th, f, h) = b.natural_at(ctx, i)?;
    let mut du = SpectralVectorField::zeros(u.grid());
    let mut dth = SpectralScalarField::zeros(u.grid());
    for (k, &j) in idx.iter().enumerate() {
        let (uj, thj) = if j == i { (u.clone(), th.clone()) } else { pull(j)? };
        du.axpy(w[k], &uj);
        dth.axpy(w[k], &thj);
    }
    let r = natural_residual(&u, &th, &f, &h, &du, &dth)?;
    Ok(ResidualRow {
        c: b.c,
        frame: Frame::Natural,
        tau: taus.node(i),
        momentum: r.momentum,
        temperature: r.temperature,
        divergence: r.divergence,
    })
}

/// Relative residuals of all three equations at the nodes nearest to `taus`.
/// The natural frame needs the computed `L_ss`: with an injected propagator
/// the perturbation obeys `L_syn`, which has no natural-variable form.
pub fn residual_check(ctx: &FixedPointContext, b: &SolutionBundle, frame: Frame, taus: &[f64]) -> Result<ResidualReport> {
    if *b.taus() != ctx.taus {
        return Err(ObssError::Config("bundle and context use different τ-grids".into()));
    }
    if frame == Frame::Natural && ctx.is_synthetic() {
        return Err(ObssError::FrameUnavailable(
            "natural-frame residual requires the computed L_ss; synthetic runs are checked in the self-similar frame".into(),
        ));
    }
    let mut rows = Vec::with_capacity(taus.len());
    for &t in taus {
        let i = ctx.taus.nearest(t);
        let row = match frame {
            Frame::Natural => natural_row(ctx, b, i)?,
            Frame::SelfSimilar => {
                let u = b.velocity(ctx, i);
                let momentum = if ctx.is_synthetic() {
                    momentum_residual_synthetic(ctx, b, i)?
                } else {
                    momentum_residual_full(ctx, b, i, &u)?
                };
                ResidualRow {
                    c: b.c,
                    frame,
                    tau: ctx.taus.node(i),
                    momentum,
                    temperature: temperature_residual(ctx, b, i, &u)?,
                    divergence: divergence_ratio(&u),
                }
            }
        };
        rows.push(row);
    }
    let max = |f: fn(&ResidualRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(ResidualReport {
        momentum_max: max(|r| r.momentum),
        temperature_max: max(|r| r.temperature),
        divergence_max: max(|r| r.divergence),
        rows,
    })
}

/// CSV with columns `c,frame,tau,momentum,temperature,divergence`.
pub fn write_residuals_csv(path: &Path, reports: &[ResidualReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ObssError::Format(e.to_string()))?;
    for r in reports {
        for row in &r.rows {
            w.serialize(row).map_err(|e| ObssError::Format(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub c1: f64,
    pub c2: f64,
    pub taus: Vec<f64>,
    /// `‖U¹(τ) − U²(τ)‖_{H^N}`.
    pub separation: Vec<f64>,
    /// `C₁e^{aτ} − C₂e^{βτ}`.
    pub envelope: Vec<f64>,
    pub c1_coefficient: f64,
    pub c2_coefficient: f64,
    /// Fitted rate over the nodes where `C₂e^{βτ} ≤ 0.01·C₁e^{aτ}` (very negative τ).
    pub early_rate: Option<f64>,
    pub early_window: Option<(f64, f64)>,
    /// Fitted rate over the last unit of τ before `τ₀`.
    pub late_rate: f64,
    pub min_separation: f64,
}

/// `‖U¹ − U²‖_{H^N}` at every node, with the linear-versus-perturbation envelope.
pub fn separation(ctx: &FixedPointContext, b1: &SolutionBundle, b2: &SolutionBundle) -> Result<SeparationReport> {
    if b1.forcing.as_ref() != b2.forcing.as_ref() {
        return Err(ObssError::Config("bundles do not share the forcing".into()));
    }
    if b1.taus() != b2.taus() {
        return Err(ObssError::Config("bundles use different τ-grids".into()));
    }
    let p = &ctx.params;
    let s = SobolevIndex::new(p.n)?;
    let taus = b1.taus().nodes();
    let dc = b1.c - b2.c;
    let dp = b1.u_p.sub(&b2.u_p)?;
    let c2_coefficient = dp.norm_x(p)?;
    let mut c1_coefficient = f64::INFINITY;
    let mut sep = Vec::with_capacity(taus.len());
    for (i, &t) in taus.iter().enumerate() {
        let lin = ctx.estimate.mode_at(t).scaled(dc);
        c1_coefficient = c1_coefficient.min((-p.a * t).exp() * hs_norm(&lin, s));
        let mut d = lin;
        d.axpy(1.0, dp.node(i));
        sep.push(hs_norm(&d, s));
    }
    if dc == 0.0 {
        c1_coefficient = 0.0;
    }
    let envelope: Vec<f64> =
        taus.iter().map(|t| c1_coefficient * (p.a * t).exp() - c2_coefficient * (p.beta * t).exp()).collect();
    let fit = |idx: &[usize]| -> Option<f64> {
        let xs: Vec<f64> = idx.iter().map(|&i| taus[i]).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| sep[i].ln()).collect();
        (idx.len() >= 2 && ys.iter().all(|y| y.is_finite())).then(|| linear_fit(&xs, &ys).0)
    };
    let early: Vec<usize> = (0..taus.len())
        .filter(|&i| c2_coefficient * (p.beta * taus[i]).exp() <= 0.01 * c1_coefficient * (p.a * taus[i]).exp())
        .collect();
    let early = if early.len() >= 5 { early } else { (0..taus.len().min(40)).collect() };
    let late_start = ctx.taus.nearest(ctx.taus.tau0() - 1.0);
    let late: Vec<usize> = (late_start..taus.len()).collect();
    Ok(SeparationReport {
        c1: b1.c,
        c2: b2.c,
        early_rate: fit(&early),
        early_window: Some((taus[early[0]], taus[*early.last().expect("non-empty")])),
        late_rate: fit(&late).unwrap_or(f64::NAN),
        min_separation: sep.iter().copied().fold(f64::INFINITY, f64::min),
        taus,
        separation: sep,
        envelope,
        c1_coefficient,
        c2_coefficient,
    })
}

/// CSV with columns `c1,c2,tau,separation,envelope`.
pub fn write_separation_csv(path: &Path, reports: &[SeparationReport]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        c1: f64,
        c2: f64,
        tau: f64,
        separation: f64,
        envelope: f64,
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| ObssError::Format(e.to_string()))?;
    for r in reports {
        for ((tau, s), e) in r.taus.iter().zip(&r.separation).zip(&r.envelope) {
            w.serialize(Row { c1: r.c1, c2: r.c2, tau: *tau, separation: *s, envelope: *e })
                .map_err(|e| ObssError::Format(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Smallest separation for every pair in a coefficient family.
pub fn family_separations(ctx: &FixedPointContext, bundles: &[SolutionBundle]) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::new();
    for i in 0..bundles.len() {
        for j in i + 1..bundles.len() {
            let r = separation(ctx, &bundles[i], &bundles[j])?;
            out.push((bundles[i].c, bundles[j].c, r.min_separation));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitialDataReport {
    pub times: Vec<f64>,
    /// `‖u(t)‖_{L²} = t^{1/4}‖U(log t)‖_{L²}`.
    pub velocity_norms: Vec<f64>,
    pub temperature_norms: Vec<f64>,
    /// Fitted slope of `log‖u(t)‖` against `log t`.
    pub velocity_slope: f64,
    pub temperature_slope: f64,
    /// Both norms decrease as `t` decreases.
    pub monotone: bool,
    /// `∫_0^{t₀}‖u‖²_{L²} dt`, including the analytic tail below `τ_min`.
    pub l2_time_integral: f64,
}

/// Norms of the natural-variable solution as `t → 0⁺` over `[t_lo, t₀]`.
pub fn initial_data_check(ctx: &FixedPointContext, b: &SolutionBundle, t_lo: f64, samples: usize) -> Result<InitialDataReport> {
    let taus = b.taus();
    let t0 = taus.tau0().exp();
    if !(t_lo > taus.tau_min().exp() && t_lo < t0) || samples < 2 {
        return Err(ObssError::Config(format!(
            "initial-data window [{t_lo}, {t0}] must lie inside the τ-grid with at least two samples"
        )));
    }
    let times = log_spaced(t_lo, t0, samples);
    let ul = &ctx.background.u_bar;
    let mut vn = Vec::with_capacity(samples);
    let mut tn = Vec::with_capacity(samples);
    for &t in &times {
        let tau = t.ln();
        let mut u = ctx.estimate.mode_at(tau).scaled(b.c);
        u.axpy(1.0, &b.u_p.interpolate(tau));
        u.axpy(1.0, ul);
        let mut th = ctx.theta_bar(tau);
        th.axpy(1.0, &b.theta_p.interpolate(tau));
        vn.push(t.powf(0.25) * u.l2_norm());
        tn.push(t.powf(0.25) * th.l2_norm());
    }
    let lt: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let slope = |v: &[f64]| linear_fit(&lt, &v.iter().map(|x| x.ln()).collect::<Vec<_>>()).0;
    let monotone = vn.windows(2).all(|w| w[1] > w[0]) && tn.windows(2).all(|w| w[1] > w[0]);
    // ∫ e^{3τ/2}‖U(τ)‖² dτ by the trapezoid rule, plus ‖U(τ_min)‖² (2/3) e^{3τ_min/2}
    let h = taus.spacing();
    let vals: Vec<f64> = (0..taus.len()).map(|i| (1.5 * taus.node(i)).exp() * b.velocity(ctx, i).l2_norm().powi(2)).collect();
    let trap = h * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[vals.len() - 1]));
    let tail = vals[0] / 1.5;
    Ok(InitialDataReport {
        velocity_slope: slope(&vn),
        temperature_slope: slope(&tn),
        times,
        velocity_norms: vn,
        temperature_norms: tn,
        monotone,
        l2_time_integral: trap + tail,
    })
}

/// Relative L² distance between two trajectories at matching nodes, the
/// largest over the grid.
pub fn trajectory_distance<F: LinearField>(a: &Trajectory<F>, b: &Trajectory<F>) -> Result<f64> {
    let d = a.sub(b)?;
    let s = SobolevIndex::new(0.0)?;
    let scale = a.nodes().iter().map(|f| hs_norm(f, s)).fold(0.0, f64::max);
    let diff = d.nodes().iter().map(|f| hs_norm(f, s)).fold(0.0, f64::max);
    Ok(rel(diff, scale))
}
