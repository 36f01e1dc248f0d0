use std::path::Path;

use serde::Serialize;

use crate::error::{ObssError, Result};
use crate::grid::{
    advect, advect_vector, gravity_gradient, leray_project, SpectralScalarField, SpectralVectorField,
};

use super::context::FixedPointContext;
use super::duhamel::duhamel;
use super::trajectory::{TrajectoryX, TrajectoryY};

/// Source of the velocity equation,
/// `ℙ(−W·∇W + Θ_p∇(1/|ξ|))` with `W = U_l + U_p`.
pub fn velocity_source(
    ctx: &FixedPointContext,
    tau: f64,
    u: &SpectralVectorField,
    theta: &SpectralScalarField,
) -> Result<SpectralVectorField> {
    let mut w = ctx.linear(tau);
    w.axpy(1.0, u);
    let mut g = advect_vector(&w, &w)?.scaled(-1.0);
    g.axpy(1.0, &gravity_gradient(theta));
    Ok(leray_project(&g))
}

/// Source of the temperature equation, `−(U_l + U_p)·∇(Θ̄ + Θ_p)`.
pub fn temperature_source(
    ctx: &FixedPointContext,
    tau: f64,
    u: &SpectralVectorField,
    theta: &SpectralScalarField,
) -> Result<SpectralScalarField> {
    let mut w = ctx.linear(tau);
    w.axpy(1.0, u);
    let mut th = ctx.theta_bar(tau);
    th.axpy(1.0, theta);
    Ok(advect(&w, &th)?.scaled(-1.0))
}

fn check_inputs(ctx: &FixedPointContext, u: &TrajectoryX, theta: &TrajectoryY) -> Result<()> {
    if *u.taus() != ctx.taus || *theta.taus() != ctx.taus {
        return Err(ObssError::Config("trajectories must live on the context τ-grid".into()));
    }
    Ok(())
}

/// `Φ₁(U_p, Θ_p)`: the velocity Duhamel integral from `τ_min`.
pub fn apply_phi1(u: &TrajectoryX, theta: &TrajectoryY, ctx: &FixedPointContext) -> Result<TrajectoryX> {
    check_inputs(ctx, u, theta)?;
    let zero = SpectralVectorField::zeros(ctx.grid());
    let nodes = duhamel(&ctx.velocity, &ctx.taus, &ctx.rule, zero, |t| {
        velocity_source(ctx, t, &u.interpolate(t), &theta.interpolate(t))
    })?;
    TrajectoryX::new(ctx.taus, nodes.iter().map(leray_project).collect())
}

/// `Φ₂(U_p, Θ_p)`: the temperature Duhamel integral from `τ_min`.
pub fn apply_phi2(u: &TrajectoryX, theta: &TrajectoryY, ctx: &FixedPointContext) -> Result<TrajectoryY> {
    check_inputs(ctx, u, theta)?;
    let zero = SpectralScalarField::zeros(ctx.grid());
    let nodes = duhamel(&ctx.temperature, &ctx.taus, &ctx.rule, zero, |t| {
        temperature_source(ctx, t, &u.interpolate(t), &theta.interpolate(t))
    })?;
    TrajectoryY::new(ctx.taus, nodes)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PicardLogRow {
    pub iter: usize,
    pub norm_x: f64,
    pub norm_y: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    /// `(δ_X + δ_Y)_k / (δ_X + δ_Y)_{k−1}`; empty on the first iteration.
    pub contraction_factor: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct PicardReport {
    pub u: TrajectoryX,
    pub theta: TrajectoryY,
    /// Largest observed ratio of successive increments.
    pub contraction_factor: f64,
    /// `‖Φ₁(U,Θ) − U‖_X + ‖Φ₂(U,Θ) − Θ‖_Y` of the returned pair.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log: Vec<PicardLogRow>,
}

/// Picard iteration from zero.
pub fn picard_solve(ctx: &FixedPointContext, max_iter: usize, tol: f64) -> Result<PicardReport> {
    let u0 = TrajectoryX::zeros(ctx.taus, &SpectralVectorField::zeros(ctx.grid()));
    let t0 = TrajectoryY::zeros(ctx.taus, &SpectralScalarField::zeros(ctx.grid()));
    picard_solve_from(ctx, u0, t0, max_iter, tol)
}

/// Picard iteration `(U, Θ) ← Φ(U, Θ)` from a given start. Stops once the
/// increment `‖ΔU‖_X + ‖ΔΘ‖_Y` is at most `tol` and returns the last iterate
/// whose image was measured, so the reported residual is exact.
pub fn picard_solve_from(
    ctx: &FixedPointContext,
    mut u: TrajectoryX,
    mut theta: TrajectoryY,
    max_iter: usize,
    tol: f64,
) -> Result<PicardReport> {
    if max_iter == 0 || !(tol > 0.0) {
        return Err(ObssError::Config("picard needs max_iter >= 1 and tol > 0".into()));
    }
    let p = &ctx.params;
    let mut log = Vec::new();
    let mut prev: Option<f64> = None;
    let mut worst = 0.0f64;
    let mut streak = Vec::new();
    for iter in 1..=max_iter {
        let nu = apply_phi1(&u, &theta, ctx)?;
        let nt = apply_phi2(&u, &theta, ctx)?;
        let dx = nu.sub(&u)?.norm_x(p)?;
        let dy = nt.sub(&theta)?.norm_y(p)?;
        let d = dx + dy;
        if !d.is_finite() {
            return Err(ObssError::Numerical(format!("Picard increment is not finite at iteration {iter}")));
        }
        let factor = prev.filter(|q| *q > 0.0).map(|q| d / q);
        if let Some(f) = factor {
            worst = worst.max(f);
            if f >= 1.0 {
                streak.push(f);
            } else {
                streak.clear();
            }
        }
        let row = PicardLogRow { iter, norm_x: nu.norm_x(p)?, norm_y: nt.norm_y(p)?, delta_x: dx, delta_y: dy, contraction_factor: factor };
        log::info!(
            "picard {iter}: |U|_X = {:.3e}, |Θ|_Y = {:.3e}, δ = {d:.3e}, factor {:?}",
            row.norm_x,
            row.norm_y,
            factor
        );
        log.push(row);
        if streak.len() >= 3 {
            return Err(ObssError::Divergence { factors: streak, tau0: p.tau0 });
        }
        if d <= tol {
            return Ok(PicardReport { u, theta, contraction_factor: worst, residual: d, iterations: iter, converged: true, log });
        }
        prev = Some(d);
        u = nu;
        theta = nt;
    }
    let residual = log.last().map_or(f64::INFINITY, |r| r.delta_x + r.delta_y);
    Ok(PicardReport { u, theta, contraction_factor: worst, residual, iterations: max_iter, converged: false, log })
}

/// CSV with columns `iter,norm_X,norm_Y,delta_X,delta_Y,contraction_factor`.
pub fn write_picard_log(path: &Path, rows: &[PicardLogRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ObssError::Format(e.to_string()))?;
    w.write_record(["iter", "norm_X", "norm_Y", "delta_X", "delta_Y", "contraction_factor"])
        .map_err(|e| ObssError::Format(e.to_string()))?;
    for r in rows {
        let f = r.contraction_factor.map(|f| format!("{f:e}")).unwrap_or_default();
        w.write_record([
            r.iter.to_string(),
            format!("{:e}", r.norm_x),
            format!("{:e}", r.norm_y),
            format!("{:e}", r.delta_x),
            format!("{:e}", r.delta_y),
            f,
        ])
        .map_err(|e| ObssError::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
