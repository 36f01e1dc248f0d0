//! Measured growth rates of the nine Duhamel terms on unit test trajectories
//! `U_p = e^{βτ}φ`, `Θ_p = e^{γτ}ψ` with `‖φ‖_{H^N} = ‖ψ‖_{H^{N+1}} = 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ObssError, Result};
use crate::grid::{
    advect, advect_vector, gravity_gradient, hs_norm, leray_project, SobolevIndex, SpectralScalarField,
    SpectralVectorField,
};
use crate::profiles::linear_fit;
use crate::spectra::random_solenoidal;

use super::context::FixedPointContext;
use super::duhamel::duhamel;
use super::trajectory::TauGrid;
use super::ExponentParams;

/// Relative size of the neglected `∫_{−∞}^{τ_min}` tail at the fit window.
const TAIL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermId {
    /// `U_l·∇U_l`
    LinLin,
    /// `U_l·∇U_p`
    LinPert,
    /// `U_p·∇U_l`
    PertLin,
    /// `U_p·∇U_p`
    PertPert,
    /// `Θ_p∇(1/|ξ|)`
    Buoyancy,
    /// `U_l·∇Θ̄`
    LinBackground,
    /// `U_l·∇Θ_p`
    LinTheta,
    /// `U_p·∇Θ̄`
    PertBackground,
    /// `U_p·∇Θ_p`
    PertTheta,
}

impl TermId {
    pub const ALL: [TermId; 9] = [
        TermId::LinLin,
        TermId::LinPert,
        TermId::PertLin,
        TermId::PertPert,
        TermId::Buoyancy,
        TermId::LinBackground,
        TermId::LinTheta,
        TermId::PertBackground,
        TermId::PertTheta,
    ];

    /// Rate of the bound on this term.
    pub fn expected_rate(self, p: &ExponentParams) -> f64 {
        match self {
            TermId::LinLin => 2.0 * p.a,
            TermId::LinPert | TermId::PertLin => p.a + p.beta,
            TermId::PertPert => 2.0 * p.beta,
            TermId::Buoyancy => p.gamma,
            TermId::LinBackground => p.a + p.b,
            TermId::LinTheta => p.a + p.gamma,
            TermId::PertBackground => p.beta + p.b,
            TermId::PertTheta => p.beta + p.gamma,
        }
    }

    pub fn is_velocity(self) -> bool {
        matches!(self, TermId::LinLin | TermId::LinPert | TermId::PertLin | TermId::PertPert | TermId::Buoyancy)
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TermId::LinLin => "U_l.grad U_l",
            TermId::LinPert => "U_l.grad U_p",
            TermId::PertLin => "U_p.grad U_l",
            TermId::PertPert => "U_p.grad U_p",
            TermId::Buoyancy => "Theta_p grad(1/|xi|)",
            TermId::LinBackground => "U_l.grad Theta_bar",
            TermId::LinTheta => "U_l.grad Theta_p",
            TermId::PertBackground => "U_p.grad Theta_bar",
            TermId::PertTheta => "U_p.grad Theta_p",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermFit {
    pub term: TermId,
    pub rate: f64,
    pub prefactor: f64,
    pub expected: f64,
    pub taus: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Unit profiles `(φ, ψ)` of the test trajectories.
pub fn unit_profiles(ctx: &FixedPointContext, seed: u64) -> Result<(SpectralVectorField, SpectralScalarField)> {
    let p = &ctx.params;
    let phi = random_solenoidal(ctx.grid(), seed);
    let phi = phi.scaled(1.0 / hs_norm(&phi, SobolevIndex::new(p.n)?));
    let psi = ctx.background.theta_core.clone();
    let n = hs_norm(&psi, SobolevIndex::new(p.n + 1.0)?);
    if !(n > 0.0) {
        return Err(ObssError::Config("temperature core vanishes".into()));
    }
    Ok((phi, psi.scaled(1.0 / n)))
}

fn velocity_term(
    ctx: &FixedPointContext,
    term: TermId,
    tau: f64,
    u: &SpectralVectorField,
    th: &SpectralScalarField,
) -> Result<SpectralVectorField> {
    let ul = ctx.linear(tau);
    let g = match term {
        TermId::LinLin => advect_vector(&ul, &ul)?.scaled(-1.0),
        TermId::LinPert => advect_vector(&ul, u)?.scaled(-1.0),
        TermId::PertLin => advect_vector(u, &ul)?.scaled(-1.0),
        TermId::PertPert => advect_vector(u, u)?.scaled(-1.0),
        TermId::Buoyancy => gravity_gradient(th),
        _ => unreachable!("temperature term"),
    };
    Ok(leray_project(&g))
}

fn temperature_term(
    ctx: &FixedPointContext,
    term: TermId,
    tau: f64,
    u: &SpectralVectorField,
    th: &SpectralScalarField,
) -> Result<SpectralScalarField> {
    let g = match term {
        TermId::LinBackground => advect(&ctx.linear(tau), &ctx.theta_bar(tau))?,
        TermId::LinTheta => advect(&ctx.linear(tau), th)?,
        TermId::PertBackground => advect(u, &ctx.theta_bar(tau))?,
        TermId::PertTheta => advect(u, th)?,
        _ => unreachable!("velocity term"),
    };
    Ok(g.scaled(-1.0))
}

/// Duhamel integral of a single term on unit test trajectories, fitted as
/// `‖term(τ)‖ ≈ C e^{rτ}` over the nodes of `fit`. The integral is started
/// early enough that the missing tail is below `1e-4` of the value on `fit`.
pub fn probe_term_bounds(ctx: &FixedPointContext, term: TermId, fit: &TauGrid) -> Result<TermFit> {
    let p = &ctx.params;
    let expected = term.expected_rate(p);
    let growth = if term.is_velocity() { ctx.velocity.growth_bound(&ctx.estimate, p.delta) } else { 0.0 };
    if expected <= growth {
        return Err(ObssError::Config(format!("term {term} does not converge: rate {expected} <= growth {growth}")));
    }
    let lead = (1.0 / TAIL).ln() / (expected - growth);
    let taus = TauGrid::new(fit.tau_min() - lead, fit.tau0(), ctx.taus.spacing())?;
    let (phi, psi) = unit_profiles(ctx, 0x7e57)?;
    let u_at = |t: f64| phi.scaled((p.beta * t).exp());
    let th_at = |t: f64| psi.scaled((p.gamma * t).exp());
    let start = taus.nearest(fit.tau_min());
    let (xs, norms): (Vec<f64>, Vec<f64>) = if term.is_velocity() {
        let s = SobolevIndex::new(p.n)?;
        let out = duhamel(&ctx.velocity, &taus, &ctx.rule, SpectralVectorField::zeros(ctx.grid()), |t| {
            velocity_term(ctx, term, t, &u_at(t), &th_at(t))
        })?;
        (start..taus.len()).map(|i| (taus.node(i), hs_norm(&out[i], s))).unzip()
    } else {
        let s = SobolevIndex::new(p.n + 1.0)?;
        let out = duhamel(&ctx.temperature, &taus, &ctx.rule, SpectralScalarField::zeros(ctx.grid()), |t| {
            temperature_term(ctx, term, t, &u_at(t), &th_at(t))
        })?;
        (start..taus.len()).map(|i| (taus.node(i), hs_norm(&out[i], s))).unzip()
    };
    if norms.iter().any(|n| !(*n > 0.0)) {
        return Err(ObssError::DegenerateFit(format!("term {term} vanishes on the fit window")));
    }
    let logs: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    let (rate, icept) = linear_fit(&xs, &logs);
    Ok(TermFit { term, rate, prefactor: icept.exp(), expected, taus: xs, norms })
}
