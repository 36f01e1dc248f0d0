use crate::error::{ObssError, Result};
use crate::grid::{PeriodicGrid, SpectralScalarField, SpectralVectorField};
use crate::profiles::BackgroundProfile;
use crate::semigroups::{LinearStepper, Semigroup, SyntheticPropagator};
use crate::spectra::{EigenEstimate, USABLE_RESIDUAL};

use super::duhamel::PanelRule;
use super::trajectory::TauGrid;
use super::{require_feasible, ExponentParams};

/// `U_l(τ) = ℜ(e^{λτ}ρ)`.
pub fn linear_mode(est: &EigenEstimate, tau: f64) -> Result<SpectralVectorField> {
    if !(est.converged || est.residual <= USABLE_RESIDUAL) {
        return Err(ObssError::Config(format!(
            "eigen-estimate with residual {:.2e} is not usable for the linear mode",
            est.residual
        )));
    }
    Ok(est.mode_at(tau))
}

/// Realization of `e^{τL_ss}` used inside `Φ₁`.
#[derive(Clone, Debug)]
pub enum VelocityPropagator {
    /// Injected pair with known spectrum.
    Synthetic(SyntheticPropagator),
    /// The linearization around `Ū`, stepped in natural variables.
    Computed(LinearStepper),
}

impl VelocityPropagator {
    pub fn is_synthetic(&self) -> bool {
        matches!(self, VelocityPropagator::Synthetic(_))
    }

    /// Upper bound for the growth rate of the propagator.
    pub fn growth_bound(&self, est: &EigenEstimate, delta: f64) -> f64 {
        match self {
            VelocityPropagator::Synthetic(s) => s.lambda().re.max(0.0),
            VelocityPropagator::Computed(_) => est.a + delta,
        }
    }
}

impl Semigroup<SpectralVectorField> for VelocityPropagator {
    fn apply(&self, f: &SpectralVectorField, tau: f64) -> Result<SpectralVectorField> {
        match self {
            VelocityPropagator::Synthetic(s) => s.apply(f, tau),
            VelocityPropagator::Computed(s) => s.apply(f, tau),
        }
    }

    fn apply_with_sources(
        &self,
        f: &SpectralVectorField,
        tau: f64,
        sources: &[(f64, SpectralVectorField)],
    ) -> Result<SpectralVectorField> {
        match self {
            VelocityPropagator::Synthetic(s) => s.apply_with_sources(f, tau, sources),
            VelocityPropagator::Computed(s) => s.apply_with_sources(f, tau, sources),
        }
    }
}

/// Everything `Φ = (Φ₁, Φ₂)` needs: exponents, background, linear mode with
/// its coefficient, both propagators and the τ-discretization.
#[derive(Clone, Debug)]
pub struct FixedPointContext {
    pub params: ExponentParams,
    pub background: BackgroundProfile,
    pub estimate: EigenEstimate,
    /// Multiplier `c` of the linear mode, `U_l = c·ℜ(e^{λτ}ρ)`.
    pub coefficient: f64,
    pub velocity: VelocityPropagator,
    pub temperature: LinearStepper,
    pub taus: TauGrid,
    pub rule: PanelRule,
}

impl FixedPointContext {
    /// Checks feasibility and consistency, and lays out `[τ_min, τ₀]` for `tol`.
    pub fn new(
        params: ExponentParams,
        background: BackgroundProfile,
        estimate: EigenEstimate,
        velocity: VelocityPropagator,
        temperature: LinearStepper,
        tol: f64,
    ) -> Result<Self> {
        require_feasible(&params)?;
        if (background.b - params.b).abs() > 1e-12 {
            return Err(ObssError::Config(format!(
                "background decays with b = {} but the exponents use b = {}",
                background.b, params.b
            )));
        }
        let grid = background.grid();
        grid.check_same(estimate.rho_re.grid())?;
        grid.check_same(temperature.grid())?;
        if let VelocityPropagator::Computed(s) = &velocity {
            grid.check_same(s.grid())?;
        }
        linear_mode(&estimate, 0.0)?;
        let taus = TauGrid::for_params(&params, tol)?;
        let rule = PanelRule::sigma_gauss(taus.spacing(), PanelRule::DEFAULT_NODES)?;
        Ok(Self { params, background, estimate, coefficient: 1.0, velocity, temperature, taus, rule })
    }

    /// Synthetic-instability context: `L_ss` replaced by an injected propagator
    /// with rate `params.a`, `L` realized around `background.u_bar`.
    pub fn synthetic(
        params: ExponentParams,
        background: BackgroundProfile,
        temperature: LinearStepper,
        tol: f64,
    ) -> Result<Self> {
        let prop = SyntheticPropagator::new(background.grid(), num_complex::Complex64::new(params.a, 0.0), params.n)?;
        let est = prop.estimate(0.5);
        Self::new(params, background, est, VelocityPropagator::Synthetic(prop), temperature, tol)
    }

    pub fn with_coefficient(mut self, c: f64) -> Self {
        self.coefficient = c;
        self
    }

    pub fn with_tau0(mut self, tau0: f64, tol: f64) -> Result<Self> {
        self.params.tau0 = tau0;
        self.taus = TauGrid::for_params(&self.params, tol)?;
        Ok(self)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.background.grid()
    }

    pub fn is_synthetic(&self) -> bool {
        self.velocity.is_synthetic()
    }

    /// `c·U_l(τ)`.
    pub fn linear(&self, tau: f64) -> SpectralVectorField {
        self.estimate.mode_at(tau).scaled(self.coefficient)
    }

    /// `c·∂_τU_l(τ)`.
    pub fn linear_rate(&self, tau: f64) -> SpectralVectorField {
        self.estimate.mode_rate_at(tau).scaled(self.coefficient)
    }

    pub fn theta_bar(&self, tau: f64) -> SpectralScalarField {
        self.background.theta_bar(tau)
    }
}
