//! Maps between natural variables `(x, t)` and self-similar variables
//! `ξ = x/√t`, `τ = log t`, and the parabolic scaling family.

mod natural;

pub use natural::{natural_residual, NaturalResidual, NaturalSolver, NaturalState};

use crate::error::{ObssError, Result};
use crate::grid::{resample, PeriodicGrid, SpectralScalarField, SpectralVectorField};

/// Amplitude exponent `w` in `field(x, t) = t^{-w} FIELD(x/√t, log t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldWeight {
    /// Velocity and temperature, `t^{-1/2}`.
    Velocity,
    /// Pressure, `t^{-1}`.
    Pressure,
    /// Force and heat source, `t^{-3/2}`.
    Forcing,
}

impl FieldWeight {
    pub fn exponent(self) -> f64 {
        match self {
            FieldWeight::Velocity => 0.5,
            FieldWeight::Pressure => 1.0,
            FieldWeight::Forcing => 1.5,
        }
    }
}

/// `ξ = x/√t`, `τ = log t`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CoordinateMap;

impl CoordinateMap {
    pub fn xi(x: [f64; 3], t: f64) -> [f64; 3] {
        let s = t.sqrt();
        x.map(|v| v / s)
    }

    pub fn tau(t: f64) -> f64 {
        t.ln()
    }

    pub fn time(tau: f64) -> f64 {
        tau.exp()
    }
}

/// Fields that can be reread on a box of another side and rescaled.
pub trait GridField: Clone {
    fn grid(&self) -> &PeriodicGrid;
    fn relabeled(&self, grid: &PeriodicGrid) -> Result<Self>;
    fn scale(&mut self, alpha: f64);
}

impl GridField for SpectralScalarField {
    fn grid(&self) -> &PeriodicGrid {
        SpectralScalarField::grid(self)
    }
    fn relabeled(&self, grid: &PeriodicGrid) -> Result<Self> {
        SpectralScalarField::relabeled(self, grid)
    }
    fn scale(&mut self, alpha: f64) {
        SpectralScalarField::scale(self, alpha)
    }
}

impl GridField for SpectralVectorField {
    fn grid(&self) -> &PeriodicGrid {
        SpectralVectorField::grid(self)
    }
    fn relabeled(&self, grid: &PeriodicGrid) -> Result<Self> {
        SpectralVectorField::relabeled(self, grid)
    }
    fn scale(&mut self, alpha: f64) {
        SpectralVectorField::scale(self, alpha)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ObssError::Config(format!("time must be positive, got {t}")))
    }
}

/// Reads `box · stretch` with the samples unchanged and multiplies by `amp`.
fn relabel_scaled<F: GridField>(f: &F, stretch: f64, amp: f64) -> Result<F> {
    let g = f.grid().relabeled(f.grid().box_side() * stretch)?;
    let mut out = f.relabeled(&g)?;
    out.scale(amp);
    Ok(out)
}

/// `ξ ↦ t^w · field(√t ξ)`. The result lives on the box of side `L/√t`
/// carrying the same samples, so the map is exact.
pub fn to_selfsimilar<F: GridField>(field: &F, t: f64, w: FieldWeight) -> Result<F> {
    check_time(t)?;
    relabel_scaled(field, 1.0 / t.sqrt(), t.powf(w.exponent()))
}

/// `x ↦ t^{-w} · FIELD(x/√t)` on the box of side `L√t`.
pub fn to_natural<F: GridField>(field: &F, t: f64, w: FieldWeight) -> Result<F> {
    check_time(t)?;
    relabel_scaled(field, t.sqrt(), t.powf(-w.exponent()))
}

/// [`to_selfsimilar`] followed by spectral interpolation onto a prescribed
/// ξ-grid. Returns the fraction of L² mass that fell outside the target box.
pub fn to_selfsimilar_on(
    field: &SpectralScalarField,
    t: f64,
    w: FieldWeight,
    target: &PeriodicGrid,
) -> Result<(SpectralScalarField, f64)> {
    let ss = to_selfsimilar(field, t, w)?;
    let out = resample(&ss, target);
    let before = ss.dealiased();
    let b2 = before.l2_norm_sq();
    let lost = if b2 > 0.0 { (1.0 - out.l2_norm_sq() / b2).max(0.0) } else { 0.0 };
    if lost > 1e-6 && target.box_side() < ss.grid().box_side() {
        log::warn!("self-similar resampling truncated {lost:.3e} of the L² mass");
    }
    Ok((out, lost))
}

trait NormSq {
    fn l2_norm_sq(&self) -> f64;
}

impl NormSq for SpectralScalarField {
    fn l2_norm_sq(&self) -> f64 {
        use crate::grid::SpectralField;
        self.weighted_sq(|_| 1.0)
    }
}

/// Parabolic scaling parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingAction {
    lambda: f64,
}

impl ScalingAction {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(Self { lambda })
        } else {
            Err(ObssError::Config(format!("scaling parameter must be positive, got {lambda}")))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Snapshot of a natural-variable solution at time `t`.
#[derive(Clone, Debug)]
pub struct NaturalBundle {
    pub t: f64,
    pub u: SpectralVectorField,
    pub theta: SpectralScalarField,
    pub p: SpectralScalarField,
    pub f: SpectralVectorField,
    pub h: SpectralScalarField,
}

/// `u_λ(x,t) = λu(λx, λ²t)`, `θ_λ = λθ`, `p_λ = λ²p`, `f_λ = λ³f`, `h_λ = λ³h`.
/// The snapshot at `t` becomes the snapshot at `t/λ²` on the box `L/λ`.
pub fn scale_solution(bundle: &NaturalBundle, action: ScalingAction) -> Result<NaturalBundle> {
    let l = action.lambda;
    let s = 1.0 / l;
    Ok(NaturalBundle {
        t: bundle.t / (l * l),
        u: relabel_scaled(&bundle.u, s, l)?,
        theta: relabel_scaled(&bundle.theta, s, l)?,
        p: relabel_scaled(&bundle.p, s, l * l)?,
        f: relabel_scaled(&bundle.f, s, l.powi(3))?,
        h: relabel_scaled(&bundle.h, s, l.powi(3))?,
    })
}
