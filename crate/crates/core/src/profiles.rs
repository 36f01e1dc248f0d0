//! Background pair `(Ū, Θ̄ = e^{bτ}Θ_c)` and the forcing `(F, H)` obtained by
//! substituting it into the self-similar system.

use serde::{Deserialize, Serialize};

use crate::error::{ObssError, Result};
use crate::grid::{
    advect, advect_vector, gravity_gradient, hs_norm, leray_project, selfsimilar_drift, DriftCutoff,
    PeriodicGrid, SobolevIndex, SpectralField, SpectralScalarField, SpectralVectorField,
};
use crate::selfsim::{to_natural, FieldWeight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityShape {
    /// `∇×(ψ(r) e_z)`: azimuthal flow around the z axis.
    AxisymmetricSwirl,
    /// `∇×(ψ(r) c)` for a fixed oblique vector `c`.
    CurlBump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub amplitude: f64,
    pub support_radius: f64,
    pub shape: VelocityShape,
    pub b: f64,
    pub theta_amplitude: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            support_radius: 2.0,
            shape: VelocityShape::AxisymmetricSwirl,
            b: 1.5,
            theta_amplitude: 1.0,
        }
    }
}

/// `1` for `x ≤ 0`, `0` for `x ≥ 1`, C^∞ in between.
pub fn smooth_step(x: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        f(1.0 - x) / (f(1.0 - x) + f(x))
    }
}

/// Radial bump `exp(-r²/2σ²)` with `σ = R/3`, cut off smoothly between `R/2` and `R`.
pub fn radial_bump(r: f64, radius: f64) -> f64 {
    let sigma = radius / 3.0;
    (-(r * r) / (2.0 * sigma * sigma)).exp() * smooth_step((r - 0.5 * radius) / (0.5 * radius))
}

fn check_radius(grid: &PeriodicGrid, radius: f64) -> Result<()> {
    if !(radius > 0.0) || radius > grid.box_side() / 8.0 + 1e-12 {
        return Err(ObssError::Config(format!(
            "support radius {radius} must lie in (0, box_side/8 = {}]",
            grid.box_side() / 8.0
        )));
    }
    if radius < 4.0 * grid.spacing() {
        return Err(ObssError::Config(format!(
            "support radius {radius} is under four grid cells ({})",
            grid.spacing()
        )));
    }
    Ok(())
}

/// Divergence-free background velocity with `‖Ū‖_{L²} = A`, band-limited.
pub fn make_background_velocity(
    grid: &PeriodicGrid,
    amplitude: f64,
    radius: f64,
    shape: VelocityShape,
) -> Result<SpectralVectorField> {
    check_radius(grid, radius)?;
    if !(amplitude >= 0.0) {
        return Err(ObssError::Config(format!("amplitude must be >= 0, got {amplitude}")));
    }
    if amplitude == 0.0 {
        return Ok(SpectralVectorField::zeros(grid));
    }
    let psi = SpectralScalarField::from_fn(grid, |x, y, z| radial_bump((x * x + y * y + z * z).sqrt(), radius));
    let dir = match shape {
        VelocityShape::AxisymmetricSwirl => [0.0, 0.0, 1.0],
        VelocityShape::CurlBump => [0.48, 0.64, 0.6],
    };
    let pot = SpectralVectorField::from_components(dir.map(|d| psi.scaled(d)));
    let mut u = pot.curl().dealiased();
    let norm = u.l2_norm();
    u.scale(amplitude / norm);
    Ok(u)
}

/// Radial temperature core with unit `H^{N+1}` norm times `amplitude`.
pub fn make_theta_core(grid: &PeriodicGrid, amplitude: f64, radius: f64, n_sobolev: f64) -> Result<SpectralScalarField> {
    check_radius(grid, radius)?;
    let mut th = SpectralScalarField::from_fn(grid, |x, y, z| radial_bump((x * x + y * y + z * z).sqrt(), radius)).dealiased();
    let n = hs_norm(&th, SobolevIndex::new(n_sobolev + 1.0)?);
    th.scale(amplitude / n);
    Ok(th)
}

#[derive(Clone, Debug)]
pub struct BackgroundProfile {
    pub u_bar: SpectralVectorField,
    pub theta_core: SpectralScalarField,
    pub b: f64,
    pub amplitude: f64,
    pub support_radius: f64,
    pub shape: VelocityShape,
    pub cutoff: DriftCutoff,
}

impl BackgroundProfile {
    pub fn new(grid: &PeriodicGrid, cfg: &ProfileConfig, n_sobolev: f64) -> Result<Self> {
        if !(cfg.b > 0.0) {
            return Err(ObssError::Config(format!("b must be positive, got {}", cfg.b)));
        }
        let u_bar = make_background_velocity(grid, cfg.amplitude, cfg.support_radius, cfg.shape)?;
        let theta_core = make_theta_core(grid, cfg.theta_amplitude, cfg.support_radius, n_sobolev)?;
        Ok(Self {
            u_bar,
            theta_core,
            b: cfg.b,
            amplitude: cfg.amplitude,
            support_radius: cfg.support_radius,
            shape: cfg.shape,
            cutoff: DriftCutoff::for_support(grid, cfg.support_radius),
        })
    }

    /// Same background with a different velocity field (e.g. `Ū = 0` controls).
    pub fn with_velocity(&self, u_bar: SpectralVectorField, amplitude: f64) -> Self {
        Self { u_bar, amplitude, ..self.clone() }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.u_bar.grid()
    }

    pub fn theta_bar(&self, tau: f64) -> SpectralScalarField {
        self.theta_core.scaled((self.b * tau).exp())
    }

    pub fn drift_scalar(&self, f: &SpectralScalarField) -> SpectralScalarField {
        selfsimilar_drift(f, self.cutoff)
    }

    pub fn drift_vector(&self, v: &SpectralVectorField) -> SpectralVectorField {
        let c = v.components();
        SpectralVectorField::from_components([
            self.drift_scalar(&c[0]),
            self.drift_scalar(&c[1]),
            self.drift_scalar(&c[2]),
        ])
    }
}

/// `F(τ) = F_u + e^{bτ}F_θ` and `H(τ) = e^{bτ}H_c`, all Leray-projected /
/// band-limited.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingPair {
    pub f_steady: SpectralVectorField,
    pub f_thermal: SpectralVectorField,
    pub h_core: SpectralScalarField,
    pub b: f64,
}

impl ForcingPair {
    pub fn f_at(&self, tau: f64) -> SpectralVectorField {
        let mut f = self.f_steady.clone();
        f.axpy((self.b * tau).exp(), &self.f_thermal);
        f
    }

    pub fn h_at(&self, tau: f64) -> SpectralScalarField {
        self.h_core.scaled((self.b * tau).exp())
    }

    /// `f(t) = t^{-3/2} F(x/√t, log t)` and the matching `h(t)`.
    pub fn natural(&self, t: f64) -> Result<(SpectralVectorField, SpectralScalarField)> {
        let tau = t.ln();
        Ok((
            to_natural(&self.f_at(tau), t, FieldWeight::Forcing)?,
            to_natural(&self.h_at(tau), t, FieldWeight::Forcing)?,
        ))
    }

    /// `‖f(t)‖_{L²} + ‖h(t)‖_{L²}`.
    pub fn natural_norm(&self, t: f64) -> Result<f64> {
        let (f, h) = self.natural(t)?;
        Ok(f.l2_norm() + h.l2_norm())
    }

    /// Only the steady velocity forcing (`Θ̄ = 0`).
    pub fn steady_part(&self) -> Self {
        Self {
            f_steady: self.f_steady.clone(),
            f_thermal: SpectralVectorField::zeros(self.f_steady.grid()),
            h_core: SpectralScalarField::zeros(self.f_steady.grid()),
            b: self.b,
        }
    }

    /// Only the `Θ̄`-dependent terms.
    pub fn thermal_part(&self) -> Self {
        Self { f_steady: SpectralVectorField::zeros(self.f_steady.grid()), ..self.clone() }
    }
}

/// Substitutes the background into the self-similar system:
/// `F = −½(1+ξ·∇)Ū − ΔŪ + ℙ(Ū·∇Ū − Θ̄∇(1/|ξ|))`,
/// `H = e^{bτ}[(b − ½)Θ_c − ½ξ·∇Θ_c − ΔΘ_c + Ū·∇Θ_c]`.
pub fn synthesize_forcing(p: &BackgroundProfile) -> Result<ForcingPair> {
    let u = &p.u_bar;
    let mut f = p.drift_vector(u).scaled(-1.0);
    f.axpy(-1.0, &u.laplacian());
    f.axpy(1.0, &advect_vector(u, u)?);
    let f_steady = leray_project(&f);
    let f_thermal = gravity_gradient(&p.theta_core).scaled(-1.0);

    let th = &p.theta_core;
    let mut h = th.scaled(p.b);
    h.axpy(-1.0, &p.drift_scalar(th));
    h.axpy(-1.0, &th.laplacian());
    h.axpy(1.0, &advect(u, th)?);
    Ok(ForcingPair { f_steady, f_thermal, h_core: h.dealiased(), b: p.b })
}

/// `n` logarithmically spaced points in `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `log(‖f(t)‖ + ‖h(t)‖)` against `log t`.
pub fn forcing_decay_slope(fp: &ForcingPair, t_range: &[f64]) -> Result<f64> {
    if t_range.len() < 8 {
        return Err(ObssError::Config(format!("need at least 8 sample times, got {}", t_range.len())));
    }
    if t_range.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(ObssError::Config("sample times must lie in (0, 1]".into()));
    }
    let mut lx = Vec::with_capacity(t_range.len());
    let mut ly = Vec::with_capacity(t_range.len());
    for &t in t_range {
        let v = fp.natural_norm(t)?;
        if !(v > 1e-14) {
            return Err(ObssError::DegenerateFit(format!("forcing norm {v:.3e} at t = {t}")));
        }
        lx.push(t.ln());
        ly.push(v.ln());
    }
    Ok(linear_fit(&lx, &ly).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PeriodicGrid {
        PeriodicGrid::new(16.0, 32).unwrap()
    }

    #[test]
    fn velocity_is_normalized_and_solenoidal() {
        let g = grid();
        for shape in [VelocityShape::AxisymmetricSwirl, VelocityShape::CurlBump] {
            let u = make_background_velocity(&g, 2.5, 2.0, shape).unwrap();
            assert!((u.l2_norm() - 2.5).abs() < 1e-12);
            assert!(u.divergence_defect() < 1e-12);
        }
        assert_eq!(make_background_velocity(&g, 0.0, 2.0, VelocityShape::CurlBump).unwrap().l2_norm(), 0.0);
        assert!(make_background_velocity(&g, 1.0, 2.5, VelocityShape::CurlBump).is_err());
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(-0.1), 1.0);
        assert_eq!(smooth_step(1.0), 0.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_background_gives_zero_forcing() {
        let g = grid();
        let cfg = ProfileConfig { amplitude: 0.0, theta_amplitude: 1.0, ..Default::default() };
        let mut p = BackgroundProfile::new(&g, &cfg, 1.75).unwrap();
        p.theta_core = SpectralScalarField::zeros(&g);
        let fp = synthesize_forcing(&p).unwrap();
        assert_eq!(fp.f_at(0.3).l2_norm(), 0.0);
        assert_eq!(fp.h_at(0.3).l2_norm(), 0.0);
    }

    #[test]
    fn steady_part_decays_at_three_quarters() {
        let g = grid();
        let p = BackgroundProfile::new(&g, &ProfileConfig::default(), 1.75).unwrap();
        let fp = synthesize_forcing(&p).unwrap();
        let ts = log_spaced(1e-3, 1.0, 9);
        let s = forcing_decay_slope(&fp.steady_part(), &ts).unwrap();
        assert!((s + 0.75).abs() < 1e-10, "{s}");
        assert!(forcing_decay_slope(&fp, &ts[..5]).is_err());
    }
}
