//! Natural-coordinate realization of `e^{τL}` and `e^{τL_ss}`.
//!
//! A τ-interval of length `s` is covered by solving the linear problem around
//! `ū(x,t) = t^{-1/2}Ū(x/√t)` from `t₀` to `T = t₀e^s` and pulling the result
//! back with `Θ(ξ) = √T θ(√T ξ)`. Longer intervals are split into segments that
//! each restart at `t₀`, so the velocity samples of a segment are reusable.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ObssError, Result};
use crate::grid::{
    dilate, divergence_form_flux, hs_norm, leray_project, PeriodicGrid, SobolevIndex, SpectralField,
    SpectralScalarField, SpectralVectorField,
};
use crate::integrate::{step_count, strang_heun, Coeffs, HeatFactors};
use crate::profiles::BackgroundProfile;

use super::Semigroup;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperConfig {
    /// Natural time step upper bound.
    pub dt: f64,
    /// Natural start time of every segment.
    pub t_start: f64,
    /// Longest τ-span covered by one natural-coordinate run.
    pub max_segment: f64,
    /// Advective CFL number.
    pub cfl: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_start: 1.0, max_segment: 0.05, cfl: 0.5 }
    }
}

impl StepperConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !(ok(self.dt) && ok(self.t_start) && ok(self.max_segment) && ok(self.cfl)) {
            return Err(ObssError::Config(format!("stepper settings must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Samples of `ū` at the step times `t₀ + j·dt`, `j = 0..=steps`.
struct VelocityTable {
    dt: f64,
    steps: usize,
    t0: f64,
    /// `None` when `Ū ≡ 0`.
    u: Option<Vec<[Vec<f64>; 3]>>,
    half: HeatFactors,
}

impl VelocityTable {
    fn index(&self, t: f64) -> usize {
        let j = ((t - self.t0) / self.dt).round();
        (j.max(0.0) as usize).min(self.steps)
    }
}

/// Upper bound on the bytes held by cached velocity tables.
const CACHE_BYTES: usize = 256 << 20;

/// Linear propagators around a fixed self-similar background velocity `Ū`.
pub struct LinearStepper {
    u_bar: SpectralVectorField,
    zero_background: bool,
    cfg: StepperConfig,
    cache: Mutex<VecDeque<((u64, u64), Arc<VelocityTable>)>>,
}

impl std::fmt::Debug for LinearStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearStepper").field("grid", self.u_bar.grid()).field("cfg", &self.cfg).finish()
    }
}

impl Clone for LinearStepper {
    fn clone(&self) -> Self {
        Self::new(self.u_bar.clone(), self.cfg.clone()).expect("validated on construction")
    }
}

impl LinearStepper {
    pub fn new(u_bar: SpectralVectorField, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let u_bar = u_bar.dealiased();
        let zero_background = u_bar.components().iter().all(|c| c.coefficients().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        Ok(Self { u_bar, zero_background, cfg, cache: Mutex::new(VecDeque::new()) })
    }

    pub fn from_background(bg: &BackgroundProfile, cfg: StepperConfig) -> Result<Self> {
        Self::new(bg.u_bar.clone(), cfg)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.u_bar.grid()
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn u_bar(&self) -> &SpectralVectorField {
        &self.u_bar
    }

    /// `ū(·, t)` on the grid, as a spectral field. Projected so the discrete
    /// transport stays skew-symmetric.
    pub fn natural_velocity(&self, t: f64) -> SpectralVectorField {
        let s = 1.0 / t.sqrt();
        leray_project(&SpectralVectorField::from_components(self.u_bar.components().clone().map(|c| dilate(&c, s, s).0)))
    }

    fn table(&self, span: f64) -> Result<Arc<VelocityTable>> {
        let key = (span.to_bits(), self.cfg.dt.to_bits());
        if let Some((_, t)) = self.cache.lock().expect("cache lock").iter().find(|(k, _)| *k == key) {
            return Ok(t.clone());
        }
        let grid = self.grid();
        let steps = step_count(span, self.cfg.dt).max(1);
        let dt = span / steps as f64;
        let t0 = self.cfg.t_start;
        let u = if self.zero_background {
            None
        } else {
            let band = grid.band();
            let mut samples = Vec::with_capacity(steps + 1);
            let mut umax = 0.0f64;
            for j in 0..=steps {
                let v = self.natural_velocity(t0 + j as f64 * dt);
                let phys = v.components().clone().map(|c| grid.fft().inverse(c.coefficients(), band));
                for i in 0..grid.physical_len() {
                    let m = (phys[0][i].powi(2) + phys[1][i].powi(2) + phys[2][i].powi(2)).sqrt();
                    umax = umax.max(m);
                }
                samples.push(phys);
            }
            let limit = self.cfg.cfl * grid.spacing() / umax;
            if dt > limit {
                return Err(ObssError::Cfl { dt, limit, suggested: 0.9 * limit });
            }
            Some(samples)
        };
        let table = Arc::new(VelocityTable { dt, steps, t0, u, half: HeatFactors::new(grid, 0.5 * dt) });
        let mut cache = self.cache.lock().expect("cache lock");
        let bytes = |t: &VelocityTable| t.u.as_ref().map_or(0, |u| u.len() * 3 * grid.physical_len() * 8);
        let mut held: usize = cache.iter().map(|(_, t)| bytes(t)).sum::<usize>() + bytes(&table);
        while held > CACHE_BYTES && !cache.is_empty() {
            let (_, old) = cache.pop_front().expect("non-empty");
            held -= bytes(&old);
        }
        cache.push_back((key, table.clone()));
        Ok(table)
    }

    fn segments(&self, tau: f64) -> Result<Vec<f64>> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(ObssError::Config(format!("semigroup time must be >= 0, got {tau}")));
        }
        let m = step_count(tau, self.cfg.max_segment);
        Ok(vec![tau / m.max(1) as f64; m])
    }

    fn pull_in(&self, f: &SpectralScalarField) -> SpectralScalarField {
        let t0 = self.cfg.t_start;
        if t0 == 1.0 {
            f.dealiased()
        } else {
            dilate(f, 1.0 / t0.sqrt(), 1.0 / t0.sqrt()).0
        }
    }

    fn pull_back(&self, f: &SpectralScalarField, s: f64) -> SpectralScalarField {
        let t = self.cfg.t_start * s.exp();
        dilate(f, t.sqrt(), t.sqrt()).0
    }

    fn scalar_segment(&self, theta: &SpectralScalarField, s: f64) -> Result<SpectralScalarField> {
        let grid = self.grid().clone();
        let t0 = self.cfg.t_start;
        let table = self.table(t0 * (s.exp() - 1.0))?;
        let mut y: Vec<Coeffs> = vec![self.pull_in(theta).into_coefficients()];
        let band = grid.band();
        let mut t = t0;
        for _ in 0..table.steps {
            strang_heun(&grid, &mut y, t, table.dt, Some(&table.half), |tt, yy| match &table.u {
                None => vec![vec![Complex64::new(0.0, 0.0); grid.spectral_len()]],
                Some(u) => {
                    let ub = &u[table.index(tt)];
                    let th = grid.fft().inverse(&yy[0], band);
                    let mut flux = divergence_form_flux(&grid, [&ub[0], &ub[1], &ub[2]], &th);
                    flux.scale(-1.0);
                    vec![flux.into_coefficients()]
                }
            });
            t += table.dt;
        }
        let out = SpectralScalarField::from_coefficients(&grid, y.pop().expect("one part"))?;
        Ok(self.pull_back(&out, s))
    }

    fn vector_segment(&self, v: &SpectralVectorField, s: f64) -> Result<SpectralVectorField> {
        let grid = self.grid().clone();
        let t0 = self.cfg.t_start;
        let table = self.table(t0 * (s.exp() - 1.0))?;
        let mut y: Vec<Coeffs> = v.components().iter().map(|c| self.pull_in(c).into_coefficients()).collect();
        let band = grid.band();
        let zero = Complex64::new(0.0, 0.0);
        let mut t = t0;
        for _ in 0..table.steps {
            strang_heun(&grid, &mut y, t, table.dt, Some(&table.half), |tt, yy| match &table.u {
                None => vec![vec![zero; grid.spectral_len()]; 3],
                Some(u) => {
                    let ub = &u[table.index(tt)];
                    let up: Vec<Vec<f64>> = yy.iter().map(|c| grid.fft().inverse(c, band)).collect();
                    let mut rhs = vec![vec![zero; grid.spectral_len()]; 3];
                    // (u·∇ū + ū·∇u)_i = ∂_j(u_j ū_i + ū_j u_i) for solenoidal u, ū
                    for i in 0..3 {
                        for j in i..3 {
                            let prod: Vec<f64> = (0..grid.physical_len())
                                .map(|p| up[i][p] * ub[j][p] + ub[i][p] * up[j][p])
                                .collect();
                            let c = grid.fft().forward(&prod, band);
                            for (m, (val, k)) in c.iter().zip(grid.kd()).enumerate() {
                                rhs[i][m] -= val * Complex64::new(0.0, k[j]);
                                if i != j {
                                    rhs[j][m] -= val * Complex64::new(0.0, k[i]);
                                }
                            }
                        }
                    }
                    let comps = rhs.into_iter().map(|c| SpectralScalarField::from_coefficients(&grid, c).expect("length"));
                    let f = SpectralVectorField::from_components(comps.collect::<Vec<_>>().try_into().expect("three"));
                    Vec::from(leray_project(&f).into_components().map(|c| c.into_coefficients()))
                }
            });
            t += table.dt;
        }
        let comps: Vec<SpectralScalarField> = y
            .into_iter()
            .map(|c| SpectralScalarField::from_coefficients(&grid, c).map(|f| self.pull_back(&f, s)))
            .collect::<Result<_>>()?;
        Ok(leray_project(&SpectralVectorField::from_components(comps.try_into().expect("three"))))
    }
}

impl Semigroup<SpectralScalarField> for LinearStepper {
    /// `e^{τL}` with `L = Δ + ½(1+ξ·∇) − Ū·∇`.
    fn apply(&self, f: &SpectralScalarField, tau: f64) -> Result<SpectralScalarField> {
        self.grid().check_same(f.grid())?;
        let mut out = f.dealiased();
        for s in self.segments(tau)? {
            out = self.scalar_segment(&out, s)?;
        }
        Ok(out)
    }
}

impl Semigroup<SpectralVectorField> for LinearStepper {
    /// `e^{τL_ss}` with `L_ss U = ΔU + ½(1+ξ·∇)U − ℙ(U·∇Ū + Ū·∇U)`.
    fn apply(&self, f: &SpectralVectorField, tau: f64) -> Result<SpectralVectorField> {
        self.grid().check_same(f.grid())?;
        let mut out = leray_project(&f.dealiased());
        for s in self.segments(tau)? {
            out = self.vector_segment(&out, s)?;
        }
        Ok(out)
    }
}

/// `e^{τL}Θ₀` for the background of `bg`.
pub fn apply_semigroup_l(
    theta0: &SpectralScalarField,
    tau: f64,
    bg: &BackgroundProfile,
    cfg: &StepperConfig,
) -> Result<SpectralScalarField> {
    LinearStepper::from_background(bg, cfg.clone())?.apply(theta0, tau)
}

/// `e^{τL_ss}U₀`; `U₀` must be divergence-free.
pub fn apply_semigroup_lss(
    u0: &SpectralVectorField,
    tau: f64,
    bg: &BackgroundProfile,
    cfg: &StepperConfig,
) -> Result<SpectralVectorField> {
    let defect = u0.divergence().l2_norm();
    let scale = u0.h1_seminorm();
    if defect > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(ObssError::Config(format!("initial field is not divergence-free (‖∇·U₀‖ = {defect:.3e})")));
    }
    LinearStepper::from_background(bg, cfg.clone())?.apply(u0, tau)
}

fn dissipation(f: &SpectralScalarField, dt: f64, forward: bool) -> f64 {
    f.weighted_sq(|k2| {
        if k2 == 0.0 {
            0.0
        } else if forward {
            -(-2.0 * k2 * dt).exp_m1() / (2.0 * dt)
        } else {
            (2.0 * k2 * dt).exp_m1() / (2.0 * dt)
        }
    })
}

/// Largest per-step defect of the energy identity `½ d/dt‖θ‖² + ‖∇θ‖² = 0`
/// for the natural-coordinate problem `∂_tθ − Δθ = −ū·∇θ` on `[t₀, t_end]`,
/// relative to `‖θ₀‖²_{H¹}`.
///
/// The dissipation is the discrete one of the exact heat sub-steps, averaged
/// over the two ends of a step, so the identity holds exactly when `Ū = 0`.
pub fn energy_identity_drift(
    bg: &BackgroundProfile,
    theta0: &SpectralScalarField,
    t_end: f64,
    cfg: &StepperConfig,
) -> Result<f64> {
    let stepper = LinearStepper::from_background(bg, cfg.clone())?;
    let t0 = cfg.t_start;
    if !(t_end > t0) {
        return Err(ObssError::Config(format!("end time {t_end} must exceed the start time {t0}")));
    }
    let grid = stepper.grid().clone();
    grid.check_same(theta0.grid())?;
    let table = stepper.table(t_end - t0)?;
    let dt = table.dt;
    let band = grid.band();
    let norm0 = hs_norm(theta0, SobolevIndex::new(1.0)?).powi(2);
    if norm0 == 0.0 {
        return Ok(0.0);
    }
    let mut cur = theta0.dealiased();
    let mut t = t0;
    let mut worst = 0.0f64;
    for _ in 0..table.steps {
        let mut y = vec![cur.coefficients().to_vec()];
        strang_heun(&grid, &mut y, t, dt, Some(&table.half), |tt, yy| match &table.u {
            None => vec![vec![Complex64::new(0.0, 0.0); grid.spectral_len()]],
            Some(u) => {
                let ub = &u[table.index(tt)];
                let th = grid.fft().inverse(&yy[0], band);
                let mut flux = divergence_form_flux(&grid, [&ub[0], &ub[1], &ub[2]], &th);
                flux.scale(-1.0);
                vec![flux.into_coefficients()]
            }
        });
        let next = SpectralScalarField::from_coefficients(&grid, y.pop().expect("one part"))?;
        let de = 0.5 * (next.l2_norm().powi(2) - cur.l2_norm().powi(2)) / dt;
        let d = 0.5 * (dissipation(&cur, dt, true) + dissipation(&next, dt, false));
        worst = worst.max((de + d).abs() / norm0);
        cur = next;
        t += dt;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &PeriodicGrid, s: f64) -> SpectralScalarField {
        SpectralScalarField::from_fn(grid, |x, y, z| (-(x * x + y * y + z * z) / (4.0 * s)).exp())
    }

    #[test]
    fn pure_heat_matches_closed_form() {
        let g = PeriodicGrid::new(24.0, 48).unwrap();
        let st = LinearStepper::new(SpectralVectorField::zeros(&g), StepperConfig::default()).unwrap();
        let tau: f64 = 0.3;
        let out = st.apply(&gaussian(&g, 2.0), tau).unwrap();
        // heat from s = 2 at t = 1 gives width s + T − 1 at time T, then Θ(ξ) = √T θ(√T ξ)
        let t = tau.exp();
        let amp = t.sqrt() * (2.0 / (1.0 + t)).powf(1.5);
        let exact = SpectralScalarField::from_fn(&g, |x, y, z| amp * (-t * (x * x + y * y + z * z) / (4.0 * (1.0 + t))).exp());
        assert!(out.sub(&exact).l2_norm() < 1e-6 * exact.l2_norm());
    }

    #[test]
    fn zero_time_is_identity() {
        let g = PeriodicGrid::new(16.0, 16).unwrap();
        let st = LinearStepper::new(SpectralVectorField::zeros(&g), StepperConfig::default()).unwrap();
        let f = gaussian(&g, 1.0).dealiased();
        assert_eq!(st.apply(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn swirl_semigroup_law_and_divergence() {
        use crate::profiles::{BackgroundProfile, ProfileConfig};
        let g = PeriodicGrid::new(16.0, 32).unwrap();
        let cfg = ProfileConfig { support_radius: 2.0, amplitude: 2.0, ..ProfileConfig::default() };
        let bg = BackgroundProfile::new(&g, &cfg, 1.75).unwrap();
        let st = LinearStepper::from_background(&bg, StepperConfig::with_dt(2e-3)).unwrap();
        let th = gaussian(&g, 1.0);
        let a = st.apply(&th, 0.1).unwrap();
        let b = st.apply(&st.apply(&th, 0.05).unwrap(), 0.05).unwrap();
        assert!(a.sub(&b).l2_norm() < 1e-12 * a.l2_norm());
        let u0 = leray_project(&th.gradient().curl());
        let v: SpectralVectorField = st.apply(&u0, 0.1).unwrap();
        assert!(v.divergence().l2_norm() < 1e-10 * v.h1_seminorm());
        assert!(v.sub(&u0).l2_norm() > 1e-3 * u0.l2_norm());
    }

    #[test]
    fn energy_drift_vanishes_without_background() {
        use crate::profiles::{BackgroundProfile, ProfileConfig};
        let g = PeriodicGrid::new(16.0, 32).unwrap();
        let cfg = ProfileConfig { amplitude: 0.0, ..ProfileConfig::default() };
        let bg = BackgroundProfile::new(&g, &cfg, 1.75).unwrap();
        let d = energy_identity_drift(&bg, &gaussian(&g, 0.5), 1.05, &StepperConfig::default()).unwrap();
        assert!(d < 1e-10, "{d}");
    }
}
