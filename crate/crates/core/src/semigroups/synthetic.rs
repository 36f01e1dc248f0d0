//! Propagator with a prescribed unstable pair, used when no unstable
//! eigenvalue of the computed `L_ss` is available.
//!
//! On `span{ρ_r, ρ_i}` it acts as `e^{λτ}` on `ρ_r + iρ_i`; on the orthogonal
//! complement it is the projected heat flow `e^{τΔ}ℙ`. Both `ρ_r` and `ρ_i` are
//! Laplacian eigenmodes with a common eigenvalue, so the two parts commute and the family is a semigroup
//! with generator `L_syn`.

use num_complex::Complex64;

use crate::error::{ObssError, Result};
use crate::grid::{
    hs_norm, leray_project, PeriodicGrid, SobolevIndex, SpectralField, SpectralVectorField,
};

use super::Semigroup;
use crate::spectra::EigenEstimate;

#[derive(Clone, Debug)]
pub struct SyntheticPropagator {
    lambda: Complex64,
    /// L²-orthonormal basis of the unstable plane.
    e: [SpectralVectorField; 2],
    /// `ρ = ρ_r + iρ_i` with `‖ρ_r‖²_{H^N} + ‖ρ_i‖²_{H^N} = 1`.
    rho: [SpectralVectorField; 2],
}

impl SyntheticPropagator {
    /// Unstable plane spanned by `ρ_r = cos(k₁·ξ)e₁ + cos(k₂·ξ)e₂` and the
    /// matching sines, with `k₁ = (1,1,1)·2π/L`, `k₂ = (1,1,−1)·2π/L`,
    /// `e₁ = (1,−1,0)/√2`, `e₂ = (1,0,1)/√2`. Two directions are needed so that
    /// `ℙ(ρ_r·∇ρ_r)` does not vanish. `n_sobolev` fixes the normalization of `ρ`.
    pub fn new(grid: &PeriodicGrid, lambda: Complex64, n_sobolev: f64) -> Result<Self> {
        if !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(ObssError::Config("synthetic rate must be finite".into()));
        }
        let k = 2.0 * std::f64::consts::PI / grid.box_side();
        let h = 0.5 * grid.box_side();
        let p = std::f64::consts::FRAC_1_SQRT_2;
        let phases = |x: f64, y: f64, z: f64| {
            let (x, y, z) = (x + h, y + h, z + h);
            (k * (x + y + z), k * (x + y - z))
        };
        let build = |f: fn(f64) -> f64| {
            SpectralVectorField::from_fn(grid, move |x, y, z| {
                let (p1, p2) = phases(x, y, z);
                let (a, b) = (f(p1), f(p2));
                [p * (a + b), -p * a, p * b]
            })
        };
        let re = build(f64::cos);
        let im = build(f64::sin);
        let unit = |v: SpectralVectorField| {
            let n = v.l2_norm();
            leray_project(&v.scaled(1.0 / n))
        };
        let e = [unit(re), unit(im)];
        let sn = SobolevIndex::new(n_sobolev)?;
        let hn = (hs_norm(&e[0], sn).powi(2) + hs_norm(&e[1], sn).powi(2)).sqrt();
        let rho = [e[0].scaled(1.0 / hn), e[1].scaled(1.0 / hn)];
        Ok(Self { lambda, e, rho })
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.e[0].grid()
    }

    /// `(ρ_r, ρ_i)`.
    pub fn rho(&self) -> (&SpectralVectorField, &SpectralVectorField) {
        (&self.rho[0], &self.rho[1])
    }

    /// The pair as an eigen-estimate. For real `λ` the plane is degenerate and
    /// `ρ = ρ_r` alone, rescaled to unit `H^N` norm.
    pub fn estimate(&self, tau_star: f64) -> EigenEstimate {
        if self.lambda.im == 0.0 {
            let n = (2.0f64).sqrt();
            EigenEstimate::known(self.lambda, self.rho[0].scaled(n), SpectralVectorField::zeros(self.grid()), tau_star)
        } else {
            EigenEstimate::known(self.lambda, self.rho[0].clone(), self.rho[1].clone(), tau_star)
        }
    }

    fn split(&self, v: &SpectralVectorField) -> (f64, f64, SpectralVectorField) {
        let c1 = v.inner(&self.e[0]);
        let c2 = v.inner(&self.e[1]);
        let mut w = leray_project(v);
        w.axpy(-c1, &self.e[0]);
        w.axpy(-c2, &self.e[1]);
        (c1, c2, w)
    }

    /// `L_syn v = Δℙ(v − Pv) + (rotation-dilation by λ) Pv`.
    pub fn generator(&self, v: &SpectralVectorField) -> SpectralVectorField {
        let (c1, c2, w) = self.split(v);
        let (a, om) = (self.lambda.re, self.lambda.im);
        let mut out = w.laplacian();
        out.axpy(a * c1 + om * c2, &self.e[0]);
        out.axpy(a * c2 - om * c1, &self.e[1]);
        out
    }
}

impl Semigroup<SpectralVectorField> for SyntheticPropagator {
    fn apply(&self, v: &SpectralVectorField, tau: f64) -> Result<SpectralVectorField> {
        if !(tau >= 0.0) {
            return Err(ObssError::Config(format!("semigroup time must be >= 0, got {tau}")));
        }
        self.grid().check_same(v.grid())?;
        let (c1, c2, w) = self.split(v);
        let g = (self.lambda.re * tau).exp();
        let (s, c) = (self.lambda.im * tau).sin_cos();
        let mut out = w.heat(tau);
        out.axpy(g * (c1 * c + c2 * s), &self.e[0]);
        out.axpy(g * (c2 * c - c1 * s), &self.e[1]);
        Ok(leray_project(&out))
    }
}
