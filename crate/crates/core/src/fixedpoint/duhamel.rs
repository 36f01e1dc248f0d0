//! Chained Duhamel integrals `D(τ) = ∫_{τ_min}^τ e^{(τ−τ')A} g(τ') dτ'`.
//!
//! Between consecutive nodes `D_{i+1} = e^{hA}D_i + ∫_{τ_i}^{τ_{i+1}} e^{(τ_{i+1}−τ')A} g(τ') dτ'`.
//! The panel integral uses Gauss–Legendre nodes in `σ = √(τ_{i+1} − τ')`,
//! which absorbs the `(τ−τ')^{-1/2}` smoothing singularity of the kernel.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{ObssError, Result};
use crate::grid::LinearField;
use crate::semigroups::Semigroup;

use super::trajectory::TauGrid;

/// Quadrature on one panel `[τ_i, τ_i + h]`: offsets `s_q = τ'_q − τ_i`
/// in increasing order and their weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelRule {
    h: f64,
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Golub–Welsch).
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(q, q);
    for k in 1..q {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

impl PanelRule {
    pub const DEFAULT_NODES: usize = 6;

    /// `q`-point Gauss rule in `σ ∈ [0, √h]` with `τ' = τ_i + h − σ²`.
    pub fn sigma_gauss(h: f64, q: usize) -> Result<Self> {
        if q == 0 || !(h > 0.0) {
            return Err(ObssError::Config(format!("panel rule needs q >= 1 and h > 0 (q = {q}, h = {h})")));
        }
        let (x, w) = gauss_legendre(q);
        let r = h.sqrt();
        let mut nodes: Vec<(f64, f64)> = x
            .iter()
            .zip(&w)
            .map(|(x, w)| {
                let sigma = 0.5 * r * (x + 1.0);
                (h - sigma * sigma, 0.5 * r * w * 2.0 * sigma)
            })
            .collect();
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (offsets, weights) = nodes.into_iter().unzip();
        Ok(Self { h, offsets, weights })
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Node values of the Duhamel integral of `integrand`, starting from zero at
/// the left end of `taus`.
pub fn duhamel<F, P, G>(prop: &P, taus: &TauGrid, rule: &PanelRule, zero: F, mut integrand: G) -> Result<Vec<F>>
where
    F: LinearField,
    P: Semigroup<F> + ?Sized,
    G: FnMut(f64) -> Result<F>,
{
    if (rule.spacing() - taus.spacing()).abs() > 1e-12 {
        return Err(ObssError::Config("panel rule and τ-grid disagree on the spacing".into()));
    }
    let mut out = Vec::with_capacity(taus.len());
    out.push(zero);
    for i in 0..taus.len() - 1 {
        let t = taus.node(i);
        let mut sources = Vec::with_capacity(rule.offsets.len());
        for (s, w) in rule.offsets.iter().zip(&rule.weights) {
            let mut g = integrand(t + s)?;
            g.scale(*w);
            sources.push((*s, g));
        }
        let next = prop.apply_with_sources(&out[i], rule.spacing(), &sources)?;
        if !next.inner(&next).is_finite() {
            return Err(ObssError::Resolution(format!("Duhamel integral is not finite at τ = {}", taus.node(i + 1))));
        }
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{PeriodicGrid, SpectralField, SpectralScalarField};

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        for deg in 0..10 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "degree {deg}");
        }
    }

    #[test]
    fn sigma_rule_handles_inverse_square_root() {
        let h = 0.05;
        let rule = PanelRule::sigma_gauss(h, 6).unwrap();
        // ∫_0^h (h − s)^{-1/2} ds = 2√h
        let q: f64 = rule.offsets().iter().zip(rule.weights()).map(|(s, w)| w / (h - s).sqrt()).sum();
        assert!((q - 2.0 * h.sqrt()).abs() < 1e-12);
        let total: f64 = rule.weights().iter().sum();
        assert!((total - h).abs() < 1e-14);
    }

    struct Decay(f64);

    impl Semigroup<SpectralScalarField> for Decay {
        fn apply(&self, f: &SpectralScalarField, tau: f64) -> Result<SpectralScalarField> {
            Ok(f.scaled((-self.0 * tau).exp()))
        }
    }

    #[test]
    fn duhamel_of_exponential_source_matches_closed_form() {
        // D' = −μD + e^{rτ}φ, D(τ_min) = 0
        let (mu, r) = (3.0, 2.0);
        let g = PeriodicGrid::new(8.0, 16).unwrap();
        let phi = SpectralScalarField::from_fn(&g, |x, _, _| 1.0 + 0.1 * x.sin());
        let taus = TauGrid::new(-3.0, -1.0, 0.05).unwrap();
        let rule = PanelRule::sigma_gauss(0.05, 6).unwrap();
        let out = duhamel(&Decay(mu), &taus, &rule, phi.scaled(0.0), |t| Ok(phi.scaled((r * t).exp()))).unwrap();
        let t0 = taus.tau_min();
        for (i, d) in out.iter().enumerate() {
            let t = taus.node(i);
            let exact = ((r * t).exp() - (r * t0 - mu * (t - t0)).exp()) / (r + mu);
            let got = d.l2_norm() / phi.l2_norm();
            assert!((got - exact).abs() < 1e-12, "node {i}: {got} vs {exact}");
        }
    }
}
