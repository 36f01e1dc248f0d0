//! Browser bindings for three small experiments: the exponent check, the
//! decay of the forcing as `t → 0`, and eigenvalue recovery from an injected
//! propagator. Grids are small so a page stays responsive.

use num_complex::Complex64;
use wasm_bindgen::prelude::*;

use obss::fixedpoint::{check_exponents, ExponentParams};
use obss::grid::PeriodicGrid;
use obss::profiles::{forcing_decay_slope, log_spaced, synthesize_forcing, BackgroundProfile, ProfileConfig};
use obss::semigroups::SyntheticPropagator;
use obss::spectra::{estimate_eigenpair, ArnoldiConfig};

const BOX: f64 = 16.0;
/// The profiles need a support radius of at least four cells and at most `L/8`.
const PROFILE_N: usize = 32;
const EIGEN_N: usize = 16;
const SOBOLEV: f64 = 1.75;

fn js(e: obss::ObssError) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Violated constraints, comma separated, or `"feasible"`.
pub fn exponent_report(a: f64, delta: f64, beta: f64, gamma: f64, b: f64) -> obss::Result<String> {
    let p = ExponentParams { a, delta, beta, gamma, b, n: SOBOLEV, tau0: -3.0, m: 0.5 };
    let violated = check_exponents(&p)?;
    if violated.is_empty() {
        return Ok("feasible".into());
    }
    Ok(violated.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "))
}

/// Fitted exponents of the forcing norm over `t ∈ [1e-3, 0.5]`: the steady
/// velocity part alone, then the full pair.
pub fn forcing_slopes(amplitude: f64, b: f64) -> obss::Result<Vec<f64>> {
    let grid = PeriodicGrid::new(BOX, PROFILE_N)?;
    let cfg = ProfileConfig { amplitude, b, ..ProfileConfig::default() };
    let bg = BackgroundProfile::new(&grid, &cfg, SOBOLEV)?;
    let fp = synthesize_forcing(&bg)?;
    let ts = log_spaced(1e-3, 0.5, 12);
    Ok(vec![forcing_decay_slope(&fp.steady_part(), &ts)?, forcing_decay_slope(&fp, &ts)?])
}

/// `[Re λ, Im λ, residual]` recovered by Arnoldi from a propagator with `λ` injected.
pub fn recover(re: f64, im: f64, seed: u64) -> obss::Result<Vec<f64>> {
    let grid = PeriodicGrid::new(BOX, EIGEN_N)?;
    let prop = SyntheticPropagator::new(&grid, Complex64::new(re, im), SOBOLEV)?;
    let cfg = ArnoldiConfig { seed, ..ArnoldiConfig::default() };
    let est = estimate_eigenpair(&prop, &grid, &cfg)?;
    Ok(vec![est.lambda.re, est.lambda.im, est.residual])
}

#[wasm_bindgen]
pub fn check_exponents_js(a: f64, delta: f64, beta: f64, gamma: f64, b: f64) -> Result<String, JsValue> {
    exponent_report(a, delta, beta, gamma, b).map_err(js)
}

#[wasm_bindgen]
pub fn forcing_slopes_js(amplitude: f64, b: f64) -> Result<Vec<f64>, JsValue> {
    forcing_slopes(amplitude, b).map_err(js)
}

#[wasm_bindgen]
pub fn recover_eigenvalue_js(re: f64, im: f64, seed: u32) -> Result<Vec<f64>, JsValue> {
    recover(re, im, seed as u64).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_exponents_are_feasible() {
        assert_eq!(exponent_report(2.0, 0.1, 2.5, 3.0, 1.5).unwrap(), "feasible");
        assert_ne!(exponent_report(2.0, 0.1, 4.5, 3.0, 1.5).unwrap(), "feasible");
    }

    #[test]
    fn injected_eigenvalue_is_recovered() {
        let v = recover(0.7, 1.3, 3).unwrap();
        assert!((v[0] - 0.7).abs() < 1e-6 && (v[1].abs() - 1.3).abs() < 1e-6, "{v:?}");
    }

    #[test]
    fn steady_forcing_decays_like_t_to_minus_three_quarters() {
        let s = forcing_slopes(1.0, 1.5).unwrap();
        assert!((s[0] + 0.75).abs() < 0.05, "{s:?}");
        assert!(s[1] >= s[0] - 1e-9, "{s:?}");
    }
}
