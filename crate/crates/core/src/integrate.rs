//! Strang-split exact heat flow around a Heun (explicit trapezoid) step for the
//! transport terms. Shared by the linear and nonlinear steppers.

use num_complex::Complex64;

use crate::grid::PeriodicGrid;

pub(crate) type Coeffs = Vec<Complex64>;

fn heat(grid: &PeriodicGrid, c: &mut [Complex64], s: f64) {
    for (v, &k2) in c.iter_mut().zip(grid.k2()) {
        *v *= (-k2 * s).exp();
    }
}

/// Heat factors `e^{-|k|² s}` for one grid, reused across steps.
pub(crate) struct HeatFactors {
    s: f64,
    f: Vec<f64>,
}

impl HeatFactors {
    pub fn new(grid: &PeriodicGrid, s: f64) -> Self {
        Self { s, f: grid.k2().iter().map(|k2| (-k2 * s).exp()).collect() }
    }

    pub fn apply(&self, c: &mut [Complex64]) {
        for (v, f) in c.iter_mut().zip(&self.f) {
            *v *= f;
        }
    }

    pub fn span(&self) -> f64 {
        self.s
    }
}

/// One step `e^{dtΔ/2} ∘ Heun(dt) ∘ e^{dtΔ/2}` for `∂_t y = Δy + N(t, y)`.
/// `rhs` returns `N(t, y)` for every part of the state.
pub(crate) fn strang_heun<R>(grid: &PeriodicGrid, y: &mut [Coeffs], t: f64, dt: f64, half: Option<&HeatFactors>, mut rhs: R)
where
    R: FnMut(f64, &[Coeffs]) -> Vec<Coeffs>,
{
    let apply_half = |c: &mut [Complex64]| match half {
        Some(h) => {
            debug_assert!((h.span() - 0.5 * dt).abs() <= 1e-14 * dt);
            h.apply(c)
        }
        None => heat(grid, c, 0.5 * dt),
    };
    y.iter_mut().for_each(|c| apply_half(c));
    let k1 = rhs(t, y);
    let y1: Vec<Coeffs> = y
        .iter()
        .zip(&k1)
        .map(|(a, k)| a.iter().zip(k).map(|(a, k)| a + k * dt).collect())
        .collect();
    let k2 = rhs(t + dt, &y1);
    for ((a, k1), k2) in y.iter_mut().zip(&k1).zip(&k2) {
        for ((a, k1), k2) in a.iter_mut().zip(k1).zip(k2) {
            *a += (k1 + k2) * (0.5 * dt);
        }
    }
    y.iter_mut().for_each(|c| apply_half(c));
}

/// Splits `[0, span]` into the fewest equal steps no longer than `dt_max`.
pub(crate) fn step_count(span: f64, dt_max: f64) -> usize {
    if span <= 0.0 {
        0
    } else {
        ((span / dt_max) - 1e-9).ceil().max(1.0) as usize
    }
}
