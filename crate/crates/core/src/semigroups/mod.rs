//! The linearized semigroups `e^{τL}` (temperature) and `e^{τL_ss}` (velocity)
//! around a self-similar background, and probes of their smoothing and growth.

mod probe;
mod stepper;
mod synthetic;

pub use probe::{
    probe_smoothing, probe_smoothing_multi, write_probe_csv, Generator, ProbeRow, ProbeSettings,
    SemigroupProbeReport,
};
pub use stepper::{apply_semigroup_l, apply_semigroup_lss, energy_identity_drift, LinearStepper, StepperConfig};
pub use synthetic::SyntheticPropagator;

use crate::error::{ObssError, Result};
use crate::grid::LinearField;

/// A linear evolution `f ↦ e^{τA}f` for `τ ≥ 0`.
pub trait Semigroup<F: LinearField> {
    fn apply(&self, f: &F, tau: f64) -> Result<F>;

    /// `e^{τA}f + Σ_q e^{(τ−s_q)A} g_q` for sources `(s_q, g_q)` with
    /// nondecreasing offsets `s_q ∈ [0, τ]`, evaluated in one forward sweep.
    fn apply_with_sources(&self, f: &F, tau: f64, sources: &[(f64, F)]) -> Result<F> {
        let mut cur = f.clone();
        let mut at = 0.0;
        for (s, g) in sources {
            if *s < at - 1e-14 || *s > tau + 1e-14 {
                return Err(ObssError::Config(format!("source offset {s} out of order or beyond {tau}")));
            }
            let gap = (s - at).max(0.0);
            if gap > 0.0 {
                cur = self.apply(&cur, gap)?;
            }
            cur.axpy(1.0, g);
            at = at.max(*s);
        }
        let rest = tau - at;
        if rest > 0.0 {
            cur = self.apply(&cur, rest)?;
        }
        Ok(cur)
    }
}
