//! The Duhamel fixed point for the perturbation `(U_p, Θ_p)`.

mod context;
mod duhamel;
mod exponents;
mod picard;
mod terms;
mod trajectory;

pub use context::{linear_mode, FixedPointContext, VelocityPropagator};
pub use duhamel::{duhamel, gauss_legendre, PanelRule};
pub use exponents::{check_exponents, require_feasible, Constraint, ExponentParams};
pub use picard::{
    apply_phi1, apply_phi2, picard_solve, picard_solve_from, temperature_source, velocity_source,
    write_picard_log, PicardLogRow, PicardReport,
};
pub use terms::{probe_term_bounds, unit_profiles, TermFit, TermId};
pub use trajectory::{slowest_rate, TauGrid, Trajectory, TrajectoryX, TrajectoryY};
