//! Fields sampled on a uniform `τ`-grid and the weighted sup-norms of the
//! fixed-point spaces.

use crate::error::{ObssError, Result};
use crate::grid::{hs_norm, LinearField, SobolevIndex, SpectralScalarField, SpectralVectorField};

use super::ExponentParams;

/// Uniform grid `τ_min = τ_0 < … < τ_{len−1} = τ₀`. The right end is exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauGrid {
    tau0: f64,
    h: f64,
    len: usize,
}

impl TauGrid {
    pub const SPACING: f64 = 0.05;

    /// Grid ending at `tau0` whose left end is the first node at or below `tau_min`.
    pub fn new(tau_min: f64, tau0: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !tau_min.is_finite() || !tau0.is_finite() {
            return Err(ObssError::Config(format!("bad τ-grid: [{tau_min}, {tau0}] step {h}")));
        }
        let steps = ((tau0 - tau_min) / h - 1e-9).ceil();
        if steps < 3.0 {
            return Err(ObssError::Config(format!("τ-grid [{tau_min}, {tau0}] needs at least four nodes")));
        }
        Ok(Self { tau0, h, len: steps as usize + 1 })
    }

    /// `[τ_min, τ₀]` with `e^{r τ_min} ≤ 1e-3·tol` for the slowest integrand rate `r`.
    pub fn for_params(p: &ExponentParams, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(ObssError::Config(format!("tolerance must lie in (0, 1), got {tol}")));
        }
        let r = slowest_rate(p);
        let tau_min = (1e-3 * tol).ln() / r;
        Self::new(tau_min.min(p.tau0 - 1.0), p.tau0, Self::SPACING)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn tau_min(&self) -> f64 {
        self.node(0)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.tau0 - (self.len - 1 - i) as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.node(i)).collect()
    }

    /// Index of the node nearest to `tau`.
    pub fn nearest(&self, tau: f64) -> usize {
        let i = ((tau - self.tau_min()) / self.h).round();
        i.clamp(0.0, (self.len - 1) as f64) as usize
    }
}

/// Smallest of the nine integrand rates.
pub fn slowest_rate(p: &ExponentParams) -> f64 {
    [
        2.0 * p.a,
        p.a + p.beta,
        2.0 * p.beta,
        p.gamma,
        p.a + p.b,
        p.a + p.gamma,
        p.beta + p.b,
        p.beta + p.gamma,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<F> {
    taus: TauGrid,
    nodes: Vec<F>,
}

/// Divergence-free velocity per node, normed by `sup e^{−βτ}‖U‖_{H^N}`.
pub type TrajectoryX = Trajectory<SpectralVectorField>;
/// Temperature per node, normed by `sup e^{−γτ}‖Θ‖_{H^{N+1}}`.
pub type TrajectoryY = Trajectory<SpectralScalarField>;

impl<F: LinearField> Trajectory<F> {
    pub fn new(taus: TauGrid, nodes: Vec<F>) -> Result<Self> {
        if nodes.len() != taus.len() {
            return Err(ObssError::Config(format!("{} nodes for a τ-grid of {}", nodes.len(), taus.len())));
        }
        for n in &nodes[1..] {
            nodes[0].grid().check_same(n.grid())?;
        }
        Ok(Self { taus, nodes })
    }

    pub fn zeros(taus: TauGrid, template: &F) -> Self {
        let z = template.zeros_like();
        Self { taus, nodes: vec![z; taus.len()] }
    }

    pub fn from_fn<G: Fn(f64) -> F>(taus: TauGrid, f: G) -> Self {
        Self { taus, nodes: taus.nodes().into_iter().map(f).collect() }
    }

    pub fn taus(&self) -> &TauGrid {
        &self.taus
    }

    pub fn nodes(&self) -> &[F] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &F {
        &self.nodes[i]
    }

    pub fn into_nodes(self) -> Vec<F> {
        self.nodes
    }

    /// `sup_τ e^{−rate·τ}‖f(τ)‖_{H^s}`.
    pub fn weighted_norm(&self, rate: f64, s: SobolevIndex) -> f64 {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, f)| (-rate * self.taus.node(i)).exp() * hs_norm(f, s))
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.taus != other.taus {
            return Err(ObssError::Config("trajectories live on different τ-grids".into()));
        }
        let nodes = self
            .nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| {
                let mut d = a.clone();
                d.axpy(-1.0, b);
                d
            })
            .collect();
        Ok(Self { taus: self.taus, nodes })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|f| {
                let mut g = f.clone();
                g.scale(alpha);
                g
            })
            .collect();
        Self { taus: self.taus, nodes }
    }

    /// Cubic Lagrange interpolation through the four surrounding nodes.
    pub fn interpolate(&self, tau: f64) -> F {
        let g = &self.taus;
        let x = (tau - g.tau_min()) / g.spacing();
        let i0 = (x.floor() as i64 - 1).clamp(0, g.len() as i64 - 4) as usize;
        let t = x - i0 as f64;
        let mut out = self.nodes[i0].zeros_like();
        for j in 0..4 {
            let mut w = 1.0;
            for m in 0..4 {
                if m != j {
                    w *= (t - m as f64) / (j as f64 - m as f64);
                }
            }
            if w != 0.0 {
                out.axpy(w, &self.nodes[i0 + j]);
            }
        }
        out
    }

    /// Fourth-order finite-difference `∂_τ` at node `i`, one-sided near the ends.
    pub fn time_derivative(&self, i: usize) -> F {
        const CENTER: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
        const EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
        const EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
        let n = self.taus.len();
        assert!(n >= 5, "time derivative needs five nodes");
        let (start, coef, sign) = match i {
            0 => (0, EDGE0, 1.0),
            1 => (0, EDGE1, 1.0),
            _ if i == n - 1 => (n - 5, EDGE0, -1.0),
            _ if i == n - 2 => (n - 5, EDGE1, -1.0),
            _ => (i - 2, CENTER, 1.0),
        };
        let scale = 1.0 / (12.0 * self.taus.spacing());
        let mut out = self.nodes[i].zeros_like();
        for (j, c) in coef.iter().enumerate() {
            // the right-end stencils are the left ones reflected
            let idx = if sign > 0.0 { start + j } else { start + 4 - j };
            if *c != 0.0 {
                out.axpy(sign * c * scale, &self.nodes[idx]);
            }
        }
        out
    }
}

impl TrajectoryX {
    pub fn norm_x(&self, p: &ExponentParams) -> Result<f64> {
        Ok(self.weighted_norm(p.beta, SobolevIndex::new(p.n)?))
    }
}

impl TrajectoryY {
    pub fn norm_y(&self, p: &ExponentParams) -> Result<f64> {
        Ok(self.weighted_norm(p.gamma, SobolevIndex::new(p.n + 1.0)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{PeriodicGrid, SpectralField};

    fn scalar_traj(f: impl Fn(f64) -> f64) -> TrajectoryY {
        let g = PeriodicGrid::new(8.0, 16).unwrap();
        let base = SpectralScalarField::from_fn(&g, |x, _, _| (0.25 * std::f64::consts::PI * x).cos());
        let taus = TauGrid::new(-2.0, -1.0, 0.05).unwrap();
        Trajectory::from_fn(taus, |t| base.scaled(f(t)))
    }

    #[test]
    fn grid_ends_exactly_at_tau0() {
        let g = TauGrid::new(-6.93, -3.0, 0.05).unwrap();
        assert_eq!(g.node(g.len() - 1), -3.0);
        assert!(g.tau_min() <= -6.93 + 1e-12 && g.tau_min() > -6.93 - 0.05);
    }

    #[test]
    fn derivative_and_interpolation_of_exponential() {
        let tr = scalar_traj(|t| (2.0 * t).exp());
        let base = tr.node(0).scaled(1.0 / (2.0 * tr.taus().tau_min()).exp());
        let nb = base.l2_norm();
        for i in [0, 1, 7, 19, 20] {
            let tau = tr.taus().node(i);
            let d = tr.time_derivative(i);
            let exact = 2.0 * (2.0 * tau).exp();
            // one-sided error is h⁴f⁽⁵⁾/5, about 2e-5 relative here
            assert!((d.l2_norm() / nb - exact).abs() < 4e-5 * exact, "node {i}");
        }
        let tau = -1.5123;
        let v = tr.interpolate(tau).l2_norm() / nb;
        // cubic remainder bound (9/16)h⁴f⁗/24
        assert!((v - (2.0 * tau).exp()).abs() < 3e-6 * (2.0 * tau).exp());
    }

    #[test]
    fn weighted_norm_of_pure_exponential_is_flat() {
        let tr = scalar_traj(|t| (3.0 * t).exp());
        let nb = tr.node(0).l2_norm() / (3.0 * tr.taus().tau_min()).exp();
        let w = tr.weighted_norm(3.0, SobolevIndex::new(0.0).unwrap());
        assert!((w - nb).abs() < 1e-12 * nb);
    }
}
