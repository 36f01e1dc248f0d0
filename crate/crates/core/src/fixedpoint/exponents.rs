use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ObssError, Result};

/// Rate bookkeeping for the weighted fixed-point spaces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentParams {
    pub a: f64,
    pub delta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub b: f64,
    /// Sobolev index of the velocity space, `3/2 < N < 2`.
    #[serde(default = "default_n")]
    pub n: f64,
    #[serde(default = "default_tau0")]
    pub tau0: f64,
    /// Radius of the ball the contraction lives in.
    #[serde(default = "default_m")]
    pub m: f64,
}

fn default_n() -> f64 {
    1.75
}

fn default_tau0() -> f64 {
    -3.0
}

fn default_m() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    ADelta,
    BetaDelta,
    GammaAPlusDelta,
    TwoABeta,
    GammaBeta,
    BetaPlusBGamma,
    APlusBGamma,
    BetaA,
    SobolevRange,
    BallRadius,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::ADelta => "a > delta",
            Constraint::BetaDelta => "beta > delta",
            Constraint::GammaAPlusDelta => "gamma > a + delta",
            Constraint::TwoABeta => "2a > beta",
            Constraint::GammaBeta => "gamma > beta",
            Constraint::BetaPlusBGamma => "beta + b > gamma",
            Constraint::APlusBGamma => "a + b > gamma",
            Constraint::BetaA => "beta > a",
            Constraint::SobolevRange => "3/2 < N < 2",
            Constraint::BallRadius => "0 < M < 1",
        };
        f.write_str(s)
    }
}

/// Strict `x > y` that does not let rounding in sums like `a + δ` decide ties.
fn gt(x: f64, y: f64) -> bool {
    x - y > 1e-12 * x.abs().max(y.abs()).max(1.0)
}

impl ExponentParams {
    /// A feasible choice for a given growth rate: `β = 5a/4`, `γ = 3a/2`, `b = 3a/4`.
    /// Feasible whenever `a > 2δ`.
    pub fn suggest(a: f64, delta: f64) -> Self {
        Self {
            a,
            delta,
            beta: 1.25 * a,
            gamma: 1.5 * a,
            b: 0.75 * a,
            n: default_n(),
            tau0: default_tau0(),
            m: default_m(),
        }
    }

    /// Rates of the nine Duhamel terms in the order
    /// `2a, a+β, a+β, 2β, γ, a+b, a+γ, β+b, β+γ`.
    pub fn term_rates(&self) -> [f64; 9] {
        let (a, be, g, b) = (self.a, self.beta, self.gamma, self.b);
        [2.0 * a, a + be, a + be, 2.0 * be, g, a + b, a + g, be + b, be + g]
    }

    pub fn slowest_rate(&self) -> f64 {
        self.term_rates().iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates every constraint; an empty list means feasible.
pub fn check_exponents(p: &ExponentParams) -> Result<Vec<Constraint>> {
    for (name, v) in [("a", p.a), ("delta", p.delta), ("beta", p.beta), ("gamma", p.gamma), ("b", p.b), ("N", p.n), ("M", p.m)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ObssError::Config(format!("{name} must be positive, got {v}")));
        }
    }
    let checks = [
        (Constraint::ADelta, gt(p.a, p.delta)),
        (Constraint::BetaDelta, gt(p.beta, p.delta)),
        (Constraint::GammaAPlusDelta, gt(p.gamma, p.a + p.delta)),
        (Constraint::TwoABeta, gt(2.0 * p.a, p.beta)),
        (Constraint::GammaBeta, gt(p.gamma, p.beta)),
        (Constraint::BetaPlusBGamma, gt(p.beta + p.b, p.gamma)),
        (Constraint::APlusBGamma, gt(p.a + p.b, p.gamma)),
        (Constraint::BetaA, gt(p.beta, p.a)),
        (Constraint::SobolevRange, p.n > 1.5 && p.n < 2.0),
        (Constraint::BallRadius, p.m > 0.0 && p.m < 1.0),
    ];
    Ok(checks.iter().filter(|(_, ok)| !ok).map(|(c, _)| *c).collect())
}

/// Like [`check_exponents`] but turns violations into an error.
pub fn require_feasible(p: &ExponentParams) -> Result<()> {
    let v = check_exponents(p)?;
    if v.is_empty() {
        Ok(())
    } else {
        Err(ObssError::Infeasible(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_point_is_feasible() {
        let p = ExponentParams::suggest(2.0, 0.1);
        assert_eq!((p.beta, p.gamma, p.b), (2.5, 3.0, 1.5));
        assert!(check_exponents(&p).unwrap().is_empty());
    }

    #[test]
    fn boundaries_are_violations() {
        let mut p = ExponentParams::suggest(2.0, 0.1);
        p.beta = 2.0;
        assert_eq!(check_exponents(&p).unwrap(), vec![Constraint::BetaA]);
        let mut p = ExponentParams::suggest(2.0, 0.1);
        p.gamma = 2.1;
        assert!(check_exponents(&p).unwrap().contains(&Constraint::GammaAPlusDelta));
    }

    #[test]
    fn nonpositive_input_is_an_error() {
        let mut p = ExponentParams::suggest(2.0, 0.1);
        p.b = 0.0;
        assert!(check_exponents(&p).is_err());
    }
}
