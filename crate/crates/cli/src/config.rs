//! JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use obss::fixedpoint::ExponentParams;
use obss::grid::PeriodicGrid;
use obss::nonuniq::Mode;
use obss::profiles::{ProfileConfig, VelocityShape};
use obss::semigroups::{Generator, StepperConfig};
use obss::spectra::ArnoldiConfig;
use obss::{ObssError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub n: usize,
    pub box_side: f64,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self { n: 32, box_side: 16.0 }
    }
}

/// Background shape. The decay rate `b` of `Θ̄` is taken from the exponent
/// block; a `b` given here must agree with it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileBlock {
    pub amplitude: f64,
    pub support_radius: f64,
    pub shape: VelocityShape,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub theta_amplitude: f64,
}

impl Default for ProfileBlock {
    fn default() -> Self {
        let p = ProfileConfig::default();
        Self {
            amplitude: p.amplitude,
            support_radius: p.support_radius,
            shape: p.shape,
            b: None,
            theta_amplitude: p.theta_amplitude,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperBlock {
    pub dt: f64,
    /// Overrides `exponents.tau0` when present.
    pub tau0: Option<f64>,
    /// Left end of the τ-grid; derived from the tolerance when absent.
    pub tau_min: Option<f64>,
}

impl Default for StepperBlock {
    fn default() -> Self {
        Self { dt: 1e-3, tau0: None, tau_min: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectraBlock {
    pub tau_star: f64,
    pub krylov_dim: usize,
    pub tol: f64,
    pub seed: u64,
    pub max_restarts: usize,
    /// Time step of the eigenvalue search, usually coarser than `stepper.dt`.
    pub dt: f64,
    /// Amplitudes scanned for an unstable pair; empty skips the scan.
    pub sweep_amplitudes: Vec<f64>,
}

impl Default for SpectraBlock {
    fn default() -> Self {
        let a = ArnoldiConfig::default();
        Self {
            tau_star: a.tau_star,
            krylov_dim: a.krylov_dim,
            tol: a.tol,
            seed: a.seed,
            max_restarts: a.max_restarts,
            dt: 2e-3,
            sweep_amplitudes: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeBlock {
    pub generator: Generator,
    pub m: f64,
    pub k: Vec<f64>,
    pub seeds: usize,
    /// Box side of the probe grid; the probe wants a box of a few widths of `Ū`.
    pub box_side: f64,
    pub support_radius: f64,
}

impl Default for ProbeBlock {
    fn default() -> Self {
        Self { generator: Generator::L, m: 0.0, k: vec![1.0], seeds: 10, box_side: 8.0, support_radius: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructBlock {
    /// Mode coefficients `c`; two or more distinct values for the demo.
    pub coefficients: Vec<f64>,
    pub max_iter: usize,
    pub tol: f64,
    /// Every `residual_stride`-th τ node enters the residual check.
    pub residual_stride: usize,
}

impl Default for ConstructBlock {
    fn default() -> Self {
        Self { coefficients: vec![1.0, 2.0], max_iter: 30, tol: 1e-8, residual_stride: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub profile: ProfileBlock,
    pub exponents: ExponentParams,
    #[serde(default)]
    pub stepper: StepperBlock,
    #[serde(default)]
    pub spectra: SpectraBlock,
    #[serde(default)]
    pub probe: ProbeBlock,
    #[serde(default)]
    pub construct: ConstructBlock,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

fn default_mode() -> Mode {
    Mode::Synthetic
}

impl RunConfig {
    /// Parses JSON; errors carry the line and column of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text)?;
        if let Some(t) = cfg.stepper.tau0 {
            cfg.exponents.tau0 = t;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.grid.box_side, self.grid.n)
    }

    pub fn profile_config(&self, b: f64) -> ProfileConfig {
        ProfileConfig {
            amplitude: self.profile.amplitude,
            support_radius: self.profile.support_radius,
            shape: self.profile.shape,
            b,
            theta_amplitude: self.profile.theta_amplitude,
        }
    }

    pub fn stepper_config(&self) -> Result<StepperConfig> {
        let s = StepperConfig::with_dt(self.stepper.dt);
        s.validate()?;
        Ok(s)
    }

    pub fn arnoldi_config(&self) -> ArnoldiConfig {
        ArnoldiConfig {
            tau_star: self.spectra.tau_star,
            krylov_dim: self.spectra.krylov_dim,
            tol: self.spectra.tol,
            seed: self.spectra.seed,
            max_restarts: self.spectra.max_restarts,
            n_sobolev: self.exponents.n,
        }
    }

    /// Applies the command-line overrides.
    pub fn with_overrides(mut self, seed: Option<u64>, mode: Option<Mode>) -> Self {
        if let Some(s) = seed {
            self.spectra.seed = s;
        }
        if let Some(m) = mode {
            self.mode = m;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.construct.coefficients.is_empty() {
            return Err(ObssError::Config("construct.coefficients must not be empty".into()));
        }
        if let Some(b) = self.profile.b {
            if b != self.exponents.b {
                return Err(ObssError::Config(format!("profile.b = {b} disagrees with exponents.b = {}", self.exponents.b)));
            }
        }
        if self.construct.residual_stride == 0 {
            return Err(ObssError::Config("construct.residual_stride must be >= 1".into()));
        }
        self.arnoldi_config().validate()?;
        self.stepper_config()?;
        self.grid()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{ "exponents": { "a": 2.0, "delta": 0.1, "beta": 2.5, "gamma": 3.0, "b": 1.5 } }"#;

    #[test]
    fn defaults_fill_missing_blocks() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.grid, GridBlock::default());
        assert_eq!(cfg.mode, Mode::Synthetic);
        assert_eq!(cfg.exponents.tau0, -3.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn stepper_tau0_overrides_the_exponent_block() {
        let text = MINIMAL.replace("} }", r#"}, "stepper": { "dt": 0.002, "tau0": -4.0 } }"#);
        let cfg = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.exponents.tau0, -4.0);
    }

    #[test]
    fn mismatched_profile_b_is_rejected() {
        let text = MINIMAL.replace("} }", r#"}, "profile": { "b": 2.0 } }"#);
        let cfg = RunConfig::from_json(&text).unwrap();
        assert!(matches!(cfg.validate(), Err(ObssError::Config(_))));
    }

    #[test]
    fn overrides_replace_seed_and_mode() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap().with_overrides(Some(99), Some(Mode::Computed));
        assert_eq!(cfg.spectra.seed, 99);
        assert_eq!(cfg.mode, Mode::Computed);
    }

    #[test]
    fn missing_exponents_is_a_parse_error() {
        assert!(matches!(RunConfig::from_json("{}"), Err(ObssError::Json(_))));
    }
}
