//! Measured smoothing and growth of the semigroups.
//!
//! Inputs are random-phase fields confined to a spherical wavenumber shell
//! and windowed to the inner half of the box, plus one broad smooth packet.
//! For every seed and `τ` the
//! reported ratio is the largest `‖e^{τA}φ‖_{H^k} / ‖φ‖_{H^m}` over the shells,
//! which tracks the operator norm `H^m → H^k` as the shells sweep the band.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ObssError, Result};
use crate::grid::{
    hs_norm, leray_project, PeriodicGrid, SobolevIndex, SpectralScalarField, SpectralVectorField,
};
use crate::profiles::{linear_fit, smooth_step};

use super::{LinearStepper, Semigroup};

/// End of the small-τ branch and start of the large-τ branch.
const SMALL_TAU_MAX: f64 = 0.5;
const LARGE_TAU_MIN: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    #[serde(rename = "L")]
    L,
    #[serde(rename = "L_ss")]
    Lss,
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Generator::L => "L",
            Generator::Lss => "L_ss",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSettings {
    pub seeds: usize,
    pub base_seed: u64,
    /// Sorted probe times in `[0.01, 4]`.
    pub tau_grid: Vec<f64>,
    /// Shell thickness in units of the fundamental wavenumber `2π/L`.
    pub shell_width: f64,
    /// Number of inputs (broad packet first, then the lowest shells)
    /// continued into the large-τ branch.
    pub large_shells: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        let mut tau_grid = crate::profiles::log_spaced(0.01, 0.1, 8);
        tau_grid.extend([1.5, 2.0, 2.5, 3.0, 3.5, 4.0]);
        Self { seeds: 10, base_seed: 0x5eed, tau_grid, shell_width: 1.0, large_shells: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub generator: Generator,
    pub m: f64,
    pub k: f64,
    pub tau: f64,
    pub norm_ratio: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupProbeReport {
    pub generator: Generator,
    pub m: f64,
    pub k: f64,
    pub rows: Vec<ProbeRow>,
    /// Least-squares `e` in `ratio ≈ C τ^e` over the pooled small-τ rows.
    pub small_exponent: f64,
    pub prefactor: f64,
    pub seed_exponents: Vec<f64>,
    /// Least-squares `r` in `ratio ≈ C e^{rτ}` over the large-τ rows.
    pub large_rate: Option<f64>,
}

enum Input {
    Scalar(SpectralScalarField),
    Vector(SpectralVectorField),
}

fn shell_noise(grid: &PeriodicGrid, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> SpectralScalarField {
    let vals: Vec<f64> = (0..grid.physical_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = SpectralScalarField::from_physical(grid, &vals).expect("length");
    let shell = f.map_k2(|k2| if k2 >= lo * lo && k2 < hi * hi { 1.0 } else { 0.0 });
    let quarter = 0.125 * grid.box_side();
    let win = SpectralScalarField::from_fn(grid, |x, y, z| smooth_step(((x * x + y * y + z * z).sqrt() - quarter) / quarter));
    let w = win.to_physical();
    let s: Vec<f64> = shell.to_physical().iter().zip(&w).map(|(a, b)| a * b).collect();
    SpectralScalarField::from_physical_band(grid, &s).expect("length")
}

/// Smooth packet of width `3L/16` with a random offset, the broadest input
/// the box holds.
fn broad_packet(grid: &PeriodicGrid, rng: &mut ChaCha8Rng) -> SpectralScalarField {
    let w = 3.0 * grid.box_side() / 16.0;
    let c: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(-0.1..0.1) * w);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    SpectralScalarField::from_fn(grid, |x, y, z| {
        let r2 = (x - c[0]).powi(2) + (y - c[1]).powi(2) + (z - c[2]).powi(2);
        sign * (-r2 / (2.0 * w * w)).exp()
    })
    .dealiased()
}

/// Input `0` is the broad packet; input `i ≥ 1` lives on shell `i − 1`.
fn make_input(generator: Generator, grid: &PeriodicGrid, seed: u64, input: usize, width: f64, m: SobolevIndex) -> Input {
    let k0 = 2.0 * std::f64::consts::PI / grid.box_side();
    let lo = k0 * width * (input as f64 - 0.5);
    let hi = lo + k0 * width;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ input as u64);
    let draw = |rng: &mut ChaCha8Rng| if input == 0 { broad_packet(grid, rng) } else { shell_noise(grid, rng, lo, hi) };
    match generator {
        Generator::L => {
            let f = draw(&mut rng);
            let n = hs_norm(&f, m);
            Input::Scalar(f.scaled(1.0 / n))
        }
        Generator::Lss => {
            let v = if input == 0 {
                let psi = draw(&mut rng);
                let dir: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0));
                SpectralVectorField::from_components(dir.map(|d| psi.scaled(d))).curl()
            } else {
                let c = [0, 1, 2].map(|_| draw(&mut rng));
                leray_project(&SpectralVectorField::from_components(c))
            };
            let n = hs_norm(&v, m);
            Input::Vector(v.scaled(1.0 / n))
        }
    }
}

fn input_count(grid: &PeriodicGrid, width: f64) -> usize {
    // shells start at (i + ½)·width and must reach into the band corners
    let reach = 3f64.sqrt() * grid.band_limit() as f64;
    ((reach / width) - 0.5).floor().max(1.0) as usize + 1
}

/// Runs the probe for one `m` and several `k` on shared trajectories.
pub fn probe_smoothing_multi(
    stepper: &LinearStepper,
    generator: Generator,
    m: SobolevIndex,
    ks: &[SobolevIndex],
    settings: &ProbeSettings,
) -> Result<Vec<SemigroupProbeReport>> {
    if settings.seeds < 5 {
        return Err(ObssError::Statistics(format!("at least 5 seeds are required, got {}", settings.seeds)));
    }
    if ks.iter().any(|k| k.value() < m.value()) {
        return Err(ObssError::Config("probe requires k >= m".into()));
    }
    let taus = &settings.tau_grid;
    if taus.is_empty()
        || taus.windows(2).any(|w| w[1] <= w[0])
        || taus[0] < 0.01 - 1e-12
        || *taus.last().expect("non-empty") > 4.0 + 1e-12
    {
        return Err(ObssError::Config("tau grid must be increasing within [0.01, 4]".into()));
    }
    if !(settings.shell_width > 0.0) {
        return Err(ObssError::Config("shell width must be positive".into()));
    }
    let grid = stepper.grid();
    let inputs = input_count(grid, settings.shell_width);
    let needed_small = taus.iter().filter(|t| **t <= SMALL_TAU_MAX).count();
    // best[k][seed][tau]
    let mut best = vec![vec![vec![0.0f64; taus.len()]; settings.seeds]; ks.len()];
    for (si, seed) in (0..settings.seeds).map(|i| (i, settings.base_seed + i as u64)) {
        for input in 0..inputs {
            let go_large = input < settings.large_shells;
            let stop = if go_large { taus.len() } else { needed_small };
            let field = make_input(generator, grid, seed, input, settings.shell_width, m);
            let mut cur = field;
            let mut at = 0.0;
            for (ti, &tau) in taus.iter().enumerate().take(stop) {
                cur = match cur {
                    Input::Scalar(f) => Input::Scalar(stepper.apply(&f, tau - at)?),
                    Input::Vector(v) => Input::Vector(stepper.apply(&v, tau - at)?),
                };
                at = tau;
                for (ki, k) in ks.iter().enumerate() {
                    let r = match &cur {
                        Input::Scalar(f) => hs_norm(f, *k),
                        Input::Vector(v) => hs_norm(v, *k),
                    };
                    best[ki][si][ti] = best[ki][si][ti].max(r);
                }
            }
            log::debug!("probe seed {seed} input {input} done");
        }
    }
    let mut reports = Vec::with_capacity(ks.len());
    for (ki, k) in ks.iter().enumerate() {
        let mut rows = Vec::new();
        let (mut sx, mut sy, mut lx, mut ly) = (vec![], vec![], vec![], vec![]);
        let mut seed_exponents = Vec::new();
        for si in 0..settings.seeds {
            let (mut px, mut py) = (vec![], vec![]);
            for (ti, &tau) in taus.iter().enumerate() {
                let r = best[ki][si][ti];
                rows.push(ProbeRow {
                    generator,
                    m: m.value(),
                    k: k.value(),
                    tau,
                    norm_ratio: r,
                    seed: settings.base_seed + si as u64,
                });
                if tau <= SMALL_TAU_MAX {
                    px.push(tau.ln());
                    py.push(r.ln());
                } else if tau >= LARGE_TAU_MIN {
                    lx.push(tau);
                    ly.push(r.ln());
                }
            }
            if px.len() >= 2 {
                seed_exponents.push(linear_fit(&px, &py).0);
            }
            sx.extend(px);
            sy.extend(py);
        }
        if sx.len() < 2 {
            return Err(ObssError::Statistics("small-τ branch needs at least two τ values".into()));
        }
        let (small_exponent, intercept) = linear_fit(&sx, &sy);
        let large_rate = if lx.len() >= 2 && lx.iter().any(|x| *x != lx[0]) {
            Some(linear_fit(&lx, &ly).0)
        } else {
            None
        };
        reports.push(SemigroupProbeReport {
            generator,
            m: m.value(),
            k: k.value(),
            rows,
            small_exponent,
            prefactor: intercept.exp(),
            seed_exponents,
            large_rate,
        });
    }
    Ok(reports)
}

pub fn probe_smoothing(
    stepper: &LinearStepper,
    generator: Generator,
    m: SobolevIndex,
    k: SobolevIndex,
    settings: &ProbeSettings,
) -> Result<SemigroupProbeReport> {
    Ok(probe_smoothing_multi(stepper, generator, m, &[k], settings)?.remove(0))
}

/// CSV with columns `generator,m,k,tau,norm_ratio,seed`.
pub fn write_probe_csv(path: &Path, reports: &[SemigroupProbeReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ObssError::Format(e.to_string()))?;
    for r in reports {
        for row in &r.rows {
            w.serialize(row).map_err(|e| ObssError::Format(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}
