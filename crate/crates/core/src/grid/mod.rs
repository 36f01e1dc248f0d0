//! Periodic-box pseudo-spectral field algebra.
//!
//! The box is `[-L/2, L/2]³` sampled at `x_i = -L/2 + i·h`, `h = L/n`, so the
//! origin sits on grid point `n/2` of every axis.

mod fft;
mod field;
mod ops;
mod snapshot;

use std::fmt;
use std::sync::{Arc, OnceLock};

pub use fft::{Band, Fft3};
pub use field::{hs_norm, LinearField, SobolevIndex, SpectralField, SpectralScalarField, SpectralVectorField};
pub use ops::{
    advect, advect_vector, dilate, divergence_form_flux, gravity_gradient, gravity_gradient_alt,
    gravity_potential, hardy_quotient, leray_project, resample, selfsimilar_drift, DriftCutoff,
};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot};

use crate::error::{ObssError, Result};

pub const DEFAULT_DEALIAS: f64 = 2.0 / 3.0;

#[derive(Clone)]
pub struct PeriodicGrid {
    inner: Arc<GridInner>,
}

struct GridInner {
    box_side: f64,
    n: usize,
    dealias_fraction: f64,
    jmax: usize,
    fft: Arc<Fft3>,
    /// Derivative wavenumbers per spectral index (Nyquist entries zeroed).
    kd: Vec<[f64; 3]>,
    /// |k|² per spectral index with the Nyquist index taken as -n/2.
    k2: Vec<f64>,
    /// Half-spectrum multiplicity: 1 on the kx = 0 and kx = n/2 planes, else 2.
    weight: Vec<f64>,
    in_band: Vec<bool>,
    padded: OnceLock<PaddedGravity>,
}

/// Gravity kernel sampled on an enlarged grid so that products of band-limited
/// fields with the kernel are alias free in the band.
pub(crate) struct PaddedGravity {
    pub grid: PeriodicGrid,
    pub potential: Vec<f64>,
    pub gradient: [Vec<f64>; 3],
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("box_side", &self.inner.box_side)
            .field("n", &self.inner.n)
            .field("dealias_fraction", &self.inner.dealias_fraction)
            .finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n
                && self.inner.box_side == other.inner.box_side
                && self.inner.dealias_fraction == other.inner.dealias_fraction)
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl PeriodicGrid {
    pub fn new(box_side: f64, n: usize) -> Result<Self> {
        Self::with_dealias(box_side, n, DEFAULT_DEALIAS)
    }

    pub fn with_dealias(box_side: f64, n: usize, dealias_fraction: f64) -> Result<Self> {
        if n < 16 || !n.is_multiple_of(2) {
            return Err(ObssError::Config(format!(
                "points_per_axis must be even and >= 16, got {n}"
            )));
        }
        Self::build(box_side, n, dealias_fraction, Arc::new(Fft3::new(n)))
    }

    fn build(box_side: f64, n: usize, dealias_fraction: f64, fft: Arc<Fft3>) -> Result<Self> {
        if !(box_side > 0.0 && box_side.is_finite()) {
            return Err(ObssError::Config(format!("box_side must be positive, got {box_side}")));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(ObssError::Config(format!(
                "dealias_fraction must lie in (0, 1], got {dealias_fraction}"
            )));
        }
        // strictly inside frac·n/2 so that 2/3 keeps 3·jmax < n for every n
        let jmax = ((dealias_fraction * n as f64 / 2.0) - 1e-9).floor().max(0.0) as usize;
        let nh = n / 2 + 1;
        let len = n * n * nh;
        let two_pi_l = 2.0 * std::f64::consts::PI / box_side;
        let mut kd = Vec::with_capacity(len);
        let mut k2 = Vec::with_capacity(len);
        let mut weight = Vec::with_capacity(len);
        let mut in_band = Vec::with_capacity(len);
        for kz in 0..n {
            let jz = signed_index(kz, n);
            for ky in 0..n {
                let jy = signed_index(ky, n);
                for kx in 0..nh {
                    let jx = signed_index(kx, n);
                    let full = [jx as f64 * two_pi_l, jy as f64 * two_pi_l, jz as f64 * two_pi_l];
                    let d = |j: i64, v: f64| if j == -(n as i64) / 2 { 0.0 } else { v };
                    kd.push([d(jx, full[0]), d(jy, full[1]), d(jz, full[2])]);
                    k2.push(full[0] * full[0] + full[1] * full[1] + full[2] * full[2]);
                    weight.push(if kx == 0 || kx == n / 2 { 1.0 } else { 2.0 });
                    let j = jmax as i64;
                    in_band.push(jx.abs() <= j && jy.abs() <= j && jz.abs() <= j);
                }
            }
        }
        Ok(Self {
            inner: Arc::new(GridInner {
                box_side,
                n,
                dealias_fraction,
                jmax,
                fft,
                kd,
                k2,
                weight,
                in_band,
                padded: OnceLock::new(),
            }),
        })
    }

    /// Same sampling, different box side; transform plans are shared.
    pub fn relabeled(&self, box_side: f64) -> Result<Self> {
        if box_side == self.inner.box_side {
            return Ok(self.clone());
        }
        Self::build(box_side, self.inner.n, self.inner.dealias_fraction, self.inner.fft.clone())
    }

    pub fn box_side(&self) -> f64 {
        self.inner.box_side
    }

    pub fn points_per_axis(&self) -> usize {
        self.inner.n
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.inner.dealias_fraction
    }

    /// Largest |j| kept on each axis by the dealiasing filter.
    pub fn band_limit(&self) -> usize {
        self.inner.jmax
    }

    pub fn band(&self) -> Band {
        Band::Limited(self.inner.jmax)
    }

    pub fn spacing(&self) -> f64 {
        self.inner.box_side / self.inner.n as f64
    }

    pub fn volume(&self) -> f64 {
        self.inner.box_side.powi(3)
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.inner.box_side + i as f64 * self.spacing()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.inner.n).map(|i| self.coordinate(i)).collect()
    }

    /// Wavenumber `2π j / L` of axis index `i`, with `j ∈ [-n/2, n/2)`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * signed_index(i, self.inner.n) as f64 / self.inner.box_side
    }

    pub fn physical_len(&self) -> usize {
        self.inner.n.pow(3)
    }

    pub fn spectral_len(&self) -> usize {
        self.inner.fft.spectral_len()
    }

    pub fn half(&self) -> usize {
        self.inner.n / 2 + 1
    }

    pub fn fft(&self) -> &Fft3 {
        &self.inner.fft
    }

    pub fn kd(&self) -> &[[f64; 3]] {
        &self.inner.kd
    }

    pub fn k2(&self) -> &[f64] {
        &self.inner.k2
    }

    pub fn weights(&self) -> &[f64] {
        &self.inner.weight
    }

    pub fn in_band(&self) -> &[bool] {
        &self.inner.in_band
    }

    /// Evaluates `f(x, y, z)` at every grid point in storage order.
    pub fn sample<F: Fn(f64, f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        let n = self.inner.n;
        let xs = self.coordinates();
        let mut out = Vec::with_capacity(n * n * n);
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    out.push(f(xs[x], xs[y], xs[z]));
                }
            }
        }
        out
    }

    /// Distance of every grid point from the box center.
    pub fn radii(&self) -> Vec<f64> {
        self.sample(|x, y, z| (x * x + y * y + z * z).sqrt())
    }

    pub fn check_same(&self, other: &PeriodicGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(ObssError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    pub(crate) fn padded_gravity(&self) -> &PaddedGravity {
        self.inner.padded.get_or_init(|| {
            let np = (4 * self.inner.jmax + 2).max(16);
            let np = np + np % 2;
            let pg = PeriodicGrid::with_dealias(self.inner.box_side, np, 1.0)
                .expect("padded grid parameters are valid");
            let potential_hat = ops::gravity_kernel_coefficients(&pg);
            let potential = pg.fft().inverse(&potential_hat, Band::Full);
            let gradient = [0, 1, 2].map(|a| {
                let c: Vec<_> = potential_hat
                    .iter()
                    .zip(pg.kd())
                    .map(|(c, k)| c * num_complex::Complex64::new(0.0, k[a]))
                    .collect();
                pg.fft().inverse(&c, Band::Full)
            });
            PaddedGravity { grid: pg, potential, gradient }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(PeriodicGrid::new(1.0, 15).is_err());
        assert!(PeriodicGrid::new(1.0, 8).is_err());
        assert!(PeriodicGrid::new(-1.0, 16).is_err());
        assert!(PeriodicGrid::new(1.0, 16).is_ok());
    }

    #[test]
    fn band_limits() {
        assert_eq!(PeriodicGrid::new(1.0, 32).unwrap().band_limit(), 10);
        assert_eq!(PeriodicGrid::new(1.0, 16).unwrap().band_limit(), 5);
        assert_eq!(PeriodicGrid::new(1.0, 24).unwrap().band_limit(), 7);
    }

    #[test]
    fn wavenumbers_and_coordinates() {
        let g = PeriodicGrid::new(16.0, 16).unwrap();
        let k = 2.0 * std::f64::consts::PI / 16.0;
        assert!((g.wavenumber(3) - 3.0 * k).abs() < 1e-15);
        assert!((g.wavenumber(8) + 8.0 * k).abs() < 1e-15);
        assert!((g.wavenumber(15) + k).abs() < 1e-15);
        assert_eq!(g.coordinate(8), 0.0);
        assert_eq!(g.coordinate(0), -8.0);
    }
}
