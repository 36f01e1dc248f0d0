use num_complex::Complex64;

use super::{Band, PeriodicGrid};
use crate::error::{ObssError, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Sobolev regularity index `s ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(s: f64) -> Result<Self> {
        if s >= 0.0 && s.is_finite() {
            Ok(Self(s))
        } else {
            Err(ObssError::Config(format!("Sobolev index must be >= 0, got {s}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Common spectral quadratic forms shared by scalar and vector fields.
pub trait SpectralField {
    fn grid(&self) -> &PeriodicGrid;

    /// `Σ_k w(|k|²) |û(k)|²` times the box volume, summed over components.
    fn weighted_sq<W: Fn(f64) -> f64>(&self, w: W) -> f64;

    fn l2_norm(&self) -> f64 {
        self.weighted_sq(|_| 1.0).sqrt()
    }

    /// `‖∇u‖_{L²}`.
    fn h1_seminorm(&self) -> f64 {
        self.weighted_sq(|k2| k2).sqrt()
    }
}

/// `(Σ_k (1+|k|²)^s |û(k)|²)^{1/2}` with the volume factor that makes `s = 0`
/// the physical L² norm.
pub fn hs_norm<F: SpectralField>(field: &F, s: SobolevIndex) -> f64 {
    let s = s.value();
    if s == 0.0 {
        return field.l2_norm();
    }
    field.weighted_sq(|k2| (1.0 + k2).powf(s)).sqrt()
}

#[derive(Clone, Debug)]
pub struct SpectralScalarField {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralScalarField {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self { grid: grid.clone(), coeffs: vec![ZERO; grid.spectral_len()] }
    }

    pub fn from_coefficients(grid: &PeriodicGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.spectral_len() {
            return Err(ObssError::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.spectral_len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid: grid.clone(), coeffs })
    }

    /// All modes resolved by the grid are kept.
    pub fn from_physical(grid: &PeriodicGrid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.physical_len() {
            return Err(ObssError::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.physical_len(),
                values.len()
            )));
        }
        Ok(Self { grid: grid.clone(), coeffs: grid.fft().forward(values, Band::Full) })
    }

    /// Band-limited interpolant of the samples (dealiased).
    pub fn from_physical_band(grid: &PeriodicGrid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.physical_len() {
            return Err(ObssError::GridMismatch("sample count".into()));
        }
        Ok(Self { grid: grid.clone(), coeffs: grid.fft().forward(values, grid.band()) })
    }

    pub fn from_fn<F: Fn(f64, f64, f64) -> f64>(grid: &PeriodicGrid, f: F) -> Self {
        let v = grid.sample(f);
        Self { grid: grid.clone(), coeffs: grid.fft().forward(&v, Band::Full) }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn to_physical(&self) -> Vec<f64> {
        self.grid.fft().inverse(&self.coeffs, Band::Full)
    }

    /// Physical values of the dealiased part only.
    pub fn to_physical_band(&self) -> Vec<f64> {
        let d = self.dealiased();
        self.grid.fft().inverse(&d.coeffs, self.grid.band())
    }

    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        for (c, &b) in out.coeffs.iter_mut().zip(self.grid.in_band()) {
            if !b {
                *c = ZERO;
            }
        }
        out
    }

    /// Fraction of L² energy outside the dealiased band.
    pub fn out_of_band_fraction(&self) -> f64 {
        let total = self.weighted_sq(|_| 1.0);
        if total == 0.0 {
            return 0.0;
        }
        let inside = self.dealiased().weighted_sq(|_| 1.0);
        ((total - inside) / total).max(0.0)
    }

    /// Applies a real multiplier depending on `|k|²`.
    pub fn map_k2<M: Fn(f64) -> f64>(&self, m: M) -> Self {
        let mut out = self.clone();
        for (c, &k2) in out.coeffs.iter_mut().zip(self.grid.k2()) {
            *c *= m(k2);
        }
        out
    }

    pub fn derivative(&self, axis: usize) -> Self {
        assert!(axis < 3);
        let mut out = self.clone();
        for (c, k) in out.coeffs.iter_mut().zip(self.grid.kd()) {
            *c *= Complex64::new(0.0, k[axis]);
        }
        out
    }

    pub fn gradient(&self) -> SpectralVectorField {
        SpectralVectorField::from_components([self.derivative(0), self.derivative(1), self.derivative(2)])
    }

    pub fn laplacian(&self) -> Self {
        self.map_k2(|k2| -k2)
    }

    /// Exact heat flow `e^{sΔ}`.
    pub fn heat(&self, s: f64) -> Self {
        self.map_k2(|k2| (-k2 * s).exp())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= alpha);
    }

    /// `self += alpha · other`. Panics if the grids differ.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert!(self.grid == other.grid, "grid mismatch in axpy");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Real L² inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        assert!(self.grid == other.grid, "grid mismatch in inner product");
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(self.grid.weights())
            .map(|((a, b), w)| w * (a.re * b.re + a.im * b.im))
            .sum();
        s * self.grid.volume()
    }

    /// Mean value over the box.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Same coefficients read on a box of a different side.
    pub fn relabeled(&self, grid: &PeriodicGrid) -> Result<Self> {
        if grid.points_per_axis() != self.grid.points_per_axis() {
            return Err(ObssError::GridMismatch("relabel requires equal resolution".into()));
        }
        Ok(Self { grid: grid.clone(), coeffs: self.coeffs.clone() })
    }
}

impl SpectralField for SpectralScalarField {
    fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    fn weighted_sq<W: Fn(f64) -> f64>(&self, w: W) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .zip(self.grid.k2())
            .zip(self.grid.weights())
            .map(|((c, &k2), &m)| m * w(k2) * c.norm_sqr())
            .sum();
        s * self.grid.volume()
    }
}

#[derive(Clone, Debug)]
pub struct SpectralVectorField {
    comps: [SpectralScalarField; 3],
    divergence_free: bool,
}

impl SpectralVectorField {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        let z = SpectralScalarField::zeros(grid);
        Self { comps: [z.clone(), z.clone(), z], divergence_free: true }
    }

    /// Panics if the components live on different grids.
    pub fn from_components(comps: [SpectralScalarField; 3]) -> Self {
        assert!(comps[0].grid == comps[1].grid && comps[0].grid == comps[2].grid);
        Self { comps, divergence_free: false }
    }

    pub fn from_physical(grid: &PeriodicGrid, values: [&[f64]; 3]) -> Result<Self> {
        Ok(Self::from_components([
            SpectralScalarField::from_physical(grid, values[0])?,
            SpectralScalarField::from_physical(grid, values[1])?,
            SpectralScalarField::from_physical(grid, values[2])?,
        ]))
    }

    pub fn from_fn<F: Fn(f64, f64, f64) -> [f64; 3]>(grid: &PeriodicGrid, f: F) -> Self {
        let comps = [0, 1, 2].map(|a| SpectralScalarField::from_fn(grid, |x, y, z| f(x, y, z)[a]));
        Self::from_components(comps)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.comps[0].grid
    }

    pub fn component(&self, axis: usize) -> &SpectralScalarField {
        &self.comps[axis]
    }

    pub fn components(&self) -> &[SpectralScalarField; 3] {
        &self.comps
    }

    /// Mutable access clears the divergence-free flag.
    pub fn components_mut(&mut self) -> &mut [SpectralScalarField; 3] {
        self.divergence_free = false;
        &mut self.comps
    }

    pub fn into_components(self) -> [SpectralScalarField; 3] {
        self.comps
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    /// Marks the field divergence free after checking it spectrally.
    pub fn flag_divergence_free(mut self, rel_tol: f64) -> Result<Self> {
        let d = self.divergence_defect();
        if d > rel_tol {
            return Err(ObssError::Numerical(format!(
                "field not divergence free: relative defect {d:.3e}"
            )));
        }
        self.divergence_free = true;
        Ok(self)
    }

    pub(crate) fn set_divergence_free_unchecked(&mut self) {
        self.divergence_free = true;
    }

    /// `max_k |k·û(k)| / (|k| ‖û‖)` style defect, relative to the coefficient norm.
    pub fn divergence_defect(&self) -> f64 {
        let g = self.grid();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (k, &w)) in g.kd().iter().zip(g.weights()).enumerate() {
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            let c = [self.comps[0].coeffs[i], self.comps[1].coeffs[i], self.comps[2].coeffs[i]];
            den += w * (c[0].norm_sqr() + c[1].norm_sqr() + c[2].norm_sqr());
            if kn > 0.0 {
                let d = (c[0] * k[0] + c[1] * k[1] + c[2] * k[2]) / kn;
                num += w * d.norm_sqr();
            }
        }
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }

    pub fn to_physical(&self) -> [Vec<f64>; 3] {
        [self.comps[0].to_physical(), self.comps[1].to_physical(), self.comps[2].to_physical()]
    }

    pub fn to_physical_band(&self) -> [Vec<f64>; 3] {
        [
            self.comps[0].to_physical_band(),
            self.comps[1].to_physical_band(),
            self.comps[2].to_physical_band(),
        ]
    }

    pub fn dealiased(&self) -> Self {
        Self {
            comps: [self.comps[0].dealiased(), self.comps[1].dealiased(), self.comps[2].dealiased()],
            divergence_free: self.divergence_free,
        }
    }

    pub fn divergence(&self) -> SpectralScalarField {
        let mut d = self.comps[0].derivative(0);
        d.axpy(1.0, &self.comps[1].derivative(1));
        d.axpy(1.0, &self.comps[2].derivative(2));
        d
    }

    pub fn curl(&self) -> Self {
        let c = &self.comps;
        let x = c[2].derivative(1).sub(&c[1].derivative(2));
        let y = c[0].derivative(2).sub(&c[2].derivative(0));
        let z = c[1].derivative(0).sub(&c[0].derivative(1));
        let mut out = Self::from_components([x, y, z]);
        out.divergence_free = true;
        out
    }

    pub fn map_k2<M: Fn(f64) -> f64 + Copy>(&self, m: M) -> Self {
        Self {
            comps: [self.comps[0].map_k2(m), self.comps[1].map_k2(m), self.comps[2].map_k2(m)],
            divergence_free: self.divergence_free,
        }
    }

    pub fn laplacian(&self) -> Self {
        self.map_k2(|k2| -k2)
    }

    pub fn heat(&self, s: f64) -> Self {
        self.map_k2(move |k2| (-k2 * s).exp())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        self.comps.iter_mut().for_each(|c| c.scale(alpha));
    }

    /// `self += alpha · other`; the divergence-free flag survives only if both carry it.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.axpy(alpha, b);
        }
        self.divergence_free &= other.divergence_free;
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn inner(&self, other: &Self) -> f64 {
        (0..3).map(|a| self.comps[a].inner(&other.comps[a])).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }

    pub fn relabeled(&self, grid: &PeriodicGrid) -> Result<Self> {
        Ok(Self {
            comps: [
                self.comps[0].relabeled(grid)?,
                self.comps[1].relabeled(grid)?,
                self.comps[2].relabeled(grid)?,
            ],
            divergence_free: self.divergence_free,
        })
    }
}

impl SpectralField for SpectralVectorField {
    fn grid(&self) -> &PeriodicGrid {
        self.comps[0].grid()
    }

    fn weighted_sq<W: Fn(f64) -> f64>(&self, w: W) -> f64 {
        self.comps.iter().map(|c| c.weighted_sq(&w)).sum()
    }
}

/// Vector-space operations shared by scalar and vector fields, used by code
/// that is generic over the field kind (semigroups, Duhamel sums).
pub trait LinearField: Clone + SpectralField {
    fn zeros_like(&self) -> Self;
    fn axpy(&mut self, alpha: f64, other: &Self);
    fn scale(&mut self, alpha: f64);
    fn inner(&self, other: &Self) -> f64;
    fn dealiased(&self) -> Self;
}

impl LinearField for SpectralScalarField {
    fn zeros_like(&self) -> Self {
        Self::zeros(&self.grid)
    }
    fn axpy(&mut self, alpha: f64, other: &Self) {
        SpectralScalarField::axpy(self, alpha, other)
    }
    fn scale(&mut self, alpha: f64) {
        SpectralScalarField::scale(self, alpha)
    }
    fn inner(&self, other: &Self) -> f64 {
        SpectralScalarField::inner(self, other)
    }
    fn dealiased(&self) -> Self {
        SpectralScalarField::dealiased(self)
    }
}

impl LinearField for SpectralVectorField {
    fn zeros_like(&self) -> Self {
        Self::zeros(self.grid())
    }
    fn axpy(&mut self, alpha: f64, other: &Self) {
        SpectralVectorField::axpy(self, alpha, other)
    }
    fn scale(&mut self, alpha: f64) {
        SpectralVectorField::scale(self, alpha)
    }
    fn inner(&self, other: &Self) -> f64 {
        SpectralVectorField::inner(self, other)
    }
    fn dealiased(&self) -> Self {
        SpectralVectorField::dealiased(self)
    }
}

/// Bitwise equality of the coefficients on equal grids.
impl PartialEq for SpectralScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.coeffs == other.coeffs
    }
}

impl PartialEq for SpectralVectorField {
    fn eq(&self, other: &Self) -> bool {
        self.comps == other.comps
    }
}
