use num_complex::Complex64;

use super::field::{SpectralField, SpectralScalarField, SpectralVectorField};
use super::{Band, PeriodicGrid};
use crate::error::{ObssError, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `v̂ − k (k·v̂)/|k|²` on every nonzero mode; the mean is left alone.
pub fn leray_project(v: &SpectralVectorField) -> SpectralVectorField {
    let grid = v.grid().clone();
    let [a, b, c] = v.components();
    let (mut x, mut y, mut z) = (a.clone(), b.clone(), c.clone());
    {
        let (xc, yc, zc) = (x.coefficients_mut(), y.coefficients_mut(), z.coefficients_mut());
        for (i, k) in grid.kd().iter().enumerate() {
            let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if kk == 0.0 {
                continue;
            }
            let d = (xc[i] * k[0] + yc[i] * k[1] + zc[i] * k[2]) / kk;
            xc[i] -= d * k[0];
            yc[i] -= d * k[1];
            zc[i] -= d * k[2];
        }
    }
    let mut out = SpectralVectorField::from_components([x, y, z]);
    out.set_divergence_free_unchecked();
    out
}

/// Dealiased `u·∇θ`.
pub fn advect(u: &SpectralVectorField, theta: &SpectralScalarField) -> Result<SpectralScalarField> {
    u.grid().check_same(theta.grid())?;
    let grid = theta.grid();
    let band = grid.band();
    let fft = grid.fft();
    let th = theta.dealiased();
    let mut acc = vec![0.0; grid.physical_len()];
    for a in 0..3 {
        let ua = u.component(a).to_physical_band();
        let da = fft.inverse(th.derivative(a).coefficients(), band);
        for ((s, x), y) in acc.iter_mut().zip(&ua).zip(&da) {
            *s += x * y;
        }
    }
    SpectralScalarField::from_coefficients(grid, fft.forward(&acc, band))
}

/// Dealiased `(u·∇)v`, componentwise, without projection.
pub fn advect_vector(u: &SpectralVectorField, v: &SpectralVectorField) -> Result<SpectralVectorField> {
    u.grid().check_same(v.grid())?;
    let comps = [
        advect(u, v.component(0))?,
        advect(u, v.component(1))?,
        advect(u, v.component(2))?,
    ];
    Ok(SpectralVectorField::from_components(comps))
}

/// Fourier coefficients of the zero-mean periodic potential with `−ΔG = 4π(δ − 1/V)`,
/// i.e. the periodic realization of `1/|x|`.
pub(crate) fn gravity_kernel_coefficients(grid: &PeriodicGrid) -> Vec<Complex64> {
    let v = grid.volume();
    grid.k2()
        .iter()
        .map(|&k2| if k2 == 0.0 { ZERO } else { Complex64::new(4.0 * std::f64::consts::PI / (k2 * v), 0.0) })
        .collect()
}

/// The periodic potential `G_per` sampled on `grid`.
pub fn gravity_potential(grid: &PeriodicGrid) -> SpectralScalarField {
    SpectralScalarField::from_coefficients(grid, gravity_kernel_coefficients(grid)).expect("length")
}

fn index_of(j: i64, n: usize) -> usize {
    if j < 0 {
        (j + n as i64) as usize
    } else {
        j as usize
    }
}

/// Copies the dealiased band of `c` (on `src`) into the spectrum of `dst`.
fn pad(src: &PeriodicGrid, c: &[Complex64], dst: &PeriodicGrid) -> Vec<Complex64> {
    let jb = src.band_limit() as i64;
    let (ns, nd) = (src.points_per_axis(), dst.points_per_axis());
    let (hs, hd) = (src.half(), dst.half());
    let mut out = vec![ZERO; dst.spectral_len()];
    for jz in -jb..=jb {
        for jy in -jb..=jb {
            for jx in 0..=jb {
                let s = (index_of(jz, ns) * ns + index_of(jy, ns)) * hs + jx as usize;
                let d = (index_of(jz, nd) * nd + index_of(jy, nd)) * hd + jx as usize;
                out[d] = c[s];
            }
        }
    }
    out
}

/// Inverse of [`pad`]: keeps the modes of `dst`'s dealiased band.
fn unpad(src: &PeriodicGrid, c: &[Complex64], dst: &PeriodicGrid) -> Vec<Complex64> {
    let jb = dst.band_limit() as i64;
    let (ns, nd) = (src.points_per_axis(), dst.points_per_axis());
    let (hs, hd) = (src.half(), dst.half());
    let mut out = vec![ZERO; dst.spectral_len()];
    for jz in -jb..=jb {
        for jy in -jb..=jb {
            for jx in 0..=jb {
                let s = (index_of(jz, ns) * ns + index_of(jy, ns)) * hs + jx as usize;
                let d = (index_of(jz, nd) * nd + index_of(jy, nd)) * hd + jx as usize;
                out[d] = c[s];
            }
        }
    }
    out
}

/// `ℙ(θ ∇G_per)`, band-limited. Products are formed on an enlarged grid so the
/// in-band part equals the exact Fourier-series convolution.
pub fn gravity_gradient(theta: &SpectralScalarField) -> SpectralVectorField {
    let grid = theta.grid();
    let pg = grid.padded_gravity();
    let p = &pg.grid;
    let pband = Band::Limited(grid.band_limit());
    let th = p.fft().inverse(&pad(grid, theta.coefficients(), p), pband);
    let comps = [0, 1, 2].map(|a| {
        let prod: Vec<f64> = th.iter().zip(&pg.gradient[a]).map(|(x, g)| x * g).collect();
        let c = unpad(p, &p.fft().forward(&prod, pband), grid);
        SpectralScalarField::from_coefficients(grid, c).expect("length")
    });
    leray_project(&SpectralVectorField::from_components(comps))
}

/// `−ℙ(G_per ∇θ)`, which agrees with [`gravity_gradient`] because the
/// projection annihilates `∇(θG)`.
pub fn gravity_gradient_alt(theta: &SpectralScalarField) -> SpectralVectorField {
    let grid = theta.grid();
    let pg = grid.padded_gravity();
    let p = &pg.grid;
    let pband = Band::Limited(grid.band_limit());
    let padded = SpectralScalarField::from_coefficients(p, pad(grid, theta.coefficients(), p)).expect("length");
    let comps = [0, 1, 2].map(|a| {
        let d = p.fft().inverse(padded.derivative(a).coefficients(), pband);
        let prod: Vec<f64> = d.iter().zip(&pg.potential).map(|(x, g)| -x * g).collect();
        let c = unpad(p, &p.fft().forward(&prod, pband), grid);
        SpectralScalarField::from_coefficients(grid, c).expect("length")
    });
    leray_project(&SpectralVectorField::from_components(comps))
}

/// `‖θ/|ξ|‖_{L²} / ‖∇θ‖_{L²}` with `|ξ|` measured from the box center and
/// floored at half a grid cell.
pub fn hardy_quotient(theta: &SpectralScalarField) -> Result<f64> {
    let grid = theta.grid();
    let grad = theta.h1_seminorm();
    let l2 = theta.l2_norm();
    if !(grad > 1e-14 * l2) || grad == 0.0 {
        return Err(ObssError::UndefinedQuotient("gradient of θ vanishes".into()));
    }
    let h = grid.spacing();
    let floor = 0.5 * h;
    let vals = theta.to_physical();
    let r = grid.radii();
    let s: f64 = vals.iter().zip(&r).map(|(v, r)| (v / r.max(floor)).powi(2)).sum();
    Ok((s * h.powi(3)).sqrt() / grad)
}

/// Cutoff used to make `ξ·∇` periodic: `χ = 1` for `r ≤ inner`, `χ = 0` for
/// `r ≥ outer`, C^∞ in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftCutoff {
    pub inner: f64,
    pub outer: f64,
}

impl DriftCutoff {
    /// Flat out to `3R`, rolled off halfway to the box face.
    pub fn for_support(grid: &PeriodicGrid, support_radius: f64) -> Self {
        let half = 0.5 * grid.box_side();
        let inner = (3.0 * support_radius).min(0.75 * half);
        Self { inner, outer: 0.5 * (inner + half) }
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= self.inner {
            1.0
        } else if r >= self.outer {
            0.0
        } else {
            let x = (r - self.inner) / (self.outer - self.inner);
            let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
            f(1.0 - x) / (f(1.0 - x) + f(x))
        }
    }
}

/// `½(1 + ξ·∇)f` with the cut-off coordinate `χ(|ξ|)ξ`; dealiased.
pub fn selfsimilar_drift(f: &SpectralScalarField, cutoff: DriftCutoff) -> SpectralScalarField {
    let grid = f.grid();
    let band = grid.band();
    let fft = grid.fft();
    let fd = f.dealiased();
    let xs = grid.coordinates();
    let n = grid.points_per_axis();
    let mut acc = vec![0.0; grid.physical_len()];
    let derivs = [0, 1, 2].map(|a| fft.inverse(fd.derivative(a).coefficients(), band));
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let i = (z * n + y) * n + x;
                let p = [xs[x], xs[y], xs[z]];
                let chi = cutoff.value((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
                if chi != 0.0 {
                    acc[i] = chi * (p[0] * derivs[0][i] + p[1] * derivs[1][i] + p[2] * derivs[2][i]);
                }
            }
        }
    }
    let mut out = SpectralScalarField::from_coefficients(grid, fft.forward(&acc, band)).expect("length");
    out.axpy(1.0, &fd);
    out.scale(0.5);
    out
}

/// Evaluates the band-limited part of `f` at the tensor-product points
/// `pts × pts × pts` (same abscissae on each axis). Points outside the source
/// box evaluate to zero.
fn eval_separable(f: &SpectralScalarField, pts: &[f64]) -> Vec<f64> {
    let grid = f.grid();
    let n = grid.points_per_axis();
    let nh = grid.half();
    let jb = grid.band_limit() as i64;
    let nj = (2 * jb + 1) as usize;
    let half = 0.5 * grid.box_side();
    let m = pts.len();
    let tol = 1e-12 * half;
    // e[p][jj] = exp(i k_j (x_p + L/2)), j = jj - jb
    let mut e = vec![ZERO; m * nj];
    for (p, &x) in pts.iter().enumerate() {
        if x.abs() > half + tol {
            continue;
        }
        for jj in 0..nj {
            let j = jj as i64 - jb;
            let ph = 2.0 * std::f64::consts::PI * j as f64 * (x + half) / grid.box_side();
            e[p * nj + jj] = Complex64::from_polar(1.0, ph);
        }
    }
    let c = f.coefficients();
    let nkx = jb as usize + 1;
    // z pass: a[pz][jy][kx]
    let mut a = vec![ZERO; m * nj * nkx];
    for jy in 0..nj {
        let iy = index_of(jy as i64 - jb, n);
        for jz in 0..nj {
            let iz = index_of(jz as i64 - jb, n);
            let base = (iz * n + iy) * nh;
            let src = &c[base..base + nkx];
            if src.iter().all(|v| *v == ZERO) {
                continue;
            }
            for pz in 0..m {
                let w = e[pz * nj + jz];
                if w == ZERO {
                    continue;
                }
                let dst = &mut a[(pz * nj + jy) * nkx..(pz * nj + jy + 1) * nkx];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    // y pass: b[pz][py][kx]
    let mut b = vec![ZERO; m * m * nkx];
    for pz in 0..m {
        for jy in 0..nj {
            let src = &a[(pz * nj + jy) * nkx..(pz * nj + jy + 1) * nkx];
            for py in 0..m {
                let w = e[py * nj + jy];
                if w == ZERO {
                    continue;
                }
                let dst = &mut b[(pz * m + py) * nkx..(pz * m + py + 1) * nkx];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    // x pass, folding the conjugate half
    let mut out = vec![0.0; m * m * m];
    for zy in 0..m * m {
        let src = &b[zy * nkx..(zy + 1) * nkx];
        for px in 0..m {
            let mut s = 0.0;
            for (kx, v) in src.iter().enumerate() {
                let w = e[px * nj + (kx as i64 + jb) as usize];
                let t = (v * w).re;
                s += if kx == 0 { t } else { 2.0 * t };
            }
            out[zy * m + px] = s;
        }
    }
    out
}

/// `g(x) = amplitude · f(s·x)` on the same grid, band-limited. Returns the
/// fraction of `f`'s L² mass that lay outside the pulled-back box and was
/// dropped.
pub fn dilate(f: &SpectralScalarField, s: f64, amplitude: f64) -> (SpectralScalarField, f64) {
    let grid = f.grid();
    let pts: Vec<f64> = grid.coordinates().iter().map(|x| s * x).collect();
    let vals = eval_separable(f, &pts);
    let mut out = SpectralScalarField::from_physical_band(grid, &vals).expect("length");
    out.scale(amplitude);
    let loss = if s > 1.0 { mass_outside(f, 0.5 * grid.box_side() / s) } else { 0.0 };
    if loss > 0.0 {
        log::debug!("dilation by {s:.4} dropped {loss:.3e} of the L² mass");
    }
    (out, loss)
}

fn mass_outside(f: &SpectralScalarField, half: f64) -> f64 {
    let grid = f.grid();
    let vals = f.to_physical();
    let xs = grid.coordinates();
    let n = grid.points_per_axis();
    let (mut tot, mut out) = (0.0, 0.0);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let v = vals[(z * n + y) * n + x].powi(2);
                tot += v;
                if xs[x].abs() > half || xs[y].abs() > half || xs[z].abs() > half {
                    out += v;
                }
            }
        }
    }
    if tot == 0.0 {
        0.0
    } else {
        out / tot
    }
}

/// Spectral interpolation of `f` onto `target`, which must share the box
/// center. Target points outside the source box are set to zero.
pub fn resample(f: &SpectralScalarField, target: &PeriodicGrid) -> SpectralScalarField {
    let vals = eval_separable(f, &target.coordinates());
    SpectralScalarField::from_physical_band(target, &vals).expect("length")
}

/// Physical flux divergence helper shared by the steppers:
/// returns the band-limited `∂_i(a_i b)` for physical `a_i`, `b`.
pub fn divergence_form_flux(grid: &PeriodicGrid, a: [&[f64]; 3], b: &[f64]) -> SpectralScalarField {
    let band = grid.band();
    let fft = grid.fft();
    let mut out = vec![ZERO; grid.spectral_len()];
    for (axis, ai) in a.iter().enumerate() {
        let prod: Vec<f64> = ai.iter().zip(b).map(|(x, y)| x * y).collect();
        let c = fft.forward(&prod, band);
        for ((o, v), k) in out.iter_mut().zip(&c).zip(grid.kd()) {
            *o += v * Complex64::new(0.0, k[axis]);
        }
    }
    SpectralScalarField::from_coefficients(grid, out).expect("length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralField;

    fn bump(grid: &PeriodicGrid, w: f64, c: [f64; 3]) -> SpectralScalarField {
        SpectralScalarField::from_fn(grid, |x, y, z| {
            (-((x - c[0]).powi(2) + (y - c[1]).powi(2) + (z - c[2]).powi(2)) / (w * w)).exp()
        })
    }

    #[test]
    fn projection_kills_gradients_and_is_idempotent() {
        let g = PeriodicGrid::new(8.0, 16).unwrap();
        let q = bump(&g, 1.0, [0.3, -0.2, 0.1]);
        let p = leray_project(&q.gradient());
        assert!(p.l2_norm() < 1e-14 * q.gradient().l2_norm());
        let v = SpectralVectorField::from_fn(&g, |x, y, z| [(-x * x - y * y).exp(), z.sin() * 0.0 + (-z * z).exp(), x * y * (-(x * x + y * y + z * z)).exp()]);
        let p1 = leray_project(&v);
        let p2 = leray_project(&p1);
        assert!(p1.sub(&p2).l2_norm() < 1e-14 * p1.l2_norm());
    }

    #[test]
    fn both_gravity_forms_agree() {
        let g = PeriodicGrid::new(8.0, 16).unwrap();
        let th = bump(&g, 1.2, [0.4, 0.0, -0.3]);
        let a = gravity_gradient(&th);
        let b = gravity_gradient_alt(&th);
        assert!(a.sub(&b).l2_norm() < 1e-10 * a.l2_norm(), "{}", a.sub(&b).l2_norm() / a.l2_norm());
    }

    #[test]
    fn dilation_of_gaussian() {
        let g = PeriodicGrid::new(16.0, 32).unwrap();
        let f = bump(&g, 1.5, [0.0; 3]);
        let (d, loss) = dilate(&f, 1.3, 2.0);
        assert!(loss < 1e-12);
        let exact = SpectralScalarField::from_fn(&g, |x, y, z| 2.0 * (-(1.69 * (x * x + y * y + z * z)) / 2.25).exp());
        let e = d.sub(&exact.dealiased()).l2_norm() / exact.l2_norm();
        // leakage of the non-lattice frequencies s·k
        assert!(e < 1e-5, "{e}");
        let (same, _) = dilate(&f.dealiased(), 1.0, 1.0);
        assert!(same.sub(&f.dealiased()).l2_norm() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn drift_on_gaussian() {
        // ½(1 + ξ·∇) e^{-ρ²} = ½(1 − 2ρ²) e^{-ρ²}, ρ = r/w
        let g = PeriodicGrid::new(16.0, 48).unwrap();
        let f = bump(&g, 1.5, [0.0; 3]);
        let d = selfsimilar_drift(&f, DriftCutoff::for_support(&g, 2.0));
        let exact = SpectralScalarField::from_fn(&g, |x, y, z| {
            let r2 = (x * x + y * y + z * z) / 2.25;
            0.5 * (1.0 - 2.0 * r2) * (-r2).exp()
        });
        let e = d.sub(&exact.dealiased()).l2_norm() / exact.l2_norm();
        // the Gaussian tail beyond the cutoff radius is ~1e-6
        assert!(e < 2e-6, "{e}");
    }
}
