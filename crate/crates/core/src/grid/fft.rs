//! Three-dimensional real-to-complex transforms on an `n³` periodic grid.
//!
//! Physical arrays are stored x-fastest: `(z * n + y) * n + x`.
//! Spectral arrays use the half-complex layout `(kz * n + ky) * (n/2 + 1) + kx`.
//! Spectral coefficients are normalized so that `u(x_i) = Σ_k c_k e^{2πi k·i/n}`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

/// Which part of the spectrum a transform has to produce or may assume nonzero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    /// Every mode.
    Full,
    /// Only modes with `|j| <= jmax` on every axis (the dealiased band).
    Limited(usize),
}

pub struct Fft3 {
    n: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        Self {
            n,
            r2c: real.plan_fft_forward(n),
            c2r: real.plan_fft_inverse(n),
            fwd: cplx.plan_fft_forward(n),
            inv: cplx.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn spectral_len(&self) -> usize {
        self.n * self.n * self.half()
    }

    fn index_in_band(&self, i: usize, band: Band) -> bool {
        match band {
            Band::Full => true,
            Band::Limited(jmax) => {
                let j = if i < self.n / 2 { i } else { self.n - i };
                j <= jmax && !(self.n.is_multiple_of(2) && i == self.n / 2 && jmax < self.n / 2)
            }
        }
    }

    fn kx_limit(&self, band: Band) -> usize {
        match band {
            Band::Full => self.half(),
            Band::Limited(jmax) => (jmax + 1).min(self.half()),
        }
    }

    /// Forward transform. With `Band::Limited` only in-band coefficients are
    /// computed; the rest of the output is zero.
    pub fn forward(&self, phys: &[f64], band: Band) -> Vec<Complex64> {
        let n = self.n;
        let nh = self.half();
        assert_eq!(phys.len(), n * n * n);
        let mut spec = vec![Complex64::new(0.0, 0.0); self.spectral_len()];

        let mut row_in = self.r2c.make_input_vec();
        let mut row_out = self.r2c.make_output_vec();
        let mut scratch = self.r2c.make_scratch_vec();
        for zy in 0..n * n {
            row_in.copy_from_slice(&phys[zy * n..(zy + 1) * n]);
            self.r2c
                .process_with_scratch(&mut row_in, &mut row_out, &mut scratch)
                .expect("r2c length");
            spec[zy * nh..(zy + 1) * nh].copy_from_slice(&row_out);
        }

        let kx_lim = self.kx_limit(band);
        let mut lines = vec![Complex64::new(0.0, 0.0); kx_lim * n];
        let mut cscratch = vec![Complex64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len()];
        // y axis: lines indexed by (z, kx)
        for z in 0..n {
            for kx in 0..kx_lim {
                for y in 0..n {
                    lines[kx * n + y] = spec[(z * n + y) * nh + kx];
                }
            }
            self.fwd.process_with_scratch(&mut lines, &mut cscratch);
            for kx in 0..kx_lim {
                for ky in 0..n {
                    spec[(z * n + ky) * nh + kx] = lines[kx * n + ky];
                }
            }
        }
        // z axis: lines indexed by (ky, kx)
        for ky in 0..n {
            if !self.index_in_band(ky, band) {
                continue;
            }
            for kx in 0..kx_lim {
                for z in 0..n {
                    lines[kx * n + z] = spec[(z * n + ky) * nh + kx];
                }
            }
            self.fwd.process_with_scratch(&mut lines, &mut cscratch);
            for kx in 0..kx_lim {
                for kz in 0..n {
                    spec[(kz * n + ky) * nh + kx] = lines[kx * n + kz];
                }
            }
        }

        let norm = 1.0 / (n * n * n) as f64;
        match band {
            Band::Full => spec.iter_mut().for_each(|c| *c *= norm),
            Band::Limited(_) => {
                for kz in 0..n {
                    let bz = self.index_in_band(kz, band);
                    for ky in 0..n {
                        let bzy = bz && self.index_in_band(ky, band);
                        let base = (kz * n + ky) * nh;
                        for kx in 0..nh {
                            let c = &mut spec[base + kx];
                            if bzy && kx < kx_lim && self.index_in_band(kx, band) {
                                *c *= norm;
                            } else {
                                *c = Complex64::new(0.0, 0.0);
                            }
                        }
                    }
                }
            }
        }
        spec
    }

    /// Inverse transform. `band` is a promise that coefficients outside it
    /// vanish, which lets whole lines be skipped.
    pub fn inverse(&self, spec: &[Complex64], band: Band) -> Vec<f64> {
        let n = self.n;
        let nh = self.half();
        assert_eq!(spec.len(), self.spectral_len());
        let mut work = spec.to_vec();
        let kx_lim = self.kx_limit(band);
        let mut lines = vec![Complex64::new(0.0, 0.0); kx_lim * n];
        let mut cscratch = vec![Complex64::new(0.0, 0.0); self.inv.get_inplace_scratch_len()];

        for ky in 0..n {
            if !self.index_in_band(ky, band) {
                continue;
            }
            for kx in 0..kx_lim {
                for kz in 0..n {
                    lines[kx * n + kz] = work[(kz * n + ky) * nh + kx];
                }
            }
            self.inv.process_with_scratch(&mut lines, &mut cscratch);
            for kx in 0..kx_lim {
                for z in 0..n {
                    work[(z * n + ky) * nh + kx] = lines[kx * n + z];
                }
            }
        }
        for z in 0..n {
            for kx in 0..kx_lim {
                for ky in 0..n {
                    lines[kx * n + ky] = work[(z * n + ky) * nh + kx];
                }
            }
            self.inv.process_with_scratch(&mut lines, &mut cscratch);
            for kx in 0..kx_lim {
                for y in 0..n {
                    work[(z * n + y) * nh + kx] = lines[kx * n + y];
                }
            }
        }

        let mut phys = vec![0.0; n * n * n];
        let mut row_in = self.c2r.make_input_vec();
        let mut row_out = self.c2r.make_output_vec();
        let mut scratch = self.c2r.make_scratch_vec();
        for zy in 0..n * n {
            row_in.copy_from_slice(&work[zy * nh..(zy + 1) * nh]);
            row_in[0].im = 0.0;
            if n.is_multiple_of(2) {
                row_in[nh - 1].im = 0.0;
            }
            self.c2r
                .process_with_scratch(&mut row_in, &mut row_out, &mut scratch)
                .expect("c2r length");
            phys[zy * n..(zy + 1) * n].copy_from_slice(&row_out);
        }
        phys
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Vec<f64> {
        (0..n * n * n)
            .map(|i| ((i * 7919) % 1013) as f64 / 1013.0 - 0.5)
            .collect()
    }

    #[test]
    fn roundtrip_full() {
        let fft = Fft3::new(16);
        let u = sample(16);
        let back = fft.inverse(&fft.forward(&u, Band::Full), Band::Full);
        for (a, b) in u.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn single_mode_lands_on_its_coefficient() {
        let n = 16;
        let fft = Fft3::new(n);
        let mut u = vec![0.0; n * n * n];
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let ph = 2.0 * std::f64::consts::PI * (2 * x + 3 * y + 15 * z) as f64 / n as f64;
                    u[(z * n + y) * n + x] = ph.cos();
                }
            }
        }
        let c = fft.forward(&u, Band::Full);
        let nh = fft.half();
        // cos = (e^{i·} + e^{-i·})/2; the kx=2 half carries (2, 3, 15)
        let got = c[(15 * n + 3) * nh + 2];
        assert!((got.re - 0.5).abs() < 1e-13 && got.im.abs() < 1e-13);
        let banded = fft.forward(&u, Band::Limited(5));
        assert!((banded[(15 * n + 3) * nh + 2] - got).norm() < 1e-14);
        let banded = fft.forward(&u, Band::Limited(2));
        assert!(banded.iter().all(|c| c.norm() < 1e-13), "ky = 3 lies outside band 2");
    }

    #[test]
    fn banded_inverse_matches_full_for_band_limited_input() {
        let n = 16;
        let fft = Fft3::new(n);
        let u = sample(n);
        let c = fft.forward(&u, Band::Limited(5));
        let a = fft.inverse(&c, Band::Full);
        let b = fft.inverse(&c, Band::Limited(5));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
        let c2 = fft.forward(&a, Band::Full);
        for (x, y) in c.iter().zip(&c2) {
            assert!((x - y).norm() < 1e-14);
        }
    }
}
