//! Separable 3D FFT on `[channels, rows, cols]` buffers and kernel-spectrum
//! convolution built on it.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::{Field, Shape};
use crate::error::{Error, Result};

/// Planned forward and inverse transforms for one grid shape.
#[derive(Clone)]
pub struct Spectrum {
    shape: Shape,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    chan_fwd: Arc<dyn Fft<f64>>,
    chan_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectrum").field("shape", &self.shape).finish()
    }
}

impl Spectrum {
    /// Only square planes are supported (rows == cols).
    pub fn new(shape: Shape) -> Self {
        let [k, n, m] = shape;
        assert_eq!(n, m, "square planes only");
        let mut planner = FftPlanner::new();
        Spectrum {
            shape,
            row_fwd: planner.plan_fft(n, FftDirection::Forward),
            row_inv: planner.plan_fft(n, FftDirection::Inverse),
            chan_fwd: planner.plan_fft(k, FftDirection::Forward),
            chan_inv: planner.plan_fft(k, FftDirection::Inverse),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalised forward transform over all three axes, in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.row_fwd, &self.chan_fwd);
    }

    /// Inverse transform including the 1/size normalisation.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.row_inv, &self.chan_inv);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    /// Forward transform of each channel plane only (the channel axis untouched).
    pub fn forward_planes(&self, buf: &mut [Complex64]) {
        let n = self.shape[1];
        buf.par_chunks_mut(n * n)
            .for_each(|plane| plane_fft(plane, n, &self.row_fwd));
    }

    /// Inverse per-plane transform including the 1/N^2 normalisation.
    pub fn inverse_planes(&self, buf: &mut [Complex64]) {
        let n = self.shape[1];
        let scale = 1.0 / (n * n) as f64;
        buf.par_chunks_mut(n * n).for_each(|plane| {
            plane_fft(plane, n, &self.row_inv);
            plane.iter_mut().for_each(|z| *z *= scale);
        });
    }

    fn transform(&self, buf: &mut [Complex64], row: &Arc<dyn Fft<f64>>, chan: &Arc<dyn Fft<f64>>) {
        assert_eq!(buf.len(), self.len());
        let [k, n, _] = self.shape;
        let plane = n * n;
        buf.par_chunks_mut(plane).for_each(|p| plane_fft(p, n, row));
        if k > 1 {
            // Gather each (row, col) fibre along the channel axis.
            let mut scratch = vec![Complex64::default(); chan.get_inplace_scratch_len()];
            let mut fibre = vec![Complex64::default(); k];
            for idx in 0..plane {
                for c in 0..k {
                    fibre[c] = buf[c * plane + idx];
                }
                chan.process_with_scratch(&mut fibre, &mut scratch);
                for c in 0..k {
                    buf[c * plane + idx] = fibre[c];
                }
            }
        }
    }
}

fn plane_fft(plane: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for row in plane.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    let mut col = vec![Complex64::default(); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = plane[r * n + c];
        }
        fft.process_with_scratch(&mut col, &mut scratch);
        for r in 0..n {
            plane[r * n + c] = col[r];
        }
    }
}

/// Circular convolution with a fixed kernel whose spectrum is computed once.
#[derive(Debug, Clone)]
pub struct SpectralConvolver {
    spectrum: Spectrum,
    kernel_hat: Vec<Complex64>,
}

impl SpectralConvolver {
    pub fn new<K: Field>(kernel: &K) -> Result<Self> {
        let shape = kernel.shape();
        if shape[1] != shape[2] {
            return Err(Error::invalid("spectral convolution needs square planes"));
        }
        let spectrum = Spectrum::new(shape);
        let mut kernel_hat: Vec<Complex64> =
            kernel.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectrum.forward(&mut kernel_hat);
        Ok(SpectralConvolver {
            spectrum,
            kernel_hat,
        })
    }

    pub fn shape(&self) -> Shape {
        self.spectrum.shape()
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.convolve_in_place(&mut buf);
        Ok(buf.into_iter().map(|z| z.re).collect())
    }

    /// Convolves two real fields with one complex transform. Valid because the
    /// kernel is real, so the real and imaginary parts stay decoupled.
    pub fn apply_pair(&self, a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_len(a.len())?;
        self.check_len(b.len())?;
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.convolve_in_place(&mut buf);
        Ok(buf.into_iter().map(|z| (z.re, z.im)).unzip())
    }

    fn convolve_in_place(&self, buf: &mut [Complex64]) {
        self.spectrum.forward(buf);
        buf.iter_mut().zip(&self.kernel_hat).for_each(|(z, k)| *z *= k);
        self.spectrum.inverse(buf);
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.spectrum.len() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "field of {len} values does not match kernel shape {:?}",
                self.spectrum.shape()
            )))
        }
    }
}
