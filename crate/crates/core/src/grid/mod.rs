//! Periodic 2D and 3D grids, Gaussian kernels and spectral circular convolution.
//!
//! Every grid in this crate is stored as a flat row-major buffer indexed by
//! `(channel, row, col)` and is periodic along all three axes. A plain image is
//! the one-channel special case.

mod fft;
pub mod io;
mod kernel;

pub use fft::{Spectrum, SpectralConvolver};
pub use kernel::{gaussian2d, gaussian3d, wrapped_gaussian_1d, Kernel2D, Kernel3D};

use crate::error::{Error, Result};

/// `[channels, rows, cols]` of a periodic grid.
pub type Shape = [usize; 3];

/// Common view over every periodic field in the crate.
pub trait Field: Sized {
    fn shape(&self) -> Shape;
    fn values(&self) -> &[f64];
    /// Builds a field of the same shape from `values`; panics on a length mismatch.
    fn with_values(&self, values: Vec<f64>) -> Self;

    fn len(&self) -> usize {
        self.values().len()
    }

    fn is_empty(&self) -> bool {
        self.values().is_empty()
    }
}

pub(crate) fn check_shape(expected: Shape, actual: Shape) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, actual })
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::invalid(format!("non-finite value at index {i}"))),
        None => Ok(()),
    }
}

/// Square grey-scale image on the periodic N x N grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    n: usize,
    data: Vec<f64>,
    nominal: bool,
}

impl Image {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("image size must be positive"));
        }
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "image of side {n} needs {} values, got {}",
                n * n,
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Image {
            n,
            data,
            nominal: false,
        })
    }

    /// An image whose values are contractually in `[0, 1]`.
    pub fn new_nominal(n: usize, data: Vec<f64>) -> Result<Self> {
        let mut img = Image::new(n, data)?;
        if let Some(v) = img.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("nominal image value {v} outside [0, 1]")));
        }
        img.nominal = true;
        Ok(img)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Image {
            n,
            data: vec![value; n * n],
            nominal: (0.0..=1.0).contains(&value),
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        Image {
            n,
            data,
            nominal: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_nominal(&self) -> bool {
        self.nominal
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n + col] = value;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.data)
    }

    /// Circular shift: output(r, c) = input(r - dr, c - dc).
    pub fn shifted(&self, dr: isize, dc: isize) -> Image {
        let n = self.n as isize;
        Image::from_fn(self.n, |r, c| {
            let sr = (r as isize - dr).rem_euclid(n) as usize;
            let sc = (c as isize - dc).rem_euclid(n) as usize;
            self.get(sr, sc)
        })
    }
}

impl Field for Image {
    fn shape(&self) -> Shape {
        [1, self.n, self.n]
    }

    fn values(&self) -> &[f64] {
        &self.data
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.data.len());
        Image {
            n: self.n,
            data: values,
            nominal: false,
        }
    }
}

/// Lifted state on N x N positions and K orientation channels.
///
/// Channel `k` (0-based) stands for the orientation `k * pi / K`; the channel
/// axis is periodic with period K.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationVolume {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl OrientationVolume {
    pub fn new(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::invalid("volume dimensions must be positive"));
        }
        if data.len() != n * n * k {
            return Err(Error::invalid(format!(
                "volume {n}x{n}x{k} needs {} values, got {}",
                n * n * k,
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(OrientationVolume { n, k, data })
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        OrientationVolume {
            n,
            k,
            data: vec![0.0; n * n * k],
        }
    }

    pub fn from_channels(n: usize, channels: Vec<Vec<f64>>) -> Result<Self> {
        let k = channels.len();
        let data: Vec<f64> = channels.into_iter().flatten().collect();
        OrientationVolume::new(n, k, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let len = self.n * self.n;
        &self.data[k * len..(k + 1) * len]
    }

    pub fn channel_image(&self, k: usize) -> Image {
        Image {
            n: self.n,
            data: self.channel(k).to_vec(),
            nominal: false,
        }
    }

    /// Channel index wraps modulo K.
    pub fn get(&self, row: usize, col: usize, k: isize) -> f64 {
        let kk = k.rem_euclid(self.k as isize) as usize;
        self.data[(kk * self.n + row) * self.n + col]
    }
}

impl Field for OrientationVolume {
    fn shape(&self) -> Shape {
        [self.k, self.n, self.n]
    }

    fn values(&self) -> &[f64] {
        &self.data
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.data.len());
        OrientationVolume {
            n: self.n,
            k: self.k,
            data: values,
        }
    }
}

/// Arbitrary small periodic lattice, used by the direct-summation oracles and
/// toy examples that do not fit the square-image types.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    shape: Shape,
    data: Vec<f64>,
}

impl Lattice {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid("lattice dimensions must be positive"));
        }
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::invalid("lattice data length does not match shape"));
        }
        check_finite(&data)?;
        Ok(Lattice { shape, data })
    }
}

impl Field for Lattice {
    fn shape(&self) -> Shape {
        self.shape
    }

    fn values(&self) -> &[f64] {
        &self.data
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.data.len());
        Lattice {
            shape: self.shape,
            data: values,
        }
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

pub(crate) fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Circular convolution of an image with a normalised 2D kernel.
pub fn conv2_periodic(f: &Image, k: &Kernel2D) -> Result<Image> {
    check_shape(f.shape(), k.shape())?;
    let conv = SpectralConvolver::new(k)?;
    let out = conv.apply(f.values())?;
    Image::new(f.n, out)
}

/// Circular convolution of a volume with a normalised 3D kernel; the channel axis
/// wraps modulo K.
pub fn conv3_periodic(f: &OrientationVolume, w: &Kernel3D) -> Result<OrientationVolume> {
    check_shape(f.shape(), w.shape())?;
    let conv = SpectralConvolver::new(w)?;
    let out = conv.apply(f.values())?;
    OrientationVolume::new(f.n, f.k, out)
}

/// Local mean `g * f0` with a wrapped Gaussian `g` of standard deviation `sigma_mu` pixels.
pub fn local_mean(f0: &Image, sigma_mu: f64) -> Result<Image> {
    let g = gaussian2d(sigma_mu, f0.n())?;
    conv2_periodic(f0, &g)
}

/// Direct O(size^2) circular convolution on any field. Oracle for the spectral path.
pub fn conv_direct<F: Field, K: Field>(f: &F, k: &K) -> Result<F> {
    check_shape(f.shape(), k.shape())?;
    let [nc, nr, ncol] = f.shape();
    let fv = f.values();
    let kv = k.values();
    let mut out = vec![0.0; fv.len()];
    for c in 0..nc {
        for r in 0..nr {
            for col in 0..ncol {
                let mut acc = 0.0;
                for c2 in 0..nc {
                    let dc = (c + nc - c2) % nc;
                    for r2 in 0..nr {
                        let dr = (r + nr - r2) % nr;
                        for col2 in 0..ncol {
                            let dcol = (col + ncol - col2) % ncol;
                            acc += kv[(dc * nr + dr) * ncol + dcol] * fv[(c2 * nr + r2) * ncol + col2];
                        }
                    }
                }
                out[(c * nr + r) * ncol + col] = acc;
            }
        }
    }
    Ok(f.with_values(out))
}
