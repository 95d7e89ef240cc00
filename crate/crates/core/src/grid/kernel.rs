use super::{Field, Shape};
use crate::error::{Error, Result};

/// Normalised non-negative kernel on the N x N torus, centred at index (0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    n: usize,
    data: Vec<f64>,
}

/// Normalised non-negative kernel on the N x N x K torus, centred at (0, 0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel3D {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

fn normalise(data: &mut [f64]) -> Result<()> {
    if data.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("kernel entries must be finite and non-negative"));
    }
    let total: f64 = data.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("kernel has zero mass"));
    }
    data.iter_mut().for_each(|v| *v /= total);
    Ok(())
}

impl Kernel2D {
    /// Normalises arbitrary non-negative weights laid out with the origin at (0, 0).
    pub fn from_weights(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid("kernel data length does not match N^2"));
        }
        normalise(&mut data)?;
        Ok(Kernel2D { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight at signed offset (dr, dc), wrapped.
    pub fn at(&self, dr: isize, dc: isize) -> f64 {
        let n = self.n as isize;
        self.data[(dr.rem_euclid(n) * n + dc.rem_euclid(n)) as usize]
    }
}

impl Field for Kernel2D {
    fn shape(&self) -> Shape {
        [1, self.n, self.n]
    }

    fn values(&self) -> &[f64] {
        &self.data
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.data.len());
        Kernel2D {
            n: self.n,
            data: values,
        }
    }
}

impl Kernel3D {
    pub fn from_weights(n: usize, k: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n * k {
            return Err(Error::invalid("kernel data length does not match N^2 K"));
        }
        normalise(&mut data)?;
        Ok(Kernel3D { n, k, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Weight at signed offset (dk, dr, dc), wrapped on every axis.
    pub fn at(&self, dk: isize, dr: isize, dc: isize) -> f64 {
        let n = self.n as isize;
        let k = self.k as isize;
        self.data[((dk.rem_euclid(k) * n + dr.rem_euclid(n)) * n + dc.rem_euclid(n)) as usize]
    }
}

impl Field for Kernel3D {
    fn shape(&self) -> Shape {
        [self.k, self.n, self.n]
    }

    fn values(&self) -> &[f64] {
        &self.data
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.data.len());
        Kernel3D {
            n: self.n,
            k: self.k,
            data: values,
        }
    }
}

/// Unnormalised samples `sum_m exp(-(i + m*period)^2 / (2 sigma^2))` for `i in 0..period`.
pub fn wrapped_gaussian_1d(sigma: f64, period: usize) -> Vec<f64> {
    let p = period as f64;
    let images = (8.0 * sigma / p).ceil() as i64 + 1;
    (0..period)
        .map(|i| {
            (-images..=images)
                .map(|m| {
                    let d = i as f64 + m as f64 * p;
                    (-d * d / (2.0 * sigma * sigma)).exp()
                })
                .sum()
        })
        .collect()
}

fn check_sigma(sigma: f64, what: &str) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive, got {sigma}")))
    }
}

/// Wrapped isotropic Gaussian of standard deviation `sigma_px`, summing to one.
pub fn gaussian2d(sigma_px: f64, n: usize) -> Result<Kernel2D> {
    check_sigma(sigma_px, "sigma")?;
    if n < 3 {
        return Err(Error::invalid(format!("grid size must be at least 3, got {n}")));
    }
    let g = wrapped_gaussian_1d(sigma_px, n);
    let mut data = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            data.push(g[r] * g[c]);
        }
    }
    Kernel2D::from_weights(n, data)
}

/// Separable wrapped Gaussian: spatial std `sigma_spatial_px` pixels times an
/// orientation factor of std `sigma_orient_ch` channels with period K.
pub fn gaussian3d(sigma_spatial_px: f64, sigma_orient_ch: f64, n: usize, k: usize) -> Result<Kernel3D> {
    check_sigma(sigma_spatial_px, "spatial sigma")?;
    check_sigma(sigma_orient_ch, "orientation sigma")?;
    if n < 3 {
        return Err(Error::invalid(format!("grid size must be at least 3, got {n}")));
    }
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 orientation channels, got {k}")));
    }
    let gs = wrapped_gaussian_1d(sigma_spatial_px, n);
    let go = wrapped_gaussian_1d(sigma_orient_ch, k);
    let mut data = Vec::with_capacity(n * n * k);
    for &wk in &go {
        for &wr in &gs {
            for &wc in &gs {
                data.push(wk * wr * wc);
            }
        }
    }
    Kernel3D::from_weights(n, k, data)
}
