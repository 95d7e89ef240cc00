//! Cake-wavelet lift from images to orientation volumes, and its left inverse.
//!
//! Filters live in the frequency domain. Filter `k` keeps the frequencies whose
//! direction (taken modulo pi) lies near `theta_k = k * pi / K`, so channel `k`
//! responds to edges and stripes whose normal points along `theta_k`. The
//! angular windows are periodised cardinal B-splines; integer shifts of a
//! B-spline sum to one, which makes the channel sum reproduce the input exactly.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Image, OrientationVolume, Spectrum};

const MAGIC: &[u8; 4] = b"CAKE";

#[derive(Debug, Clone, PartialEq)]
pub struct CakeFilterBank {
    n: usize,
    k: usize,
    bw: usize,
    filters: Vec<Vec<Complex64>>,
}

/// Optional knobs for [`build_cake_bank_with`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CakeOptions {
    /// Std of a radial Gaussian envelope, as a fraction of the Nyquist radius.
    /// The part of the spectrum removed by the envelope is shared equally by
    /// all filters so the bank still sums to one.
    pub radial_taper: Option<f64>,
}

/// Cardinal B-spline of order `order`, centred at zero, support width `order + 1`.
pub fn bspline(order: usize, x: f64) -> f64 {
    let m = order + 1;
    let shifted = x + m as f64 / 2.0;
    if shifted <= 0.0 || shifted >= m as f64 {
        return 0.0;
    }
    if order == 0 {
        return 1.0;
    }
    let mut fact = 1.0;
    for i in 2..=order {
        fact *= i as f64;
    }
    let mut binom = 1.0;
    let mut acc = 0.0;
    for j in 0..=m {
        let t = shifted - j as f64;
        if t > 0.0 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * t.powi(order as i32);
        }
        binom = binom * (m - j) as f64 / (j + 1) as f64;
    }
    acc / fact
}

/// Periodised angular window of channel `k` at frequency angle `phi` (radians).
fn angular_window(order: usize, k: usize, channels: usize, phi: f64) -> f64 {
    let step = PI / channels as f64;
    let u = (phi / step).rem_euclid(channels as f64) - k as f64;
    let half = (order + 1) as f64 / 2.0;
    let reach = (half / channels as f64).ceil() as i64 + 1;
    (-reach..=reach)
        .map(|m| bspline(order, u - (m * channels as i64) as f64))
        .sum()
}

fn aliases(i: usize, n: usize) -> Vec<f64> {
    if n.is_multiple_of(2) && i == n / 2 {
        vec![i as f64, -(i as f64)]
    } else if i <= n / 2 {
        vec![i as f64]
    } else {
        vec![i as f64 - n as f64]
    }
}

pub fn build_cake_bank(n: usize, k: usize, bw: usize) -> Result<CakeFilterBank> {
    build_cake_bank_with(n, k, bw, CakeOptions::default())
}

pub fn build_cake_bank_with(n: usize, k: usize, bw: usize, opts: CakeOptions) -> Result<CakeFilterBank> {
    if n < 4 {
        return Err(Error::invalid(format!("grid size must be at least 4, got {n}")));
    }
    if k == 0 {
        return Err(Error::invalid("need at least one orientation"));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "{k} orientations exceed the angular resolution of a {n}x{n} grid"
        )));
    }
    if bw == 0 {
        return Err(Error::invalid("angular order bw must be at least 1"));
    }
    if let Some(s) = opts.radial_taper {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid("radial taper must be positive"));
        }
    }

    let nyquist = n as f64 / 2.0;
    let filters = (0..k)
        .map(|kk| {
            let mut h = Vec::with_capacity(n * n);
            for r in 0..n {
                for c in 0..n {
                    if r == 0 && c == 0 {
                        h.push(Complex64::new(1.0 / k as f64, 0.0));
                        continue;
                    }
                    // A Nyquist row or column sample stands for both +N/2 and -N/2;
                    // average the window over every alias so the filter stays
                    // invariant under point reflection and quarter turns.
                    let ys = aliases(r, n);
                    let xs = aliases(c, n);
                    let mut acc = 0.0;
                    let mut count = 0.0;
                    for &fy in &ys {
                        for &fx in &xs {
                            acc += angular_window(bw, kk, k, fy.atan2(fx));
                            count += 1.0;
                        }
                    }
                    let (fy, fx) = (ys[0], xs[0]);
                    let mut v = acc / count;
                    if let Some(s) = opts.radial_taper {
                        let rho = (fx * fx + fy * fy).sqrt() / nyquist;
                        let g = (-rho * rho / (2.0 * s * s)).exp();
                        v = g * v + (1.0 - g) / k as f64;
                    }
                    h.push(Complex64::new(v, 0.0));
                }
            }
            h
        })
        .collect();
    Ok(CakeFilterBank { n, k, bw, filters })
}

impl CakeFilterBank {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bw(&self) -> usize {
        self.bw
    }

    pub fn filter(&self, k: usize) -> &[Complex64] {
        &self.filters[k]
    }

    /// Orientation of channel `k` in radians.
    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * PI / self.k as f64
    }

    /// Max deviation of the pointwise filter sum from one.
    pub fn partition_error(&self) -> f64 {
        (0..self.n * self.n)
            .map(|i| {
                let s: Complex64 = self.filters.iter().map(|f| f[i]).sum();
                (s - Complex64::new(1.0, 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Max deviation between each filter and its point reflection omega -> -omega.
    pub fn reflection_error(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for f in &self.filters {
            for r in 0..n {
                for c in 0..n {
                    let p = ((n - r) % n) * n + (n - c) % n;
                    worst = worst.max((f[r * n + c] - f[p]).norm());
                }
            }
        }
        worst
    }

    /// Serialises as a 16-byte header (magic, N, K, bw as little-endian u32)
    /// followed by real and imaginary f64 planes for each filter.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 16 * self.k * self.n * self.n);
        out.extend_from_slice(MAGIC);
        for v in [self.n, self.k, self.bw] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for f in &self.filters {
            for z in f {
                out.extend_from_slice(&z.re.to_le_bytes());
            }
            for z in f {
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |detail: String| Error::Format {
            kind: "filter bank",
            detail,
        };
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(fail("missing CAKE header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (n, k, bw) = (word(4), word(8), word(12));
        if n == 0 || k == 0 {
            return Err(fail(format!("bad dimensions n={n} k={k}")));
        }
        let plane = n * n;
        let expected = 16 + 16 * k * plane;
        if bytes.len() != expected {
            return Err(fail(format!("expected {expected} bytes, got {}", bytes.len())));
        }
        let read = |i: usize| f64::from_le_bytes(bytes[16 + 8 * i..24 + 8 * i].try_into().unwrap());
        let filters = (0..k)
            .map(|kk| {
                let base = 2 * kk * plane;
                (0..plane)
                    .map(|i| Complex64::new(read(base + i), read(base + plane + i)))
                    .collect()
            })
            .collect();
        Ok(CakeFilterBank { n, k, bw, filters })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn lift_channels(f: &Image, bank: &CakeFilterBank) -> Result<(Vec<Vec<f64>>, f64)> {
    if f.n() != bank.n {
        return Err(Error::ShapeMismatch {
            expected: [1, bank.n, bank.n],
            actual: [1, f.n(), f.n()],
        });
    }
    let n = bank.n;
    let planes = Spectrum::new([1, n, n]);
    let mut spec: Vec<Complex64> = f.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planes.forward(&mut spec);
    let out: Vec<(Vec<f64>, f64)> = bank
        .filters
        .par_iter()
        .map(|h| {
            let mut buf: Vec<Complex64> = spec.iter().zip(h).map(|(a, b)| a * b).collect();
            planes.inverse(&mut buf);
            let imag = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            (buf.into_iter().map(|z| z.re).collect(), imag)
        })
        .collect();
    let imag = out.iter().map(|(_, i)| *i).fold(0.0, f64::max);
    Ok((out.into_iter().map(|(c, _)| c).collect(), imag))
}

/// Channel `k` is the inverse transform of the image spectrum times filter `k`;
/// the real part is kept.
pub fn lift(f: &Image, bank: &CakeFilterBank) -> Result<OrientationVolume> {
    let (channels, _) = lift_channels(f, bank)?;
    OrientationVolume::from_channels(bank.n, channels)
}

/// Largest imaginary component dropped by [`lift`].
pub fn lift_imag_residual(f: &Image, bank: &CakeFilterBank) -> Result<f64> {
    Ok(lift_channels(f, bank)?.1)
}

/// Pixelwise sum over channels.
pub fn project(v: &OrientationVolume) -> Image {
    let n = v.n();
    let mut out = vec![0.0; n * n];
    for k in 0..v.k() {
        out.iter_mut().zip(v.channel(k)).for_each(|(o, x)| *o += x);
    }
    Image::new(n, out).expect("sum of finite channels is finite")
}
