//! Piecewise-linear sigmoid, its even primitive, and the odd least-squares
//! polynomial used by the fast interaction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `min(1, max(alpha * rho, -1))`.
pub fn sigmoid(rho: f64, alpha: f64) -> f64 {
    (alpha * rho).clamp(-1.0, 1.0)
}

/// Derivative of [`sigmoid`] away from the kinks `|rho| = 1/alpha`.
pub fn sigmoid_slope(rho: f64, alpha: f64) -> f64 {
    if rho.abs() < 1.0 / alpha {
        alpha
    } else {
        0.0
    }
}

/// Even primitive of [`sigmoid`] vanishing at zero.
pub fn sigma_primitive(rho: f64, alpha: f64) -> f64 {
    let a = rho.abs();
    if a <= 1.0 / alpha {
        0.5 * alpha * rho * rho
    } else {
        a - 0.5 / alpha
    }
}

/// Number of samples used by the least-squares fit.
pub const FIT_SAMPLES: usize = 4096;

/// Odd polynomial `p(x) = sum_j c_j (x / scale)^j` over odd `j <= degree`,
/// fitted to the sigmoid on `[-scale, scale]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OddPolynomial {
    /// Coefficient of `t^j` at index `j` (even entries are zero).
    coeffs: Vec<f64>,
    scale: f64,
    max_error: f64,
}

impl OddPolynomial {
    pub fn fit(alpha: f64, scale: f64, degree: usize) -> Result<Self> {
        if degree < 1 || degree.is_multiple_of(2) {
            return Err(Error::invalid(format!("polynomial degree must be odd, got {degree}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("fit half-width must be positive, got {scale}")));
        }
        let terms = degree.div_ceil(2);
        let ts: Vec<f64> = (0..FIT_SAMPLES)
            .map(|i| -1.0 + 2.0 * i as f64 / (FIT_SAMPLES - 1) as f64)
            .collect();
        let design = DMatrix::from_fn(FIT_SAMPLES, terms, |i, j| ts[i].powi(2 * j as i32 + 1));
        let target = DVector::from_iterator(FIT_SAMPLES, ts.iter().map(|&t| sigmoid(scale * t, alpha)));
        let svd = design.svd(true, true);
        let sol = svd
            .solve(&target, 1e-14)
            .map_err(|e| Error::invalid(format!("least-squares fit failed: {e}")))?;
        let mut coeffs = vec![0.0; degree + 1];
        for j in 0..terms {
            coeffs[2 * j + 1] = sol[j];
        }
        let mut poly = OddPolynomial {
            coeffs,
            scale,
            max_error: 0.0,
        };
        poly.max_error = poly.measure_error(alpha);
        Ok(poly)
    }

    fn measure_error(&self, alpha: f64) -> f64 {
        let samples = 4 * FIT_SAMPLES;
        let mut pts: Vec<f64> = (0..=samples)
            .map(|i| self.scale * (-1.0 + 2.0 * i as f64 / samples as f64))
            .collect();
        let kink = 1.0 / alpha;
        if kink < self.scale {
            pts.extend([kink, -kink]);
        }
        pts.into_iter()
            .map(|x| (self.eval(x) - sigmoid(x, alpha)).abs())
            .fold(0.0, f64::max)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Largest deviation from the sigmoid over the fit interval.
    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = x / self.scale;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// Primitive of [`Self::eval`] vanishing at zero.
    pub fn eval_primitive(&self, x: f64) -> f64 {
        let t = x / self.scale;
        let mut acc = 0.0;
        for (j, c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * t + c / (j + 1) as f64;
        }
        self.scale * acc * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_values() {
        assert!((sigmoid(0.1, 5.0) - 0.5).abs() < 1e-15);
        assert_eq!(sigmoid(0.5, 5.0), 1.0);
        assert_eq!(sigmoid(-0.5, 5.0), -1.0);
        for a in [1.5, 5.0, 20.0] {
            assert_eq!(sigmoid(0.0, a), 0.0);
        }
    }

    #[test]
    fn primitive_values_and_continuity() {
        assert_eq!(sigma_primitive(0.0, 5.0), 0.0);
        assert!((sigma_primitive(0.2, 5.0) - 0.1).abs() < 1e-15);
        let k: f64 = 0.2;
        let inner = 0.5 * 5.0 * k * k;
        let outer = k - 0.5 / 5.0;
        assert!((inner - outer).abs() < 1e-15);
        assert_eq!(sigma_primitive(-0.7, 5.0), sigma_primitive(0.7, 5.0));
    }

    #[test]
    fn primitive_derivative_is_sigmoid() {
        let alpha = 5.0;
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut worst = 0.0f64;
        let mut done = 0;
        while done < 100 {
            let rho: f64 = rng.gen_range(-1.0..1.0);
            if (rho.abs() - 1.0 / alpha).abs() < 1e-3 {
                continue;
            }
            let fd = (sigma_primitive(rho + h, alpha) - sigma_primitive(rho - h, alpha)) / (2.0 * h);
            worst = worst.max((fd - sigmoid(rho, alpha)).abs());
            done += 1;
        }
        assert!(worst <= 1e-6, "{worst}");
    }

    #[test]
    fn fit_is_odd_and_improves_with_degree() {
        let p7 = OddPolynomial::fit(5.0, 1.0, 7).unwrap();
        let p15 = OddPolynomial::fit(5.0, 1.0, 15).unwrap();
        assert!(p15.max_error() < p7.max_error());
        for x in [0.05, 0.3, 0.9] {
            assert!((p7.eval(x) + p7.eval(-x)).abs() < 1e-12);
        }
        assert!(OddPolynomial::fit(5.0, 1.0, 10).is_err());
    }

    #[test]
    fn linear_region_fit_is_exact() {
        let p = OddPolynomial::fit(5.0, 0.1, 11).unwrap();
        assert!(p.max_error() < 1e-10);
        assert!((p.eval(0.05) - 0.25).abs() < 1e-10);
    }

    #[test]
    fn polynomial_primitive_matches_quadrature() {
        let p = OddPolynomial::fit(5.0, 1.3, 11).unwrap();
        let x = 0.77;
        let steps = 20000;
        let h = x / steps as f64;
        let mut q = 0.0;
        for i in 0..steps {
            let a = i as f64 * h;
            q += h / 6.0 * (p.eval(a) + 4.0 * p.eval(a + h / 2.0) + p.eval(a + h));
        }
        assert!((q - p.eval_primitive(x)).abs() < 1e-12);
    }
}
