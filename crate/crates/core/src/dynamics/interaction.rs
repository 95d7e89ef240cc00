//! The pairwise interaction `R_F(p) = sum_q W(p - q) sigma(F(p) - F(q))`.
//!
//! [`interaction_naive`] sums over every pair and is the reference. The fast
//! path replaces the sigmoid by an odd polynomial; a binomial expansion then
//! turns the double sum into convolutions of the powers of the state, each
//! evaluated spectrally.

use super::sigmoid::{sigma_primitive, sigmoid, OddPolynomial};
use crate::error::{Error, Result};
use crate::grid::{check_shape, min_max, Field, Shape, SpectralConvolver};

/// Direct O(size^2) sum of `W(p - q) g(F(p) - F(q))` over all pairs.
fn pair_sum(shape: Shape, values: &[f64], kernel: &[f64], g: impl Fn(f64) -> f64) -> Vec<f64> {
    let [nc, nr, ncol] = shape;
    let mut out = vec![0.0; values.len()];
    for c in 0..nc {
        for r in 0..nr {
            for col in 0..ncol {
                let p = (c * nr + r) * ncol + col;
                let fp = values[p];
                let mut acc = 0.0;
                for c2 in 0..nc {
                    let dc = (c + nc - c2) % nc;
                    for r2 in 0..nr {
                        let dr = (r + nr - r2) % nr;
                        let krow = (dc * nr + dr) * ncol;
                        let qrow = (c2 * nr + r2) * ncol;
                        for col2 in 0..ncol {
                            let w = kernel[krow + (col + ncol - col2) % ncol];
                            if w != 0.0 {
                                acc += w * g(fp - values[qrow + col2]);
                            }
                        }
                    }
                }
                out[p] = acc;
            }
        }
    }
    out
}

pub fn interaction_naive<F: Field, K: Field>(state: &F, kernel: &K, alpha: f64) -> Result<F> {
    check_shape(state.shape(), kernel.shape())?;
    let out = pair_sum(state.shape(), state.values(), kernel.values(), |d| sigmoid(d, alpha));
    Ok(state.with_values(out))
}

/// `sum_p sum_q W(p - q) Sigma(F(p) - F(q))` with the exact primitive.
pub fn interaction_energy_naive<F: Field, K: Field>(state: &F, kernel: &K, alpha: f64) -> Result<f64> {
    check_shape(state.shape(), kernel.shape())?;
    let out = pair_sum(state.shape(), state.values(), kernel.values(), |d| sigma_primitive(d, alpha));
    Ok(out.iter().sum())
}

/// Fast interaction with a polynomial fitted once on a fixed difference range.
#[derive(Debug, Clone)]
pub struct FastInteraction {
    conv: SpectralConvolver,
    poly: OddPolynomial,
    binom: Vec<Vec<f64>>,
}

/// Output of one fast evaluation.
#[derive(Debug, Clone)]
pub struct FastEval {
    pub interaction: Vec<f64>,
    /// `sum_p sum_q W(p - q) P(F(p) - F(q))` with `P` the polynomial primitive,
    /// present when requested.
    pub energy: Option<f64>,
}

fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..=n {
        t[i][0] = 1.0;
        for j in 1..=i {
            t[i][j] = t[i - 1][j - 1] + if j < i { t[i - 1][j] } else { 0.0 };
        }
    }
    t
}

impl FastInteraction {
    /// `max_difference` bounds `|F(p) - F(q)|` for every state this operator will see.
    pub fn new<K: Field>(kernel: &K, alpha: f64, degree: usize, max_difference: f64) -> Result<Self> {
        if degree < 3 {
            return Err(Error::invalid(format!("polynomial degree must be at least 3, got {degree}")));
        }
        let poly = OddPolynomial::fit(alpha, max_difference, degree)?;
        Ok(FastInteraction {
            conv: SpectralConvolver::new(kernel)?,
            poly,
            binom: binomial_table(degree + 1),
        })
    }

    pub fn polynomial(&self) -> &OddPolynomial {
        &self.poly
    }

    pub fn shape(&self) -> Shape {
        self.conv.shape()
    }

    /// Largest difference range this operator was fitted for.
    pub fn max_difference(&self) -> f64 {
        self.poly.scale()
    }

    /// Pointwise bound on `|fast - naive|`: the kernel sums to one, so it is the
    /// polynomial's worst fit error.
    pub fn error_bound(&self) -> f64 {
        self.poly.max_error()
    }

    pub fn evaluate(&self, values: &[f64], with_energy: bool) -> Result<FastEval> {
        let size: usize = self.shape().iter().product();
        if values.len() != size {
            return Err(Error::invalid("state size does not match interaction operator"));
        }
        let (lo, hi) = min_max(values);
        let scale = self.poly.scale();
        if hi - lo > scale * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "state range {} exceeds fitted range {scale}",
                hi - lo
            )));
        }
        let degree = self.poly.degree();
        let top = if with_energy { degree + 1 } else { degree };
        let centre = 0.5 * (lo + hi);
        let u: Vec<f64> = values.iter().map(|v| (v - centre) / scale).collect();

        // smoothed[i] = W * u^i for i in 1..=top; index 0 is the constant 1.
        let mut smoothed: Vec<Vec<f64>> = vec![Vec::new(); top + 1];
        let power = |e: usize| -> Vec<f64> { u.iter().map(|x| x.powi(e as i32)).collect() };
        let mut e = 1;
        while e <= top {
            if e < top {
                let (a, b) = self.conv.apply_pair(&power(e), &power(e + 1))?;
                smoothed[e] = a;
                smoothed[e + 1] = b;
                e += 2;
            } else {
                smoothed[e] = self.conv.apply(&power(e))?;
                e += 1;
            }
        }

        let coeffs = self.poly.coeffs();
        let mut out = vec![0.0; size];
        let mut energy = 0.0;
        let mut upow = vec![1.0; top + 1];
        for p in 0..size {
            for i in 1..=top {
                upow[i] = upow[i - 1] * u[p];
            }
            let s = |i: usize| if i == 0 { 1.0 } else { smoothed[i][p] };
            let mut acc = 0.0;
            let mut eacc = 0.0;
            for (j, &c) in coeffs.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let mut term = 0.0;
                for i in 0..=j {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    term += sign * self.binom[j][i] * upow[j - i] * s(i);
                }
                acc += c * term;
                if with_energy {
                    let mut term = 0.0;
                    for i in 0..=j + 1 {
                        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                        term += sign * self.binom[j + 1][i] * upow[j + 1 - i] * s(i);
                    }
                    eacc += c / (j + 1) as f64 * term;
                }
            }
            out[p] = acc;
            energy += eacc;
        }
        Ok(FastEval {
            interaction: out,
            energy: with_energy.then_some(scale * energy),
        })
    }
}

/// Fast interaction fitted on the state's own difference range.
pub fn interaction_fast<F: Field, K: Field>(state: &F, kernel: &K, alpha: f64, degree: usize) -> Result<F> {
    check_shape(state.shape(), kernel.shape())?;
    if degree.is_multiple_of(2) {
        return Err(Error::invalid(format!("polynomial degree must be odd, got {degree}")));
    }
    let (lo, hi) = min_max(state.values());
    if hi - lo == 0.0 {
        return Ok(state.with_values(vec![0.0; state.len()]));
    }
    let op = FastInteraction::new(kernel, alpha, degree, hi - lo)?;
    Ok(state.with_values(op.evaluate(state.values(), false)?.interaction))
}

/// Wilson-Cowan coupling `W * sigma(a)`.
pub fn wc_coupling(conv: &SpectralConvolver, values: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let s: Vec<f64> = values.iter().map(|&v| sigmoid(v, alpha)).collect();
    conv.apply(&s)
}
