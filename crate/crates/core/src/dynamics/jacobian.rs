//! Exact Jacobians of the discrete right-hand sides on small lattices.
//!
//! With the piecewise-linear sigmoid the slope is `alpha` or zero, so the
//! Jacobian is assembled in closed form. LHE yields a symmetric matrix whenever
//! the kernel is even; WC does not.

use nalgebra::DMatrix;
use rand::Rng;

use super::interaction::interaction_naive;
use super::sigmoid::{sigmoid, sigmoid_slope};
use super::ModelParams;
use crate::error::{Error, Result};
use crate::grid::{check_shape, Field, Lattice, Shape};

/// Which interaction the right-hand side uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// `W * sigma(a)`
    Wc,
    /// `sum_q W(p - q) sigma(a_p - a_q)`
    Lhe,
}

/// Largest state size accepted by the probe.
pub const MAX_PROBE_SIZE: usize = 64;
/// Required distance between sigmoid arguments and the kinks.
pub const KINK_MARGIN: f64 = 1e-3;

fn kernel_at(shape: Shape, kernel: &[f64], p: usize, q: usize) -> f64 {
    let [_, nr, nc] = shape;
    let (cp, rp, colp) = (p / (nr * nc), (p / nc) % nr, p % nc);
    let (cq, rq, colq) = (q / (nr * nc), (q / nc) % nr, q % nc);
    let nk = shape[0];
    let dk = (cp + nk - cq) % nk;
    let dr = (rp + nr - rq) % nr;
    let dc = (colp + nc - colq) % nc;
    kernel[(dk * nr + dr) * nc + dc]
}

fn near_kink(x: f64, alpha: f64) -> bool {
    (x.abs() - 1.0 / alpha).abs() < KINK_MARGIN
}

/// Errors if any sigmoid argument is within [`KINK_MARGIN`] of a kink.
fn check_regular(coupling: Coupling, a: &[f64], alpha: f64) -> Result<()> {
    let bad = match coupling {
        Coupling::Wc => a.iter().any(|&x| near_kink(x, alpha)),
        Coupling::Lhe => a.iter().any(|&x| a.iter().any(|&y| near_kink(x - y, alpha))),
    };
    if bad {
        Err(Error::DegenerateState(format!(
            "a sigmoid argument lies within {KINK_MARGIN} of a kink"
        )))
    } else {
        Ok(())
    }
}

/// Right-hand side `-beta a + nu I(a) + h` by direct summation.
pub fn rhs_direct<F: Field, K: Field>(coupling: Coupling, a: &F, kernel: &K, h: &[f64], p: &ModelParams) -> Result<Vec<f64>> {
    check_shape(a.shape(), kernel.shape())?;
    let inter: Vec<f64> = match coupling {
        Coupling::Lhe => interaction_naive(a, kernel, p.alpha)?.values().to_vec(),
        Coupling::Wc => {
            let n = a.len();
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| kernel_at(a.shape(), kernel.values(), i, j) * sigmoid(a.values()[j], p.alpha))
                        .sum()
                })
                .collect()
        }
    };
    Ok(a.values()
        .iter()
        .zip(inter)
        .zip(h)
        .map(|((&x, r), &hh)| -p.beta() * x + p.nu * r + hh)
        .collect())
}

/// Closed-form Jacobian of the right-hand side at `a`.
pub fn analytic_jacobian<F: Field, K: Field>(coupling: Coupling, a: &F, kernel: &K, p: &ModelParams) -> Result<DMatrix<f64>> {
    check_shape(a.shape(), kernel.shape())?;
    let v = a.values();
    check_regular(coupling, v, p.alpha)?;
    let n = v.len();
    let shape = a.shape();
    let w = |i, j| kernel_at(shape, kernel.values(), i, j);
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = -p.beta();
        match coupling {
            Coupling::Wc => {
                for j in 0..n {
                    jac[(i, j)] += p.nu * w(i, j) * sigmoid_slope(v[j], p.alpha);
                }
            }
            Coupling::Lhe => {
                for j in 0..n {
                    if j != i {
                        let s = p.nu * w(i, j) * sigmoid_slope(v[i] - v[j], p.alpha);
                        jac[(i, i)] += s;
                        jac[(i, j)] -= s;
                    }
                }
            }
        }
    }
    Ok(jac)
}

/// Central finite differences of [`rhs_direct`] with the given step.
pub fn finite_difference_jacobian<F: Field, K: Field>(
    coupling: Coupling,
    a: &F,
    kernel: &K,
    p: &ModelParams,
    step: f64,
) -> Result<DMatrix<f64>> {
    let n = a.len();
    let h = vec![0.0; n];
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut up = a.values().to_vec();
        let mut dn = up.clone();
        up[j] += step;
        dn[j] -= step;
        let ru = rhs_direct(coupling, &a.with_values(up), kernel, &h, p)?;
        let rd = rhs_direct(coupling, &a.with_values(dn), kernel, &h, p)?;
        for i in 0..n {
            jac[(i, j)] = (ru[i] - rd[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// `max |J - J^T|` over all entries.
pub fn max_asymmetry(jac: &DMatrix<f64>) -> f64 {
    (jac - jac.transpose()).amax()
}

/// Asymmetry of the exact Jacobian at `a`.
pub fn jacobian_probe<F: Field, K: Field>(coupling: Coupling, a: &F, kernel: &K, p: &ModelParams) -> Result<f64> {
    if a.len() > MAX_PROBE_SIZE {
        return Err(Error::invalid(format!(
            "probe state has {} entries, at most {MAX_PROBE_SIZE} allowed",
            a.len()
        )));
    }
    Ok(max_asymmetry(&analytic_jacobian(coupling, a, kernel, p)?))
}

/// Draws a state uniform in `[-spread, spread]` away from the kinks, retrying
/// up to `attempts` times.
pub fn sample_probe_state<R: Rng>(
    coupling: Coupling,
    shape: Shape,
    spread: f64,
    p: &ModelParams,
    rng: &mut R,
    attempts: usize,
) -> Result<Lattice> {
    let n: usize = shape.iter().product();
    for _ in 0..attempts {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-spread..=spread)).collect();
        if check_regular(coupling, &v, p.alpha).is_ok() {
            return Lattice::new(shape, v);
        }
    }
    Err(Error::DegenerateState(format!(
        "no state clear of the kinks after {attempts} draws"
    )))
}
