//! Right-hand sides, explicit Euler step and the LHE energy.

use super::interaction::{interaction_energy_naive, interaction_naive, wc_coupling, FastInteraction};
use super::jacobian::Coupling;
use super::{InteractionMode, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{check_shape, gaussian2d, gaussian3d, min_max, Field, Image, Lattice, OrientationVolume, Shape, SpectralConvolver};

/// Interaction kernel for a state of the given shape: a 2D Gaussian for one
/// channel, the separable 3D Gaussian otherwise.
pub(crate) fn interaction_kernel(shape: Shape, p: &ModelParams) -> Result<Lattice> {
    let [k, n, m] = shape;
    if n != m {
        return Err(Error::invalid("square planes only"));
    }
    let values = if k == 1 {
        gaussian2d(p.sigma_omega, n)?.values().to_vec()
    } else {
        gaussian3d(p.sigma_omega, p.sigma_orient, n, k)?.values().to_vec()
    };
    Lattice::new(shape, values)
}

/// Evolution operator `a -> -beta a + nu I(a) + h` for a fixed input `h`, with
/// `I` the LHE interaction or the WC coupling.
#[derive(Debug, Clone)]
pub struct Operator {
    coupling: Coupling,
    kernel: Lattice,
    input: Vec<f64>,
    beta: f64,
    nu: f64,
    alpha: f64,
    degree: usize,
    mode: InteractionMode,
    conv: Option<SpectralConvolver>,
    fast: Option<FastInteraction>,
}

impl Operator {
    /// `max_difference` sets the fit range of the fast LHE interaction; states
    /// whose range exceeds it trigger a refit in [`Operator::fit_to`].
    pub fn new(coupling: Coupling, kernel: Lattice, input: Vec<f64>, p: &ModelParams, max_difference: f64) -> Result<Self> {
        if input.len() != kernel.len() {
            return Err(Error::invalid("input does not match kernel shape"));
        }
        let mut op = Operator {
            coupling,
            kernel,
            input,
            beta: p.beta(),
            nu: p.nu,
            alpha: p.alpha,
            degree: p.poly_degree,
            mode: p.interaction,
            conv: None,
            fast: None,
        };
        let square = op.kernel.shape()[1] == op.kernel.shape()[2];
        match (coupling, p.interaction) {
            (Coupling::Wc, _) if square => op.conv = Some(SpectralConvolver::new(&op.kernel)?),
            (Coupling::Lhe, InteractionMode::Fast) if square => op.refit(max_difference)?,
            (_, InteractionMode::Fast) => return Err(Error::invalid("fast evaluation needs square planes")),
            _ => {}
        }
        Ok(op)
    }

    fn refit(&mut self, max_difference: f64) -> Result<()> {
        // A zero range only happens for constant states, where any scale is exact.
        let d = if max_difference > 0.0 { max_difference } else { 1.0 };
        self.fast = Some(FastInteraction::new(&self.kernel, self.alpha, self.degree, d)?);
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        self.kernel.shape()
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Worst polynomial fit error of the fast interaction, if in use.
    pub fn fit_error(&self) -> Option<f64> {
        self.fast.as_ref().map(|f| f.error_bound())
    }

    /// Widens the fast fit range when `a` spans more than it. Returns whether a refit happened.
    pub fn fit_to(&mut self, a: &[f64]) -> Result<bool> {
        if let Some(fast) = &self.fast {
            let (lo, hi) = min_max(a);
            if hi - lo > fast.max_difference() {
                self.refit(1.25 * (hi - lo))?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn check(&self, a: &[f64]) -> Result<()> {
        if a.len() == self.input.len() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "state of {} values does not match operator shape {:?}",
                a.len(),
                self.shape()
            )))
        }
    }

    /// Interaction term and, for LHE with `with_energy`, the pair energy
    /// `sum_p sum_q W(p - q) Sigma(a_p - a_q)`.
    fn interaction(&self, a: &[f64], with_energy: bool) -> Result<(Vec<f64>, Option<f64>)> {
        self.check(a)?;
        match self.coupling {
            Coupling::Wc => {
                let conv = self.conv.as_ref().expect("WC operator has a convolver");
                Ok((wc_coupling(conv, a, self.alpha)?, None))
            }
            Coupling::Lhe => match (self.mode, &self.fast) {
                (InteractionMode::Fast, Some(fast)) => {
                    let eval = fast.evaluate(a, with_energy)?;
                    Ok((eval.interaction, eval.energy))
                }
                _ => {
                    let state = self.kernel.with_values(a.to_vec());
                    let r = interaction_naive(&state, &self.kernel, self.alpha)?;
                    let e = if with_energy {
                        Some(interaction_energy_naive(&state, &self.kernel, self.alpha)?)
                    } else {
                        None
                    };
                    Ok((r.values().to_vec(), e))
                }
            },
        }
    }

    fn assemble(&self, a: &[f64], coupling: Vec<f64>) -> Vec<f64> {
        a.iter()
            .zip(coupling)
            .zip(&self.input)
            .map(|((&x, r), &h)| -self.beta * x + self.nu * r + h)
            .collect()
    }

    fn local_energy(&self, a: &[f64]) -> f64 {
        let mut fid = 0.0;
        let mut sq = 0.0;
        for (&x, &h) in a.iter().zip(&self.input) {
            sq += x * x;
            fid += (x - h) * (x - h);
        }
        0.5 * (self.beta - 1.0) * sq + 0.5 * fid
    }

    pub fn rhs(&self, a: &[f64]) -> Result<Vec<f64>> {
        let (r, _) = self.interaction(a, false)?;
        Ok(self.assemble(a, r))
    }

    /// Right-hand side together with the energy at `a` (LHE only).
    pub fn rhs_with_energy(&self, a: &[f64]) -> Result<(Vec<f64>, Option<f64>)> {
        let lhe = self.coupling == Coupling::Lhe;
        let (r, pair) = self.interaction(a, lhe)?;
        let energy = pair.map(|e| self.local_energy(a) - 0.5 * self.nu * e);
        Ok((self.assemble(a, r), energy))
    }

    /// `(beta - 1)/2 sum a^2 + 1/2 sum (a - h)^2 - nu/2 sum_p sum_q W(p - q) Sigma(a_p - a_q)`.
    /// The fast mode uses the fitted polynomial's primitive in place of `Sigma`,
    /// which makes the energy consistent with the fast right-hand side.
    pub fn energy(&self, a: &[f64]) -> Result<f64> {
        if self.coupling != Coupling::Lhe {
            return Err(Error::invalid("the WC model has no energy"));
        }
        let (_, pair) = self.interaction(a, true)?;
        Ok(self.local_energy(a) - 0.5 * self.nu * pair.unwrap_or(0.0))
    }
}

fn lhe_operator(a: &[f64], shape: Shape, h: Vec<f64>, p: &ModelParams) -> Result<Operator> {
    p.validate()?;
    let kernel = interaction_kernel(shape, p)?;
    let (lo, hi) = min_max(a);
    Operator::new(Coupling::Lhe, kernel, h, p, hi - lo)
}

/// `-(1 + lambda) f + nu R_f + mu + lambda f0` on the image plane.
pub fn rhs_lhe2d(f: &Image, f0: &Image, mu: &Image, p: &ModelParams) -> Result<Image> {
    check_shape(f.shape(), f0.shape())?;
    check_shape(f.shape(), mu.shape())?;
    let a: Vec<f64> = f.data().iter().map(|v| v - 0.5).collect();
    let h = activation_input(mu.data(), f0.data(), p.lambda);
    let op = lhe_operator(&a, f.shape(), h, p)?;
    Image::new(f.n(), op.rhs(&a)?)
}

/// Volume analogue of [`rhs_lhe2d`] with `F0` the lifted stimulus and `G0` the lifted local mean.
pub fn rhs_lhe3d(
    f: &OrientationVolume,
    f0: &OrientationVolume,
    g0: &OrientationVolume,
    p: &ModelParams,
) -> Result<OrientationVolume> {
    check_shape(f.shape(), f0.shape())?;
    check_shape(f.shape(), g0.shape())?;
    let a: Vec<f64> = f.data().iter().map(|v| v - 0.5).collect();
    let h = activation_input(g0.data(), f0.data(), p.lambda);
    let op = lhe_operator(&a, f.shape(), h, p)?;
    OrientationVolume::new(f.n(), f.k(), op.rhs(&a)?)
}

/// `-beta a + nu W * sigma(a) + h` for an activation state `a` and input `h`.
pub fn rhs_wc<F: Field>(state: &F, h: &F, p: &ModelParams) -> Result<F> {
    check_shape(state.shape(), h.shape())?;
    p.validate()?;
    let kernel = interaction_kernel(state.shape(), p)?;
    let op = Operator::new(Coupling::Wc, kernel, h.values().to_vec(), p, 0.0)?;
    Ok(state.with_values(op.rhs(state.values())?))
}

/// Forward Euler update `state + dt * rhs`.
pub fn step_explicit<F: Field>(state: &F, rhs: &F, dt: f64) -> Result<F> {
    check_shape(state.shape(), rhs.shape())?;
    let out = state.values().iter().zip(rhs.values()).map(|(s, r)| s + dt * r).collect();
    Ok(state.with_values(out))
}

/// LHE energy of the activation `a` for the activation-convention input `h`.
pub fn energy_lhe<F: Field>(a: &F, h: &F, p: &ModelParams) -> Result<f64> {
    check_shape(a.shape(), h.shape())?;
    let op = lhe_operator(a.values(), a.shape(), h.values().to_vec(), p)?;
    op.energy(a.values())
}

/// `local + lambda stimulus - (1 + lambda)/2`: the input in the activation convention.
pub(crate) fn activation_input(local: &[f64], stimulus: &[f64], lambda: f64) -> Vec<f64> {
    local
        .iter()
        .zip(stimulus)
        .map(|(m, s)| m + lambda * s - 0.5 * (1.0 + lambda))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::sigmoid::sigmoid;
    use crate::grid::{conv_direct, local_mean};
    use crate::lifting::{build_cake_bank, lift};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_params() -> ModelParams {
        ModelParams {
            interaction: InteractionMode::Naive,
            sigma_omega: 1.5,
            sigma_mu: 1.0,
            ..ModelParams::default()
        }
    }

    fn random_image(n: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(n, |_, _| rng.gen::<f64>())
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn constants_are_lhe_equilibria() {
        let p = ModelParams::default();
        let c = Image::constant(16, 0.3);
        let r = rhs_lhe2d(&c, &c, &c, &p).unwrap();
        assert!(r.data().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn without_interaction_the_fixed_point_is_linear() {
        let p = ModelParams { nu: 0.0, ..ModelParams::default() };
        let f0 = random_image(16, 3);
        let mu = local_mean(&f0, p.sigma_mu).unwrap();
        let star: Vec<f64> = mu
            .data()
            .iter()
            .zip(f0.data())
            .map(|(m, f)| (m + p.lambda * f) / (1.0 + p.lambda))
            .collect();
        let star = Image::new(16, star).unwrap();
        let r = rhs_lhe2d(&star, &f0, &mu, &p).unwrap();
        assert!(r.data().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn lhe2d_matches_direct_assembly() {
        let p = naive_params();
        let f = random_image(8, 1);
        let f0 = random_image(8, 2);
        let mu = local_mean(&f0, p.sigma_mu).unwrap();
        let got = rhs_lhe2d(&f, &f0, &mu, &p).unwrap();
        let w = gaussian2d(p.sigma_omega, 8).unwrap();
        let n = 8;
        for i in 0..n * n {
            let (r, c) = (i / n, i % n);
            let mut inter = 0.0;
            for j in 0..n * n {
                let (r2, c2) = (j / n, j % n);
                let dr = (r as isize - r2 as isize).rem_euclid(n as isize);
                let dc = (c as isize - c2 as isize).rem_euclid(n as isize);
                inter += w.at(dr, dc) * sigmoid(f.data()[i] - f.data()[j], p.alpha);
            }
            let want = -(1.0 + p.lambda) * f.data()[i] + p.nu * inter + mu.data()[i] + p.lambda * f0.data()[i];
            assert!((got.data()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn lhe3d_constant_equilibrium_and_linear_fixed_point() {
        let bank = build_cake_bank(8, 4, 2).unwrap();
        let p = ModelParams { orientations: 4, ..naive_params() };
        let c = lift(&Image::constant(8, 0.6), &bank).unwrap();
        let r = rhs_lhe3d(&c, &c, &c, &p).unwrap();
        assert!(r.data().iter().all(|v| v.abs() < 1e-12));

        let p = ModelParams { nu: 0.0, ..p };
        let f0 = random_image(8, 5);
        let big_f0 = lift(&f0, &bank).unwrap();
        let g0 = lift(&local_mean(&f0, p.sigma_mu).unwrap(), &bank).unwrap();
        let star: Vec<f64> = g0
            .data()
            .iter()
            .zip(big_f0.data())
            .map(|(g, f)| (g + p.lambda * f) / (1.0 + p.lambda))
            .collect();
        let star = OrientationVolume::new(8, 4, star).unwrap();
        let r = rhs_lhe3d(&star, &big_f0, &g0, &p).unwrap();
        assert!(r.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn lhe3d_matches_direct_assembly() {
        let p = ModelParams { orientations: 4, ..naive_params() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut vol = || OrientationVolume::new(8, 4, (0..256).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let (f, f0, g0) = (vol(), vol(), vol());
        let got = rhs_lhe3d(&f, &f0, &g0, &p).unwrap();
        let w = gaussian3d(p.sigma_omega, p.sigma_orient, 8, 4).unwrap();
        let r = crate::dynamics::interaction_naive(&f, &w, p.alpha).unwrap();
        for i in 0..256 {
            let want = -1.5 * f.data()[i] + 0.5 * r.data()[i] + g0.data()[i] + 0.5 * f0.data()[i];
            assert!((got.data()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn wc_closed_forms() {
        let p = ModelParams::default();
        let z = Image::constant(8, 0.0);
        assert!(rhs_wc(&z, &z, &p).unwrap().data().iter().all(|v| v.abs() < 1e-15));
        let c = 0.1;
        let h = Image::constant(8, 0.3);
        let r = rhs_wc(&Image::constant(8, c), &h, &p).unwrap();
        let want = -p.beta() * c + p.nu * p.alpha * c + 0.3;
        assert!(r.data().iter().all(|v| (v - want).abs() < 1e-12));
    }

    #[test]
    fn wc_matches_direct_assembly() {
        let p = ModelParams { sigma_omega: 1.5, ..ModelParams::default() };
        let a = random_image(8, 8).with_values(random_image(8, 8).data().iter().map(|v| v - 0.5).collect());
        let h = random_image(8, 9);
        let got = rhs_wc(&a, &h, &p).unwrap();
        let w = gaussian2d(p.sigma_omega, 8).unwrap();
        let s = a.with_values(a.data().iter().map(|&v| sigmoid(v, p.alpha)).collect());
        let conv = conv_direct(&s, &w).unwrap();
        for i in 0..64 {
            let want = -p.beta() * a.data()[i] + p.nu * conv.data()[i] + h.data()[i];
            assert!((got.data()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn inhibitory_sigmoid_equals_negated_weight() {
        let p = ModelParams::default();
        let a = random_image(8, 4).with_values(random_image(8, 4).data().iter().map(|v| v - 0.5).collect());
        let h = random_image(8, 6);
        let r = rhs_wc(&a, &h, &p).unwrap();
        let w = gaussian2d(p.sigma_omega, 8).unwrap();
        let inhibitory = a.with_values(a.data().iter().map(|&v| -sigmoid(v, p.alpha)).collect());
        let conv = conv_direct(&inhibitory, &w).unwrap();
        let flipped: Vec<f64> = (0..64)
            .map(|i| -p.beta() * a.data()[i] + (-p.nu) * conv.data()[i] + h.data()[i])
            .collect();
        assert!(max_abs_diff(r.data(), &flipped) < 1e-12);
    }

    #[test]
    fn euler_step_arithmetic() {
        let s = Image::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let zero = Image::constant(2, 0.0);
        assert_eq!(step_explicit(&s, &zero, 0.1).unwrap(), s);
        let r = Image::new(2, vec![-1.0, 0.5, 2.0, 0.0]).unwrap();
        let out = step_explicit(&s, &r, 0.1).unwrap();
        assert!(max_abs_diff(out.data(), &[0.9, 2.05, 3.2, 4.0]) < 1e-15);
        let half = step_explicit(&s, &r, 0.05).unwrap();
        let d1: Vec<f64> = out.data().iter().zip(s.data()).map(|(o, s)| o - s).collect();
        let d2: Vec<f64> = half.data().iter().zip(s.data()).map(|(o, s)| 2.0 * (o - s)).collect();
        assert!(max_abs_diff(&d1, &d2) < 1e-15);
    }

    #[test]
    fn energy_closed_forms() {
        let p = ModelParams::default();
        let z = Image::constant(8, 0.0);
        assert_eq!(energy_lhe(&z, &z, &p).unwrap(), 0.0);
        let c = Image::constant(8, 0.2);
        let want = 0.5 * (p.beta() - 1.0) * 64.0 * 0.04;
        assert!((energy_lhe(&c, &c, &p).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn energy_gradient_is_minus_rhs() {
        let p = naive_params();
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = Image::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        let h = Image::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        let kernel = interaction_kernel(a.shape(), &p).unwrap();
        let op = Operator::new(Coupling::Lhe, kernel, h.data().to_vec(), &p, 0.0).unwrap();
        let rhs = op.rhs(a.data()).unwrap();
        let step = 1e-6;
        for i in 0..n * n {
            let mut up = a.data().to_vec();
            let mut dn = a.data().to_vec();
            up[i] += step;
            dn[i] -= step;
            let g = (op.energy(&up).unwrap() - op.energy(&dn).unwrap()) / (2.0 * step);
            assert!((g + rhs[i]).abs() < 1e-5, "{i}: {g} vs {}", rhs[i]);
        }
    }

    #[test]
    fn fast_energy_gradient_is_minus_fast_rhs() {
        let p = ModelParams { sigma_omega: 1.5, ..ModelParams::default() };
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = Image::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        let h = Image::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        let kernel = interaction_kernel(a.shape(), &p).unwrap();
        let op = Operator::new(Coupling::Lhe, kernel, h.data().to_vec(), &p, 2.0).unwrap();
        let rhs = op.rhs(a.data()).unwrap();
        let step = 1e-6;
        for i in [0, 9, 33, 63] {
            let mut up = a.data().to_vec();
            let mut dn = a.data().to_vec();
            up[i] += step;
            dn[i] -= step;
            let g = (op.energy(&up).unwrap() - op.energy(&dn).unwrap()) / (2.0 * step);
            assert!((g + rhs[i]).abs() < 1e-6, "{i}: {g} vs {}", rhs[i]);
        }
    }

    #[test]
    fn fit_to_widens_range() {
        let p = ModelParams::default();
        let kernel = interaction_kernel([1, 8, 8], &p).unwrap();
        let mut op = Operator::new(Coupling::Lhe, kernel, vec![0.0; 64], &p, 0.5).unwrap();
        let a: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        assert!(op.rhs(&a).is_err());
        assert!(op.fit_to(&a).unwrap());
        assert!(op.rhs(&a).is_ok());
        assert!(!op.fit_to(&a).unwrap());
    }
}
