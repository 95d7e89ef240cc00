//! Explicit Euler evolution with the relative-update stopping rule.

use std::fmt::Write as _;

use super::operator::{activation_input, interaction_kernel, Operator};
use super::{Model, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{l2_norm, local_mean, min_max, Field, Image, OrientationVolume};
use crate::lifting::{build_cake_bank, lift, project, CakeFilterBank};

/// Relative slack allowed on the per-step energy comparison.
pub const ENERGY_SLACK: f64 = 1e-12;
const MAX_REFITS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub iterations: usize,
    /// `||F^{l+1} - F^l|| / ||F^l||` for each iteration.
    pub relative_updates: Vec<f64>,
    /// Energy of the initial state, LHE models only.
    pub initial_energy: Option<f64>,
    /// Energy after each iteration, LHE models only.
    pub energies: Option<Vec<f64>>,
    /// Energy of the state before each iteration under the functional used for
    /// that iteration. Differs from the previous entry of `energies` only after
    /// the fast interaction was refitted to a wider range.
    pub reference_energies: Option<Vec<f64>>,
    /// Number of times the fast interaction was refitted.
    pub refits: usize,
    pub converged: bool,
    /// Time step in use at the end of the run.
    pub dt: f64,
    pub dt_halvings: usize,
}

impl EvolutionTrace {
    pub fn final_update(&self) -> Option<f64> {
        self.relative_updates.last().copied()
    }

    /// True when no step raised the energy by more than the relative `slack`.
    pub fn energy_monotone(&self, slack: f64) -> bool {
        match (&self.energies, &self.reference_energies) {
            (Some(es), Some(refs)) => es
                .iter()
                .zip(refs)
                .all(|(&e, &prev)| e <= prev + slack * (1.0 + prev.abs())),
            _ => true,
        }
    }

    /// `iteration,relative_update,energy`; row 0 holds the initial energy.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,relative_update,energy\n");
        let fmt_e = |e: Option<f64>| e.map(|v| format!("{v:.17e}")).unwrap_or_default();
        writeln!(s, "0,,{}", fmt_e(self.initial_energy)).unwrap();
        for (i, u) in self.relative_updates.iter().enumerate() {
            let e = self.energies.as_ref().map(|es| es[i]);
            writeln!(s, "{},{u:.17e},{}", i + 1, fmt_e(e)).unwrap();
        }
        s
    }
}

/// Affine map `display = scale * raw + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplayMap {
    pub scale: f64,
    pub offset: f64,
}

impl DisplayMap {
    pub const IDENTITY: DisplayMap = DisplayMap { scale: 1.0, offset: 0.0 };

    /// Map sending the range of `values` onto `[0, 1]`; identity for constants.
    pub fn unit_range(values: &[f64]) -> Self {
        let (lo, hi) = min_max(values);
        if hi > lo {
            DisplayMap {
                scale: 1.0 / (hi - lo),
                offset: -lo / (hi - lo),
            }
        } else {
            DisplayMap::IDENTITY
        }
    }

    pub fn apply(&self, img: &Image) -> Image {
        img.with_values(img.data().iter().map(|v| self.scale * v + self.offset).collect())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub model: Model,
    /// Output for display: the raw output for plane models, the projection
    /// rescaled to `[0, 1]` for lifted ones.
    pub image: Image,
    /// Unscaled output `f = a + 1/2`, projected for lifted models.
    pub raw: Image,
    pub display_map: DisplayMap,
    pub trace: EvolutionTrace,
    /// Worst polynomial fit error of the fast interaction, when used.
    pub fit_error: Option<f64>,
    pub beta: f64,
}

/// Runs `model` on the stimulus `f0`, building the filter bank when needed.
pub fn run(model: Model, f0: &Image, p: &ModelParams) -> Result<RunOutput> {
    if model.is_lifted() {
        let bank = build_cake_bank(f0.n(), p.orientations, p.bw)?;
        run_with_bank(model, f0, p, Some(&bank))
    } else {
        run_with_bank(model, f0, p, None)
    }
}

/// As [`run`] with a caller-supplied bank for lifted models.
pub fn run_with_bank(model: Model, f0: &Image, p: &ModelParams, bank: Option<&CakeFilterBank>) -> Result<RunOutput> {
    p.validate()?;
    let mu = local_mean(f0, p.sigma_mu)?;
    let (stimulus, local, shape) = if model.is_lifted() {
        let bank = bank.ok_or_else(|| Error::invalid("lifted models need a filter bank"))?;
        if bank.n() != f0.n() {
            return Err(Error::ShapeMismatch {
                expected: [bank.k(), bank.n(), bank.n()],
                actual: f0.shape(),
            });
        }
        let big_f0 = lift(f0, bank)?;
        let g0 = lift(&mu, bank)?;
        let shape = big_f0.shape();
        (big_f0.values().to_vec(), g0.values().to_vec(), shape)
    } else {
        (f0.data().to_vec(), mu.data().to_vec(), f0.shape())
    };
    let h = activation_input(&local, &stimulus, p.lambda);
    let a0: Vec<f64> = stimulus.iter().map(|v| v - 0.5).collect();

    let (a_lo, a_hi) = min_max(&a0);
    let kernel = interaction_kernel(shape, p)?;
    let mut op = Operator::new(model.coupling(), kernel, h, p, 1.1 * (a_hi - a_lo))?;

    let (a, trace) = evolve(&mut op, a0, model.is_lhe(), p)?;
    let f: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
    let raw = if model.is_lifted() {
        project(&OrientationVolume::new(shape[1], shape[0], f)?)
    } else {
        Image::new(f0.n(), f)?
    };
    let display_map = if model.is_lifted() {
        DisplayMap::unit_range(raw.data())
    } else {
        DisplayMap::IDENTITY
    };
    Ok(RunOutput {
        model,
        image: display_map.apply(&raw),
        raw,
        display_map,
        trace,
        fit_error: op.fit_error(),
        beta: p.beta(),
    })
}

fn evolve(op: &mut Operator, mut a: Vec<f64>, lhe: bool, p: &ModelParams) -> Result<(Vec<f64>, EvolutionTrace)> {
    let mut dt = p.dt;
    let mut halvings = 0;
    let mut refits = 0;
    let (mut rhs, mut energy) = op.rhs_with_energy(&a)?;
    let mut trace = EvolutionTrace {
        iterations: 0,
        relative_updates: Vec::new(),
        initial_energy: energy,
        energies: lhe.then(Vec::new),
        reference_energies: lhe.then(Vec::new),
        refits: 0,
        converged: false,
        dt,
        dt_halvings: 0,
    };
    for _ in 0..p.max_iters {
        let (next, next_rhs, next_energy) = loop {
            let next: Vec<f64> = a.iter().zip(&rhs).map(|(x, r)| x + dt * r).collect();
            if op.fit_to(&next)? {
                refits += 1;
                if refits > MAX_REFITS {
                    return Err(Error::invalid("state range keeps growing; the evolution is unstable"));
                }
                (rhs, energy) = op.rhs_with_energy(&a)?;
                if trace.iterations == 0 {
                    trace.initial_energy = energy;
                }
                continue;
            }
            let (next_rhs, next_energy) = op.rhs_with_energy(&next)?;
            if let (Some(e_new), Some(e_old)) = (next_energy, energy) {
                if e_new > e_old + ENERGY_SLACK * (1.0 + e_old.abs()) && halvings < p.max_dt_halvings {
                    dt *= 0.5;
                    halvings += 1;
                    continue;
                }
            }
            break (next, next_rhs, next_energy);
        };
        let diff: f64 = next.iter().zip(&a).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let norm = a.iter().map(|x| (x + 0.5) * (x + 0.5)).sum::<f64>().sqrt();
        let rel = if norm > 0.0 { diff / norm } else { diff };
        trace.iterations += 1;
        trace.relative_updates.push(rel);
        if let (Some(es), Some(e)) = (trace.energies.as_mut(), next_energy) {
            es.push(e);
        }
        if let (Some(refs), Some(e)) = (trace.reference_energies.as_mut(), energy) {
            refs.push(e);
        }
        a = next;
        rhs = next_rhs;
        energy = next_energy;
        if rel <= p.tau {
            trace.converged = true;
            break;
        }
    }
    trace.dt = dt;
    trace.dt_halvings = halvings;
    trace.refits = refits;
    debug_assert!(l2_norm(&a).is_finite());
    Ok((a, trace))
}
