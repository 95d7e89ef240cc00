//! Wilson-Cowan and LHE evolution on images and orientation volumes.
//!
//! Every model evolves the activation `a = F - 1/2` internally and converts at
//! the run boundary.

pub mod interaction;
mod jacobian;
mod operator;
pub mod sigmoid;
mod solver;

use std::fmt;
use std::str::FromStr;

pub use interaction::{interaction_energy_naive, interaction_fast, interaction_naive, FastInteraction};
pub use jacobian::{
    analytic_jacobian, finite_difference_jacobian, jacobian_probe, max_asymmetry, rhs_direct, sample_probe_state, Coupling,
    KINK_MARGIN, MAX_PROBE_SIZE,
};
pub use operator::{energy_lhe, rhs_lhe2d, rhs_lhe3d, rhs_wc, step_explicit, Operator};
pub use sigmoid::{sigma_primitive, sigmoid, sigmoid_slope, OddPolynomial};
pub use solver::{run, run_with_bank, DisplayMap, EvolutionTrace, RunOutput, ENERGY_SLACK};

use crate::error::{Error, Result};

/// How the LHE interaction term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionMode {
    /// Odd-polynomial expansion evaluated with spectral convolutions.
    Fast,
    /// Direct summation over every pair of grid points. Only practical on tiny grids.
    Naive,
}

impl FromStr for InteractionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(InteractionMode::Fast),
            "naive" => Ok(InteractionMode::Naive),
            _ => Err(Error::invalid(format!("unknown interaction mode '{s}'"))),
        }
    }
}

impl fmt::Display for InteractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InteractionMode::Fast => "fast",
            InteractionMode::Naive => "naive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lambda: f64,
    pub nu: f64,
    pub alpha: f64,
    /// Replaces the derived `1 + lambda` when set. Only meaningful for WC experiments.
    pub beta_override: Option<f64>,
    /// Local-mean standard deviation in pixels.
    pub sigma_mu: f64,
    /// Spatial standard deviation of the interaction kernel in pixels.
    pub sigma_omega: f64,
    /// Orientation standard deviation of the 3D interaction kernel in channels.
    pub sigma_orient: f64,
    pub dt: f64,
    pub tau: f64,
    pub max_iters: usize,
    pub poly_degree: usize,
    pub orientations: usize,
    pub bw: usize,
    pub interaction: InteractionMode,
    /// Number of times the time step may be halved when the LHE energy rises.
    pub max_dt_halvings: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            lambda: 0.5,
            nu: 0.5,
            alpha: 5.0,
            beta_override: None,
            sigma_mu: 3.0,
            sigma_omega: 8.0,
            sigma_orient: 1.0,
            dt: 0.1,
            tau: 1e-2,
            max_iters: 2000,
            poly_degree: 11,
            orientations: 30,
            bw: 4,
            interaction: InteractionMode::Fast,
            max_dt_halvings: 4,
        }
    }
}

impl ModelParams {
    pub fn beta(&self) -> f64 {
        self.beta_override.unwrap_or(1.0 + self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !self.nu.is_finite() {
            return Err(Error::invalid("nu must be finite"));
        }
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return Err(Error::invalid(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        if let Some(b) = self.beta_override {
            positive("beta", b)?;
        }
        positive("sigma_mu", self.sigma_mu)?;
        positive("sigma_omega", self.sigma_omega)?;
        positive("sigma_orient", self.sigma_orient)?;
        positive("dt", self.dt)?;
        positive("tau", self.tau)?;
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if self.poly_degree < 3 || self.poly_degree.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "polynomial degree must be odd and at least 3, got {}",
                self.poly_degree
            )));
        }
        if self.orientations < 2 {
            return Err(Error::invalid("at least two orientations are required"));
        }
        if self.bw == 0 {
            return Err(Error::invalid("bw must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Wc2d,
    Wc3d,
    Lhe2d,
    Lhe3d,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Wc2d, Model::Wc3d, Model::Lhe2d, Model::Lhe3d];

    pub fn is_lhe(self) -> bool {
        matches!(self, Model::Lhe2d | Model::Lhe3d)
    }

    pub fn is_lifted(self) -> bool {
        matches!(self, Model::Wc3d | Model::Lhe3d)
    }

    pub fn coupling(self) -> Coupling {
        if self.is_lhe() {
            Coupling::Lhe
        } else {
            Coupling::Wc
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Wc2d => "wc2d",
            Model::Wc3d => "wc3d",
            Model::Lhe2d => "lhe2d",
            Model::Lhe3d => "lhe3d",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        Model::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown model '{s}'")))
    }
}
