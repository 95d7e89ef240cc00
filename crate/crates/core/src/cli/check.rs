//! Fast invariant suite behind the `check` subcommand.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    interaction_fast, interaction_naive, jacobian_probe, run_with_bank, sample_probe_state, Coupling, Model,
    ModelParams, ENERGY_SLACK,
};
use crate::error::Result;
use crate::grid::{conv3_periodic, conv_direct, gaussian3d, l2_norm, Image, Lattice, OrientationVolume};
use crate::lifting::{build_cake_bank, lift, project, CakeFilterBank};
use crate::stimuli::make_white;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn from_result(name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => CheckResult { name, passed, detail },
            Err(e) => CheckResult {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn reconstruction(bank: Option<&Path>) -> Result<(bool, String)> {
    let bank = match bank {
        Some(path) => CakeFilterBank::load(path)?,
        None => build_cake_bank(32, 12, 4)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let f = Image::from_fn(bank.n(), |_, _| rng.gen::<f64>());
        let back = project(&lift(&f, &bank)?);
        let d: Vec<f64> = back.data().iter().zip(f.data()).map(|(x, y)| x - y).collect();
        worst = worst.max(l2_norm(&d) / l2_norm(f.data()));
    }
    Ok((worst <= 1e-10, format!("worst relative error {worst:.3e} (limit 1e-10)")))
}

fn oracle_equivalence() -> Result<(bool, String)> {
    let (n, k) = (8, 4);
    let w = gaussian3d(1.5, 1.0, n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut inter, mut conv) = (0.0f64, 0.0f64);
    for _ in 0..3 {
        let v = OrientationVolume::new(n, k, (0..n * n * k).map(|_| rng.gen::<f64>()).collect())?;
        let fast = interaction_fast(&v, &w, 5.0, 11)?;
        let naive = interaction_naive(&v, &w, 5.0)?;
        inter = inter.max(max_abs_diff(fast.data(), naive.data()));
        conv = conv.max(max_abs_diff(conv3_periodic(&v, &w)?.data(), conv_direct(&v, &w)?.data()));
    }
    Ok((
        inter <= 5e-2 && conv <= 1e-10,
        format!("interaction error {inter:.3e} (limit 5e-2), convolution error {conv:.3e} (limit 1e-10)"),
    ))
}

fn energy_descent() -> Result<(bool, String)> {
    let stim = make_white(64)?;
    let p = ModelParams {
        orientations: 8,
        ..ModelParams::default()
    };
    let bank = build_cake_bank(64, p.orientations, p.bw)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for model in [Model::Lhe2d, Model::Lhe3d] {
        let out = run_with_bank(model, &stim.image, &p, Some(&bank))?;
        let monotone = out.trace.energy_monotone(ENERGY_SLACK);
        ok &= monotone && out.trace.converged;
        detail.push(format!(
            "{model}: {} iterations, monotone {monotone}, converged {}",
            out.trace.iterations, out.trace.converged
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn jacobian_dichotomy() -> Result<(bool, String)> {
    let p = ModelParams::default();
    let w = gaussian3d(1.0, 1.0, 3, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut lhe = 0.0f64;
    for _ in 0..10 {
        let a = sample_probe_state(Coupling::Lhe, [2, 3, 3], 0.3, &p, &mut rng, 1000)?;
        lhe = lhe.max(jacobian_probe(Coupling::Lhe, &a, &w, &p)?);
    }
    let a = Lattice::new([1, 1, 2], vec![0.5, 0.05])?;
    let w2 = Lattice::new([1, 1, 2], vec![0.5, 0.5])?;
    let wc = jacobian_probe(Coupling::Wc, &a, &w2, &p)?;
    let bound = 0.9 * p.nu * p.alpha * 0.5;
    Ok((
        lhe <= 1e-12 && wc >= bound,
        format!("LHE asymmetry {lhe:.3e} (limit 1e-12), WC asymmetry {wc:.3} (needs >= {bound:.3})"),
    ))
}

/// Runs every check; `bank` replaces the freshly built filter bank of the
/// reconstruction check.
pub fn run_checks(bank: Option<&Path>) -> Vec<CheckResult> {
    vec![
        CheckResult::from_result("reconstruction", reconstruction(bank)),
        CheckResult::from_result("oracle-equivalence", oracle_equivalence()),
        CheckResult::from_result("energy-descent", energy_descent()),
        CheckResult::from_result("jacobian-dichotomy", jacobian_dichotomy()),
    ]
}
