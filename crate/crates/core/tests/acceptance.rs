//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line with
//! its measurements and wall-clock time; the binary exits non-zero if any
//! criterion fails. Runs without the test harness so the lines are always shown.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use neurofield::analysis::{grating_amplitude, Completion};
use neurofield::cli::report::{measure, profile_csv};
use neurofield::dynamics::{
    analytic_jacobian, finite_difference_jacobian, interaction_fast, interaction_naive, jacobian_probe,
    run_with_bank, sample_probe_state, Coupling, Model, ModelParams, RunOutput, ENERGY_SLACK,
};
use neurofield::grid::{
    conv2_periodic, conv3_periodic, conv_direct, gaussian2d, gaussian3d, io, Image, Kernel2D, Kernel3D, Lattice,
    OrientationVolume,
};
use neurofield::lifting::{build_cake_bank, lift, project, CakeFilterBank};
use neurofield::stimuli::{
    all_stimuli, make_grating_induction_default, make_luminance, make_poggendorff_default, make_sbc, make_white,
    Layout, Stimulus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Size of the illusion experiments.
const DESK_N: usize = 100;
/// Orientation count of the brightness and grating experiments.
const DESK_K: usize = 12;
/// Orientation count of the Poggendorff experiments, which keep the default.
const POGG_K: usize = 30;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: usize, name: &str, limit: Duration, start: Instant, outcome: Outcome) -> bool {
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    let passed = outcome.passed && in_time;
    println!(
        "criterion {id} {name}: {} ({}; {:.1}s of {}s)",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    passed
}

fn rel_err(a: &Image, b: &Image) -> f64 {
    let num: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.data().iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn reconstruction() -> Outcome {
    let n = 64;
    let bank = build_cake_bank(n, 12, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut images: Vec<Image> = (0..20).map(|_| Image::from_fn(n, |_, _| rng.gen::<f64>())).collect();
    images.extend(all_stimuli(n).unwrap().into_iter().map(|s| s.image));
    images.push(make_grating_induction_default(n, PI / 3.0).unwrap().image);
    let worst = images
        .iter()
        .map(|f| rel_err(&project(&lift(f, &bank).unwrap()), f))
        .fold(0.0, f64::max);
    Outcome {
        passed: worst <= 1e-10,
        detail: format!("worst relative error {worst:.2e} over {} images", images.len()),
    }
}

fn oracle_equivalence() -> Outcome {
    let (n, k) = (8, 4);
    let w = gaussian3d(1.5, 1.0, n, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut inter = 0.0f64;
    for _ in 0..10 {
        let v = OrientationVolume::new(n, k, (0..n * n * k).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let fast = interaction_fast(&v, &w, 5.0, 11).unwrap();
        let naive = interaction_naive(&v, &w, 5.0).unwrap();
        inter = inter.max(max_abs_diff(fast.data(), naive.data()));
    }
    let mut conv = 0.0f64;
    for _ in 0..3 {
        let f = Image::from_fn(12, |_, _| rng.gen::<f64>());
        let k2 = Kernel2D::from_weights(12, (0..144).map(|_| rng.gen::<f64>()).collect()).unwrap();
        conv = conv.max(max_abs_diff(conv2_periodic(&f, &k2).unwrap().data(), conv_direct(&f, &k2).unwrap().data()));
        let v = OrientationVolume::new(6, 4, (0..144).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let k3 = Kernel3D::from_weights(6, 4, (0..144).map(|_| rng.gen::<f64>()).collect()).unwrap();
        conv = conv.max(max_abs_diff(conv3_periodic(&v, &k3).unwrap().data(), conv_direct(&v, &k3).unwrap().data()));
        let g = gaussian2d(1.3, 12).unwrap();
        conv = conv.max(max_abs_diff(conv2_periodic(&f, &g).unwrap().data(), conv_direct(&f, &g).unwrap().data()));
    }
    Outcome {
        passed: inter <= 5e-2 && conv <= 1e-10,
        detail: format!("interaction max error {inter:.2e}, convolution max error {conv:.2e}"),
    }
}

fn energy_descent() -> Outcome {
    let n = 64;
    let p = ModelParams {
        orientations: 12,
        ..ModelParams::default()
    };
    let bank = build_cake_bank(n, p.orientations, p.bw).unwrap();
    let mut failures = Vec::new();
    let mut worst_update = 0.0f64;
    let mut max_iters = 0;
    for stim in all_stimuli(n).unwrap() {
        for model in [Model::Lhe2d, Model::Lhe3d] {
            let out = run_with_bank(model, &stim.image, &p, Some(&bank)).unwrap();
            let update = out.trace.final_update().unwrap_or(0.0);
            worst_update = worst_update.max(update);
            max_iters = max_iters.max(out.trace.iterations);
            let ok = out.trace.energy_monotone(ENERGY_SLACK) && out.trace.converged && update <= p.tau;
            if !ok {
                failures.push(format!("{}/{model}", stim.name));
            }
        }
    }
    Outcome {
        passed: failures.is_empty(),
        detail: format!(
            "10 runs, at most {max_iters} iterations, worst final update {worst_update:.2e}, failures {failures:?}"
        ),
    }
}

fn jacobian_dichotomy() -> Outcome {
    let p = ModelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w3 = gaussian3d(1.0, 1.0, 3, 2).unwrap();
    let mut lhe = 0.0f64;
    for _ in 0..50 {
        let a = sample_probe_state(Coupling::Lhe, [2, 3, 3], 0.3, &p, &mut rng, 1000).unwrap();
        lhe = lhe.max(jacobian_probe(Coupling::Lhe, &a, &w3, &p).unwrap());
    }
    // Mixed regime: one unit on the saturated branch, one on the linear branch.
    let w_ij = 0.5;
    let a = Lattice::new([1, 1, 2], vec![0.5, 0.05]).unwrap();
    let w2 = Lattice::new([1, 1, 2], vec![w_ij, w_ij]).unwrap();
    let wc = jacobian_probe(Coupling::Wc, &a, &w2, &p).unwrap();
    let bound = 0.9 * p.nu * p.alpha * w_ij;
    let mut fd = 0.0f64;
    let w4 = gaussian2d(1.0, 4).unwrap();
    for coupling in [Coupling::Wc, Coupling::Lhe] {
        for _ in 0..3 {
            let s = sample_probe_state(coupling, [1, 4, 4], 0.3, &p, &mut rng, 1000).unwrap();
            let exact = analytic_jacobian(coupling, &s, &w4, &p).unwrap();
            let approx = finite_difference_jacobian(coupling, &s, &w4, &p, 1e-6).unwrap();
            fd = fd.max((exact - approx).amax());
        }
    }
    Outcome {
        passed: lhe <= 1e-12 && wc >= bound && fd <= 1e-5,
        detail: format!(
            "LHE asymmetry {lhe:.1e}, WC asymmetry {wc:.3} (bound {bound:.3}), finite-difference gap {fd:.1e}"
        ),
    }
}

/// Byte artefacts of one run, compared across repetitions.
fn artefacts(stim: &Stimulus, out: &RunOutput) -> Vec<u8> {
    let mut bytes = io::encode_png(&out.image).unwrap();
    bytes.extend(out.trace.to_csv().into_bytes());
    bytes.extend(profile_csv(stim, &out.image).unwrap().into_bytes());
    for m in measure(stim, &out.image).unwrap() {
        bytes.extend(m.csv_row(&stim.name, out.model.name()).into_bytes());
    }
    bytes
}

fn illusion_params(sigma_mu: f64, sigma_omega: f64, lambda: f64, bank: &CakeFilterBank) -> ModelParams {
    ModelParams {
        sigma_mu,
        sigma_omega,
        lambda,
        orientations: bank.k(),
        ..ModelParams::default()
    }
}

fn non_oriented(bank: &CakeFilterBank, record: &mut Vec<Vec<u8>>) -> Outcome {
    let p = illusion_params(3.0, 8.0, 0.5, bank);
    let mut ok = true;
    let mut detail = Vec::new();
    for stim in [make_white(DESK_N), make_sbc(DESK_N), make_luminance(DESK_N)] {
        let stim = stim.unwrap();
        for model in [Model::Lhe2d, Model::Lhe3d] {
            let out = run_with_bank(model, &stim.image, &p, Some(bank)).unwrap();
            let rows = measure(&stim, &out.image).unwrap();
            let agree = rows.iter().all(|m| m.agrees == Some(true));
            ok &= agree && out.trace.converged;
            let margin = rows[0].value.unwrap();
            detail.push(format!("{}/{model} {} {margin:+.3}", stim.name, rows[0].result));
            record.push(artefacts(&stim, &out));
        }
    }
    Outcome {
        passed: ok,
        detail: detail.join(", "),
    }
}

fn bar_amplitude(stim: &Stimulus, img: &Image) -> f64 {
    let bar: Vec<_> = stim.targets.iter().collect();
    grating_amplitude(img, &bar).unwrap()
}

fn grating_induction(bank: &CakeFilterBank, record: &mut Vec<Vec<u8>>) -> Outcome {
    let p = illusion_params(10.0, 5.0, 0.5, bank);
    let orthogonal = make_grating_induction_default(DESK_N, PI / 2.0).unwrap();
    let oblique = make_grating_induction_default(DESK_N, PI / 3.0).unwrap();
    let mut amp = |model: Model, stim: &Stimulus| {
        let out = run_with_bank(model, &stim.image, &p, Some(bank)).unwrap();
        record.push(artefacts(stim, &out));
        let rows = measure(stim, &out.image).unwrap();
        let counterphase = rows.iter().filter(|m| m.measure == "comparison").all(|m| m.agrees == Some(true));
        (bar_amplitude(stim, &out.image), counterphase, out.trace.converged)
    };
    let (a3_90, counter_90, c1) = amp(Model::Lhe3d, &orthogonal);
    let (a3_60, _, c2) = amp(Model::Lhe3d, &oblique);
    let (a2_90, _, c3) = amp(Model::Lhe2d, &orthogonal);
    let (a2_60, _, c4) = amp(Model::Lhe2d, &oblique);
    let passed = counter_90 && a3_90 > a3_60 && a3_60 > 0.0 && a2_90 < a3_60 && a2_60 < a3_60 && c1 && c2 && c3 && c4;
    Outcome {
        passed,
        detail: format!(
            "LHE-3D counterphase {counter_90}, amplitude 90deg {a3_90:.3} vs 60deg {a3_60:.3}; \
             LHE-2D amplitude {a2_90:.3} / {a2_60:.3}"
        ),
    }
}

fn completion(model: Model, p: &ModelParams, bank: &CakeFilterBank, record: &mut Vec<Vec<u8>>) -> Completion {
    let stim = make_poggendorff_default(DESK_N).unwrap();
    let Layout::Poggendorff(layout) = &stim.layout else { unreachable!() };
    let out = run_with_bank(model, &stim.image, p, Some(bank)).unwrap();
    assert!(out.trace.converged, "{model} did not converge");
    record.push(artefacts(&stim, &out));
    neurofield::analysis::poggendorff_offset(&out.image, layout).unwrap()
}

fn poggendorff(bank: &CakeFilterBank, record: &mut Vec<Vec<u8>>) -> Outcome {
    let p = illusion_params(3.0, 10.0, 0.5, bank);
    let lhe = completion(Model::Lhe3d, &p, bank, record);
    let wc = completion(Model::Wc3d, &p, bank, record);
    let passed = match (lhe.offset(), wc.offset()) {
        (Some(d), None) => d < 0.0,
        (Some(d), Some(e)) => d < 0.0 && e.abs() < 0.5 * d.abs(),
        (None, _) => false,
    };
    Outcome {
        passed,
        detail: format!("LHE-3D {lhe:?} ({}), WC-3D {wc:?} ({})", lhe.class(), wc.class()),
    }
}

fn threshold_sweep(bank: &CakeFilterBank, record: &mut Vec<Vec<u8>>) -> Outcome {
    let sigmas = [5.0, 6.0, 7.0, 10.0];
    let results: Vec<Completion> = sigmas
        .iter()
        .map(|&s| completion(Model::Lhe3d, &illusion_params(2.0, s, 0.8, bank), bank, record))
        .collect();
    let mut csv = String::from("sigma_omega,offset,completion\n");
    for (s, c) in sigmas.iter().zip(&results) {
        csv.push_str(&format!("{s},{},{}\n", c.offset().map(|d| format!("{d:.10e}")).unwrap_or_default(), c.class()));
    }
    record.push(csv.into_bytes());
    let below = matches!(results[0].class(), "geometric" | "none");
    let above = results[1..].iter().all(|c| c.class() == "perceptual");
    let magnitudes: Vec<f64> = results.iter().map(|c| c.offset().map_or(0.0, f64::abs)).collect();
    let monotone = magnitudes.windows(2).all(|w| w[1] >= w[0]);
    let shown: Vec<String> = sigmas
        .iter()
        .zip(&results)
        .map(|(s, c)| format!("{s}: {} {}", c.offset().map_or("-".into(), |d| format!("{d:+.3}")), c.class()))
        .collect();
    Outcome {
        passed: below && above && monotone,
        detail: format!(
            "{}; transition {}, magnitude non-decreasing {monotone}",
            shown.join(", "),
            below && above
        ),
    }
}

fn main() {
    let mut passed = Vec::new();
    let secs = Duration::from_secs;

    let t = Instant::now();
    passed.push(report(1, "reconstruction", secs(5), t, reconstruction()));
    let t = Instant::now();
    passed.push(report(2, "oracle equivalence", secs(10), t, oracle_equivalence()));
    let t = Instant::now();
    passed.push(report(3, "energy descent", secs(120), t, energy_descent()));
    let t = Instant::now();
    passed.push(report(4, "jacobian dichotomy", secs(10), t, jacobian_dichotomy()));

    let bank = build_cake_bank(DESK_N, DESK_K, 4).unwrap();
    let pogg_bank = build_cake_bank(DESK_N, POGG_K, 4).unwrap();
    let mut first = Vec::new();
    let t = Instant::now();
    passed.push(report(5, "non-oriented illusions", secs(180), t, non_oriented(&bank, &mut first)));
    let t = Instant::now();
    passed.push(report(6, "grating induction", secs(180), t, grating_induction(&bank, &mut first)));
    let t = Instant::now();
    passed.push(report(7, "poggendorff", secs(120), t, poggendorff(&pogg_bank, &mut first)));
    let t = Instant::now();
    passed.push(report(8, "threshold sweep", secs(240), t, threshold_sweep(&pogg_bank, &mut first)));

    let t = Instant::now();
    let mut second = Vec::new();
    let fresh = build_cake_bank(DESK_N, DESK_K, 4).unwrap();
    let fresh_pogg = build_cake_bank(DESK_N, POGG_K, 4).unwrap();
    non_oriented(&fresh, &mut second);
    grating_induction(&fresh, &mut second);
    poggendorff(&fresh_pogg, &mut second);
    threshold_sweep(&fresh_pogg, &mut second);
    let identical = first == second;
    let outcome = Outcome {
        passed: identical,
        detail: format!("{} artefacts compared, byte-identical {identical}", first.len()),
    };
    passed.push(report(9, "determinism", secs(900), t, outcome));

    let failed: Vec<usize> = passed
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", passed.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
