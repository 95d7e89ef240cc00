//! Command-line driver: `gen`, `run`, `sweep` and `check`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 a run hit
//! `max_iters` without converging, 4 an invariant check failed.

pub mod check;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dynamics::run;
use crate::error::{Error, Result};
use crate::grid::io;
use crate::stimuli::{make_stimulus, StimulusKind};
use config::{ConfigMap, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Environment variable naming the root directory for all outputs.
pub const OUTPUT_ROOT_VAR: &str = "NEUROFIELD_OUT";

#[derive(Debug, Parser)]
#[command(name = "neurofield", version, about = "Neural-field brightness and orientation illusion experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a stimulus and its target sidecar.
    Gen(GenArgs),
    /// Evolve one model on one stimulus.
    Run(ExperimentArgs),
    /// Repeat a run over several values of one config key.
    Sweep(SweepArgs),
    /// Run the fast invariant suite.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// white, sbc, luminance, grating, grating60 or poggendorff.
    pub stimulus: String,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Relative grating angle in radians.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a PGM copy.
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Config file with [stimulus], [model] and [output] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any config key, e.g. `--set model.tau=0.005`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub stimulus: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub nu: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub sigma_mu: Option<String>,
    #[arg(long)]
    pub sigma_omega: Option<String>,
    #[arg(long)]
    pub sigma_orient: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    #[arg(long)]
    pub degree: Option<String>,
    #[arg(long)]
    pub orientations: Option<String>,
    #[arg(long)]
    pub bw: Option<String>,
    #[arg(long)]
    pub interaction: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Config key to vary, e.g. `sigma_omega` or `model.lambda`.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub values: Vec<String>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Filter bank file to use for the reconstruction check.
    #[arg(long)]
    pub bank: Option<PathBuf>,
}

/// Directory all outputs are written under.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

impl ExperimentArgs {
    /// Defaults, then the config file, then `--set`, then the named flags.
    pub fn config_map(&self) -> Result<ConfigMap> {
        let mut map = ConfigMap::default();
        if let Some(path) = &self.config {
            map.merge_file(path)?;
        }
        for s in &self.set {
            map.set_assignment(s)?;
        }
        let n = self.n.map(|n| n.to_string());
        let out = self.out.as_ref().map(|p| p.display().to_string());
        let flags: [(&str, Option<&String>); 19] = [
            ("stimulus.name", self.stimulus.as_ref()),
            ("stimulus.n", n.as_ref()),
            ("stimulus.theta", self.theta.as_ref()),
            ("model.name", self.model.as_ref()),
            ("model.lambda", self.lambda.as_ref()),
            ("model.nu", self.nu.as_ref()),
            ("model.alpha", self.alpha.as_ref()),
            ("model.beta", self.beta.as_ref()),
            ("model.sigma_mu", self.sigma_mu.as_ref()),
            ("model.sigma_omega", self.sigma_omega.as_ref()),
            ("model.sigma_orient", self.sigma_orient.as_ref()),
            ("model.dt", self.dt.as_ref()),
            ("model.tau", self.tau.as_ref()),
            ("model.max_iters", self.max_iters.as_ref()),
            ("model.poly_degree", self.degree.as_ref()),
            ("model.orientations", self.orientations.as_ref()),
            ("model.bw", self.bw.as_ref()),
            ("model.interaction", self.interaction.as_ref()),
            ("output.dir", out.as_ref()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                map.set(key, v)?;
            }
        }
        if self.pgm {
            map.set("output.pgm", "true")?;
        }
        Ok(map)
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::ShapeMismatch { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn cmd_gen(args: &GenArgs, root: &Path) -> Result<i32> {
    let mut kind: StimulusKind = args.stimulus.parse()?;
    if let Some(theta) = args.theta {
        match kind {
            StimulusKind::Grating(_) => kind = StimulusKind::Grating(theta),
            _ => return Err(Error::invalid("--theta only applies to grating stimuli")),
        }
    }
    let stim = make_stimulus(kind, args.n)?;
    let dir = args.out.as_ref().map_or_else(|| root.to_path_buf(), |o| root.join(o));
    report::ensure_dir(&dir)?;
    let stem = args.stimulus.to_ascii_lowercase();
    io::write_png(&dir.join(format!("{stem}.png")), &stim.image)?;
    if args.pgm {
        io::write_pgm(&dir.join(format!("{stem}.pgm")), &stim.image)?;
    }
    stim.write_sidecar(&dir.join(format!("{stem}.targets")))?;
    println!("wrote {}", dir.join(format!("{stem}.png")).display());
    Ok(EXIT_OK)
}

/// Runs one configured experiment and writes its files under `stem`.
fn run_one(cfg: &ExperimentConfig, dir: &Path, stem: &str) -> Result<(Vec<report::Measurement>, usize, bool)> {
    let stim = make_stimulus(cfg.stimulus, cfg.n)?;
    let out = run(cfg.model, &stim.image, &cfg.params)?;
    let (rows, _) = report::write_run(dir, stem, cfg, &stim, &out)?;
    Ok((rows, out.trace.iterations, out.trace.converged))
}

fn cmd_run(args: &ExperimentArgs, root: &Path) -> Result<i32> {
    let cfg = ExperimentConfig::from_map(args.config_map()?)?;
    let dir = cfg.output_dir(root);
    let (rows, iterations, converged) = run_one(&cfg, &dir, &cfg.run_stem())?;
    println!(
        "{} on {}: {iterations} iterations, converged {converged}",
        cfg.model, cfg.stimulus_name
    );
    for r in &rows {
        println!("  {}", r.csv_row(&cfg.stimulus_name, cfg.model.name()));
    }
    Ok(if converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Maps a bare key such as `sigma_omega` onto its section.
fn resolve_key(param: &str) -> String {
    if param.contains('.') {
        param.to_string()
    } else if matches!(param, "name" | "n" | "theta") {
        format!("stimulus.{param}")
    } else {
        format!("model.{param}")
    }
}

pub const SWEEP_HEADER: &str = "parameter,value,iterations,converged,measure,subject,measured,result,expected,agrees";

fn cmd_sweep(args: &SweepArgs, root: &Path) -> Result<i32> {
    if args.values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    let key = resolve_key(&args.param);
    let base = args.experiment.config_map()?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut all_converged = true;
    let mut dir = None;
    let mut stem = String::new();
    for value in &args.values {
        let mut map = base.clone();
        map.set(&key, value)?;
        let cfg = ExperimentConfig::from_map(map)?;
        let d = cfg.output_dir(root);
        stem = cfg.run_stem();
        let (rows, iterations, converged) = run_one(&cfg, &d, &format!("{stem}_{}-{value}", args.param))?;
        all_converged &= converged;
        println!("{key} = {value}: {iterations} iterations, converged {converged}");
        for r in rows {
            let measured = r.value.map(|v| format!("{v:.10e}")).unwrap_or_default();
            let agrees = r.agrees.map(|b| b.to_string()).unwrap_or_default();
            writeln!(
                csv,
                "{key},{value},{iterations},{converged},{},{},{measured},{},{},{agrees}",
                r.measure, r.subject, r.result, r.expected
            )
            .unwrap();
            println!("  {} {} {measured} {}", r.measure, r.subject, r.result);
        }
        dir = Some(d);
    }
    let dir = dir.expect("at least one value");
    let path = dir.join(format!("{stem}_sweep_{}.csv", args.param));
    report::write(&path, csv)?;
    println!("wrote {}", path.display());
    Ok(if all_converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_check(args: &CheckArgs) -> i32 {
    let results = check::run_checks(args.bank.as_deref());
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if results.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let root = output_root();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a, &root),
        Command::Run(a) => cmd_run(a, &root),
        Command::Sweep(a) => cmd_sweep(a, &root),
        Command::Check(a) => Ok(cmd_check(a)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
