//! Flat `key = value` experiment configuration with `[section]` headers.
//!
//! Keys are addressed as `section.key`. Lines starting with `#` are comments.
//! The `[derived]` section written into run manifests is ignored on reading,
//! so a manifest can be fed back as a config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dynamics::{InteractionMode, Model, ModelParams};
use crate::error::{Error, Result};
use crate::stimuli::StimulusKind;

/// Every accepted key with its default value. `None` means unset.
const KEYS: &[(&str, Option<&str>)] = &[
    ("stimulus.name", Some("white")),
    ("stimulus.n", Some("200")),
    ("stimulus.theta", None),
    ("model.name", Some("lhe3d")),
    ("model.lambda", Some("0.5")),
    ("model.nu", Some("0.5")),
    ("model.alpha", Some("5")),
    ("model.beta", None),
    ("model.sigma_mu", Some("3")),
    ("model.sigma_omega", Some("8")),
    ("model.sigma_orient", Some("1")),
    ("model.dt", Some("0.1")),
    ("model.tau", Some("0.01")),
    ("model.max_iters", Some("2000")),
    ("model.poly_degree", Some("11")),
    ("model.orientations", Some("30")),
    ("model.bw", Some("4")),
    ("model.interaction", Some("fast")),
    ("model.max_dt_halvings", Some("4")),
    ("output.dir", Some(".")),
    ("output.png", Some("true")),
    ("output.pgm", Some("false")),
    ("output.csv", Some("true")),
    ("output.trace", Some("true")),
];

const IGNORED_SECTIONS: &[&str] = &["derived"];

/// Raw key/value pairs after defaults, file contents and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl Default for ConfigMap {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v.to_string())))
            .collect();
        ConfigMap { values }
    }
}

impl ConfigMap {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::invalid(format!("unknown config key '{key}'")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Applies `key=value`.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected key=value, got '{assignment}'")))?;
        self.set(k, v)
    }

    /// Merges a config text over the current values.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        let mut section: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(name.trim().to_string());
                continue;
            }
            if section.as_deref().is_some_and(|s| IGNORED_SECTIONS.contains(&s)) {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", lineno + 1)))?;
            let key = match &section {
                Some(s) => format!("{s}.{}", k.trim()),
                None => k.trim().to_string(),
            };
            self.set(&key, v)
                .map_err(|e| Error::invalid(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_text(&text)
    }

    /// Canonical text: every set key, grouped by section in key order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (key, _) in KEYS {
            let Some(value) = self.values.get(*key) else { continue };
            let (section, name) = key.split_once('.').expect("keys are sectioned");
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                writeln!(out, "[{section}]").unwrap();
                current = section;
            }
            writeln!(out, "{name} = {value}").unwrap();
        }
        out
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::invalid(format!("{key}: cannot parse '{v}'")))
            })
            .transpose()
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?
            .ok_or_else(|| Error::invalid(format!("{key} is required")))
    }
}

/// Which artefacts a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub png: bool,
    pub pgm: bool,
    pub csv: bool,
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub stimulus_name: String,
    pub stimulus: StimulusKind,
    pub n: usize,
    pub model: Model,
    pub params: ModelParams,
    /// Output directory, relative to the output root unless absolute.
    pub out_dir: PathBuf,
    pub emit: Emit,
    /// The values this config was built from.
    pub map: ConfigMap,
}

impl ExperimentConfig {
    pub fn from_map(map: ConfigMap) -> Result<Self> {
        let stimulus_name = map.required::<String>("stimulus.name")?.to_ascii_lowercase();
        let mut stimulus: StimulusKind = stimulus_name.parse()?;
        if let Some(theta) = map.parse::<f64>("stimulus.theta")? {
            match stimulus {
                StimulusKind::Grating(_) => stimulus = StimulusKind::Grating(theta),
                _ => return Err(Error::invalid("stimulus.theta only applies to grating stimuli")),
            }
        }
        let n = map.required("stimulus.n")?;
        let model = map.required::<String>("model.name")?.parse()?;
        let params = ModelParams {
            lambda: map.required("model.lambda")?,
            nu: map.required("model.nu")?,
            alpha: map.required("model.alpha")?,
            beta_override: map.parse("model.beta")?,
            sigma_mu: map.required("model.sigma_mu")?,
            sigma_omega: map.required("model.sigma_omega")?,
            sigma_orient: map.required("model.sigma_orient")?,
            dt: map.required("model.dt")?,
            tau: map.required("model.tau")?,
            max_iters: map.required("model.max_iters")?,
            poly_degree: map.required("model.poly_degree")?,
            orientations: map.required("model.orientations")?,
            bw: map.required("model.bw")?,
            interaction: map.required::<String>("model.interaction")?.parse::<InteractionMode>()?,
            max_dt_halvings: map.required("model.max_dt_halvings")?,
        };
        params.validate()?;
        let emit = Emit {
            png: map.required("output.png")?,
            pgm: map.required("output.pgm")?,
            csv: map.required("output.csv")?,
            trace: map.required("output.trace")?,
        };
        Ok(ExperimentConfig {
            stimulus_name,
            stimulus,
            n,
            model,
            params,
            out_dir: map.required::<String>("output.dir")?.into(),
            emit,
            map,
        })
    }

    /// Resolves the output directory against `root`.
    pub fn output_dir(&self, root: &Path) -> PathBuf {
        root.join(&self.out_dir)
    }

    /// Base name for the files of one run.
    pub fn run_stem(&self) -> String {
        format!("{}_{}", self.stimulus_name, self.model)
    }
}
