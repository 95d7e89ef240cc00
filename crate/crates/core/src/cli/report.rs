//! Measurements and files produced for one run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use crate::analysis::{compare_targets, completion_profile, grating_amplitude, line_profile, poggendorff_offset, Axis};
use crate::dynamics::RunOutput;
use crate::error::{Error, Result};
use crate::grid::{io, Image};
use crate::stimuli::{Layout, Stimulus};

/// One row of the summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    /// `comparison`, `amplitude` or `offset`.
    pub measure: &'static str,
    pub subject: String,
    pub value: Option<f64>,
    pub result: String,
    pub expected: String,
    pub agrees: Option<bool>,
}

pub const SUMMARY_HEADER: &str = "stimulus,model,measure,subject,value,result,expected,agrees";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

impl Measurement {
    pub fn csv_row(&self, stimulus: &str, model: &str) -> String {
        format!(
            "{stimulus},{model},{},{},{},{},{},{}",
            self.measure,
            self.subject,
            fmt_opt(self.value),
            self.result,
            self.expected,
            self.agrees.map(|b| b.to_string()).unwrap_or_default()
        )
    }
}

/// Every measurement the stimulus supports, taken on `img`.
pub fn measure(stimulus: &Stimulus, img: &Image) -> Result<Vec<Measurement>> {
    let mut rows = Vec::new();
    for (a, rel, b) in stimulus.expectations() {
        let c = compare_targets(img, a, b)?;
        rows.push(Measurement {
            measure: "comparison",
            subject: format!("{}|{}", a.label, b.label),
            value: Some(c.margin),
            result: c.verdict.name().to_string(),
            expected: rel.name().to_string(),
            agrees: Some(c.verdict.satisfies(rel)),
        });
    }
    match &stimulus.layout {
        Layout::Plain => {}
        Layout::Grating { .. } => {
            let bar: Vec<_> = stimulus.targets.iter().collect();
            rows.push(Measurement {
                measure: "amplitude",
                subject: "bar".into(),
                value: Some(grating_amplitude(img, &bar)?),
                result: String::new(),
                expected: String::new(),
                agrees: None,
            });
        }
        Layout::Poggendorff(layout) => {
            let completion = poggendorff_offset(img, layout)?;
            rows.push(Measurement {
                measure: "offset",
                subject: "marked".into(),
                value: completion.offset(),
                result: completion.class().into(),
                expected: "perceptual".into(),
                agrees: Some(completion.class() == "perceptual"),
            });
        }
    }
    Ok(rows)
}

/// The characteristic profile of a stimulus: the completion profile for
/// Poggendorff layouts, otherwise the row through the middle of the bar or image.
pub fn profile_csv(stimulus: &Stimulus, img: &Image) -> Result<String> {
    match &stimulus.layout {
        Layout::Poggendorff(layout) => {
            let mut s = String::from("offset,value\n");
            for (d, v) in completion_profile(img, layout)? {
                writeln!(s, "{d},{v:.17e}").unwrap();
            }
            Ok(s)
        }
        Layout::Grating { bar_top, bar_bottom, .. } => {
            Ok(line_profile(img, Axis::Row, (bar_top + bar_bottom) / 2)?.to_csv())
        }
        Layout::Plain => Ok(line_profile(img, Axis::Row, img.n() / 2)?.to_csv()),
    }
}

pub(crate) fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Config echo followed by the derived quantities of the run.
pub fn manifest(cfg: &ExperimentConfig, out: &RunOutput) -> String {
    let mut s = cfg.map.to_text();
    s.push_str("\n[derived]\n");
    writeln!(s, "beta = {}", out.beta).unwrap();
    writeln!(s, "fit_error = {}", fmt_opt(out.fit_error)).unwrap();
    writeln!(s, "display_scale = {}", out.display_map.scale).unwrap();
    writeln!(s, "display_offset = {}", out.display_map.offset).unwrap();
    writeln!(s, "iterations = {}", out.trace.iterations).unwrap();
    writeln!(s, "converged = {}", out.trace.converged).unwrap();
    writeln!(s, "final_update = {}", fmt_opt(out.trace.final_update())).unwrap();
    writeln!(s, "dt = {}", out.trace.dt).unwrap();
    writeln!(s, "refits = {}", out.trace.refits).unwrap();
    s
}

/// Writes the artefacts of one run into `dir` and returns the summary rows.
pub fn write_run(
    dir: &Path,
    stem: &str,
    cfg: &ExperimentConfig,
    stimulus: &Stimulus,
    out: &RunOutput,
) -> Result<(Vec<Measurement>, Vec<PathBuf>)> {
    ensure_dir(dir)?;
    let mut files = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        write(&path, bytes)?;
        files.push(path);
        Ok(())
    };
    put(format!("{stem}.manifest"), manifest(cfg, out).into_bytes())?;
    if cfg.emit.png {
        put(format!("{stem}.png"), io::encode_png(&out.image)?)?;
    }
    if cfg.emit.pgm {
        put(format!("{stem}.pgm"), io::encode_pgm(&out.image).into_bytes())?;
    }
    if cfg.emit.trace {
        put(format!("{stem}_trace.csv"), out.trace.to_csv().into_bytes())?;
    }
    let rows = measure(stimulus, &out.image)?;
    if cfg.emit.csv {
        let mut summary = format!("{SUMMARY_HEADER}\n");
        for r in &rows {
            writeln!(summary, "{}", r.csv_row(&cfg.stimulus_name, cfg.model.name())).unwrap();
        }
        put(format!("{stem}_summary.csv"), summary.into_bytes())?;
        put(format!("{stem}_profile.csv"), profile_csv(stimulus, &out.image)?.into_bytes())?;
    }
    Ok((rows, files))
}

