//! Line profiles, target verdicts, grating amplitude and the Poggendorff offset.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::stimuli::{PoggendorffLayout, Relation, TargetRegion};

/// Smallest mean difference, in `[0, 1]` units, counted as an effect.
pub const DEFAULT_MARGIN: f64 = 1e-4;
/// Profile range below which no completion is reported.
pub const COMPLETION_FLOOR: f64 = 1e-3;
/// Offsets smaller than this, in pixels, count as geometric completion.
pub const GEOMETRIC_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub axis: Axis,
    pub index: usize,
    pub values: Vec<f64>,
}

impl Profile {
    /// `position,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("position,value\n");
        for (i, v) in self.values.iter().enumerate() {
            writeln!(s, "{i},{v:.17e}").unwrap();
        }
        s
    }
}

pub fn line_profile(img: &Image, axis: Axis, index: usize) -> Result<Profile> {
    let n = img.n();
    if index >= n {
        return Err(Error::invalid(format!("profile index {index} out of bounds for size {n}")));
    }
    let values = match axis {
        Axis::Row => (0..n).map(|c| img.get(index, c)).collect(),
        Axis::Column => (0..n).map(|r| img.get(r, index)).collect(),
    };
    Ok(Profile { axis, index, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ADarker,
    ALighter,
    NoEffect,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::ADarker => "a-darker",
            Verdict::ALighter => "a-lighter",
            Verdict::NoEffect => "no-effect",
        }
    }

    /// Whether the verdict agrees with the expected relation of `a` to `b`.
    pub fn satisfies(self, relation: Relation) -> bool {
        match relation {
            Relation::DarkerThan | Relation::CounterphaseWith => self == Verdict::ADarker,
            Relation::LighterThan => self == Verdict::ALighter,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub verdict: Verdict,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `mean_a - mean_b`.
    pub margin: f64,
}

pub fn compare_targets(img: &Image, a: &TargetRegion, b: &TargetRegion) -> Result<Comparison> {
    compare_targets_with(img, a, b, DEFAULT_MARGIN)
}

/// Strict comparison of region means: an effect needs `|mean_a - mean_b| > threshold`.
pub fn compare_targets_with(img: &Image, a: &TargetRegion, b: &TargetRegion, threshold: f64) -> Result<Comparison> {
    a.validate(img.n())?;
    b.validate(img.n())?;
    let mean_a = a.mean(img);
    let mean_b = b.mean(img);
    let margin = mean_a - mean_b;
    let verdict = if margin < -threshold {
        Verdict::ADarker
    } else if margin > threshold {
        Verdict::ALighter
    } else {
        Verdict::NoEffect
    };
    Ok(Comparison {
        verdict,
        mean_a,
        mean_b,
        margin,
    })
}

/// Peak-to-trough range of the column profile of `bar`, each column averaged
/// over the bar's pixels in it.
pub fn grating_amplitude(img: &Image, bar: &[&TargetRegion]) -> Result<f64> {
    let n = img.n();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for region in bar {
        region.validate(n)?;
        for &(r, c) in &region.pixels {
            sum[c] += img.get(r, c);
            count[c] += 1;
        }
    }
    let means: Vec<f64> = sum
        .iter()
        .zip(&count)
        .filter(|(_, &k)| k > 0)
        .map(|(s, &k)| s / k as f64)
        .collect();
    if means.is_empty() {
        return Err(Error::invalid("bar region is empty"));
    }
    let (lo, hi) = means.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    Ok(hi - lo)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Completion {
    /// Column offset of the completed band from the geometric continuation;
    /// negative means flushed left.
    Offset(f64),
    /// The bar carries no band above the noise floor.
    None { range: f64 },
}

impl Completion {
    pub fn offset(self) -> Option<f64> {
        match self {
            Completion::Offset(d) => Some(d),
            Completion::None { .. } => None,
        }
    }

    /// `geometric`, `perceptual` (flushed left), `opposite`, or `none`.
    pub fn class(self) -> &'static str {
        match self {
            Completion::None { .. } => "none",
            Completion::Offset(d) if d.abs() < GEOMETRIC_TOLERANCE => "geometric",
            Completion::Offset(d) if d < 0.0 => "perceptual",
            Completion::Offset(_) => "opposite",
        }
    }
}

/// Samples row `r` at fractional column `x` with periodic linear interpolation.
fn sample(img: &Image, r: usize, x: f64) -> f64 {
    let n = img.n() as f64;
    let x = x.rem_euclid(n);
    let c0 = x.floor();
    let t = x - c0;
    let c0 = c0 as usize % img.n();
    let c1 = (c0 + 1) % img.n();
    (1.0 - t) * img.get(r, c0) + t * img.get(r, c1)
}

/// Mean profile across the top band of the bar, sheared along the stripe so
/// that offset 0 is the geometric continuation in every row.
pub fn completion_profile(img: &Image, layout: &PoggendorffLayout) -> Result<Vec<(f64, f64)>> {
    let n = img.n();
    if layout.bar_bottom > n || layout.bar_top + layout.band_rows > layout.bar_bottom || layout.band_rows == 0 {
        return Err(Error::invalid("Poggendorff layout does not fit the image"));
    }
    let half = layout.window.floor() as i64;
    let edge = layout.bar_top as f64 - 0.5;
    Ok((-half..=half)
        .map(|d| {
            let mean = (layout.bar_top..layout.bar_top + layout.band_rows)
                .map(|r| {
                    let centre = layout.geometric_column + layout.column_slope * (r as f64 - edge);
                    sample(img, r, centre + d as f64)
                })
                .sum::<f64>()
                / layout.band_rows as f64;
            (d as f64, mean)
        })
        .collect())
}

/// Offset of the completed stripe at the top of the bar from its geometric
/// continuation.
///
/// A black stripe continued into the grey bar appears there as a light band,
/// the contrast-inverted counterpart of the stripe. The band is the connected
/// run above half range around the profile's peak; it must fall below half
/// range on both sides inside the window, otherwise the profile is a ramp and
/// no completion is reported. The offset is the centroid of that run.
pub fn poggendorff_offset(img: &Image, layout: &PoggendorffLayout) -> Result<Completion> {
    let profile = completion_profile(img, layout)?;
    let (lo, hi) = profile
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &(_, v)| (l.min(v), h.max(v)));
    let range = hi - lo;
    if range < COMPLETION_FLOOR {
        return Ok(Completion::None { range });
    }
    let mid = 0.5 * (lo + hi);
    let peak = profile
        .iter()
        .enumerate()
        .fold(0, |best, (i, &(_, v))| if v > profile[best].1 { i } else { best });
    let mut start = peak;
    while start > 0 && profile[start - 1].1 > mid {
        start -= 1;
    }
    let mut end = peak;
    while end + 1 < profile.len() && profile[end + 1].1 > mid {
        end += 1;
    }
    if start == 0 || end + 1 == profile.len() {
        return Ok(Completion::None { range });
    }
    let (num, den) = profile[start..=end].iter().fold((0.0, 0.0), |(num, den), &(d, v)| {
        let w = v - mid;
        (num + d * w, den + w)
    });
    Ok(Completion::Offset(num / den))
}
