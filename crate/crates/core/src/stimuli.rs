//! Deterministic generators for the illusion stimuli and their target regions.
//!
//! Default geometry is given for a 200 x 200 image and scales linearly with N.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    DarkerThan,
    LighterThan,
    /// The region is expected darker than its partner because it lies on the
    /// bright phase of the surrounding grating.
    CounterphaseWith,
}

impl Relation {
    pub fn name(self) -> &'static str {
        match self {
            Relation::DarkerThan => "darker-than",
            Relation::LighterThan => "lighter-than",
            Relation::CounterphaseWith => "counterphase-with",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetRegion {
    pub label: String,
    /// Sorted `(row, col)` pairs.
    pub pixels: Vec<(usize, usize)>,
    /// Expected relation to another region, by label.
    pub expected: Option<(Relation, String)>,
}

impl TargetRegion {
    pub fn new(label: &str, mut pixels: Vec<(usize, usize)>, expected: Option<(Relation, &str)>) -> Self {
        pixels.sort_unstable();
        pixels.dedup();
        TargetRegion {
            label: label.to_string(),
            pixels,
            expected: expected.map(|(r, l)| (r, l.to_string())),
        }
    }

    /// `(row_min, col_min, row_max, col_max)`, inclusive.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let first = self.pixels.first()?;
        Some(self.pixels.iter().fold(
            (first.0, first.1, first.0, first.1),
            |(r0, c0, r1, c1), &(r, c)| (r0.min(r), c0.min(c), r1.max(r), c1.max(c)),
        ))
    }

    pub fn mean(&self, img: &Image) -> f64 {
        self.pixels.iter().map(|&(r, c)| img.get(r, c)).sum::<f64>() / self.pixels.len() as f64
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.pixels.is_empty() {
            return Err(Error::invalid(format!("target '{}' is empty", self.label)));
        }
        if self.pixels.iter().any(|&(r, c)| r >= n || c >= n) {
            return Err(Error::invalid(format!("target '{}' leaves the image", self.label)));
        }
        Ok(())
    }
}

/// Geometry needed to measure a Poggendorff completion.
#[derive(Debug, Clone, PartialEq)]
pub struct PoggendorffLayout {
    /// First row of the grey bar.
    pub bar_top: usize,
    /// One past the last row of the grey bar.
    pub bar_bottom: usize,
    /// Centre column, at the bar's top edge, of the geometric continuation of the marked stripe.
    pub geometric_column: f64,
    /// Centre column of the marked stripe at the bar's bottom edge.
    pub marked_column: f64,
    /// Rows of the bar, counted from its top edge, over which the completion is read.
    pub band_rows: usize,
    /// Half-width of the column window searched around the geometric column.
    pub window: f64,
    /// Column change per row along a stripe.
    pub column_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Plain,
    /// Horizontal grey bar over the rows `bar_top..bar_bottom` of a grating
    /// with `(row_cycles, col_cycles)` periods over the image.
    Grating {
        bar_top: usize,
        bar_bottom: usize,
        row_cycles: i64,
        col_cycles: i64,
        angle: f64,
    },
    Poggendorff(PoggendorffLayout),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub name: String,
    pub image: Image,
    pub targets: Vec<TargetRegion>,
    pub layout: Layout,
}

impl Stimulus {
    pub fn target(&self, label: &str) -> Option<&TargetRegion> {
        self.targets.iter().find(|t| t.label == label)
    }

    /// Pairs `(region, relation, partner)` for every target with an expectation.
    pub fn expectations(&self) -> Vec<(&TargetRegion, Relation, &TargetRegion)> {
        self.targets
            .iter()
            .filter_map(|t| {
                let (rel, other) = t.expected.as_ref()?;
                Some((t, *rel, self.target(other)?))
            })
            .collect()
    }

    /// Text sidecar: one line per target and per layout value.
    pub fn sidecar(&self) -> String {
        let mut s = format!("stimulus {}\nsize {}\n", self.name, self.image.n());
        for t in &self.targets {
            let (r0, c0, r1, c1) = t.bbox().unwrap_or((0, 0, 0, 0));
            write!(s, "target {} bbox {r0} {c0} {r1} {c1} pixels {}", t.label, t.pixels.len()).unwrap();
            if let Some((rel, other)) = &t.expected {
                write!(s, " relation {rel} {other}").unwrap();
            }
            s.push('\n');
        }
        match &self.layout {
            Layout::Plain => {}
            Layout::Grating {
                bar_top,
                bar_bottom,
                row_cycles,
                col_cycles,
                angle,
            } => {
                writeln!(s, "bar_rows {bar_top} {bar_bottom}").unwrap();
                writeln!(s, "grating_cycles {row_cycles} {col_cycles}").unwrap();
                writeln!(s, "grating_angle {angle:.12}").unwrap();
            }
            Layout::Poggendorff(p) => {
                writeln!(s, "bar_rows {} {}", p.bar_top, p.bar_bottom).unwrap();
                writeln!(s, "geometric_column {:.6}", p.geometric_column).unwrap();
                writeln!(s, "marked_column {:.6}", p.marked_column).unwrap();
                writeln!(s, "band_rows {}", p.band_rows).unwrap();
                writeln!(s, "window {:.6}", p.window).unwrap();
                writeln!(s, "column_slope {:.12}", p.column_slope).unwrap();
            }
        }
        s
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.sidecar()).map_err(|e| Error::io(path, e))
    }
}

fn scaled(n: usize, px_at_200: f64) -> f64 {
    px_at_200 * n as f64 / 200.0
}

/// Even divisor of `n` closest to `target`, ties going to the larger one.
fn nearest_even_divisor(n: usize, target: f64) -> Option<usize> {
    (2..=n)
        .filter(|d| d % 2 == 0 && n.is_multiple_of(*d))
        .min_by(|a, b| {
            let da = (*a as f64 - target).abs();
            let db = (*b as f64 - target).abs();
            da.partial_cmp(&db).unwrap().then(b.cmp(a))
        })
}

fn rect(r0: usize, r1: usize, c0: usize, c1: usize) -> Vec<(usize, usize)> {
    (r0..r1).flat_map(|r| (c0..c1).map(move |c| (r, c))).collect()
}

fn paint(img: &mut Image, pixels: &[(usize, usize)], value: f64) {
    for &(r, c) in pixels {
        img.set(r, c, value);
    }
}

fn finish(name: &str, image: Image, targets: Vec<TargetRegion>, layout: Layout) -> Result<Stimulus> {
    let n = image.n();
    for t in &targets {
        t.validate(n)?;
    }
    let image = Image::new_nominal(n, image.into_data())?;
    Ok(Stimulus {
        name: name.to_string(),
        image,
        targets,
        layout,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiteGeometry {
    /// Full black + white period in pixels; must be an even divisor of N.
    pub period: usize,
    /// Patch height in pixels; the width is one stripe.
    pub patch_height: usize,
}

impl WhiteGeometry {
    pub fn for_size(n: usize) -> Result<Self> {
        let period = nearest_even_divisor(n, scaled(n, 24.0))
            .ok_or_else(|| Error::invalid(format!("no even stripe period divides {n}")))?;
        Ok(WhiteGeometry {
            period,
            patch_height: (scaled(n, 40.0).round() as usize).max(2),
        })
    }
}

/// White's illusion with the default geometry.
pub fn make_white(n: usize) -> Result<Stimulus> {
    make_white_with(n, WhiteGeometry::for_size(n)?)
}

/// Vertical black/white stripes with one grey patch on a white stripe (left)
/// and one on a black stripe (right).
pub fn make_white_with(n: usize, g: WhiteGeometry) -> Result<Stimulus> {
    if n < 64 {
        return Err(Error::invalid(format!("White's stimulus needs N >= 64, got {n}")));
    }
    if g.period < 2 || !g.period.is_multiple_of(2) || !n.is_multiple_of(g.period) || n / g.period < 4 {
        return Err(Error::invalid(format!(
            "stripe period {} must be even, divide {n} and fit four times",
            g.period
        )));
    }
    if g.patch_height == 0 || g.patch_height >= n {
        return Err(Error::invalid("patch height must lie in (0, N)"));
    }
    let w = g.period / 2;
    // Stripe j covers columns j*w .. (j+1)*w and is white when j is odd.
    let mut img = Image::from_fn(n, |_, c| ((c / w) % 2) as f64);
    let stripes = n / w;
    let nearest = |centre: f64, white: usize| {
        (0..stripes)
            .filter(|j| j % 2 == white)
            .min_by(|&a, &b| {
                let da = ((a as f64 + 0.5) * w as f64 - centre).abs();
                let db = ((b as f64 + 0.5) * w as f64 - centre).abs();
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            })
            .unwrap()
    };
    let left = nearest(n as f64 / 4.0, 1);
    let right = nearest(3.0 * n as f64 / 4.0, 0);
    let r0 = (n - g.patch_height) / 2;
    let r1 = r0 + g.patch_height;
    let lp = rect(r0, r1, left * w, (left + 1) * w);
    let rp = rect(r0, r1, right * w, (right + 1) * w);
    paint(&mut img, &lp, 0.5);
    paint(&mut img, &rp, 0.5);
    let targets = vec![
        TargetRegion::new("left", lp, Some((Relation::DarkerThan, "right"))),
        TargetRegion::new("right", rp, Some((Relation::LighterThan, "left"))),
    ];
    finish("white", img, targets, Layout::Plain)
}

/// Simultaneous brightness contrast: black left half, white right half, a grey
/// square centred in each.
pub fn make_sbc(n: usize) -> Result<Stimulus> {
    // Side nearest the nominal one that leaves an even margin in each half.
    let target = scaled(n, 40.0);
    let half = n / 2;
    let side = (1..half)
        .filter(|s| (half - s).is_multiple_of(2))
        .min_by(|a, b| (*a as f64 - target).abs().total_cmp(&(*b as f64 - target).abs()))
        .unwrap_or(0);
    make_sbc_with(n, side)
}

pub fn make_sbc_with(n: usize, side: usize) -> Result<Stimulus> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::invalid(format!("SBC needs an even N >= 8, got {n}")));
    }
    let half = n / 2;
    if side == 0 || side >= half || !(half - side).is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "square side {side} must be positive, below N/2 and centred exactly"
        )));
    }
    let mut img = Image::from_fn(n, |_, c| if c < half { 0.0 } else { 1.0 });
    let off = (half - side) / 2;
    let r0 = (n - side) / 2;
    let lp = rect(r0, r0 + side, off, off + side);
    let rp = rect(r0, r0 + side, half + off, half + off + side);
    paint(&mut img, &lp, 0.5);
    paint(&mut img, &rp, 0.5);
    let targets = vec![
        TargetRegion::new("left", lp, Some((Relation::LighterThan, "right"))),
        TargetRegion::new("right", rp, Some((Relation::DarkerThan, "left"))),
    ];
    finish("sbc", img, targets, Layout::Plain)
}

/// Four grey discs over a left-to-right ramp from 0 to 1.
pub fn make_luminance(n: usize) -> Result<Stimulus> {
    make_luminance_with(n, scaled(n, 12.0))
}

pub fn make_luminance_with(n: usize, radius: f64) -> Result<Stimulus> {
    if n < 8 {
        return Err(Error::invalid(format!("luminance stimulus needs N >= 8, got {n}")));
    }
    if !(radius >= 1.0 && radius < n as f64 / 4.0) {
        return Err(Error::invalid(format!("disc radius {radius} must lie in [1, N/4)")));
    }
    let mut img = Image::from_fn(n, |_, c| c as f64 / (n - 1) as f64);
    // Disc centres sit between pixels so every disc has the same pixel set.
    let q = n as f64 / 4.0 - 0.5;
    let t = 3.0 * n as f64 / 4.0 - 0.5;
    let disc = |cr: f64, cc: f64| -> Vec<(usize, usize)> {
        let mut px = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let (dr, dc) = (r as f64 - cr, c as f64 - cc);
                if dr * dr + dc * dc <= radius * radius {
                    px.push((r, c));
                }
            }
        }
        px
    };
    let regions = [
        ("top_left", disc(q, q), Some((Relation::LighterThan, "top_right"))),
        ("top_right", disc(q, t), None),
        ("bottom_left", disc(t, q), Some((Relation::LighterThan, "bottom_right"))),
        ("bottom_right", disc(t, t), None),
    ];
    let mut targets = Vec::new();
    for (label, px, rel) in regions {
        paint(&mut img, &px, 0.5);
        targets.push(TargetRegion::new(label, px, rel));
    }
    finish("luminance", img, targets, Layout::Plain)
}

/// Integer cycle counts `(row, col)` whose wave vector makes angle `theta`
/// with the bar, with about `cycles` periods across the image.
fn grating_cycles(theta: f64, cycles: f64) -> (i64, i64) {
    // Stripes rising at angle theta run along (row, col) = (-sin theta, cos theta)
    // since rows point down, so their normal is (cos theta, sin theta) up to sign.
    let want = (theta.cos(), theta.sin());
    let max = (2.0 * cycles).ceil() as i64;
    let mut best = (0, 1);
    let mut best_cost = f64::INFINITY;
    for kr in -max..=max {
        for kc in 0..=max {
            let norm = ((kr * kr + kc * kc) as f64).sqrt();
            if norm == 0.0 {
                continue;
            }
            let (ur, uc) = (kr as f64 / norm, kc as f64 / norm);
            // Angle error between stripe normal and the requested one, sign-free.
            let dot = (ur * want.0 + uc * want.1).abs().min(1.0);
            let angle_err = dot.acos();
            let count_err = (norm - cycles).abs() / cycles;
            let cost = angle_err + 0.05 * count_err;
            if cost < best_cost - 1e-12 {
                best_cost = cost;
                best = (kr, kc);
            }
        }
    }
    best
}

/// Square-wave value of the periodic grating at `(r, c)`: 1 on the first half-period.
fn grating_value(n: usize, kr: i64, kc: i64, r: usize, c: usize) -> f64 {
    let m = (kr * r as i64 + kc * c as i64).rem_euclid(n as i64);
    if 2 * m < n as i64 {
        1.0
    } else {
        0.0
    }
}

/// Grating induction with the default bar half-width.
pub fn make_grating_induction_default(n: usize, theta_rel: f64) -> Result<Stimulus> {
    make_grating_induction(n, theta_rel, scaled(n, 8.0).round() as usize)
}

/// Binary grating at angle `theta_rel` to a horizontal grey bar through the centre.
pub fn make_grating_induction(n: usize, theta_rel: f64, bar_halfwidth_px: usize) -> Result<Stimulus> {
    if !(theta_rel > 0.0 && theta_rel <= std::f64::consts::FRAC_PI_2 + 1e-12) {
        return Err(Error::invalid(format!("relative angle {theta_rel} must lie in (0, pi/2]")));
    }
    if n < 16 {
        return Err(Error::invalid(format!("grating induction needs N >= 16, got {n}")));
    }
    if bar_halfwidth_px == 0 || 2 * bar_halfwidth_px >= n {
        return Err(Error::invalid(format!("bar half-width {bar_halfwidth_px} does not fit in {n}")));
    }
    let cycles = n as f64 / scaled(n, 24.0);
    let (kr, kc) = grating_cycles(theta_rel, cycles);
    let top = n / 2 - bar_halfwidth_px;
    let bottom = n / 2 + bar_halfwidth_px;
    let mut img = Image::from_fn(n, |r, c| grating_value(n, kr, kc, r, c));
    let mut on_white = Vec::new();
    let mut on_black = Vec::new();
    for r in top..bottom {
        for c in 0..n {
            if grating_value(n, kr, kc, r, c) > 0.5 {
                on_white.push((r, c));
            } else {
                on_black.push((r, c));
            }
            img.set(r, c, 0.5);
        }
    }
    let angle = (kc as f64).atan2(kr as f64).rem_euclid(std::f64::consts::PI);
    let targets = vec![
        TargetRegion::new("bar_white_phase", on_white, Some((Relation::CounterphaseWith, "bar_black_phase"))),
        TargetRegion::new("bar_black_phase", on_black, None),
    ];
    finish(
        "grating",
        img,
        targets,
        Layout::Grating {
            bar_top: top,
            bar_bottom: bottom,
            row_cycles: kr,
            col_cycles: kc,
            angle,
        },
    )
}

/// Poggendorff grating with the default geometry: 45 degree stripes and a bar
/// of half-width 24 px at N = 200.
pub fn make_poggendorff_default(n: usize) -> Result<Stimulus> {
    make_poggendorff(n, scaled(n, 24.0).round() as usize, std::f64::consts::FRAC_PI_4)
}

/// Oblique black/white grating rising to the right, interrupted by a horizontal
/// grey bar through the centre.
pub fn make_poggendorff(n: usize, bar_halfwidth_px: usize, stripe_angle: f64) -> Result<Stimulus> {
    if n < 32 {
        return Err(Error::invalid(format!("Poggendorff stimulus needs N >= 32, got {n}")));
    }
    if bar_halfwidth_px == 0 || 4 * bar_halfwidth_px >= n {
        return Err(Error::invalid(format!("bar half-width {bar_halfwidth_px} does not fit in {n}")));
    }
    if !(stripe_angle > 0.05 && stripe_angle < std::f64::consts::FRAC_PI_2 - 0.05) {
        return Err(Error::invalid(format!("stripe angle {stripe_angle} must be oblique")));
    }
    let cycles = n as f64 / scaled(n, 24.0);
    let (kr, kc) = grating_cycles(stripe_angle, cycles);
    if kr == 0 || kc == 0 {
        return Err(Error::invalid("stripe angle rounds to an axis-aligned grating"));
    }
    let top = n / 2 - bar_halfwidth_px;
    let bottom = n / 2 + bar_halfwidth_px;
    let mut img = Image::from_fn(n, |r, c| grating_value(n, kr, kc, r, c));

    // Pixel (r, c) has level v = kr*r + kc*c and is black when v mod n >= n/2, so
    // black stripes are centred on levels 3n/4 - 1/2 (mod n). The marked stripe
    // is the one whose centre crosses the bar's bottom edge closest to the
    // image centre.
    let level = |r: f64, c: f64| kr as f64 * r + kc as f64 * c;
    let black_mid = 0.75 * n as f64 - 0.5;
    let edge_row = bottom as f64 - 0.5;
    let here = level(edge_row, n as f64 / 2.0);
    let base = ((here - black_mid) / n as f64).round() * n as f64 + black_mid;
    let column_for = |row: f64| (base - kr as f64 * row) / kc as f64;
    let marked_column = column_for(edge_row);
    let geometric_column = column_for(top as f64 - 0.5);
    let half_band = n as f64 / 4.0 - 0.5 + 1e-9;
    let on_marked = |r: usize, c: usize| (level(r as f64, c as f64) - base).abs() <= half_band;

    let mut marked = Vec::new();
    let mut upper = Vec::new();
    let band = bar_halfwidth_px.min(n - bottom).min(top);
    for r in bottom..bottom + band {
        for c in 0..n {
            if on_marked(r, c) {
                marked.push((r, c));
            }
        }
    }
    for r in top - band..top {
        for c in 0..n {
            if on_marked(r, c) {
                upper.push((r, c));
            }
        }
    }
    for r in top..bottom {
        for c in 0..n {
            img.set(r, c, 0.5);
        }
    }
    let window = 0.25 * (bottom - top) as f64;
    let targets = vec![
        TargetRegion::new("marked_lower", marked, None),
        TargetRegion::new("geometric_upper", upper, None),
    ];
    finish(
        "poggendorff",
        img,
        targets,
        Layout::Poggendorff(PoggendorffLayout {
            bar_top: top,
            bar_bottom: bottom,
            geometric_column,
            marked_column,
            band_rows: (bottom - top) / 4,
            window,
            column_slope: -(kr as f64) / kc as f64,
        }),
    )
}

/// Stimulus names accepted by [`make_stimulus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StimulusKind {
    White,
    Sbc,
    Luminance,
    /// Relative angle in radians.
    Grating(f64),
    Poggendorff,
}

impl FromStr for StimulusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use std::f64::consts::PI;
        match s.to_ascii_lowercase().as_str() {
            "white" => Ok(StimulusKind::White),
            "sbc" => Ok(StimulusKind::Sbc),
            "luminance" => Ok(StimulusKind::Luminance),
            "grating" | "grating90" => Ok(StimulusKind::Grating(PI / 2.0)),
            "grating60" => Ok(StimulusKind::Grating(PI / 3.0)),
            "poggendorff" => Ok(StimulusKind::Poggendorff),
            other => Err(Error::invalid(format!("unknown stimulus '{other}'"))),
        }
    }
}

pub fn make_stimulus(kind: StimulusKind, n: usize) -> Result<Stimulus> {
    match kind {
        StimulusKind::White => make_white(n),
        StimulusKind::Sbc => make_sbc(n),
        StimulusKind::Luminance => make_luminance(n),
        StimulusKind::Grating(theta) => make_grating_induction_default(n, theta),
        StimulusKind::Poggendorff => make_poggendorff_default(n),
    }
}

/// The five stimuli of the brightness and orientation experiments.
pub fn all_stimuli(n: usize) -> Result<Vec<Stimulus>> {
    ["white", "sbc", "luminance", "grating", "poggendorff"]
        .iter()
        .map(|s| make_stimulus(s.parse()?, n))
        .collect()
}
