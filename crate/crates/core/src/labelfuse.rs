//! Multi-rater label fusion.
//!
//! Frame labels are derived from the fraction of unpadded samples each rater
//! marked protective. Binary labels use majority voting over raters; tri- and
//! quad-class labels additionally carve out an "uncertain" region.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::windowing::Frame;

/// Per-rater protective fractions of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioSummary {
    pub per_rater: Vec<f64>,
    pub sum: f64,
}

impl RatioSummary {
    pub fn new(per_rater: Vec<f64>) -> Self {
        let sum = per_rater.iter().sum();
        RatioSummary { per_rater, sum }
    }

    fn count_passing(&self, threshold: Threshold) -> usize {
        self.per_rater.iter().filter(|&&r| threshold.passes(r)).count()
    }
}

/// Ratios over the unpadded samples of `frame`.
pub fn frame_ratios(frame: &Frame) -> Result<RatioSummary> {
    let valid = frame.valid_len();
    if valid == 0 {
        return Err(Error::invalid("fully padded frame has no rater opinion"));
    }
    let per_rater = frame
        .raters
        .outer_iter()
        .map(|row| row.iter().take(valid).filter(|&&m| m != 0).count() as f64 / valid as f64)
        .collect();
    Ok(RatioSummary::new(per_rater))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    /// `>=` when true, `>` otherwise.
    pub inclusive: bool,
}

impl Threshold {
    pub const AT_LEAST_HALF: Threshold = Threshold {
        value: 0.5,
        inclusive: true,
    };
    pub const MORE_THAN_HALF: Threshold = Threshold {
        value: 0.5,
        inclusive: false,
    };

    pub fn passes(self, ratio: f64) -> bool {
        if self.inclusive {
            ratio >= self.value
        } else {
            ratio > self.value
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryLabel {
    NonProtective,
    Protective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriLabel {
    NonProtective,
    Uncertain,
    Protective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuadLabel {
    NonProtective,
    Uncertain1,
    Uncertain2,
    Protective,
}

pub const DEFAULT_MIN_RATERS: usize = 2;
pub const DEFAULT_QUAD_SPLIT: f64 = 1.5;

/// Protective iff at least `min_raters` raters pass `threshold`.
pub fn fuse_binary_with(r: &RatioSummary, min_raters: usize, threshold: Threshold) -> BinaryLabel {
    if r.count_passing(threshold) >= min_raters {
        BinaryLabel::Protective
    } else {
        BinaryLabel::NonProtective
    }
}

/// Two raters with at least half of the samples marked.
pub fn fuse_binary(r: &RatioSummary) -> BinaryLabel {
    fuse_binary_with(r, DEFAULT_MIN_RATERS, Threshold::AT_LEAST_HALF)
}

pub fn fuse_tri_with(r: &RatioSummary, n: usize, threshold: Threshold) -> TriLabel {
    if r.count_passing(threshold) >= n {
        TriLabel::Protective
    } else if r.per_rater.iter().all(|&x| x == 0.0) {
        TriLabel::NonProtective
    } else {
        TriLabel::Uncertain
    }
}

/// `n` raters with more than half of the samples marked; non-protective only
/// when nobody marked anything.
pub fn fuse_tri(r: &RatioSummary, n: usize) -> TriLabel {
    fuse_tri_with(r, n, Threshold::MORE_THAN_HALF)
}

pub fn fuse_quad_with(r: &RatioSummary, n: usize, split: f64, threshold: Threshold) -> QuadLabel {
    match fuse_tri_with(r, n, threshold) {
        TriLabel::Protective => QuadLabel::Protective,
        TriLabel::NonProtective => QuadLabel::NonProtective,
        TriLabel::Uncertain if r.sum < split => QuadLabel::Uncertain1,
        // Sums above 3 with four raters land here too when fewer than n raters pass.
        TriLabel::Uncertain => QuadLabel::Uncertain2,
    }
}

pub fn fuse_quad(r: &RatioSummary, n: usize, split: f64) -> QuadLabel {
    fuse_quad_with(r, n, split, Threshold::MORE_THAN_HALF)
}

/// Per-sample majority: protective iff at least two raters marked it.
pub fn fuse_sample(marks: &[u8]) -> BinaryLabel {
    fuse_sample_with(marks, DEFAULT_MIN_RATERS)
}

pub fn fuse_sample_with(marks: &[u8], min_raters: usize) -> BinaryLabel {
    if marks.iter().filter(|&&m| m != 0).count() >= min_raters {
        BinaryLabel::Protective
    } else {
        BinaryLabel::NonProtective
    }
}

/// Label granularity used to train and score a model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LabelScheme {
    Binary {
        #[serde(default = "default_min_raters")]
        min_raters: usize,
        #[serde(default = "default_binary_threshold")]
        threshold: Threshold,
    },
    Tri {
        n: usize,
        #[serde(default = "default_tri_threshold")]
        threshold: Threshold,
    },
    Quad {
        #[serde(default = "default_quad_n")]
        n: usize,
        #[serde(default = "default_split")]
        split: f64,
        #[serde(default = "default_tri_threshold")]
        threshold: Threshold,
    },
}

fn default_min_raters() -> usize {
    DEFAULT_MIN_RATERS
}
fn default_binary_threshold() -> Threshold {
    Threshold::AT_LEAST_HALF
}
fn default_tri_threshold() -> Threshold {
    Threshold::MORE_THAN_HALF
}
fn default_quad_n() -> usize {
    3
}
fn default_split() -> f64 {
    DEFAULT_QUAD_SPLIT
}

impl Default for LabelScheme {
    fn default() -> Self {
        LabelScheme::binary()
    }
}

impl LabelScheme {
    pub fn binary() -> Self {
        LabelScheme::Binary {
            min_raters: DEFAULT_MIN_RATERS,
            threshold: Threshold::AT_LEAST_HALF,
        }
    }

    pub fn tri(n: usize) -> Self {
        LabelScheme::Tri {
            n,
            threshold: Threshold::MORE_THAN_HALF,
        }
    }

    pub fn quad(n: usize, split: f64) -> Self {
        LabelScheme::Quad {
            n,
            split,
            threshold: Threshold::MORE_THAN_HALF,
        }
    }

    pub fn classes(&self) -> usize {
        self.class_names().len()
    }

    pub fn class_names(&self) -> &'static [&'static str] {
        match self {
            LabelScheme::Binary { .. } => &["non-protective", "protective"],
            LabelScheme::Tri { .. } => &["non-protective", "uncertain", "protective"],
            LabelScheme::Quad { .. } => &["non-protective", "uncertain-1", "uncertain-2", "protective"],
        }
    }

    /// Checks the rater-count constraint `2 <= n <= R`.
    pub fn validate(&self, rater_count: usize) -> Result<()> {
        let n = match *self {
            LabelScheme::Binary { min_raters, .. } => min_raters,
            LabelScheme::Tri { n, .. } | LabelScheme::Quad { n, .. } => n,
        };
        if n < 2 || n > rater_count {
            return Err(Error::invalid(format!(
                "rater threshold N = {n} must satisfy 2 <= N <= {rater_count}"
            )));
        }
        Ok(())
    }

    /// Class index of a frame with the given ratios.
    pub fn classify(&self, r: &RatioSummary) -> usize {
        match *self {
            LabelScheme::Binary {
                min_raters,
                threshold,
            } => fuse_binary_with(r, min_raters, threshold) as usize,
            LabelScheme::Tri { n, threshold } => fuse_tri_with(r, n, threshold) as usize,
            LabelScheme::Quad { n, split, threshold } => fuse_quad_with(r, n, split, threshold) as usize,
        }
    }

    pub fn label_frame(&self, frame: &Frame) -> Result<usize> {
        Ok(self.classify(&frame_ratios(frame)?))
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelScheme::Binary { .. } => write!(f, "binary"),
            LabelScheme::Tri { n, .. } => write!(f, "tri-n{n}"),
            LabelScheme::Quad { n, split, .. } => write!(f, "quad-n{n}-split{split}"),
        }
    }
}

/// Per-sample fused labels over the unpadded part of a frame, as class
/// indices (0 non-protective, 1 protective).
pub fn sample_labels(frame: &Frame, min_raters: usize) -> Vec<usize> {
    let mut marks = vec![0u8; frame.rater_count()];
    (0..frame.valid_len())
        .map(|t| {
            for (r, m) in marks.iter_mut().enumerate() {
                *m = frame.raters[[r, t]];
            }
            fuse_sample_with(&marks, min_raters) as usize
        })
        .collect()
}

/// Label dump: `frame_id,ratio_1..ratio_R,ratio_sum,binary,tri,quad`.
pub fn write_labels_csv<W: Write>(out: W, frames: &[Frame], tri_n: usize, quad_n: usize, split: f64) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let r = frames.first().map_or(0, Frame::rater_count);
    let mut header = vec!["frame_id".to_string()];
    header.extend((1..=r).map(|i| format!("ratio_{i}")));
    header.extend(["ratio_sum", "binary", "tri", "quad"].map(String::from));
    writer.write_record(&header)?;
    let names_bin = LabelScheme::binary().class_names();
    let names_tri = LabelScheme::tri(tri_n).class_names();
    let names_quad = LabelScheme::quad(quad_n, split).class_names();
    for (id, frame) in frames.iter().enumerate() {
        let ratios = frame_ratios(frame)?;
        let mut record = vec![id.to_string()];
        record.extend(ratios.per_rater.iter().map(|v| v.to_string()));
        record.push(ratios.sum.to_string());
        record.push(names_bin[fuse_binary(&ratios) as usize].to_string());
        record.push(names_tri[fuse_tri(&ratios, tri_n) as usize].to_string());
        record.push(names_quad[fuse_quad(&ratios, quad_n, split) as usize].to_string());
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io("label dump", e))?;
    Ok(())
}
