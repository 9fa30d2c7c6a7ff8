//! Training-set augmentation: temporal reversal, Gaussian jitter and random
//! zeroing ("cropping"). Only the unpadded rows of a frame are touched, and
//! provenance, padding and rater marks are carried over unchanged.

use std::collections::BTreeSet;

use ndarray::{s, Array2};
use rand::RngExt;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::windowing::Frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMethod {
    Reverse,
    Jitter,
    Crop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSpec {
    pub methods: BTreeSet<AugmentMethod>,
    pub jitter_sds: Vec<f64>,
    pub crop_probs: Vec<f64>,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            methods: [AugmentMethod::Jitter, AugmentMethod::Crop].into_iter().collect(),
            jitter_sds: vec![0.05, 0.10, 0.15],
            crop_probs: vec![0.05, 0.10, 0.15],
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn none() -> Self {
        AugmentSpec {
            methods: BTreeSet::new(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(sd) = self.jitter_sds.iter().find(|sd| !(**sd >= 0.0 && sd.is_finite())) {
            return Err(Error::invalid(format!("jitter sd {sd} must be finite and >= 0")));
        }
        if let Some(p) = self.crop_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("crop probability {p} outside [0, 1]")));
        }
        Ok(())
    }

    /// Output size multiplier of [`augment_training_set`].
    pub fn multiplier(&self) -> usize {
        let m = &self.methods;
        1 + if m.contains(&AugmentMethod::Jitter) { self.jitter_sds.len() } else { 0 }
            + if m.contains(&AugmentMethod::Crop) { self.crop_probs.len() } else { 0 }
            + usize::from(m.contains(&AugmentMethod::Reverse))
    }
}

/// Reverses the unpadded rows in time; padding stays trailing.
pub fn reverse(frame: &Frame) -> Frame {
    let mut out = frame.clone();
    let valid = frame.valid_len();
    out.data
        .slice_mut(s![..valid, ..])
        .assign(&frame.data.slice(s![..valid;-1, ..]));
    out
}

/// Adds i.i.d. `N(0, sd²)` noise to every unpadded entry.
pub fn jitter(frame: &Frame, sd: f64, seed: u64) -> Frame {
    if sd == 0.0 {
        return frame.clone();
    }
    let noise = Normal::new(0.0, sd).expect("sd validated as finite and >= 0");
    let mut r = rng::seeded(seed);
    let split = frame.valid_len() * frame.data.ncols();
    // One pass over a fresh buffer.
    let data = frame.data.as_standard_layout();
    let src = data.as_slice().expect("standard layout is contiguous");
    let mut values = Vec::with_capacity(src.len());
    values.extend(src[..split].iter().map(|v| v + noise.sample(&mut r)));
    values.extend_from_slice(&src[split..]);
    Frame {
        data: Array2::from_shape_vec(frame.data.raw_dim(), values).expect("same shape"),
        raters: frame.raters.clone(),
        subject_id: frame.subject_id.clone(),
        ..*frame
    }
}

/// Zeroes each unpadded entry independently with probability `p`.
///
/// Gaps between zeroed entries are drawn from the geometric distribution,
/// which gives the same joint law as one Bernoulli draw per entry.
pub fn crop(frame: &Frame, p: f64, seed: u64) -> Frame {
    let mut out = frame.clone();
    if p <= 0.0 {
        return out;
    }
    if !out.data.is_standard_layout() {
        out.data = out.data.as_standard_layout().into_owned();
    }
    let valid = frame.valid_len();
    let mut region = out.data.slice_mut(s![..valid, ..]);
    let entries = region.as_slice_mut().expect("row prefix of a standard-layout array is contiguous");
    if p >= 1.0 {
        entries.fill(0.0);
        return out;
    }
    let mut r = rng::seeded(seed);
    let log_q = (-p).ln_1p();
    let mut i = 0usize;
    loop {
        // P(gap = k) = (1 - p)^k p
        let u: f64 = 1.0 - r.random::<f64>();
        let gap = (u.ln() / log_q).floor();
        if gap >= (entries.len() - i) as f64 {
            break;
        }
        i += gap as usize;
        entries[i] = 0.0;
        i += 1;
    }
    out
}

/// Originals, then one jittered copy per sd, one cropped copy per probability
/// and one reversed copy, each block in input order.
pub fn augment_training_set(frames: &[Frame], spec: &AugmentSpec) -> Result<Vec<Frame>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(frames.len() * spec.multiplier());
    out.extend_from_slice(frames);
    if spec.methods.contains(&AugmentMethod::Jitter) {
        for (k, &sd) in spec.jitter_sds.iter().enumerate() {
            let tag = format!("augment/jitter/{k}");
            out.extend(
                frames
                    .iter()
                    .enumerate()
                    .map(|(i, f)| jitter(f, sd, rng::derive_indexed(spec.seed, &tag, i as u64))),
            );
        }
    }
    if spec.methods.contains(&AugmentMethod::Crop) {
        for (k, &p) in spec.crop_probs.iter().enumerate() {
            let tag = format!("augment/crop/{k}");
            out.extend(
                frames
                    .iter()
                    .enumerate()
                    .map(|(i, f)| crop(f, p, rng::derive_indexed(spec.seed, &tag, i as u64))),
            );
        }
    }
    if spec.methods.contains(&AugmentMethod::Reverse) {
        out.extend(frames.iter().map(reverse));
    }
    Ok(out)
}
