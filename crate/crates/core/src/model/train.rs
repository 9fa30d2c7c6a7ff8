use std::collections::{BTreeMap, BTreeSet};

use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_update, AdamState};
use super::checkpoint::Checkpoint;
use super::network::{Batch, Model, Pass, Targets};
use super::{HeadKind, ModelConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::rng;
use crate::windowing::Frame;

/// Supervision for one training frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Frame(usize),
    /// One label per unpadded sample.
    Steps(Vec<usize>),
}

impl Target {
    fn labels(&self) -> &[usize] {
        match self {
            Target::Frame(y) => std::slice::from_ref(y),
            Target::Steps(v) => v,
        }
    }
}

/// Per-feature z-score statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            mean: vec![0.0; dim],
            sd: vec![1.0; dim],
        }
    }

    /// Fits on the unpadded rows of `frames`. Constant features get sd 1.
    pub fn fit(frames: &[Frame]) -> Result<Self> {
        let dim = frames
            .first()
            .map(|f| f.data.ncols())
            .ok_or_else(|| Error::invalid("cannot fit normalization on zero frames"))?;
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        for f in frames {
            if f.data.ncols() != dim {
                return Err(Error::Shape(format!("frames mix {dim} and {} features", f.data.ncols())));
            }
            for row in f.data.slice(s![..f.valid_len(), ..]).rows() {
                sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::invalid("frames contain no unpadded rows"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut ss = vec![0.0; dim];
        for f in frames {
            for row in f.data.slice(s![..f.valid_len(), ..]).rows() {
                ss.iter_mut()
                    .zip(row)
                    .zip(&mean)
                    .for_each(|((s, v), m)| *s += (v - m) * (v - m));
            }
        }
        let sd = ss
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalizer { mean, sd })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Standardizes all rows except the trailing `zero_tail`, which stay zero.
    pub fn normalize(&self, data: ArrayView2<'_, f64>, zero_tail: usize) -> Result<Array2<f64>> {
        if data.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "data has {} features, normalization expects {}",
                data.ncols(),
                self.dim()
            )));
        }
        let mut out = data.to_owned();
        let keep = data.nrows().saturating_sub(zero_tail);
        for mut row in out.slice_mut(s![..keep, ..]).rows_mut() {
            for ((v, m), sd) in row.iter_mut().zip(&self.mean).zip(&self.sd) {
                *v = (*v - m) / sd;
            }
        }
        Ok(out)
    }

    pub fn apply_frame(&self, frame: &Frame) -> Result<Frame> {
        let data = self.normalize(frame.data.view(), frame.zero_len)?;
        Ok(Frame { data, ..frame.clone() })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Mean training loss of every completed epoch.
    pub history: Vec<f64>,
    pub stopped_early: bool,
}

/// Fits normalization on `frames`, standardizes them and trains.
pub fn train(frames: &[Frame], targets: &[Target], mcfg: &ModelConfig, tcfg: &TrainConfig) -> Result<TrainOutcome> {
    let normalizer = Normalizer::fit(frames)?;
    let normalized = frames
        .iter()
        .map(|f| normalizer.apply_frame(f))
        .collect::<Result<Vec<_>>>()?;
    train_normalized(&normalized, targets, normalizer, mcfg, tcfg)
}

/// Trains on frames that are already standardized with `normalizer`; the
/// normalizer is stored in the checkpoint for inference on raw data.
pub fn train_normalized(
    frames: &[Frame],
    targets: &[Target],
    normalizer: Normalizer,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome> {
    mcfg.validate()?;
    tcfg.validate(mcfg.classes)?;
    check_training_set(frames, targets, &normalizer, mcfg)?;

    let mut model = Model::new(mcfg.clone(), rng::derive_seed(tcfg.seed, "train/init"))?;
    let mut history = Vec::new();
    let mut stopped_early = false;
    if tcfg.epochs > 0 {
        let mut adam = AdamState::new(&model.params);
        let mut grad = model.params.zeros_like();
        let mut shuffle = rng::stream(tcfg.seed, "train/shuffle");
        let dropout_base = rng::derive_seed(tcfg.seed, "train/dropout");
        let mut best = f64::INFINITY;
        let mut since_best = 0;
        let mut step = 0u64;
        for epoch in 0..tcfg.epochs {
            let plan = plan_batches(frames, tcfg.batch_size, &mut shuffle);
            let (mut total, mut count) = (0.0, 0usize);
            for (b, idx) in plan.iter().enumerate() {
                let batch = assemble(frames, targets, idx, mcfg.head)?;
                grad.fill(0.0);
                let pass = Pass {
                    dropout_seed: Some(rng::derive_indexed(dropout_base, "step", step)),
                    class_weights: tcfg.class_weights.as_deref(),
                };
                let loss = model.loss_and_grad(&batch, pass, &mut grad)?;
                if !loss.is_finite() || !grad.all_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite training loss {loss} at epoch {epoch}, batch {b} (window {} samples)",
                        batch.steps()
                    )));
                }
                adam_update(&mut model.params, &grad, &mut adam, tcfg);
                total += loss * idx.len() as f64;
                count += idx.len();
                step += 1;
            }
            let epoch_loss = total / count as f64;
            history.push(epoch_loss);
            if epoch_loss < best {
                best = epoch_loss;
                since_best = 0;
            } else {
                since_best += 1;
                if tcfg.patience > 0 && since_best >= tcfg.patience {
                    stopped_early = epoch + 1 < tcfg.epochs;
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            normalizer,
            seed: tcfg.seed,
        },
        history,
        stopped_early,
    })
}

fn check_training_set(frames: &[Frame], targets: &[Target], normalizer: &Normalizer, mcfg: &ModelConfig) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if frames.len() != targets.len() {
        return Err(Error::Shape(format!("{} frames but {} targets", frames.len(), targets.len())));
    }
    if normalizer.dim() != mcfg.input_dim {
        return Err(Error::Shape(format!(
            "normalization has {} features, model expects {}",
            normalizer.dim(),
            mcfg.input_dim
        )));
    }
    let mut classes = BTreeSet::new();
    for (i, (f, t)) in frames.iter().zip(targets).enumerate() {
        if f.data.ncols() != mcfg.input_dim {
            return Err(Error::Shape(format!(
                "frame {i} has {} features, model expects {}",
                f.data.ncols(),
                mcfg.input_dim
            )));
        }
        match (t, mcfg.head) {
            (Target::Frame(_), HeadKind::FrameLevel) => {}
            (Target::Steps(v), HeadKind::PerTimestep) if v.len() == f.valid_len() => {}
            (Target::Steps(v), HeadKind::PerTimestep) => {
                return Err(Error::Shape(format!(
                    "frame {i}: {} step labels for {} unpadded samples",
                    v.len(),
                    f.valid_len()
                )))
            }
            _ => return Err(Error::invalid(format!("frame {i}: target kind does not match the model head"))),
        }
        if let Some(&y) = t.labels().iter().find(|&&y| y >= mcfg.classes) {
            return Err(Error::invalid(format!("frame {i}: label {y} outside 0..{}", mcfg.classes)));
        }
        classes.extend(t.labels().iter().copied());
    }
    match classes.len() {
        0 => Err(Error::invalid("training set carries no labels")),
        1 => Err(Error::SingleClass(*classes.first().expect("one class"))),
        _ => Ok(()),
    }
}

/// Minibatches of equal-length frames: indices are shuffled within each
/// window length, chunked, and the chunks shuffled together.
fn plan_batches(frames: &[Frame], batch_size: usize, r: &mut rng::Rng) -> Vec<Vec<usize>> {
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, f) in frames.iter().enumerate() {
        by_len.entry(f.window_len()).or_default().push(i);
    }
    let mut batches = Vec::new();
    for mut idx in by_len.into_values() {
        idx.shuffle(r);
        batches.extend(idx.chunks(batch_size).map(<[usize]>::to_vec));
    }
    batches.shuffle(r);
    batches
}

fn assemble(frames: &[Frame], targets: &[Target], idx: &[usize], head: HeadKind) -> Result<Batch> {
    let views: Vec<_> = idx.iter().map(|&i| frames[i].data.view()).collect();
    let targets = match head {
        HeadKind::FrameLevel => Targets::Frame(
            idx.iter()
                .map(|&i| match &targets[i] {
                    Target::Frame(y) => *y,
                    Target::Steps(_) => unreachable!("checked before training"),
                })
                .collect(),
        ),
        HeadKind::PerTimestep => {
            let b = idx.len();
            let steps = frames[idx[0]].window_len();
            let mut out = vec![None; steps * b];
            for (j, &i) in idx.iter().enumerate() {
                for (t, &y) in targets[i].labels().iter().enumerate() {
                    out[t * b + j] = Some(y);
                }
            }
            Targets::Steps(out)
        }
    };
    Batch::new(&views, targets)
}
