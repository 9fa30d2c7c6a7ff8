//! Cross-validated experiment runner: segment, fuse labels, standardize,
//! augment, train and score every fold of a plan.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_loso, make_lsio, make_lsso, Fold, FoldPlan, FoldScheme, FoldUnits, InstanceKey};
use super::icc::{icc_two_way_mixed_absolute, IccResult};
use super::metrics::{confusion, metrics, ConfusionMatrix, MetricsReport};
use crate::augment::{augment_training_set, AugmentMethod, AugmentSpec};
use crate::dataio::{extract_instances, Activity, Cohort, Dataset};
use crate::error::{Error, Result};
use crate::labelfuse::{fuse_sample_with, frame_ratios, sample_labels, LabelScheme, DEFAULT_MIN_RATERS};
use crate::model::{train_normalized, HeadKind, ModelConfig, Normalizer, Target, TrainConfig, TrainOutcome};
use crate::rng;
use crate::windowing::{multi_length_plan, segment_dataset, Frame, Padding, WindowSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// One length for frame-level models; several build the union training
    /// set of a per-timestep model.
    pub lengths_s: Vec<f64>,
    pub overlap: f64,
    pub padding: Padding,
    pub activity: Option<Activity>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            lengths_s: vec![3.0],
            overlap: 0.75,
            padding: Padding::Zero,
            activity: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub window: WindowConfig,
    pub augment: AugmentSpec,
    pub labels: LabelScheme,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub folds: FoldScheme,
    /// Root of every seed used by the run.
    pub seed: u64,
}

impl ExperimentSpec {
    /// Model configuration with the class count implied by the labels.
    pub fn effective_model(&self) -> ModelConfig {
        let classes = match self.model.head {
            HeadKind::FrameLevel => self.labels.classes(),
            HeadKind::PerTimestep => 2,
        };
        ModelConfig {
            classes,
            ..self.model.clone()
        }
    }

    pub fn window_specs(&self) -> Result<Vec<WindowSpec>> {
        multi_length_plan(&self.window.lengths_s, self.window.overlap, self.window.padding)
    }

    pub fn validate(&self, rater_count: usize) -> Result<()> {
        self.labels.validate(rater_count)?;
        self.augment.validate()?;
        let windows = self.window_specs()?;
        let model = self.effective_model();
        model.validate()?;
        self.train.validate(model.classes)?;
        match model.head {
            HeadKind::FrameLevel if windows.len() > 1 => Err(Error::invalid(
                "a frame-level model takes a single window length; run one experiment per length",
            )),
            HeadKind::PerTimestep if !matches!(self.labels, LabelScheme::Binary { .. }) => Err(Error::invalid(
                "per-timestep models are scored on binary per-sample labels",
            )),
            _ => Ok(()),
        }
    }

    fn sample_min_raters(&self) -> usize {
        match self.labels {
            LabelScheme::Binary { min_raters, .. } => min_raters,
            _ => DEFAULT_MIN_RATERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldError {
    /// `"numeric"` or `"data"`.
    pub kind: String,
    pub message: String,
}

impl FoldError {
    fn from_error(e: &Error) -> Self {
        FoldError {
            kind: if e.is_numeric() { "numeric" } else { "data" }.to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_units: FoldUnits,
    pub train_frames: usize,
    pub train_frames_augmented: usize,
    /// Test frames, or test samples for per-timestep models.
    pub test_items: usize,
    pub epochs_run: usize,
    pub final_loss: Option<f64>,
    pub metrics: Option<MetricsReport>,
    /// Always predicting the majority class of the fold's training labels.
    pub baseline: Option<MetricsReport>,
    /// Model output vs. fused labels on the fold's CP test items.
    pub icc: Option<IccResult>,
    pub error: Option<FoldError>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub folds: usize,
    pub accuracy: f64,
    pub mean_f1: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IccBlock {
    /// Model vs. fused labels over all CP test items.
    pub pooled: Option<IccResult>,
    /// Agreement of the raters' protective fractions on CP frames.
    pub raters: Option<IccResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub subjects: usize,
    pub sequences: usize,
    pub instances: usize,
    pub frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_s: f64,
    pub fold_s: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub scheme: String,
    /// `"frame"` or `"sample"`.
    pub unit: String,
    pub classes: Vec<String>,
    pub dataset: DatasetSummary,
    pub folds: Vec<FoldReport>,
    pub failed_folds: Vec<usize>,
    pub pooled: Option<MetricsReport>,
    pub fold_mean: Option<MeanMetrics>,
    pub baseline: Option<MetricsReport>,
    pub icc: IccBlock,
    pub timings: Timings,
}

impl ExperimentReport {
    /// Report JSON without the wall-clock block; identical for identical runs.
    pub fn canonical_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        v.as_object_mut().expect("report is an object").remove("timings");
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn build_fold_plan(dataset: &Dataset, scheme: FoldScheme, activity: Option<Activity>, seed: u64) -> Result<FoldPlan> {
    let subjects = dataset.subjects();
    let seed = rng::derive_seed(seed, "folds");
    match scheme {
        FoldScheme::Loso => make_loso(&subjects.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>()),
        FoldScheme::Lsso { folds } => make_lsso(
            &subjects.iter().map(|(s, c)| (s.as_str(), *c)).collect::<Vec<_>>(),
            folds,
            seed,
        ),
        FoldScheme::Lsio { test_fraction } => {
            let instances: Vec<(&str, InstanceKey)> = dataset
                .sequences
                .iter()
                .enumerate()
                .flat_map(|(si, seq)| {
                    seq.activities
                        .iter()
                        .enumerate()
                        .filter(move |(_, a)| activity.is_none_or(|f| f == a.activity))
                        .map(move |(ii, _)| (seq.meta.subject_id.as_str(), InstanceKey { sequence: si, instance: ii }))
                })
                .collect();
            make_lsio(&instances, test_fraction, seed)
        }
    }
}

struct Context<'a> {
    dataset: &'a Dataset,
    spec: &'a ExperimentSpec,
    model: ModelConfig,
    frames: Vec<Frame>,
    /// Frame-level class per frame, or per-sample labels for per-timestep runs.
    targets: Vec<Target>,
}

struct FoldOutput {
    report: FoldReport,
    pooled: Option<(ConfusionMatrix, ConfusionMatrix)>,
    cp_pairs: Vec<(usize, usize)>,
}

fn frame_key(f: &Frame) -> InstanceKey {
    InstanceKey {
        sequence: f.sequence,
        instance: f.instance,
    }
}

fn majority(targets: &[&Target], k: usize) -> usize {
    let mut counts = vec![0usize; k];
    for t in targets {
        match t {
            Target::Frame(y) => counts[*y] += 1,
            Target::Steps(v) => v.iter().for_each(|y| counts[*y] += 1),
        }
    }
    // Lowest index among the most frequent classes.
    let max = counts.iter().copied().max().unwrap_or(0);
    counts.iter().position(|&c| c == max).unwrap_or(0)
}

fn augmented_targets(base: &[Target], spec: &AugmentSpec) -> Vec<Target> {
    let blocks = spec.multiplier();
    let reverse_last = spec.methods.contains(&AugmentMethod::Reverse);
    let mut out = Vec::with_capacity(base.len() * blocks);
    for b in 0..blocks {
        let reversed = reverse_last && b + 1 == blocks;
        out.extend(base.iter().map(|t| match t {
            Target::Steps(v) if reversed => Target::Steps(v.iter().rev().copied().collect()),
            other => other.clone(),
        }));
    }
    out
}

fn icc_of_pairs(pairs: &[(usize, usize)]) -> Option<IccResult> {
    if pairs.len() < 2 {
        return None;
    }
    let scores = Array2::from_shape_fn((pairs.len(), 2), |(i, j)| {
        let (t, p) = pairs[i];
        (if j == 0 { t } else { p }) as f64
    });
    icc_two_way_mixed_absolute(scores.view()).ok()
}

fn run_fold(ctx: &Context<'_>, fold: &Fold) -> FoldOutput {
    let mut report = FoldReport {
        fold: fold.id,
        test_units: fold.test.clone(),
        train_frames: 0,
        train_frames_augmented: 0,
        test_items: 0,
        epochs_run: 0,
        final_loss: None,
        metrics: None,
        baseline: None,
        icc: None,
        error: None,
    };
    match fold_body(ctx, fold, &mut report) {
        Ok((cm, base, cp_pairs)) => {
            report.icc = icc_of_pairs(&cp_pairs);
            FoldOutput {
                report,
                pooled: Some((cm, base)),
                cp_pairs,
            }
        }
        Err(e) => {
            report.error = Some(FoldError::from_error(&e));
            report.metrics = None;
            report.baseline = None;
            FoldOutput {
                report,
                pooled: None,
                cp_pairs: Vec::new(),
            }
        }
    }
}

/// Standardizes with statistics of `raw`, augments in standardized space
/// and trains. `stage` keys the augmentation and training seeds.
fn fit(
    raw: Vec<Frame>,
    targets: &[Target],
    spec: &ExperimentSpec,
    model: &ModelConfig,
    stage: u64,
) -> Result<(TrainOutcome, usize)> {
    let normalizer = Normalizer::fit(&raw)?;
    let standardized = raw.iter().map(|f| normalizer.apply_frame(f)).collect::<Result<Vec<_>>>()?;
    drop(raw);
    let augment = AugmentSpec {
        seed: rng::derive_indexed(spec.seed, "augment", stage),
        ..spec.augment.clone()
    };
    let train_set = augment_training_set(&standardized, &augment)?;
    drop(standardized);
    let targets = augmented_targets(targets, &augment);
    let tcfg = TrainConfig {
        seed: rng::derive_indexed(spec.seed, "train", stage),
        ..spec.train.clone()
    };
    let n = train_set.len();
    Ok((train_normalized(&train_set, &targets, normalizer, model, &tcfg)?, n))
}

/// Segments every configured window length and attaches training targets.
fn prepare(dataset: &Dataset, spec: &ExperimentSpec, model: &ModelConfig) -> Result<(Vec<Frame>, Vec<Target>)> {
    let mut frames = Vec::new();
    for w in &spec.window_specs()? {
        frames.extend(segment_dataset(&dataset.sequences, w, spec.window.activity));
    }
    let targets = match model.head {
        HeadKind::FrameLevel => frames
            .iter()
            .map(|f| spec.labels.label_frame(f).map(Target::Frame))
            .collect::<Result<Vec<_>>>()?,
        HeadKind::PerTimestep => frames
            .iter()
            .map(|f| Target::Steps(sample_labels(f, spec.sample_min_raters())))
            .collect(),
    };
    Ok((frames, targets))
}

/// Trains one model on every frame of `dataset` with the experiment's
/// normalization, augmentation and seeds.
pub fn train_on_dataset(dataset: &Dataset, spec: &ExperimentSpec) -> Result<TrainOutcome> {
    spec.validate(dataset.rater_count)?;
    let model = spec.effective_model();
    let (frames, targets) = prepare(dataset, spec, &model)?;
    if frames.is_empty() {
        return Err(Error::invalid("no frames to train on"));
    }
    Ok(fit(frames, &targets, spec, &model, u64::MAX)?.0)
}

type FoldScores = (ConfusionMatrix, ConfusionMatrix, Vec<(usize, usize)>);

fn fold_body(ctx: &Context<'_>, fold: &Fold, report: &mut FoldReport) -> Result<FoldScores> {
    let spec = ctx.spec;
    let k = ctx.model.classes;
    let train_idx: Vec<usize> = (0..ctx.frames.len())
        .filter(|&i| fold.train.contains(&ctx.frames[i].subject_id, frame_key(&ctx.frames[i])))
        .collect();
    if train_idx.is_empty() {
        return Err(Error::invalid(format!("fold {} has no training frames", fold.id)));
    }
    let raw: Vec<Frame> = train_idx.iter().map(|&i| ctx.frames[i].clone()).collect();
    let base_targets: Vec<Target> = train_idx.iter().map(|&i| ctx.targets[i].clone()).collect();
    report.train_frames = raw.len();
    let (outcome, augmented) = fit(raw, &base_targets, spec, &ctx.model, fold.id as u64)?;
    report.train_frames_augmented = augmented;
    report.epochs_run = outcome.history.len();
    report.final_loss = outcome.history.last().copied();
    let ckpt = outcome.checkpoint;
    let majority_class = majority(&base_targets.iter().collect::<Vec<_>>(), k);

    let (truth, pred, cohorts): (Vec<usize>, Vec<usize>, Vec<Cohort>) = match ctx.model.head {
        HeadKind::FrameLevel => {
            let test: Vec<Frame> = ctx
                .frames
                .iter()
                .filter(|f| fold.test.contains(&f.subject_id, frame_key(f)))
                .cloned()
                .collect();
            let truth = test
                .iter()
                .map(|f| spec.labels.label_frame(f))
                .collect::<Result<Vec<_>>>()?;
            let pred = ckpt.predict_frames(&test)?;
            (truth, pred, test.iter().map(|f| f.cohort).collect())
        }
        HeadKind::PerTimestep => {
            let (mut truth, mut pred, mut cohorts) = (Vec::new(), Vec::new(), Vec::new());
            let min_raters = spec.sample_min_raters();
            for (si, seq) in ctx.dataset.sequences.iter().enumerate() {
                for view in extract_instances(seq) {
                    let key = InstanceKey {
                        sequence: si,
                        instance: view.index,
                    };
                    if spec.window.activity.is_some_and(|a| a != view.instance.activity)
                        || !fold.test.contains(&seq.meta.subject_id, key)
                    {
                        continue;
                    }
                    let labels = ckpt.predict_steps(view.samples)?;
                    let mut marks = vec![0u8; view.raters.len()];
                    for t in 0..view.samples.nrows() {
                        for (m, r) in marks.iter_mut().zip(&view.raters) {
                            *m = r[t];
                        }
                        truth.push(fuse_sample_with(&marks, min_raters) as usize);
                    }
                    cohorts.extend(std::iter::repeat_n(seq.meta.cohort, labels.len()));
                    pred.extend(labels);
                }
            }
            (truth, pred, cohorts)
        }
    };
    if truth.is_empty() {
        return Err(Error::invalid(format!("fold {} has no test items", fold.id)));
    }
    report.test_items = truth.len();
    let cm = confusion(&truth, &pred, k)?;
    let base = confusion(&truth, &vec![majority_class; truth.len()], k)?;
    report.metrics = Some(MetricsReport {
        fold: Some(fold.id),
        ..metrics(&cm)?
    });
    report.baseline = Some(MetricsReport {
        fold: Some(fold.id),
        ..metrics(&base)?
    });
    let cp_pairs = truth
        .iter()
        .zip(&pred)
        .zip(&cohorts)
        .filter(|(_, c)| **c == Cohort::Cp)
        .map(|((t, p), _)| (*t, *p))
        .collect();
    Ok((cm, base, cp_pairs))
}

/// Runs every fold of the configured plan; `jobs` folds train in parallel.
/// Fold failures are recorded in the report and do not stop the run.
pub fn run_experiment(dataset: &Dataset, spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentReport> {
    run_experiment_with(dataset, spec, jobs, &|_| {})
}

pub fn run_experiment_with(
    dataset: &Dataset,
    spec: &ExperimentSpec,
    jobs: usize,
    on_fold: &(dyn Fn(&FoldReport) + Sync),
) -> Result<ExperimentReport> {
    let started = Instant::now();
    spec.validate(dataset.rater_count)?;
    let model = spec.effective_model();
    let plan = build_fold_plan(dataset, spec.folds, spec.window.activity, spec.seed)?;
    let (frames, targets) = prepare(dataset, spec, &model)?;
    let rater_icc = {
        let cp: Vec<&Frame> = frames.iter().filter(|f| f.cohort == Cohort::Cp).collect();
        let rows = cp.iter().map(|f| frame_ratios(f)).collect::<Result<Vec<_>>>()?;
        (rows.len() >= 2)
            .then(|| {
                let r = dataset.rater_count;
                let m = Array2::from_shape_fn((rows.len(), r), |(i, j)| rows[i].per_rater[j]);
                icc_two_way_mixed_absolute(m.view()).ok()
            })
            .flatten()
    };
    let ctx = Context {
        dataset,
        spec,
        model,
        frames,
        targets,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {jobs} workers: {e}")))?;
    let outputs: Vec<(FoldOutput, f64)> = pool.install(|| {
        plan.folds
            .par_iter()
            .map(|fold| {
                let t = Instant::now();
                let out = run_fold(&ctx, fold);
                on_fold(&out.report);
                (out, t.elapsed().as_secs_f64())
            })
            .collect()
    });

    let k = ctx.model.classes;
    let mut pooled_cm = ConfusionMatrix::zeros(k);
    let mut pooled_base = ConfusionMatrix::zeros(k);
    let mut cp_pairs = Vec::new();
    let mut folds = Vec::with_capacity(outputs.len());
    let mut fold_s = Vec::with_capacity(outputs.len());
    for (out, secs) in outputs {
        if let Some((cm, base)) = &out.pooled {
            pooled_cm.add(cm)?;
            pooled_base.add(base)?;
        }
        cp_pairs.extend(out.cp_pairs);
        folds.push(out.report);
        fold_s.push(secs);
    }
    let scored: Vec<&MetricsReport> = folds.iter().filter_map(|f| f.metrics.as_ref()).collect();
    let fold_mean = (!scored.is_empty()).then(|| {
        let n = scored.len() as f64;
        let mean = |f: fn(&MetricsReport) -> f64| scored.iter().map(|m| f(m)).sum::<f64>() / n;
        MeanMetrics {
            folds: scored.len(),
            accuracy: mean(|m| m.accuracy),
            mean_f1: mean(|m| m.mean_f1),
            mean_precision: mean(|m| m.mean_precision),
            mean_recall: mean(|m| m.mean_recall),
        }
    });
    let classes = match ctx.model.head {
        HeadKind::FrameLevel => spec.labels.class_names(),
        HeadKind::PerTimestep => LabelScheme::binary().class_names(),
    };
    let instances = ctx
        .dataset
        .sequences
        .iter()
        .map(|s| {
            s.activities
                .iter()
                .filter(|a| spec.window.activity.is_none_or(|f| f == a.activity))
                .count()
        })
        .sum();
    Ok(ExperimentReport {
        spec: spec.clone(),
        scheme: spec.folds.to_string(),
        unit: match ctx.model.head {
            HeadKind::FrameLevel => "frame",
            HeadKind::PerTimestep => "sample",
        }
        .to_string(),
        classes: classes.iter().map(|s| s.to_string()).collect(),
        dataset: DatasetSummary {
            subjects: dataset.subjects().len(),
            sequences: dataset.sequences.len(),
            instances,
            frames: ctx.frames.len(),
        },
        failed_folds: folds.iter().filter(|f| f.error.is_some()).map(|f| f.fold).collect(),
        pooled: (pooled_cm.total() > 0).then(|| metrics(&pooled_cm)).transpose()?,
        baseline: (pooled_base.total() > 0).then(|| metrics(&pooled_base)).transpose()?,
        fold_mean,
        icc: IccBlock {
            pooled: icc_of_pairs(&cp_pairs),
            raters: rater_icc,
        },
        folds,
        timings: Timings {
            total_s: started.elapsed().as_secs_f64(),
            fold_s,
        },
    })
}

/// Frames per activity and class under `scheme`, for dataset summaries.
pub fn class_histogram(frames: &[Frame], scheme: &LabelScheme) -> Result<BTreeMap<Activity, Vec<usize>>> {
    let mut out: BTreeMap<Activity, Vec<usize>> = BTreeMap::new();
    for f in frames {
        let y = scheme.label_frame(f)?;
        out.entry(f.activity).or_insert_with(|| vec![0; scheme.classes()])[y] += 1;
    }
    Ok(out)
}
