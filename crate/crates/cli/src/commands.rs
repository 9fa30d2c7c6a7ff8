use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pbd_core::dataio::{extract_instances, generate_synthetic, Cohort, SynthSpec, TrialCount};
use pbd_core::eval::{class_histogram, run_experiment_with, train_on_dataset, ExperimentReport, FoldReport, FoldScheme};
use pbd_core::labelfuse::{fuse_sample, write_labels_csv, DEFAULT_QUAD_SPLIT};
use pbd_core::windowing::{segment_dataset, write_frames_csv};
use pbd_core::{Architecture, HeadKind, LabelScheme, Padding, WindowSpec};

use crate::config::ExperimentConfig;
use crate::{
    ArchArg, CliError, Common, EvaluateArgs, HeadArg, LabelArgs, LabelKind, ModelArgs, PaddingArg, SchemeArg,
    SegmentArgs, SynthArgs, TrainArgs, TrainFlags, WindowArgs,
};

type CliResult<T = ()> = Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

fn base_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load_optional(common.config.as_deref())?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.out_dir.is_some() {
        cfg.out_dir = common.out_dir.clone();
    }
    Ok(cfg)
}

fn apply_window(cfg: &mut ExperimentConfig, a: &WindowArgs) {
    if let Some(w) = &a.window {
        cfg.window.lengths_s = w.clone();
    }
    if let Some(o) = a.overlap {
        cfg.window.overlap = o;
    }
    if let Some(p) = a.padding {
        cfg.window.padding = match p {
            PaddingArg::Zero => Padding::Zero,
            PaddingArg::Last => Padding::Last,
            PaddingArg::Next => Padding::Next,
        };
    }
    if a.activity.is_some() {
        cfg.window.activity = a.activity;
    }
}

fn label_kind(s: &LabelScheme) -> LabelKind {
    match s {
        LabelScheme::Binary { .. } => LabelKind::Binary,
        LabelScheme::Tri { .. } => LabelKind::Tri,
        LabelScheme::Quad { .. } => LabelKind::Quad,
    }
}

/// Flags win; a kind switch falls back to that kind's defaults.
fn apply_labels(cfg: &mut ExperimentConfig, a: &LabelArgs) {
    let cur = cfg.labels;
    let kind = a.labels.unwrap_or(label_kind(&cur));
    let fresh = if kind == label_kind(&cur) {
        cur
    } else {
        match kind {
            LabelKind::Binary => LabelScheme::binary(),
            LabelKind::Tri => LabelScheme::tri(2),
            LabelKind::Quad => LabelScheme::quad(3, DEFAULT_QUAD_SPLIT),
        }
    };
    cfg.labels = match fresh {
        LabelScheme::Binary { min_raters, threshold } => LabelScheme::Binary {
            min_raters: a.n.unwrap_or(min_raters),
            threshold,
        },
        LabelScheme::Tri { n, threshold } => LabelScheme::Tri {
            n: a.n.unwrap_or(n),
            threshold,
        },
        LabelScheme::Quad { n, split, threshold } => LabelScheme::Quad {
            n: a.n.unwrap_or(n),
            split: a.split.unwrap_or(split),
            threshold,
        },
    };
}

fn apply_model(cfg: &mut ExperimentConfig, a: &ModelArgs) {
    if let Some(arch) = a.arch {
        cfg.model.architecture = match arch {
            ArchArg::Stacked => Architecture::Stacked,
            ArchArg::DualStream => Architecture::DualStream,
        };
    }
    if let Some(h) = a.head {
        cfg.model.head = match h {
            HeadArg::FrameLevel => HeadKind::FrameLevel,
            HeadArg::PerTimestep => HeadKind::PerTimestep,
        };
    }
    if let Some(l) = a.layers {
        cfg.model.layers = l;
    }
    if let Some(h) = a.hidden {
        cfg.model.hidden = h;
    }
}

fn apply_train(cfg: &mut ExperimentConfig, a: &TrainFlags) {
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(p) = a.patience {
        cfg.train.patience = p;
    }
    if a.no_augment {
        cfg.augment = pbd_core::AugmentSpec::none();
    }
}

fn apply_dataset(cfg: &mut ExperimentConfig, dataset: &Option<PathBuf>) {
    if let Some(d) = dataset {
        cfg.dataset = Some(d.clone());
        cfg.synthetic = None;
    }
}

fn usage_if_invalid(e: pbd_core::Error) -> CliError {
    match e {
        pbd_core::Error::InvalidArgument(m) => CliError::Usage(m),
        other => other.into(),
    }
}

pub fn synth(a: SynthArgs) -> CliResult {
    let cfg = base_config(&a.common)?;
    let mut spec = cfg.synthetic.clone().unwrap_or_default();
    if let Some(seed) = a.common.seed {
        spec.seed = seed;
    }
    let SynthSpec {
        n_healthy,
        n_cp,
        rater_count,
        protective_prevalence,
        rater_boundary_jitter_sd,
        rater_miss_prob,
        ..
    } = &mut spec;
    *n_healthy = a.n_healthy.unwrap_or(*n_healthy);
    *n_cp = a.n_cp.unwrap_or(*n_cp);
    *rater_count = a.rater_count.unwrap_or(*rater_count);
    *protective_prevalence = a.prevalence.unwrap_or(*protective_prevalence);
    *rater_boundary_jitter_sd = a.jitter_sd.unwrap_or(*rater_boundary_jitter_sd);
    *rater_miss_prob = a.miss_prob.unwrap_or(*rater_miss_prob);
    if let Some(t) = a.trials {
        spec.trials = TrialCount::Total(t);
    }
    if let Some(k) = a.trials_per_subject {
        spec.trials = TrialCount::PerSubject(k);
    }
    let data = generate_synthetic(&spec).map_err(usage_if_invalid)?;
    let out = cfg.out_dir();
    data.write(&out)?;

    let (mut active, mut protective, mut instances, mut marked) = (0usize, 0usize, 0usize, 0usize);
    let mut marks = Vec::new();
    for seq in &data.sequences {
        for view in extract_instances(seq) {
            instances += 1;
            let mut any = false;
            for t in 0..view.samples.nrows() {
                marks.clear();
                marks.extend(view.raters.iter().map(|r| r[t]));
                active += 1;
                if fuse_sample(&marks) as usize == 1 {
                    protective += 1;
                    any = true;
                }
            }
            marked += usize::from(any);
        }
    }
    let subjects = data.subjects();
    let cp = subjects.iter().filter(|(_, c)| *c == Cohort::Cp).count();
    println!("wrote {}", out.join("manifest.json").display());
    println!(
        "subjects: {} ({} healthy, {cp} CP)\nsequences: {}\nraters: {}",
        subjects.len(),
        subjects.len() - cp,
        data.sequences.len(),
        data.rater_count
    );
    println!(
        "protective prevalence: {:.1}% of activity samples, {marked}/{instances} instances",
        100.0 * protective as f64 / active.max(1) as f64
    );
    Ok(())
}

fn single_window(cfg: &ExperimentConfig) -> CliResult<WindowSpec> {
    let specs = cfg.experiment().window_specs().map_err(usage_if_invalid)?;
    match specs.as_slice() {
        [one] => Ok(*one),
        _ => Err(CliError::Usage("segment takes exactly one window length".into())),
    }
}

pub fn segment(a: SegmentArgs) -> CliResult {
    let mut cfg = base_config(&a.common)?;
    apply_dataset(&mut cfg, &a.data.dataset);
    apply_window(&mut cfg, &a.window);
    apply_labels(&mut cfg, &a.labels);
    let window = single_window(&cfg)?;
    let data = cfg.dataset()?;
    cfg.labels.validate(data.rater_count).map_err(usage_if_invalid)?;
    let frames = segment_dataset(&data.sequences, &window, cfg.window.activity);
    let expected: usize = data
        .sequences
        .iter()
        .flat_map(|s| &s.activities)
        .filter(|i| cfg.window.activity.is_none_or(|f| f == i.activity))
        .map(|i| window.frame_count(i.len()))
        .sum();
    let hist = class_histogram(&frames, &cfg.labels)?;
    let names = cfg.labels.class_names();

    println!(
        "window {} samples, step {}, padding {:?}, labels {}",
        window.window_len, window.step, window.padding, cfg.labels
    );
    print!("{:<16}{:>8}", "activity", "frames");
    for n in names {
        print!("{n:>16}");
    }
    println!();
    let mut totals = vec![0usize; names.len()];
    for (activity, counts) in &hist {
        print!("{:<16}{:>8}", activity.slug(), counts.iter().sum::<usize>());
        for (c, t) in counts.iter().zip(totals.iter_mut()) {
            print!("{c:>16}");
            *t += c;
        }
        println!();
    }
    print!("{:<16}{:>8}", "total", frames.len());
    for t in &totals {
        print!("{t:>16}");
    }
    println!();
    println!("expected frames (sum of ceil(L/S) over instances): {expected}");

    if let Some(path) = &a.dump_frames {
        write_frames_csv(create(path)?, &frames)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &a.dump_labels {
        let (tri_n, quad_n, split) = match cfg.labels {
            LabelScheme::Tri { n, .. } => (n, 3, DEFAULT_QUAD_SPLIT),
            LabelScheme::Quad { n, split, .. } => (2, n, split),
            LabelScheme::Binary { .. } => (2, 3, DEFAULT_QUAD_SPLIT),
        };
        write_labels_csv(create(path)?, &frames, tri_n, quad_n, split)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn describe_model(cfg: &pbd_core::ModelConfig) -> String {
    let streams: Vec<String> = cfg.streams().iter().map(|s| s.hidden.to_string()).collect();
    match cfg.architecture {
        Architecture::Stacked => format!("stacked {} x {}", cfg.layers, cfg.hidden),
        Architecture::DualStream => format!("dual-stream {} layers, streams ({})", cfg.layers, streams.join(", ")),
    }
}

pub fn train(a: TrainArgs) -> CliResult {
    let mut cfg = base_config(&a.common)?;
    apply_dataset(&mut cfg, &a.data.dataset);
    apply_window(&mut cfg, &a.window);
    apply_labels(&mut cfg, &a.labels);
    apply_model(&mut cfg, &a.model);
    apply_train(&mut cfg, &a.train);
    let data = cfg.dataset()?;
    let spec = cfg.experiment();
    spec.validate(data.rater_count).map_err(usage_if_invalid)?;
    let outcome = train_on_dataset(&data, &spec)?;

    let out = cfg.out_dir();
    let ckpt_path = out.join("checkpoint.json");
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    outcome.checkpoint.save(&ckpt_path)?;
    let loss_path = out.join("loss.csv");
    let mut w = create(&loss_path)?;
    writeln!(w, "epoch,loss").map_err(|e| io_err(&loss_path, e))?;
    for (i, l) in outcome.history.iter().enumerate() {
        writeln!(w, "{},{l}", i + 1).map_err(|e| io_err(&loss_path, e))?;
    }
    w.flush().map_err(|e| io_err(&loss_path, e))?;

    println!("model: {}", describe_model(outcome.checkpoint.config()));
    println!(
        "epochs run: {}{}",
        outcome.history.len(),
        if outcome.stopped_early { " (stopped early)" } else { "" }
    );
    if let Some(l) = outcome.history.last() {
        println!("final training loss: {l:.6}");
    }
    println!("wrote {}\nwrote {}", ckpt_path.display(), loss_path.display());
    Ok(())
}

/// `START:END:STEP` in seconds, both ends inclusive.
pub fn parse_sweep(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("--window-sweep expects START:END:STEP seconds, got {s:?}"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, end, step] = parts[..] else { return Err(bad()) };
    if !(start > 0.0 && step > 0.0 && end >= start && end.is_finite()) {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e6).round() / 1e6).collect())
}

fn progress(r: &FoldReport) {
    match (&r.metrics, &r.error) {
        (Some(m), _) => eprintln!(
            "  fold {:>3}: F_m {:.3} acc {:.3} (baseline F_m {:.3}), {} train frames",
            r.fold,
            m.mean_f1,
            m.accuracy,
            r.baseline.as_ref().map_or(f64::NAN, |b| b.mean_f1),
            r.train_frames
        ),
        (None, Some(e)) => eprintln!("  fold {:>3}: failed ({}): {}", r.fold, e.kind, e.message),
        (None, None) => eprintln!("  fold {:>3}: no result", r.fold),
    }
}

fn write_report(report: &ExperimentReport, dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("report.json");
    fs::write(&path, report.to_json()? + "\n").map_err(|e| io_err(&path, e))?;
    let names: Vec<&str> = report.classes.iter().map(String::as_str).collect();
    if let Some(p) = &report.pooled {
        p.confusion.write_csv(create(&dir.join("confusion.csv"))?, &names)?;
    }
    for f in &report.folds {
        if let Some(m) = &f.metrics {
            let path = dir.join(format!("confusion_fold{:02}.csv", f.fold));
            m.confusion.write_csv(create(&path)?, &names)?;
        }
    }
    Ok(())
}

fn print_summary(report: &ExperimentReport, dir: &Path) {
    println!(
        "{} {} ({} classes, {} {}s): {} folds, {} failed",
        report.scheme,
        report.spec.labels,
        report.classes.len(),
        report.pooled.as_ref().map_or(0, |p| p.confusion.total()),
        report.unit,
        report.folds.len(),
        report.failed_folds.len()
    );
    if let Some(p) = &report.pooled {
        println!(
            "  pooled:    acc {:.4}  F_m {:.4}  precision {:.4}  recall {:.4}",
            p.accuracy, p.mean_f1, p.mean_precision, p.mean_recall
        );
    }
    if let Some(m) = &report.fold_mean {
        println!("  fold mean: acc {:.4}  F_m {:.4}", m.accuracy, m.mean_f1);
    }
    if let Some(b) = &report.baseline {
        println!("  baseline:  acc {:.4}  F_m {:.4}", b.accuracy, b.mean_f1);
    }
    if let Some(icc) = &report.icc.pooled {
        println!("  ICC(A,1) model vs groundtruth on CP: {:.4}", icc.icc_single);
    }
    println!("  wrote {}", dir.join("report.json").display());
}

pub fn evaluate(a: EvaluateArgs) -> CliResult {
    let mut cfg = base_config(&a.common)?;
    apply_dataset(&mut cfg, &a.data.dataset);
    apply_window(&mut cfg, &a.window);
    apply_labels(&mut cfg, &a.labels);
    apply_model(&mut cfg, &a.model);
    apply_train(&mut cfg, &a.train);
    if let Some(s) = a.scheme {
        cfg.folds = match s {
            SchemeArg::Loso => FoldScheme::Loso,
            SchemeArg::Lsso => FoldScheme::Lsso {
                folds: a.folds.unwrap_or(6),
            },
            SchemeArg::Lsio => FoldScheme::Lsio {
                test_fraction: a.test_fraction.unwrap_or(0.2),
            },
        };
    } else {
        match &mut cfg.folds {
            FoldScheme::Lsso { folds } => *folds = a.folds.unwrap_or(*folds),
            FoldScheme::Lsio { test_fraction } => *test_fraction = a.test_fraction.unwrap_or(*test_fraction),
            FoldScheme::Loso => {}
        }
    }
    if a.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let base = cfg.experiment();
    let out = cfg.out_dir();
    let runs: Vec<(PathBuf, _)> = match &a.window_sweep {
        None => vec![(out.clone(), base)],
        Some(s) => {
            if base.model.head == HeadKind::PerTimestep {
                return Err(CliError::Usage("--window-sweep applies to frame-level models".into()));
            }
            parse_sweep(s)?
                .into_iter()
                .map(|len| {
                    let mut spec = base.clone();
                    spec.window.lengths_s = vec![len];
                    (out.join(format!("w{len}s")), spec)
                })
                .collect()
        }
    };
    let data = cfg.dataset()?;
    for (_, spec) in &runs {
        spec.validate(data.rater_count).map_err(usage_if_invalid)?;
    }

    let mut failures = Vec::new();
    for (dir, spec) in &runs {
        eprintln!("evaluating {} {} window {:?} s", spec.folds, spec.labels, spec.window.lengths_s);
        let report = run_experiment_with(&data, spec, a.jobs, &progress)?;
        write_report(&report, dir)?;
        print_summary(&report, dir);
        failures.extend(report.folds.iter().filter_map(|f| f.error.clone()));
    }
    if a.strict && !failures.is_empty() {
        let detail: Vec<String> = failures.iter().map(|e| e.message.clone()).collect();
        let msg = format!("{} fold(s) failed: {}", failures.len(), detail.join("; "));
        return Err(if failures.iter().any(|e| e.kind == "numeric") {
            CliError::Numeric(msg)
        } else {
            CliError::Data(msg)
        });
    }
    Ok(())
}
