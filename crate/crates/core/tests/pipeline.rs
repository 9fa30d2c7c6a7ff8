use pbd_core::dataio::{generate_synthetic, validate_dataset, SynthSpec, TrialCount};
use pbd_core::eval::{run_experiment, ConfusionMatrix, ExperimentSpec, FoldScheme};
use pbd_core::{Dataset, ModelConfig, TrainConfig};

fn tiny(prevalence: f64) -> Dataset {
    generate_synthetic(&SynthSpec {
        n_healthy: 2,
        n_cp: 2,
        trials: TrialCount::PerSubject(1),
        protective_prevalence: prevalence,
        seed: 21,
        ..Default::default()
    })
    .unwrap()
}

fn quick() -> ExperimentSpec {
    ExperimentSpec {
        model: ModelConfig {
            layers: 1,
            hidden: 8,
            ..Default::default()
        },
        train: TrainConfig {
            epochs: 1,
            ..Default::default()
        },
        folds: FoldScheme::Lsso { folds: 2 },
        seed: 4,
        ..Default::default()
    }
}

#[test]
fn pooled_matrix_sums_the_folds() {
    let report = run_experiment(&tiny(0.8), &quick(), 1).unwrap();
    assert!(report.failed_folds.is_empty());
    let mut sum = ConfusionMatrix::zeros(2);
    for f in &report.folds {
        sum.add(&f.metrics.as_ref().unwrap().confusion).unwrap();
    }
    assert_eq!(report.pooled.unwrap().confusion, sum);
}

#[test]
fn same_seed_same_report() {
    let data = tiny(0.8);
    let a = run_experiment(&data, &quick(), 1).unwrap();
    let b = run_experiment(&data, &quick(), 2).unwrap();
    assert_eq!(a.canonical_json().unwrap(), b.canonical_json().unwrap());
}

#[test]
fn no_protective_behavior_fails_every_fold() {
    let report = run_experiment(&tiny(0.0), &quick(), 1).unwrap();
    assert_eq!(report.failed_folds.len(), report.folds.len());
    assert!(report.folds.iter().all(|f| f.error.is_some()));
    assert!(report.pooled.is_none());
}

#[test]
fn written_dataset_reloads_identically() {
    let data = tiny(0.6);
    let dir = tempfile::tempdir().unwrap();
    let manifest = data.write(dir.path()).unwrap();
    assert!(validate_dataset(&manifest, dir.path()).is_valid());
    let back = Dataset::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(back.sequences.len(), data.sequences.len());
    for (a, b) in back.sequences.iter().zip(&data.sequences) {
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.activities, b.activities);
    }
}
