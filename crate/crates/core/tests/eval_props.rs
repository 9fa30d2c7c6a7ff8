use std::collections::BTreeSet;

use ndarray::Array2;
use pbd_core::eval::{
    confusion, icc_two_way_mixed_absolute, make_loso, make_lsio, make_lsso, metrics, ConfusionMatrix, FoldPlan,
    FoldUnits, InstanceKey,
};
use pbd_core::Cohort;
use proptest::prelude::*;

fn counts(k: usize) -> impl Strategy<Value = Vec<Vec<u64>>> {
    proptest::collection::vec(proptest::collection::vec(0u64..50, k), k)
}

fn any_counts() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (2usize..=4).prop_flat_map(counts)
}

fn scores() -> impl Strategy<Value = Array2<f64>> {
    (3usize..20, 2usize..6).prop_flat_map(|(n, k)| {
        proptest::collection::vec(-5.0f64..5.0, n * k)
            .prop_map(move |v| Array2::from_shape_vec((n, k), v).unwrap())
    })
}

fn assert_partition(plan: &FoldPlan, units: &BTreeSet<String>) -> Result<(), TestCaseError> {
    let mut seen = BTreeSet::new();
    for fold in &plan.folds {
        let FoldUnits::Subjects(test) = &fold.test else {
            return Err(TestCaseError::fail("expected subject folds"));
        };
        let FoldUnits::Subjects(train) = &fold.train else {
            return Err(TestCaseError::fail("expected subject folds"));
        };
        prop_assert!(test.is_disjoint(train));
        prop_assert_eq!(&test.union(train).cloned().collect::<BTreeSet<_>>(), units);
        for s in test {
            prop_assert!(seen.insert(s.clone()), "{} tested twice", s);
        }
    }
    prop_assert_eq!(&seen, units);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metrics_are_bounded(c in any_counts()) {
        prop_assume!(c.iter().flatten().sum::<u64>() > 0);
        let m = metrics(&ConfusionMatrix::from_counts(c).unwrap()).unwrap();
        for v in [m.accuracy, m.mean_f1, m.mean_precision, m.mean_recall] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        for cls in &m.per_class {
            let (p, r) = (cls.precision, cls.recall);
            let hm = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            prop_assert!((cls.f1 - hm).abs() < 1e-12);
        }
    }

    #[test]
    fn pooled_confusion_is_fold_sum(folds in proptest::collection::vec(counts(3), 1..6)) {
        let mut pooled = ConfusionMatrix::zeros(3);
        for c in &folds {
            pooled.add(&ConfusionMatrix::from_counts(c.clone()).unwrap()).unwrap();
        }
        let mut expect = vec![vec![0u64; 3]; 3];
        for c in &folds {
            for i in 0..3 {
                for j in 0..3 {
                    expect[i][j] += c[i][j];
                }
            }
        }
        prop_assert_eq!(pooled, ConfusionMatrix::from_counts(expect).unwrap());
    }

    #[test]
    fn confusion_counts_pairs(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..200)) {
        let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let cm = confusion(&truth, &pred, 4).unwrap();
        prop_assert_eq!(cm.total(), pairs.len() as u64);
        prop_assert_eq!(cm.trace(), pairs.iter().filter(|(a, b)| a == b).count() as u64);
    }

    #[test]
    fn icc_ignores_rater_order(x in scores(), seed in any::<u64>()) {
        let base = icc_two_way_mixed_absolute(x.view()).unwrap();
        let k = x.ncols();
        let mut order: Vec<usize> = (0..k).collect();
        order.rotate_left((seed % k as u64) as usize);
        order.swap(0, k - 1);
        let permuted = x.select(ndarray::Axis(1), &order);
        let p = icc_two_way_mixed_absolute(permuted.view()).unwrap();
        prop_assert!((base.icc_single - p.icc_single).abs() < 1e-9);
        prop_assert!((base.icc_average - p.icc_average).abs() < 1e-9);
    }

    #[test]
    fn average_icc_dominates_single(x in scores()) {
        let r = icc_two_way_mixed_absolute(x.view()).unwrap();
        prop_assume!(r.ms_rows > r.ms_error);
        prop_assert!(r.icc_average >= r.icc_single - 1e-12);
    }

    #[test]
    fn loso_partitions_subjects(n in 2usize..30) {
        let names: Vec<String> = (0..n).map(|i| format!("S{i:02}")).collect();
        let ids: Vec<&str> = names.iter().map(String::as_str).collect();
        let plan = make_loso(&ids).unwrap();
        prop_assert_eq!(plan.folds.len(), n);
        assert_partition(&plan, &names.iter().cloned().collect())?;
    }

    #[test]
    fn lsso_partitions_and_balances(folds in 2usize..5, per_cp in 1usize..4, per_h in 1usize..3, seed in any::<u64>()) {
        let mut subjects = Vec::new();
        for i in 0..folds * per_cp {
            subjects.push((format!("P{i:02}"), Cohort::Cp));
        }
        for i in 0..folds * per_h {
            subjects.push((format!("C{i:02}"), Cohort::Healthy));
        }
        let refs: Vec<(&str, Cohort)> = subjects.iter().map(|(s, c)| (s.as_str(), *c)).collect();
        let plan = make_lsso(&refs, folds, seed).unwrap();
        prop_assert_eq!(plan.folds.len(), folds);
        assert_partition(&plan, &subjects.iter().map(|(s, _)| s.clone()).collect())?;
        for fold in &plan.folds {
            let FoldUnits::Subjects(test) = &fold.test else { unreachable!() };
            prop_assert_eq!(test.iter().filter(|s| s.starts_with('P')).count(), per_cp);
        }
        prop_assert_eq!(make_lsso(&refs, folds, seed).unwrap(), plan);
    }

    #[test]
    fn lsio_tests_every_instance_once(per_subject in proptest::collection::vec(1usize..6, 1..8), seed in any::<u64>()) {
        let names: Vec<String> = (0..per_subject.len()).map(|i| format!("S{i}")).collect();
        let mut all = Vec::new();
        for (s, &n) in per_subject.iter().enumerate() {
            for i in 0..n {
                all.push((names[s].as_str(), InstanceKey { sequence: s, instance: i }));
            }
        }
        let plan = make_lsio(&all, 0.2, seed).unwrap();
        prop_assert_eq!(plan.folds.len(), 5);
        let mut seen = BTreeSet::new();
        for fold in &plan.folds {
            let FoldUnits::Instances(test) = &fold.test else { unreachable!() };
            let FoldUnits::Instances(train) = &fold.train else { unreachable!() };
            prop_assert!(test.is_disjoint(train));
            prop_assert_eq!(test.len() + train.len(), all.len());
            for key in test {
                prop_assert!(seen.insert(*key));
            }
        }
        prop_assert_eq!(seen.len(), all.len());
    }
}

#[test]
fn hand_verified_binary_case() {
    let m = metrics(&ConfusionMatrix::from_counts(vec![vec![30, 10], vec![20, 40]]).unwrap()).unwrap();
    assert!((m.accuracy - 0.7).abs() < 1e-12);
    assert!((m.mean_f1 - 0.6970).abs() < 1e-4);
}

#[test]
fn uneven_lsso_is_rejected() {
    let refs = [("P1", Cohort::Cp), ("P2", Cohort::Cp), ("P3", Cohort::Cp), ("C1", Cohort::Healthy), ("C2", Cohort::Healthy)];
    assert!(make_lsso(&refs, 2, 0).is_err());
}

#[test]
fn identical_raters_agree_perfectly() {
    let x = Array2::from_shape_fn((8, 3), |(i, _)| (i as f64).powi(2));
    let r = icc_two_way_mixed_absolute(x.view()).unwrap();
    assert_eq!((r.icc_single, r.icc_average), (1.0, 1.0));
}
