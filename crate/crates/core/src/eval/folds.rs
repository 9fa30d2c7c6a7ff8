//! Cross-validation plans: leave-one-subject-out, leave-some-subjects-out
//! with a fixed cohort composition, and leave-some-instances-out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataio::Cohort;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FoldScheme {
    Loso,
    Lsso {
        #[serde(default = "default_lsso_folds")]
        folds: usize,
    },
    Lsio {
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
}

fn default_lsso_folds() -> usize {
    6
}

fn default_test_fraction() -> f64 {
    0.2
}

impl Default for FoldScheme {
    fn default() -> Self {
        FoldScheme::Loso
    }
}

impl fmt::Display for FoldScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldScheme::Loso => write!(f, "loso"),
            FoldScheme::Lsso { folds } => write!(f, "lsso-{folds}"),
            FoldScheme::Lsio { test_fraction } => write!(f, "lsio-{test_fraction}"),
        }
    }
}

/// One activity instance: sequence index in the dataset and instance index
/// within that sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceKey {
    pub sequence: usize,
    pub instance: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldUnits {
    Subjects(BTreeSet<String>),
    Instances(BTreeSet<InstanceKey>),
}

impl FoldUnits {
    pub fn len(&self) -> usize {
        match self {
            FoldUnits::Subjects(s) => s.len(),
            FoldUnits::Instances(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, subject: &str, key: InstanceKey) -> bool {
        match self {
            FoldUnits::Subjects(s) => s.contains(subject),
            FoldUnits::Instances(s) => s.contains(&key),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub id: usize,
    pub train: FoldUnits,
    pub test: FoldUnits,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub scheme: FoldScheme,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

fn distinct(ids: &[&str]) -> Result<()> {
    let mut seen = BTreeSet::new();
    match ids.iter().find(|id| !seen.insert(**id)) {
        Some(dup) => Err(Error::invalid(format!("duplicate subject id {dup:?}"))),
        None => Ok(()),
    }
}

fn subject_folds(all: &[&str], tests: Vec<BTreeSet<String>>) -> Vec<Fold> {
    tests
        .into_iter()
        .enumerate()
        .map(|(id, test)| Fold {
            id,
            train: FoldUnits::Subjects(all.iter().filter(|s| !test.contains(**s)).map(|s| s.to_string()).collect()),
            test: FoldUnits::Subjects(test),
        })
        .collect()
}

/// One fold per subject, in the given order.
pub fn make_loso(subjects: &[&str]) -> Result<FoldPlan> {
    if subjects.len() < 2 {
        return Err(Error::invalid(format!("LOSO needs at least 2 subjects, got {}", subjects.len())));
    }
    distinct(subjects)?;
    let tests = subjects.iter().map(|s| BTreeSet::from([s.to_string()])).collect();
    Ok(FoldPlan {
        scheme: FoldScheme::Loso,
        seed: 0,
        folds: subject_folds(subjects, tests),
    })
}

/// `folds` test folds, each with the same number of CP and healthy subjects.
pub fn make_lsso(subjects: &[(&str, Cohort)], folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::invalid(format!("LSSO needs at least 2 folds, got {folds}")));
    }
    let ids: Vec<&str> = subjects.iter().map(|(s, _)| *s).collect();
    distinct(&ids)?;
    let mut cp: Vec<&str> = subjects.iter().filter(|(_, c)| *c == Cohort::Cp).map(|(s, _)| *s).collect();
    let mut healthy: Vec<&str> = subjects.iter().filter(|(_, c)| *c == Cohort::Healthy).map(|(s, _)| *s).collect();
    for (name, group) in [("CP", &cp), ("healthy", &healthy)] {
        if group.is_empty() || group.len() % folds != 0 {
            let per = group.len().div_ceil(folds).max(1);
            return Err(Error::InfeasiblePlan(format!(
                "{} {name} subjects cannot fill {folds} folds evenly: {} more needed for {per} per fold",
                group.len(),
                per * folds - group.len()
            )));
        }
    }
    let mut r = rng::stream(seed, "folds/lsso");
    cp.shuffle(&mut r);
    healthy.shuffle(&mut r);
    let (pc, ph) = (cp.len() / folds, healthy.len() / folds);
    let tests = (0..folds)
        .map(|f| {
            cp[f * pc..(f + 1) * pc]
                .iter()
                .chain(&healthy[f * ph..(f + 1) * ph])
                .map(|s| s.to_string())
                .collect()
        })
        .collect();
    Ok(FoldPlan {
        scheme: FoldScheme::Lsso { folds },
        seed,
        folds: subject_folds(&ids, tests),
    })
}

/// Instance-level folds: `round(1 / test_fraction)` folds. Each subject's
/// instances are shuffled and dealt to consecutive folds, so a subject with
/// at least two instances appears on both sides of a split that tests it.
pub fn make_lsio(instances: &[(&str, InstanceKey)], test_fraction: f64, seed: u64) -> Result<FoldPlan> {
    if instances.is_empty() {
        return Err(Error::invalid("LSIO needs at least one instance"));
    }
    if !(test_fraction > 0.0 && test_fraction <= 0.5) {
        return Err(Error::invalid(format!(
            "LSIO test fraction {test_fraction} must lie in (0, 0.5]"
        )));
    }
    let k = (1.0 / test_fraction).round() as usize;
    let mut r = rng::stream(seed, "folds/lsio");
    let mut by_subject: BTreeMap<&str, Vec<InstanceKey>> = BTreeMap::new();
    for (s, key) in instances {
        by_subject.entry(s).or_default().push(*key);
    }
    let mut order: Vec<&str> = by_subject.keys().copied().collect();
    order.shuffle(&mut r);
    let mut tests = vec![BTreeSet::new(); k];
    let mut pos = 0;
    for s in order {
        let keys = by_subject.get_mut(s).expect("key from map");
        keys.shuffle(&mut r);
        for key in keys.iter() {
            tests[pos % k].insert(*key);
            pos += 1;
        }
    }
    let all: BTreeSet<InstanceKey> = instances.iter().map(|(_, k)| *k).collect();
    if all.len() != instances.len() {
        return Err(Error::invalid("duplicate instance keys"));
    }
    let folds = tests
        .into_iter()
        .enumerate()
        .map(|(id, test)| Fold {
            id,
            train: FoldUnits::Instances(all.difference(&test).copied().collect()),
            test: FoldUnits::Instances(test),
        })
        .collect();
    Ok(FoldPlan {
        scheme: FoldScheme::Lsio { test_fraction },
        seed,
        folds,
    })
}
