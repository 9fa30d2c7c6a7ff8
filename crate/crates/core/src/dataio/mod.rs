//! Dataset model and on-disk format.
//!
//! A dataset is a JSON manifest binding subjects to per-trial sequence CSV
//! files. Each CSV row is one 60 Hz sample with 30 features, the activity code
//! of that sample and one binary mark per rater.

mod synth;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, s};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synth::{generate_synthetic, SynthSpec, TrialCount};

pub const SAMPLE_RATE_HZ: u32 = 60;
pub const N_ANGLES: usize = 13;
pub const N_ENERGIES: usize = 13;
pub const N_EMG: usize = 4;
pub const N_FEATURES: usize = N_ANGLES + N_ENERGIES + N_EMG;
/// Columns 0..26 hold joint angles and energies, 26..30 the sEMG envelopes.
pub const MOCAP_FEATURES: usize = N_ANGLES + N_ENERGIES;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activity {
    BendDown,
    OneLegStand,
    SitToStand,
    StandToSit,
    ReachForward,
}

impl Activity {
    pub const ALL: [Activity; 5] = [
        Activity::BendDown,
        Activity::OneLegStand,
        Activity::SitToStand,
        Activity::StandToSit,
        Activity::ReachForward,
    ];

    /// CSV activity code; 0 is reserved for transitions.
    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code).checked_sub(1)?).copied()
    }

    pub fn slug(self) -> &'static str {
        match self {
            Activity::BendDown => "bend-down",
            Activity::OneLegStand => "one-leg-stand",
            Activity::SitToStand => "sit-to-stand",
            Activity::StandToSit => "stand-to-sit",
            Activity::ReachForward => "reach-forward",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.slug() == s)
            .ok_or_else(|| Error::invalid(format!("unknown activity '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    Healthy,
    Cp,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trial {
    #[default]
    Normal,
    Difficult,
}

/// One performance of an activity, samples `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityInstance {
    pub activity: Activity,
    pub start: usize,
    pub end: usize,
}

impl ActivityInstance {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RaterStream {
    pub rater_id: String,
    /// Per-sample flags, 1 = protective.
    pub marks: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceMeta {
    pub subject_id: String,
    pub cohort: Cohort,
    pub trial: Trial,
}

/// One subject-trial recording.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub meta: SequenceMeta,
    /// `len × 30` sample matrix.
    pub samples: Array2<f64>,
    pub activities: Vec<ActivityInstance>,
    pub raters: Vec<RaterStream>,
}

impl Sequence {
    /// Builds a sequence, checking every structural invariant.
    pub fn new(
        meta: SequenceMeta,
        samples: Array2<f64>,
        activities: Vec<ActivityInstance>,
        raters: Vec<RaterStream>,
    ) -> Result<Self> {
        let seq = Sequence {
            meta,
            samples,
            activities,
            raters,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn rater_count(&self) -> usize {
        self.raters.len()
    }

    pub fn sample(&self, t: usize) -> ArrayView1<'_, f64> {
        self.samples.row(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.ncols() != N_FEATURES {
            return Err(Error::Shape(format!(
                "sequence has {} feature columns, expected {N_FEATURES}",
                self.samples.ncols()
            )));
        }
        for (row, sample) in self.samples.outer_iter().enumerate() {
            if let Some(col) = sample.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row,
                    column: feature_name(col),
                });
            }
        }
        let n = self.len();
        for inst in &self.activities {
            if inst.start >= inst.end || inst.end > n {
                return Err(Error::invalid(format!(
                    "activity span [{},{}) outside sequence of {n} samples",
                    inst.start, inst.end
                )));
            }
        }
        for pair in self.activities.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b.start < a.end {
                return Err(Error::OverlappingActivities {
                    first_start: a.start,
                    first_end: a.end,
                    second_start: b.start,
                    second_end: b.end,
                });
            }
            // The CSV encoding cannot separate two touching instances of one type.
            if b.start == a.end && a.activity == b.activity {
                return Err(Error::invalid(format!(
                    "adjacent {} instances at sample {} cannot be encoded",
                    a.activity, a.end
                )));
            }
        }
        for (rater, stream) in self.raters.iter().enumerate() {
            if stream.marks.len() != n {
                return Err(Error::RaterLength {
                    rater: rater + 1,
                    expected: n,
                    found: stream.marks.len(),
                });
            }
            if let Some(t) = stream.marks.iter().position(|&m| m > 1) {
                return Err(Error::MalformedRow {
                    row: t + 1,
                    message: format!("rater {} mark is not 0/1", rater + 1),
                });
            }
        }
        Ok(())
    }
}

/// Borrowed view of one activity instance.
#[derive(Clone, Debug)]
pub struct InstanceView<'a> {
    pub index: usize,
    pub instance: ActivityInstance,
    pub samples: ArrayView2<'a, f64>,
    pub raters: Vec<&'a [u8]>,
    /// Everything after the instance, for next-padding.
    pub successor: ArrayView2<'a, f64>,
}

/// One view per activity instance, in annotation order.
pub fn extract_instances(seq: &Sequence) -> Vec<InstanceView<'_>> {
    seq.activities
        .iter()
        .enumerate()
        .map(|(index, inst)| InstanceView {
            index,
            instance: *inst,
            samples: seq.samples.slice(s![inst.start..inst.end, ..]),
            raters: seq
                .raters
                .iter()
                .map(|r| &r.marks[inst.start..inst.end])
                .collect(),
            successor: seq.samples.slice(s![inst.end.., ..]),
        })
        .collect()
}

pub fn feature_name(col: usize) -> String {
    match col {
        c if c < N_ANGLES => format!("a{:02}", c + 1),
        c if c < MOCAP_FEATURES => format!("e{:02}", c - N_ANGLES + 1),
        c => format!("s{:02}", c - MOCAP_FEATURES + 1),
    }
}

fn header(rater_count: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..N_FEATURES).map(feature_name));
    cols.push("activity".into());
    cols.extend((1..=rater_count).map(|r| format!("rater_{r}")));
    cols
}

pub fn write_sequence(seq: &Sequence, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    writer.write_record(header(seq.rater_count()))?;
    let mut codes = vec![0u8; seq.len()];
    for inst in &seq.activities {
        codes[inst.start..inst.end].fill(inst.activity.code());
    }
    let mut record = Vec::with_capacity(N_FEATURES + 2 + seq.rater_count());
    for (t, sample) in seq.samples.outer_iter().enumerate() {
        record.clear();
        record.push(t.to_string());
        // `Display` for f64 is the shortest representation that round-trips.
        record.extend(sample.iter().map(|v| v.to_string()));
        record.push(codes[t].to_string());
        record.extend(seq.raters.iter().map(|r| r.marks[t].to_string()));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Loads and validates one sequence CSV. Subject metadata is filled with the
/// file stem and defaults; dataset loading overrides it from the manifest.
pub fn load_sequence(path: &Path, rater_count: usize) -> Result<Sequence> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let expected_header = header(rater_count);
    let found_header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if found_header != expected_header {
        return Err(Error::Header(format!(
            "{}: expected {} columns t,a01..a13,e01..e13,s01..s04,activity,rater_1..rater_{rater_count}",
            path.display(),
            expected_header.len()
        )));
    }
    let n_cols = expected_header.len();

    let mut values: Vec<f64> = Vec::new();
    let mut codes: Vec<u8> = Vec::new();
    let mut marks: Vec<Vec<u8>> = vec![Vec::new(); rater_count];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != n_cols {
            return Err(Error::ColumnCount {
                row,
                expected: n_cols,
                found: record.len(),
            });
        }
        let t: usize = record[0].trim().parse().map_err(|_| Error::MalformedRow {
            row,
            message: format!("sample index '{}' is not an integer", &record[0]),
        })?;
        if t != i {
            return Err(Error::MalformedRow {
                row,
                message: format!("sample index {t} out of order, expected {i}"),
            });
        }
        for col in 0..N_FEATURES {
            let field = record[col + 1].trim();
            let v: f64 = field.parse().map_err(|_| Error::MalformedRow {
                row,
                message: format!("{} value '{field}' is not a number", feature_name(col)),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: feature_name(col),
                });
            }
            values.push(v);
        }
        let code_field = record[N_FEATURES + 1].trim();
        let code = code_field
            .parse::<u8>()
            .ok()
            .filter(|&c| c == 0 || Activity::from_code(c).is_some())
            .ok_or_else(|| Error::MalformedRow {
                row,
                message: format!("activity code '{code_field}' not in 0..=5"),
            })?;
        codes.push(code);
        for (r, stream) in marks.iter_mut().enumerate() {
            let field = record[N_FEATURES + 2 + r].trim();
            let m = match field {
                "0" => 0,
                "1" => 1,
                _ => {
                    return Err(Error::MalformedRow {
                        row,
                        message: format!("rater_{} mark '{field}' is not 0/1", r + 1),
                    })
                }
            };
            stream.push(m);
        }
    }

    let n = codes.len();
    let samples = Array2::from_shape_vec((n, N_FEATURES), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    let activities = activity_runs(&codes);
    let raters = marks
        .into_iter()
        .enumerate()
        .map(|(r, marks)| RaterStream {
            rater_id: format!("rater_{}", r + 1),
            marks,
        })
        .collect();
    let subject_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Sequence::new(
        SequenceMeta {
            subject_id,
            cohort: Cohort::Healthy,
            trial: Trial::Normal,
        },
        samples,
        activities,
        raters,
    )
}

fn activity_runs(codes: &[u8]) -> Vec<ActivityInstance> {
    let mut out = Vec::new();
    let mut t = 0;
    while t < codes.len() {
        let code = codes[t];
        let start = t;
        while t < codes.len() && codes[t] == code {
            t += 1;
        }
        if let Some(activity) = Activity::from_code(code) {
            out.push(ActivityInstance {
                activity,
                start,
                end: t,
            });
        }
    }
    out
}

fn csv_io(path: &Path, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => Error::MalformedRow {
            row: 0,
            message: format!("{kind:?}"),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub cohort: Cohort,
    /// Paths relative to the manifest directory. The first file is the
    /// normal trial, the second the difficult one.
    pub sequences: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub sample_rate_hz: u32,
    pub rater_count: usize,
    pub subjects: Vec<SubjectEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Sequences in roster order together with the rater count they share.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub rater_count: usize,
    pub sequences: Vec<Sequence>,
}

impl Dataset {
    /// Subjects in first-appearance order with their cohort.
    pub fn subjects(&self) -> Vec<(String, Cohort)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for seq in &self.sequences {
            if seen.insert(seq.meta.subject_id.clone(), ()).is_none() {
                out.push((seq.meta.subject_id.clone(), seq.meta.cohort));
            }
        }
        out
    }

    pub fn manifest(&self) -> DatasetManifest {
        let mut entries: Vec<SubjectEntry> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for seq in &self.sequences {
            let i = *index.entry(seq.meta.subject_id.clone()).or_insert_with(|| {
                entries.push(SubjectEntry {
                    id: seq.meta.subject_id.clone(),
                    cohort: seq.meta.cohort,
                    sequences: Vec::new(),
                });
                entries.len() - 1
            });
            entries[i].sequences.push(sequence_file_name(&seq.meta));
        }
        DatasetManifest {
            sample_rate_hz: SAMPLE_RATE_HZ,
            rater_count: self.rater_count,
            subjects: entries,
        }
    }

    /// Writes `manifest.json` plus one CSV per sequence under `dir`.
    pub fn write(&self, dir: &Path) -> Result<DatasetManifest> {
        let manifest = self.manifest();
        fs::create_dir_all(dir.join("sequences")).map_err(|e| Error::io(dir, e))?;
        for seq in &self.sequences {
            write_sequence(seq, &dir.join(sequence_file_name(&seq.meta)))?;
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load(manifest_path)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        if manifest.rater_count < 2 {
            return Err(Error::invalid("rater_count must be at least 2"));
        }
        let mut sequences = Vec::new();
        for subject in &manifest.subjects {
            for (k, rel) in subject.sequences.iter().enumerate() {
                let mut seq = load_sequence(&base.join(rel), manifest.rater_count)?;
                seq.meta = SequenceMeta {
                    subject_id: subject.id.clone(),
                    cohort: subject.cohort,
                    trial: if k == 0 { Trial::Normal } else { Trial::Difficult },
                };
                sequences.push(seq);
            }
        }
        Ok(Dataset {
            rater_count: manifest.rater_count,
            sequences,
        })
    }
}

fn sequence_file_name(meta: &SequenceMeta) -> PathBuf {
    let trial = match meta.trial {
        Trial::Normal => "normal",
        Trial::Difficult => "difficult",
    };
    PathBuf::from("sequences").join(format!("{}_{trial}.csv", meta.subject_id))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Subject id or file path the problem refers to.
    pub location: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

/// Checks every file and roster invariant; problems are collected, never raised.
pub fn validate_dataset(manifest: &DatasetManifest, base_dir: &Path) -> ValidationReport {
    let mut report = ValidationReport::default();
    if manifest.sample_rate_hz != SAMPLE_RATE_HZ {
        report.push(
            "manifest",
            format!("sample rate {} Hz, expected {SAMPLE_RATE_HZ}", manifest.sample_rate_hz),
        );
    }
    if manifest.rater_count < 2 {
        report.push("manifest", "rater_count must be at least 2");
    }
    let mut cohorts: HashMap<&str, Cohort> = HashMap::new();
    for subject in &manifest.subjects {
        match cohorts.get(subject.id.as_str()) {
            Some(&c) if c != subject.cohort => report.push(
                subject.id.as_str(),
                format!("cohort inconsistency: listed as {:?} and {:?}", c, subject.cohort),
            ),
            Some(_) => {}
            None => {
                cohorts.insert(&subject.id, subject.cohort);
            }
        }
        if subject.sequences.is_empty() {
            report.push(subject.id.as_str(), "subject has no sequences");
        }
        for rel in &subject.sequences {
            let path = base_dir.join(rel);
            if let Err(e) = load_sequence(&path, manifest.rater_count) {
                report.push(path.display().to_string(), e.to_string());
            }
        }
    }
    report
}
