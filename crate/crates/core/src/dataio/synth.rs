//! Seeded synthetic datasets shaped like multi-rater wearable recordings.
//!
//! Every sequence performs the five activities once, separated by transition
//! gaps. CP subjects carry "true" protective intervals inside some instances,
//! realized as a reduced joint-angle range, an elevated sEMG envelope and an
//! inserted pause. Each simulated rater marks the true intervals with boundary
//! jitter and may miss an interval altogether.

use ndarray::Array2;
use rand::RngExt;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{
    Activity, ActivityInstance, Cohort, Dataset, RaterStream, Sequence, SequenceMeta, Trial,
    MOCAP_FEATURES, N_ANGLES, N_EMG, N_FEATURES, SAMPLE_RATE_HZ,
};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

const HZ: f64 = SAMPLE_RATE_HZ as f64;
/// Jitter draws are truncated at this many standard deviations.
pub const JITTER_TRUNCATION_SD: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialCount {
    /// Every subject records this many trials (1 or 2).
    PerSubject(usize),
    /// Every subject records one trial; the remainder become difficult
    /// trials of randomly chosen subjects.
    Total(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_healthy: usize,
    pub n_cp: usize,
    pub trials: TrialCount,
    pub rater_count: usize,
    /// Probability that an activity instance of a CP subject contains a
    /// protective interval.
    pub protective_prevalence: f64,
    /// Standard deviation of rater boundary jitter, in seconds.
    pub rater_boundary_jitter_sd: f64,
    pub rater_miss_prob: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_healthy: 12,
            n_cp: 18,
            trials: TrialCount::Total(46),
            rater_count: 4,
            protective_prevalence: 0.6,
            rater_boundary_jitter_sd: 0.25,
            rater_miss_prob: 0.1,
            seed: 7,
        }
    }
}

impl SynthSpec {
    /// Largest distance, in samples, a rater boundary can move from the truth.
    pub fn jitter_margin(&self) -> usize {
        (JITTER_TRUNCATION_SD * self.rater_boundary_jitter_sd * HZ).ceil() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.rater_count < 2 {
            return Err(Error::invalid(format!(
                "rater_count {} < 2: majority voting needs at least two raters",
                self.rater_count
            )));
        }
        for (name, p) in [
            ("protective_prevalence", self.protective_prevalence),
            ("rater_miss_prob", self.rater_miss_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(self.rater_boundary_jitter_sd >= 0.0 && self.rater_boundary_jitter_sd.is_finite()) {
            return Err(Error::invalid("rater_boundary_jitter_sd must be finite and >= 0"));
        }
        let n = self.n_healthy + self.n_cp;
        match self.trials {
            TrialCount::PerSubject(k) if !(1..=2).contains(&k) => {
                Err(Error::invalid(format!("trials per subject must be 1 or 2, got {k}")))
            }
            TrialCount::Total(t) if n > 0 && !(n..=2 * n).contains(&t) => Err(Error::invalid(
                format!("{t} sequences cannot be spread over {n} subjects (1-2 trials each)"),
            )),
            _ => Ok(()),
        }
    }
}

struct Subject {
    id: String,
    cohort: Cohort,
    base_angle: [f64; N_ANGLES],
    amp_scale: f64,
    emg_base: [f64; N_EMG],
}

/// Generates a dataset that is a pure function of `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let n_subjects = spec.n_healthy + spec.n_cp;
    let subjects: Vec<Subject> = (0..n_subjects)
        .map(|i| {
            let (cohort, id) = if i < spec.n_healthy {
                (Cohort::Healthy, format!("H{:02}", i + 1))
            } else {
                (Cohort::Cp, format!("P{:02}", i - spec.n_healthy + 1))
            };
            let mut r = rng::indexed_stream(spec.seed, "synth/subject", i as u64);
            Subject {
                id,
                cohort,
                base_angle: std::array::from_fn(|_| r.random_range(0.75..1.05)),
                amp_scale: r.random_range(0.85..1.15),
                emg_base: std::array::from_fn(|_| r.random_range(0.06..0.14)),
            }
        })
        .collect();

    let trials = trial_counts(spec, n_subjects);
    let mut sequences = Vec::new();
    for (subject, &count) in subjects.iter().zip(&trials) {
        for k in 0..count {
            let trial = if k == 0 { Trial::Normal } else { Trial::Difficult };
            let index = sequences.len() as u64;
            let mut r = rng::indexed_stream(spec.seed, "synth/sequence", index);
            sequences.push(generate_sequence(spec, subject, trial, &mut r)?);
        }
    }
    Ok(Dataset {
        rater_count: spec.rater_count,
        sequences,
    })
}

fn trial_counts(spec: &SynthSpec, n: usize) -> Vec<usize> {
    match spec.trials {
        TrialCount::PerSubject(k) => vec![k; n],
        TrialCount::Total(total) => {
            let mut counts = vec![1; n];
            let mut order: Vec<usize> = (0..n).collect();
            let mut r = rng::stream(spec.seed, "synth/trials");
            // Fisher-Yates with the crate stream keeps the draw order documented.
            for i in (1..n).rev() {
                order.swap(i, r.random_range(0..=i));
            }
            for &i in order.iter().take(total.saturating_sub(n)) {
                counts[i] = 2;
            }
            counts
        }
    }
}

fn duration_model(activity: Activity) -> (f64, f64) {
    // (median seconds, log-sd)
    match activity {
        Activity::BendDown => (3.2, 0.2),
        Activity::OneLegStand => (3.6, 0.2),
        Activity::SitToStand => (2.6, 0.2),
        Activity::StandToSit => (2.8, 0.2),
        Activity::ReachForward => (3.8, 0.35),
    }
}

fn angle_amplitude(activity: Activity, joint: usize) -> f64 {
    let a = activity as usize as f64 + 1.0;
    let j = joint as f64 + 1.0;
    0.15 + 0.85 * (1.3 * a + 0.7 * j * (a + 1.0)).sin().abs()
}

fn emg_activation(activity: Activity, channel: usize) -> f64 {
    let a = activity as usize as f64 + 1.0;
    let k = channel as f64 + 1.0;
    0.3 + 0.7 * (0.9 * a + 1.1 * k).cos().abs()
}

/// Per-sample motion state used while rendering signals.
#[derive(Clone, Copy, Default)]
struct Moment {
    activity: Option<Activity>,
    phase: f64,
    guard: f64,
}

fn seconds(r: &mut Rng, lo: f64, hi: f64) -> usize {
    (r.random_range(lo..hi) * HZ).round() as usize
}

fn generate_sequence(spec: &SynthSpec, subject: &Subject, trial: Trial, r: &mut Rng) -> Result<Sequence> {
    let is_cp = subject.cohort == Cohort::Cp;
    let mut activities = Vec::new();
    let mut truth: Vec<(usize, usize)> = Vec::new();
    let mut pauses: Vec<(usize, usize)> = Vec::new();
    let mut cursor = seconds(r, 1.0, 1.5);
    for activity in Activity::ALL {
        let (median, sigma) = duration_model(activity);
        let slow = if is_cp { 1.15 } else { 1.0 };
        let dur = LogNormal::new(median.ln(), sigma)
            .map_err(|e| Error::invalid(e.to_string()))?
            .sample(r)
            * slow;
        let n = (dur.clamp(1.2, 9.0) * HZ).round() as usize;
        activities.push(ActivityInstance {
            activity,
            start: cursor,
            end: cursor + n,
        });
        if is_cp && r.random::<f64>() < spec.protective_prevalence {
            let cover = ((n as f64) * r.random_range(0.5..1.0)).round() as usize;
            let offset = r.random_range(0..=n - cover);
            let (a, b) = (cursor + offset, cursor + offset + cover);
            truth.push((a, b));
            if cover >= 90 {
                let len = seconds(r, 0.3, 0.6);
                let at = a + r.random_range(0..=cover - len);
                pauses.push((at, at + len));
            }
        }
        cursor += n + seconds(r, 1.0, 2.0);
    }
    let len = cursor;

    let mut moments = vec![Moment::default(); len];
    for inst in &activities {
        let paused = |t: usize| pauses.iter().any(|&(a, b)| (a..b).contains(&t));
        let active = (inst.start..inst.end).filter(|&t| !paused(t)).count().max(1);
        let mut done = 0usize;
        for t in inst.start..inst.end {
            if !paused(t) {
                done += 1;
            }
            moments[t].activity = Some(inst.activity);
            moments[t].phase = done as f64 / active as f64;
        }
    }
    // Guard intensity ramps over 0.2 s at interval edges.
    let ramp = 0.2 * HZ;
    for &(a, b) in &truth {
        for (t, m) in moments.iter_mut().enumerate().take(b).skip(a) {
            let edge = ((t - a + 1) as f64).min((b - t) as f64);
            m.guard = m.guard.max((edge / ramp).min(1.0));
        }
    }

    let difficult = if trial == Trial::Difficult { 0.05 } else { 0.0 };
    let angle_noise = Normal::new(0.0, 0.01).expect("valid sd");
    let energy_noise = Normal::<f64>::new(0.0, 0.02).expect("valid sd");
    let emg_noise = Normal::new(0.0, 0.02).expect("valid sd");
    let sway_phase: [f64; N_ANGLES] = std::array::from_fn(|_| r.random_range(0.0..std::f64::consts::TAU));

    let clean_angle = |t: usize, j: usize| -> f64 {
        let m = moments[t];
        let base = subject.base_angle[j];
        match m.activity {
            Some(a) => {
                let profile = (std::f64::consts::PI * m.phase).sin().powi(2);
                base + angle_amplitude(a, j) * subject.amp_scale * profile * (1.0 - 0.45 * m.guard)
            }
            None => base + 0.05 * (std::f64::consts::TAU * 0.8 * t as f64 / HZ + sway_phase[j]).sin(),
        }
    };

    let mut samples = Array2::<f64>::zeros((len, N_FEATURES));
    for t in 0..len {
        let m = moments[t];
        for j in 0..N_ANGLES {
            let now = clean_angle(t, j);
            let velocity = if t > 0 { (now - clean_angle(t - 1, j)) * HZ } else { 0.0 };
            samples[[t, j]] = quantize(now + angle_noise.sample(r));
            samples[[t, N_ANGLES + j]] = quantize(velocity * velocity + energy_noise.sample(r).abs());
        }
        let profile = m
            .activity
            .map(|a| (a, (std::f64::consts::PI * m.phase).sin().powi(2)));
        for k in 0..N_EMG {
            let drive = profile.map_or(0.0, |(a, p)| 0.25 * emg_activation(a, k) * p);
            let v = subject.emg_base[k] + difficult + drive + 0.5 * m.guard + emg_noise.sample(r);
            samples[[t, MOCAP_FEATURES + k]] = quantize(v.clamp(0.0, 1.0));
        }
    }

    let jitter_sd = spec.rater_boundary_jitter_sd * HZ;
    let limit = JITTER_TRUNCATION_SD * jitter_sd;
    let mut raters = Vec::with_capacity(spec.rater_count);
    for rater in 0..spec.rater_count {
        let mut marks = vec![0u8; len];
        for &(a, b) in &truth {
            if r.random::<f64>() < spec.rater_miss_prob {
                continue;
            }
            let mut jitter = || {
                let d = if jitter_sd > 0.0 {
                    Normal::new(0.0, jitter_sd).expect("valid sd").sample(r)
                } else {
                    0.0
                };
                d.clamp(-limit, limit).round() as i64
            };
            let start = (a as i64 + jitter()).clamp(0, len as i64) as usize;
            let end = (b as i64 + jitter()).clamp(0, len as i64) as usize;
            if start < end {
                marks[start..end].fill(1);
            }
        }
        raters.push(RaterStream {
            rater_id: format!("rater_{}", rater + 1),
            marks,
        });
    }

    Sequence::new(
        SequenceMeta {
            subject_id: subject.id.clone(),
            cohort: subject.cohort,
            trial,
        },
        samples,
        activities,
        raters,
    )
}

/// Six decimals keeps files compact while staying exactly representable
/// through the shortest-round-trip CSV encoding.
fn quantize(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}
