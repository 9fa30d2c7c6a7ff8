//! Sliding-window segmentation of activity instances into fixed-length frames.

use std::io::Write;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, s};
use serde::{Deserialize, Serialize};

use crate::dataio::{extract_instances, Activity, Cohort, Sequence, N_FEATURES, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

/// How a window running past the end of an instance is completed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    #[default]
    Zero,
    /// Repeat the final sample of the instance.
    Last,
    /// Continue with the samples that follow the instance, then zeros.
    Next,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_len: usize,
    pub step: usize,
    pub padding: Padding,
}

impl WindowSpec {
    pub fn new(window_len: usize, step: usize, padding: Padding) -> Result<Self> {
        if window_len == 0 || step == 0 || step > window_len {
            return Err(Error::invalid(format!(
                "window {window_len} / step {step}: need 0 < step <= window"
            )));
        }
        Ok(WindowSpec {
            window_len,
            step,
            padding,
        })
    }

    /// `W = round(60 * len_s)`, `S = max(1, round(W * (1 - overlap)))`.
    pub fn from_seconds(len_s: f64, overlap: f64, padding: Padding) -> Result<Self> {
        if !(len_s > 0.0 && len_s.is_finite()) {
            return Err(Error::invalid(format!("window length {len_s} s must be positive")));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::invalid(format!("overlap {overlap} outside [0, 1)")));
        }
        let w = (f64::from(SAMPLE_RATE_HZ) * len_s).round() as usize;
        let step = ((w as f64) * (1.0 - overlap)).round().max(1.0) as usize;
        Self::new(w, step.min(w.max(1)), padding)
    }

    pub fn overlap(&self) -> f64 {
        1.0 - self.step as f64 / self.window_len as f64
    }

    pub fn seconds(&self) -> f64 {
        self.window_len as f64 / f64::from(SAMPLE_RATE_HZ)
    }

    /// Frames produced for an instance of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.step)
    }
}

/// One window per requested length, all sharing overlap and padding.
pub fn multi_length_plan(lengths_s: &[f64], overlap: f64, padding: Padding) -> Result<Vec<WindowSpec>> {
    if lengths_s.is_empty() {
        return Err(Error::invalid("window length list is empty"));
    }
    lengths_s
        .iter()
        .map(|&l| WindowSpec::from_seconds(l, overlap, padding))
        .collect()
}

/// Where a frame came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameOrigin {
    pub subject_id: Arc<str>,
    pub cohort: Cohort,
    pub activity: Activity,
    pub sequence: usize,
    pub instance: usize,
    /// Sample index of the instance start within its sequence.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    /// `W × 30` samples.
    pub data: Array2<f64>,
    pub subject_id: Arc<str>,
    pub cohort: Cohort,
    pub activity: Activity,
    pub sequence: usize,
    pub instance: usize,
    /// Sample index of row 0 within the source sequence.
    pub start_idx: usize,
    /// Trailing rows that are padding.
    pub padded_len: usize,
    /// Trailing rows filled with zeros; always `<= padded_len`.
    pub zero_len: usize,
    /// `R × W` rater marks, zero on padded positions.
    pub raters: Array2<u8>,
}

impl Frame {
    pub fn window_len(&self) -> usize {
        self.data.nrows()
    }

    /// Rows carrying real instance samples.
    pub fn valid_len(&self) -> usize {
        self.data.nrows() - self.padded_len
    }

    pub fn rater_count(&self) -> usize {
        self.raters.nrows()
    }
}

/// Segments one instance. Windows start at `0, S, 2S, …` while the start lies
/// inside the instance, so every instance yields `ceil(L / S)` frames.
pub fn segment_instance(
    samples: ArrayView2<'_, f64>,
    raters: &[&[u8]],
    successor: Option<ArrayView2<'_, f64>>,
    spec: &WindowSpec,
    origin: &FrameOrigin,
) -> Vec<Frame> {
    let len = samples.nrows();
    let w = spec.window_len;
    let mut frames = Vec::with_capacity(spec.frame_count(len));
    let mut start = 0;
    while start < len {
        let valid = w.min(len - start);
        let padded = w - valid;
        let mut data = Array2::<f64>::zeros((w, samples.ncols()));
        data.slice_mut(s![..valid, ..])
            .assign(&samples.slice(s![start..start + valid, ..]));
        let mut zero_len = 0;
        if padded > 0 {
            match spec.padding {
                Padding::Zero => zero_len = padded,
                Padding::Last => {
                    let last = samples.row(len - 1);
                    for mut row in data.slice_mut(s![valid.., ..]).outer_iter_mut() {
                        row.assign(&last);
                    }
                }
                Padding::Next => {
                    let available = successor.map_or(0, |s| s.nrows()).min(padded);
                    if let Some(next) = successor {
                        data.slice_mut(s![valid..valid + available, ..])
                            .assign(&next.slice(s![..available, ..]));
                    }
                    zero_len = padded - available;
                }
            }
        }
        let mut marks = Array2::<u8>::zeros((raters.len(), w));
        for (r, stream) in raters.iter().enumerate() {
            marks
                .row_mut(r)
                .slice_mut(s![..valid])
                .iter_mut()
                .zip(&stream[start..start + valid])
                .for_each(|(dst, &m)| *dst = m);
        }
        frames.push(Frame {
            data,
            subject_id: origin.subject_id.clone(),
            cohort: origin.cohort,
            activity: origin.activity,
            sequence: origin.sequence,
            instance: origin.instance,
            start_idx: origin.offset + start,
            padded_len: padded,
            zero_len,
            raters: marks,
        });
        start += spec.step;
    }
    frames
}

/// Frames for every matching instance, in (sequence, instance, start) order.
pub fn segment_dataset(sequences: &[Sequence], spec: &WindowSpec, activity: Option<Activity>) -> Vec<Frame> {
    let mut frames = Vec::new();
    for (si, seq) in sequences.iter().enumerate() {
        let subject: Arc<str> = Arc::from(seq.meta.subject_id.as_str());
        for view in extract_instances(seq) {
            if activity.is_some_and(|a| a != view.instance.activity) {
                continue;
            }
            let origin = FrameOrigin {
                subject_id: subject.clone(),
                cohort: seq.meta.cohort,
                activity: view.instance.activity,
                sequence: si,
                instance: view.index,
                offset: view.instance.start,
            };
            frames.extend(segment_instance(
                view.samples,
                &view.raters,
                Some(view.successor),
                spec,
                &origin,
            ));
        }
    }
    frames
}

/// Frame dump: `frame_id,subject,activity,start_idx,padded_len` followed by
/// the `W × 30` features flattened row-major. All frames must share `W`.
pub fn write_frames_csv<W: Write>(out: W, frames: &[Frame]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let w = frames.first().map_or(0, Frame::window_len);
    if frames.iter().any(|f| f.window_len() != w) {
        return Err(Error::invalid("frame dump requires a single window length"));
    }
    let mut header: Vec<String> = ["frame_id", "subject", "activity", "start_idx", "padded_len"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for t in 0..w {
        header.extend((0..N_FEATURES).map(|j| format!("x{t}_{j}")));
    }
    writer.write_record(&header)?;
    for (id, frame) in frames.iter().enumerate() {
        let mut record = vec![
            id.to_string(),
            frame.subject_id.to_string(),
            frame.activity.slug().to_string(),
            frame.start_idx.to_string(),
            frame.padded_len.to_string(),
        ];
        record.extend(frame.data.iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io("frame dump", e))?;
    Ok(())
}
