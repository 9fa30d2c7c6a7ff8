use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::lstm::{Gate, LstmLayer};
use super::network::{argmax, interleave, Head, Model, NetworkParams, StreamParams};
use super::train::Normalizer;
use super::{HeadKind, ModelConfig};
use crate::error::{Error, Result};
use crate::windowing::Frame;

const FORMAT: &str = "pbd-checkpoint/1";
const PREDICT_BATCH: usize = 64;

/// A trained model together with the normalization it expects.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub normalizer: Normalizer,
    pub seed: u64,
}

impl Checkpoint {
    pub fn config(&self) -> &ModelConfig {
        &self.model.config
    }

    /// Fused class distributions, one row per raw frame.
    pub fn frame_probabilities(&self, frames: &[Frame]) -> Result<Array2<f64>> {
        if self.config().head != HeadKind::FrameLevel {
            return Err(Error::invalid("frame prediction needs a frame-level head"));
        }
        let k = self.config().classes;
        let mut out = Array2::zeros((frames.len(), k));
        let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, f) in frames.iter().enumerate() {
            by_len.entry(f.window_len()).or_default().push(i);
        }
        for idx in by_len.values() {
            for chunk in idx.chunks(PREDICT_BATCH) {
                let data = chunk
                    .iter()
                    .map(|&i| self.normalizer.normalize(frames[i].data.view(), frames[i].zero_len))
                    .collect::<Result<Vec<_>>>()?;
                let views: Vec<_> = data.iter().map(|d| d.view()).collect();
                let p = self.model.forward(interleave(&views)?.view(), chunk.len())?;
                for (row, &i) in chunk.iter().enumerate() {
                    out.row_mut(i).assign(&p.row(row));
                }
            }
        }
        Ok(out)
    }

    pub fn predict_frames(&self, frames: &[Frame]) -> Result<Vec<usize>> {
        let p = self.frame_probabilities(frames)?;
        Ok(p.rows().into_iter().map(|r| argmax(r.as_slice().unwrap())).collect())
    }

    /// Runs a per-timestep model over a raw instance with the state carried
    /// across samples; one label per row of `samples`.
    pub fn predict_steps(&self, samples: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        if self.config().head != HeadKind::PerTimestep {
            return Err(Error::invalid("per-sample prediction needs a per-timestep head"));
        }
        let x = self.normalizer.normalize(samples, 0)?;
        self.model.predict(x.view(), 1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CheckpointFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<CheckpointFile>(text)?.into_checkpoint()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

type Matrix = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateFile {
    w_x: Matrix,
    w_h: Matrix,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    input: GateFile,
    forget: GateFile,
    output: GateFile,
    cell: GateFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadFile {
    w: Matrix,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamFile {
    layers: Vec<LayerFile>,
    head: HeadFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    config: ModelConfig,
    seed: u64,
    normalizer: Normalizer,
    streams: Vec<StreamFile>,
}

fn rows(m: ArrayView2<'_, f64>) -> Matrix {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(m: &Matrix, shape: (usize, usize), what: &str) -> Result<Array2<f64>> {
    if m.len() != shape.0 || m.iter().any(|r| r.len() != shape.1) {
        return Err(Error::Shape(format!("{what}: expected {}x{}", shape.0, shape.1)));
    }
    let a = Array2::from_shape_vec(shape, m.concat()).expect("shape checked");
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what}: non-finite weight")));
    }
    Ok(a)
}

fn vector(v: &[f64], len: usize, what: &str) -> Result<Array1<f64>> {
    if v.len() != len || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Shape(format!("{what}: expected {len} finite entries")));
    }
    Ok(Array1::from(v.to_vec()))
}

impl From<&Checkpoint> for CheckpointFile {
    fn from(c: &Checkpoint) -> Self {
        let gate = |l: &LstmLayer, g: Gate| GateFile {
            w_x: rows(l.gate_input_weights(g).view()),
            w_h: rows(l.gate_recurrent_weights(g).view()),
            b: l.gate_bias(g).to_vec(),
        };
        let streams = c
            .model
            .params
            .streams
            .iter()
            .map(|s| StreamFile {
                layers: s
                    .layers
                    .iter()
                    .map(|l| LayerFile {
                        input: gate(l, Gate::Input),
                        forget: gate(l, Gate::Forget),
                        output: gate(l, Gate::Output),
                        cell: gate(l, Gate::Cell),
                    })
                    .collect(),
                head: HeadFile {
                    w: rows(s.head.w.view()),
                    b: s.head.b.to_vec(),
                },
            })
            .collect();
        CheckpointFile {
            format: FORMAT.to_string(),
            config: c.model.config.clone(),
            seed: c.seed,
            normalizer: c.normalizer.clone(),
            streams,
        }
    }
}

impl CheckpointFile {
    fn into_checkpoint(self) -> Result<Checkpoint> {
        if self.format != FORMAT {
            return Err(Error::invalid(format!("unsupported checkpoint format {:?}", self.format)));
        }
        let config = self.config;
        config.validate()?;
        let specs = config.streams();
        if self.streams.len() != specs.len() {
            return Err(Error::Shape(format!(
                "{} streams stored, configuration needs {}",
                self.streams.len(),
                specs.len()
            )));
        }
        let dim = config.input_dim;
        if self.normalizer.mean.len() != dim || self.normalizer.sd.len() != dim {
            return Err(Error::Shape(format!("normalization must have {dim} features")));
        }
        let mut streams = Vec::with_capacity(specs.len());
        for (s, (file, spec)) in self.streams.iter().zip(&specs).enumerate() {
            if file.layers.len() != config.layers {
                return Err(Error::Shape(format!(
                    "stream {s}: {} layers stored, configuration needs {}",
                    file.layers.len(),
                    config.layers
                )));
            }
            let h = spec.hidden;
            let mut input = spec.columns.len();
            let mut layers = Vec::with_capacity(config.layers);
            for (l, lf) in file.layers.iter().enumerate() {
                let mut layer = LstmLayer::zeros(input, h);
                for (g, gf) in [
                    (Gate::Input, &lf.input),
                    (Gate::Forget, &lf.forget),
                    (Gate::Output, &lf.output),
                    (Gate::Cell, &lf.cell),
                ] {
                    let what = format!("stream {s} layer {l} gate {g:?}");
                    layer.set_gate(
                        g,
                        matrix(&gf.w_x, (h, input), &what)?.view(),
                        matrix(&gf.w_h, (h, h), &what)?.view(),
                        vector(&gf.b, h, &what)?.view(),
                    )?;
                }
                layers.push(layer);
                input = h;
            }
            let what = format!("stream {s} head");
            let head = Head {
                w: matrix(&file.head.w, (config.classes, input), &what)?,
                b: vector(&file.head.b, config.classes, &what)?,
            };
            streams.push(StreamParams { layers, head });
        }
        Ok(Checkpoint {
            model: Model {
                config,
                params: NetworkParams { streams },
            },
            normalizer: self.normalizer,
            seed: self.seed,
        })
    }
}
