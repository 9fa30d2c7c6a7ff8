use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::RngExt;

use super::lstm::{LstmLayer, SeqCache};
use super::{Architecture, Fusion, HeadKind, ModelConfig, StreamSpec};
use crate::error::{Error, Result};
use crate::rng;

/// Probabilities are clamped to at least this value inside the loss.
pub const CLAMP_MIN: f64 = 1e-12;

/// Softmax output layer; `w` is `K × hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Head {
    pub fn zeros(hidden: usize, classes: usize) -> Self {
        Head {
            w: Array2::zeros((classes, hidden)),
            b: Array1::zeros(classes),
        }
    }

    fn init(hidden: usize, classes: usize, r: &mut rng::Rng) -> Self {
        let limit = (6.0 / (hidden + classes) as f64).sqrt();
        let mut head = Self::zeros(hidden, classes);
        head.w.mapv_inplace(|_| r.random_range(-limit..=limit));
        head
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamParams {
    pub layers: Vec<LstmLayer>,
    pub head: Head,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub streams: Vec<StreamParams>,
}

impl NetworkParams {
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, v: f64) {
        for t in self.tensors_mut() {
            t.fill(v);
        }
    }

    /// Every parameter tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for s in &self.streams {
            for l in &s.layers {
                out.push(l.wx.as_slice().expect("standard layout"));
                out.push(l.wh.as_slice().expect("standard layout"));
                out.push(l.b.as_slice().expect("standard layout"));
            }
            out.push(s.head.w.as_slice().expect("standard layout"));
            out.push(s.head.b.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for s in &mut self.streams {
            for l in &mut s.layers {
                out.push(l.wx.as_slice_mut().expect("standard layout"));
                out.push(l.wh.as_slice_mut().expect("standard layout"));
                out.push(l.b.as_slice_mut().expect("standard layout"));
            }
            out.push(s.head.w.as_slice_mut().expect("standard layout"));
            out.push(s.head.b.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Targets of a batch; `Steps` is laid out like the batch rows and `None`
/// marks padding that does not contribute to the loss.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Frame(Vec<usize>),
    Steps(Vec<Option<usize>>),
}

/// Equal-length sequences stored time-major: row `t * batch + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub x: Array2<f64>,
    pub batch: usize,
    pub targets: Targets,
}

impl Batch {
    pub fn new(seqs: &[ArrayView2<'_, f64>], targets: Targets) -> Result<Batch> {
        let x = interleave(seqs)?;
        let batch = seqs.len();
        let expected = match &targets {
            Targets::Frame(_) => batch,
            Targets::Steps(_) => x.nrows(),
        };
        let found = match &targets {
            Targets::Frame(v) => v.len(),
            Targets::Steps(v) => v.len(),
        };
        if found != expected {
            return Err(Error::Shape(format!("{found} targets for a batch needing {expected}")));
        }
        Ok(Batch { x, batch, targets })
    }

    pub fn steps(&self) -> usize {
        self.x.nrows() / self.batch
    }
}

pub(crate) fn interleave(seqs: &[ArrayView2<'_, f64>]) -> Result<Array2<f64>> {
    let first = seqs.first().ok_or_else(|| Error::invalid("empty batch"))?;
    let (steps, dim) = first.dim();
    if steps == 0 {
        return Err(Error::invalid("zero-length sequence"));
    }
    if let Some(bad) = seqs.iter().find(|s| s.dim() != (steps, dim)) {
        return Err(Error::Shape(format!(
            "batch mixes {steps}x{dim} with {}x{} sequences",
            bad.nrows(),
            bad.ncols()
        )));
    }
    let b = seqs.len();
    let mut x = Array2::zeros((steps * b, dim));
    for (j, seq) in seqs.iter().enumerate() {
        for t in 0..steps {
            x.row_mut(t * b + j).assign(&seq.row(t));
        }
    }
    Ok(x)
}

/// Options of a single forward/backward pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pass<'a> {
    /// Dropout is active only when a seed is given.
    pub dropout_seed: Option<u64>,
    pub class_weights: Option<&'a [f64]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: NetworkParams,
}

struct StreamTrace {
    /// Input of every layer plus the (dropped-out) output of the last one.
    acts: Vec<Array2<f64>>,
    caches: Vec<SeqCache>,
    masks: Vec<Option<Array2<f64>>>,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let mut r = rng::stream(seed, "model/init");
        let streams = config
            .streams()
            .iter()
            .map(|spec| {
                let mut input = spec.columns.len();
                let layers = (0..config.layers)
                    .map(|_| {
                        let l = LstmLayer::init(input, spec.hidden, &mut r);
                        input = spec.hidden;
                        l
                    })
                    .collect();
                StreamParams {
                    layers,
                    head: Head::init(input, config.classes, &mut r),
                }
            })
            .collect();
        Ok(Model {
            config,
            params: NetworkParams { streams },
        })
    }

    pub fn zeroed(config: ModelConfig) -> Result<Model> {
        let mut m = Model::new(config, 0)?;
        m.params.fill(0.0);
        Ok(m)
    }

    /// Softmax regression on the raw inputs, with the LSTM stack bypassed.
    /// Only meant for testing the head and loss in isolation.
    pub fn linear_probe(input_dim: usize, classes: usize, head: HeadKind, seed: u64) -> Model {
        let config = ModelConfig {
            architecture: Architecture::Stacked,
            layers: 0,
            input_dim,
            classes,
            head,
            ..Default::default()
        };
        let mut r = rng::stream(seed, "model/init");
        Model {
            params: NetworkParams {
                streams: vec![StreamParams {
                    layers: Vec::new(),
                    head: Head::init(input_dim, classes, &mut r),
                }],
            },
            config,
        }
    }

    fn check_input(&self, x: ArrayView2<'_, f64>, batch: usize) -> Result<()> {
        if x.ncols() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                x.ncols(),
                self.config.input_dim
            )));
        }
        if batch == 0 || x.nrows() == 0 || x.nrows() % batch != 0 {
            return Err(Error::Shape(format!("{} rows do not form a batch of {batch}", x.nrows())));
        }
        Ok(())
    }

    fn stream_forward(
        &self,
        s: usize,
        spec: &StreamSpec,
        x: ArrayView2<'_, f64>,
        batch: usize,
        dropout_seed: Option<u64>,
    ) -> Result<StreamTrace> {
        let params = &self.params.streams[s];
        let mut acts = vec![x.slice(s![.., spec.columns.clone()]).to_owned()];
        let mut caches = Vec::with_capacity(params.layers.len());
        let mut masks = Vec::with_capacity(params.layers.len());
        for (l, layer) in params.layers.iter().enumerate() {
            let cache = layer.forward_seq(acts[l].view(), batch);
            if let Some(pos) = cache.h.iter().position(|v| !v.is_finite()) {
                let t = pos / layer.hidden() / batch;
                return Err(Error::Numeric(format!(
                    "non-finite activation in stream {s}, layer {l}, timestep {t}"
                )));
            }
            let mut out = cache.h.clone();
            let mask = match dropout_seed {
                Some(seed) if spec.dropout > 0.0 => {
                    let mut r = rng::indexed_stream(seed, "model/dropout", (s * 1024 + l) as u64);
                    let keep = 1.0 / (1.0 - spec.dropout);
                    let m = out.mapv(|_| if r.random::<f64>() < spec.dropout { 0.0 } else { keep });
                    out *= &m;
                    Some(m)
                }
                _ => None,
            };
            acts.push(out);
            caches.push(cache);
            masks.push(mask);
        }
        Ok(StreamTrace { acts, caches, masks })
    }

    fn head_input<'a>(&self, top: &'a Array2<f64>, batch: usize) -> ArrayView2<'a, f64> {
        match self.config.head {
            HeadKind::FrameLevel => top.slice(s![top.nrows() - batch.., ..]),
            HeadKind::PerTimestep => top.view(),
        }
    }

    fn logits(&self, s: usize, hin: ArrayView2<'_, f64>) -> Array2<f64> {
        let head = &self.params.streams[s].head;
        hin.dot(&head.w.t()) + &head.b
    }

    /// Fused class distributions without dropout: `batch × K` for the frame
    /// head, one row per input row for the per-timestep head.
    pub fn forward(&self, x: ArrayView2<'_, f64>, batch: usize) -> Result<Array2<f64>> {
        self.check_input(x, batch)?;
        let specs = self.config.streams();
        let mut per_stream = Vec::with_capacity(specs.len());
        for (s, spec) in specs.iter().enumerate() {
            let trace = self.stream_forward(s, spec, x, batch, None)?;
            let top = trace.acts.last().expect("input is always present");
            per_stream.push(self.logits(s, self.head_input(top, batch)));
        }
        let n = per_stream.len() as f64;
        let fused = match self.config.fusion {
            Fusion::LogitMean if per_stream.len() > 1 => {
                let mut mean = per_stream.iter().fold(Array2::zeros(per_stream[0].dim()), |acc, z| acc + z) / n;
                mean.rows_mut().into_iter().for_each(|mut r| softmax_in_place(r.as_slice_mut().unwrap()));
                mean
            }
            _ => {
                let mut acc = Array2::<f64>::zeros(per_stream[0].dim());
                for mut z in per_stream {
                    z.rows_mut().into_iter().for_each(|mut r| softmax_in_place(r.as_slice_mut().unwrap()));
                    acc += &z;
                }
                acc / n
            }
        };
        Ok(fused)
    }

    /// Argmax labels of [`Model::forward`].
    pub fn predict(&self, x: ArrayView2<'_, f64>, batch: usize) -> Result<Vec<usize>> {
        let p = self.forward(x, batch)?;
        Ok(p.rows().into_iter().map(|r| argmax(r.as_slice().unwrap())).collect())
    }

    /// Mean training loss of a batch (sum over streams).
    pub fn loss(&self, batch: &Batch, pass: Pass<'_>) -> Result<f64> {
        self.run(batch, pass, None)
    }

    /// Mean training loss; gradients are added to `grad`.
    pub fn loss_and_grad(&self, batch: &Batch, pass: Pass<'_>, grad: &mut NetworkParams) -> Result<f64> {
        self.run(batch, pass, Some(grad))
    }

    fn run(&self, batch: &Batch, pass: Pass<'_>, mut grad: Option<&mut NetworkParams>) -> Result<f64> {
        self.check_input(batch.x.view(), batch.batch)?;
        let targets: Vec<Option<usize>> = match (&batch.targets, self.config.head) {
            (Targets::Frame(v), HeadKind::FrameLevel) => v.iter().map(|&y| Some(y)).collect(),
            (Targets::Steps(v), HeadKind::PerTimestep) => v.clone(),
            _ => return Err(Error::invalid("target kind does not match the model head")),
        };
        if let Some(w) = pass.class_weights {
            if w.len() != self.config.classes {
                return Err(Error::Shape(format!(
                    "{} class weights for {} classes",
                    w.len(),
                    self.config.classes
                )));
            }
        }
        let b = batch.batch;
        let mut total = 0.0;
        for (s, spec) in self.config.streams().iter().enumerate() {
            let trace = self.stream_forward(s, spec, batch.x.view(), b, pass.dropout_seed)?;
            let top = trace.acts.last().expect("input is always present");
            let hin = self.head_input(top, b);
            let logits = self.logits(s, hin);
            let (loss, dlogits) = softmax_cross_entropy(&logits, &targets, pass.class_weights, grad.is_some())?;
            total += loss;
            let (Some(g), Some(dlogits)) = (grad.as_deref_mut(), dlogits) else {
                continue;
            };
            let params = &self.params.streams[s];
            let gs = &mut g.streams[s];
            gs.head.w += &dlogits.t().dot(&hin);
            gs.head.b += &dlogits.sum_axis(Axis(0));
            if params.layers.is_empty() {
                continue;
            }
            let dhin = dlogits.dot(&params.head.w);
            let mut dtop = Array2::<f64>::zeros(top.dim());
            let rows = top.nrows();
            dtop.slice_mut(s![rows - dhin.nrows().., ..]).assign(&dhin);
            for l in (0..params.layers.len()).rev() {
                if let Some(mask) = &trace.masks[l] {
                    dtop *= mask;
                }
                let dx = params.layers[l].backward_seq(
                    trace.acts[l].view(),
                    &trace.caches[l],
                    &dtop,
                    &mut gs.layers[l],
                    l > 0,
                );
                if let Some(dx) = dx {
                    dtop = dx;
                }
            }
        }
        Ok(total)
    }
}

/// Mean (optionally class-weighted) cross-entropy over the rows that carry a
/// target, and its gradient w.r.t. the logits.
fn softmax_cross_entropy(
    logits: &Array2<f64>,
    targets: &[Option<usize>],
    weights: Option<&[f64]>,
    want_grad: bool,
) -> Result<(f64, Option<Array2<f64>>)> {
    let k = logits.ncols();
    let n = targets.iter().filter(|t| t.is_some()).count();
    let mut grad = want_grad.then(|| Array2::<f64>::zeros(logits.dim()));
    if n == 0 {
        return Ok((0.0, grad));
    }
    let cap = -CLAMP_MIN.ln();
    let mut total = 0.0;
    let mut p = vec![0.0; k];
    for (r, target) in targets.iter().enumerate() {
        let Some(y) = *target else { continue };
        if y >= k {
            return Err(Error::invalid(format!("label {y} outside 0..{k}")));
        }
        let row = logits.row(r);
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = row.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
        let nll = lse - row[y];
        let w = weights.map_or(1.0, |w| w[y]);
        total += w * nll.min(cap);
        if let Some(g) = grad.as_mut() {
            // The clamp is flat past the cap, so clamped rows carry no gradient.
            if nll < cap {
                for (c, pc) in p.iter_mut().enumerate() {
                    *pc = (row[c] - lse).exp();
                }
                p[y] -= 1.0;
                let scale = w / n as f64;
                g.row_mut(r).iter_mut().zip(&p).for_each(|(gv, pv)| *gv = scale * pv);
            }
        }
    }
    Ok((total / n as f64, grad))
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

/// `−ln P[y]` with `P[y]` clamped to `[1e−12, 1]`.
pub fn cross_entropy(p: &[f64], y: usize) -> Result<f64> {
    let py = *p
        .get(y)
        .ok_or_else(|| Error::invalid(format!("label {y} outside 0..{}", p.len())))?;
    Ok(-py.clamp(CLAMP_MIN, 1.0).ln())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    use super::*;

    fn small(head: HeadKind) -> ModelConfig {
        ModelConfig {
            layers: 2,
            hidden: 5,
            input_dim: 4,
            head,
            ..Default::default()
        }
    }

    fn random_x(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::seeded(seed);
        Array2::from_shape_fn((rows, cols), |_| r.random_range(-1.0..1.0))
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1.0, 0.0]);
        assert_abs_diff_eq!(p[0], 0.731_058_578_630_004_9, epsilon = 1e-12);
        assert_abs_diff_eq!(p[0] + p[1], 1.0, epsilon = 1e-15);
        let big = softmax(&[1000.0, 0.0, -1000.0]);
        assert!(big.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(cross_entropy(&[1.0, 0.0], 0).unwrap() <= 1e-12);
        assert_abs_diff_eq!(cross_entropy(&[0.5, 0.5], 1).unwrap(), std::f64::consts::LN_2, epsilon = 1e-12);
        let p = softmax(&[1.0, 0.0]);
        assert_abs_diff_eq!(cross_entropy(&p, 1).unwrap(), 1.3133, epsilon = 1e-4);
        assert_abs_diff_eq!(cross_entropy(&[1.0, 0.0], 1).unwrap(), -(1e-12f64).ln(), epsilon = 1e-9);
        assert!(cross_entropy(&[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
        assert_eq!(argmax(&[0.1, 0.2, 0.7]), 2);
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = Model::zeroed(small(HeadKind::FrameLevel)).unwrap();
        let x = random_x(30 * 3, 4, 1);
        let p = m.forward(x.view(), 3).unwrap();
        assert_eq!(p.dim(), (3, 2));
        assert!(p.iter().all(|&v| v == 0.5));
        assert_eq!(m.predict(x.view(), 3).unwrap(), vec![0, 0, 0]);

        let m = Model::zeroed(small(HeadKind::PerTimestep)).unwrap();
        let p = m.forward(x.view(), 3).unwrap();
        assert_eq!(p.dim(), (90, 2));
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn head_bias_sets_distribution() {
        let mut m = Model::zeroed(small(HeadKind::FrameLevel)).unwrap();
        m.params.streams[0].head.b = array![1.0, 0.0];
        let p = m.forward(random_x(10, 4, 2).view(), 1).unwrap();
        assert_abs_diff_eq!(p[[0, 0]], 0.7311, epsilon = 1e-4);
        assert_abs_diff_eq!(p[[0, 1]], 0.2689, epsilon = 1e-4);
    }

    #[test]
    fn fusion_examples() {
        // Streams pinned to [0.8, 0.2] and [0.6, 0.4] through their head biases.
        let mut cfg = ModelConfig::dual_stream();
        cfg.layers = 1;
        let mut m = Model::zeroed(cfg).unwrap();
        m.params.streams[0].head.b = array![0.8f64.ln(), 0.2f64.ln()];
        m.params.streams[1].head.b = array![0.6f64.ln(), 0.4f64.ln()];
        let p = m.forward(random_x(12, 30, 3).view(), 2).unwrap();
        for r in 0..2 {
            assert_abs_diff_eq!(p[[r, 0]], 0.7, epsilon = 1e-12);
            assert_abs_diff_eq!(p[[r, 1]], 0.3, epsilon = 1e-12);
        }
        m.config.fusion = Fusion::LogitMean;
        let p = m.forward(random_x(12, 30, 3).view(), 2).unwrap();
        let expected = softmax(&[(0.8f64.ln() + 0.6f64.ln()) / 2.0, (0.2f64.ln() + 0.4f64.ln()) / 2.0]);
        assert_abs_diff_eq!(p[[0, 0]], expected[0], epsilon = 1e-12);
    }

    #[test]
    fn inference_ignores_dropout() {
        let m = Model::new(ModelConfig::dual_stream(), 5).unwrap();
        let x = random_x(20 * 2, 30, 4);
        assert_eq!(m.forward(x.view(), 2).unwrap(), m.forward(x.view(), 2).unwrap());
    }

    #[test]
    fn dropout_changes_training_loss_only_with_seed() {
        let m = Model::new(ModelConfig::dual_stream(), 5).unwrap();
        let x = random_x(10 * 2, 30, 4);
        let batch = Batch {
            x,
            batch: 2,
            targets: Targets::Frame(vec![0, 1]),
        };
        let plain = m.loss(&batch, Pass::default()).unwrap();
        assert_eq!(plain, m.loss(&batch, Pass::default()).unwrap());
        let a = m.loss(&batch, Pass { dropout_seed: Some(1), ..Default::default() }).unwrap();
        let b = m.loss(&batch, Pass { dropout_seed: Some(2), ..Default::default() }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn confident_correct_model_has_no_gradient() {
        let mut m = Model::zeroed(small(HeadKind::FrameLevel)).unwrap();
        m.params.streams[0].head.b = array![40.0, 0.0];
        let batch = Batch::new(&[random_x(8, 4, 1).view()], Targets::Frame(vec![0])).unwrap();
        let mut g = m.params.zeros_like();
        m.loss_and_grad(&batch, Pass::default(), &mut g).unwrap();
        assert!(g.norm() <= 1e-9, "{}", g.norm());
    }

    #[test]
    fn duplicated_entries_keep_gradient() {
        for head in [HeadKind::FrameLevel, HeadKind::PerTimestep] {
            let m = Model::new(small(head), 3).unwrap();
            let x = random_x(6, 4, 9);
            let (single, double) = match head {
                HeadKind::FrameLevel => (Targets::Frame(vec![1]), Targets::Frame(vec![1, 1])),
                HeadKind::PerTimestep => {
                    let t: Vec<_> = (0..6).map(|i| Some(i % 2)).collect();
                    let d = t.iter().flat_map(|&v| [v, v]).collect();
                    (Targets::Steps(t), Targets::Steps(d))
                }
            };
            let one = Batch::new(&[x.view()], single).unwrap();
            let two = Batch::new(&[x.view(), x.view()], double).unwrap();
            let mut g1 = m.params.zeros_like();
            let mut g2 = m.params.zeros_like();
            let l1 = m.loss_and_grad(&one, Pass::default(), &mut g1).unwrap();
            let l2 = m.loss_and_grad(&two, Pass::default(), &mut g2).unwrap();
            assert_abs_diff_eq!(l1, l2, epsilon = 1e-12);
            for (a, b) in g1.flatten().iter().zip(g2.flatten()) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn shape_and_target_errors() {
        let m = Model::zeroed(small(HeadKind::FrameLevel)).unwrap();
        assert!(m.forward(random_x(10, 3, 1).view(), 1).is_err());
        assert!(m.forward(random_x(10, 4, 1).view(), 3).is_err());
        let bad = Batch::new(&[random_x(5, 4, 1).view()], Targets::Frame(vec![2])).unwrap();
        assert!(m.loss(&bad, Pass::default()).is_err());
        let steps = Batch::new(&[random_x(5, 4, 1).view()], Targets::Steps(vec![Some(0); 5])).unwrap();
        assert!(m.loss(&steps, Pass::default()).is_err());
        assert!(Batch::new(&[random_x(5, 4, 1).view(), random_x(6, 4, 1).view()], Targets::Frame(vec![0, 0])).is_err());
    }

    #[test]
    fn non_finite_activation_is_reported() {
        let m = Model::new(small(HeadKind::FrameLevel), 1).unwrap();
        let mut x = random_x(10, 4, 1);
        x[[6, 2]] = f64::NAN;
        let err = m.forward(x.view(), 2).unwrap_err();
        assert!(err.to_string().contains("timestep 3"), "{err}");
    }

    #[test]
    fn interleave_layout() {
        let a = array![[1.0], [2.0], [3.0]];
        let b = array![[10.0], [20.0], [30.0]];
        let x = interleave(&[a.view(), b.view()]).unwrap();
        assert_eq!(x.column(0).to_vec(), vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0]);
    }
}
