//! Vanilla LSTM cell without peephole connections.
//!
//! ```text
//! i, f, o = σ(W_x· x + W_h· h_prev + b_·)
//! c̃       = tanh(W_xc x + W_hc h_prev + b_c)
//! c       = f ⊙ c_prev + i ⊙ c̃
//! h       = o ⊙ tanh(c)
//! ```
//!
//! Weights are stored gate-concatenated so one matrix product computes all
//! four pre-activations: `wx` is `input × 4H`, `wh` is `H × 4H`, with column
//! blocks in [`Gate`] order.

use ndarray::{linalg::general_mat_mul, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::RngExt;

use super::activation::{activate_gates, cell_update, sigmoid, tanh};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Cell = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Cell];
}

pub const FORGET_BIAS_INIT: f64 = 1.0;


#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: Array1::zeros(hidden),
            c: Array1::zeros(hidden),
        }
    }
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmLayer {
            wx: Array2::zeros((input, 4 * hidden)),
            wh: Array2::zeros((hidden, 4 * hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    /// Glorot-uniform gate matrices, zero biases except the forget gate.
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut layer = Self::zeros(input, hidden);
        let lx = (6.0 / (input + hidden) as f64).sqrt();
        let lh = (6.0 / (2 * hidden) as f64).sqrt();
        // Draw gate by gate so each gate matrix is an independent block.
        for g in Gate::ALL {
            let cols = s![.., g as usize * hidden..(g as usize + 1) * hidden];
            layer.wx.slice_mut(cols).mapv_inplace(|_| rng.random_range(-lx..=lx));
            layer.wh.slice_mut(cols).mapv_inplace(|_| rng.random_range(-lh..=lh));
        }
        layer
            .b
            .slice_mut(s![hidden..2 * hidden])
            .fill(FORGET_BIAS_INIT);
        layer
    }

    pub fn input_dim(&self) -> usize {
        self.wx.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.wh.nrows()
    }

    fn gate_cols(&self, g: Gate) -> std::ops::Range<usize> {
        let h = self.hidden();
        g as usize * h..(g as usize + 1) * h
    }

    /// `W_xg` as a `hidden × input` matrix.
    pub fn gate_input_weights(&self, g: Gate) -> Array2<f64> {
        self.wx.slice(s![.., self.gate_cols(g)]).t().to_owned()
    }

    /// `W_hg` as a `hidden × hidden` matrix.
    pub fn gate_recurrent_weights(&self, g: Gate) -> Array2<f64> {
        self.wh.slice(s![.., self.gate_cols(g)]).t().to_owned()
    }

    pub fn gate_bias(&self, g: Gate) -> Array1<f64> {
        self.b.slice(s![self.gate_cols(g)]).to_owned()
    }

    pub fn set_gate(
        &mut self,
        g: Gate,
        input_weights: ArrayView2<'_, f64>,
        recurrent_weights: ArrayView2<'_, f64>,
        bias: ArrayView1<'_, f64>,
    ) -> Result<()> {
        let (h, i) = (self.hidden(), self.input_dim());
        if input_weights.dim() != (h, i) || recurrent_weights.dim() != (h, h) || bias.len() != h {
            return Err(Error::Shape(format!(
                "gate {g:?}: expected W_x {h}x{i}, W_h {h}x{h}, b {h}"
            )));
        }
        let cols = self.gate_cols(g);
        self.wx.slice_mut(s![.., cols.clone()]).assign(&input_weights.t());
        self.wh.slice_mut(s![.., cols.clone()]).assign(&recurrent_weights.t());
        self.b.slice_mut(s![cols]).assign(&bias);
        Ok(())
    }

    /// Runs a batch of sequences. `x` holds `steps × batch` rows laid out
    /// time-major (`row = t * batch + b`); states start at zero.
    pub(crate) fn forward_seq(&self, x: ArrayView2<'_, f64>, batch: usize) -> SeqCache {
        let tb = x.nrows();
        let h = self.hidden();
        let steps = tb / batch;
        let mut gates = x.dot(&self.wx);
        gates += &self.b;
        let mut c = Array2::<f64>::zeros((tb, h));
        let mut tanh_c = Array2::<f64>::zeros((tb, h));
        let mut out = Array2::<f64>::zeros((tb, h));
        for t in 0..steps {
            let r0 = t * batch;
            if t > 0 {
                let prev = out.slice(s![r0 - batch..r0, ..]);
                let mut cur = gates.slice_mut(s![r0..r0 + batch, ..]);
                general_mat_mul(1.0, &prev, &self.wh, 1.0, &mut cur);
            }
            let gs = gates.as_slice_mut().expect("standard layout");
            let cs = c.as_slice_mut().expect("standard layout");
            let ts = tanh_c.as_slice_mut().expect("standard layout");
            let hs = out.as_slice_mut().expect("standard layout");
            let g = &mut gs[r0 * 4 * h..(r0 + batch) * 4 * h];
            activate_gates(g, h);
            let (done, cur) = cs.split_at_mut(r0 * h);
            let c_prev = (t > 0).then(|| &done[(r0 - batch) * h..]);
            let span = r0 * h..(r0 + batch) * h;
            cell_update(g, c_prev, &mut cur[..batch * h], &mut ts[span.clone()], &mut hs[span], h);
        }
        SeqCache {
            batch,
            gates,
            c,
            tanh_c,
            h: out,
        }
    }

    /// Backpropagation through time. `dh` is the loss gradient w.r.t. every
    /// output `h_t`; parameter gradients are accumulated into `grad`. Returns
    /// the gradient w.r.t. `x` when requested.
    pub(crate) fn backward_seq(
        &self,
        x: ArrayView2<'_, f64>,
        cache: &SeqCache,
        dh: &Array2<f64>,
        grad: &mut LstmLayer,
        need_dx: bool,
    ) -> Option<Array2<f64>> {
        let batch = cache.batch;
        let tb = x.nrows();
        let h = self.hidden();
        let steps = tb / batch;
        let mut dz = Array2::<f64>::zeros((tb, 4 * h));
        let mut dh_next = Array2::<f64>::zeros((batch, h));
        let mut dc_next = vec![0.0; batch * h];
        let gs = cache.gates.as_slice().expect("standard layout");
        let cs = cache.c.as_slice().expect("standard layout");
        let ts = cache.tanh_c.as_slice().expect("standard layout");
        let dhs = dh.as_slice().expect("standard layout");
        for t in (0..steps).rev() {
            let r0 = t * batch;
            {
                let dzs = dz.as_slice_mut().expect("standard layout");
                let dhn = dh_next.as_slice().expect("standard layout");
                for b in 0..batch {
                    let r = r0 + b;
                    let g = &gs[r * 4 * h..(r + 1) * 4 * h];
                    let d = &mut dzs[r * 4 * h..(r + 1) * 4 * h];
                    for j in 0..h {
                        let (i, f, o, cand) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                        let tc = ts[r * h + j];
                        let dhv = dhs[r * h + j] + dhn[b * h + j];
                        let dc = dhv * o * (1.0 - tc * tc) + dc_next[b * h + j];
                        let c_prev = if t > 0 { cs[(r - batch) * h + j] } else { 0.0 };
                        d[j] = dc * cand * i * (1.0 - i);
                        d[h + j] = dc * c_prev * f * (1.0 - f);
                        d[2 * h + j] = dhv * tc * o * (1.0 - o);
                        d[3 * h + j] = dc * i * (1.0 - cand * cand);
                        dc_next[b * h + j] = dc * f;
                    }
                }
            }
            if t > 0 {
                let dz_t = dz.slice(s![r0..r0 + batch, ..]);
                general_mat_mul(1.0, &dz_t, &self.wh.t(), 0.0, &mut dh_next);
            }
        }
        general_mat_mul(1.0, &x.t(), &dz, 1.0, &mut grad.wx);
        if steps > 1 {
            let h_prev = cache.h.slice(s![..tb - batch, ..]);
            let dz_next = dz.slice(s![batch.., ..]);
            general_mat_mul(1.0, &h_prev.t(), &dz_next, 1.0, &mut grad.wh);
        }
        grad.b += &dz.sum_axis(Axis(0));
        need_dx.then(|| dz.dot(&self.wx.t()))
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub(crate) struct SeqCache {
    pub batch: usize,
    /// Post-activation gate values, `TB × 4H`.
    pub gates: Array2<f64>,
    pub c: Array2<f64>,
    pub tanh_c: Array2<f64>,
    pub h: Array2<f64>,
}

/// One cell update for a single input vector.
pub fn lstm_step(x: ArrayView1<'_, f64>, prev: &LstmState, w: &LstmLayer) -> Result<LstmState> {
    let h = w.hidden();
    if x.len() != w.input_dim() || prev.h.len() != h || prev.c.len() != h {
        return Err(Error::Shape(format!(
            "lstm_step: x has {} entries (layer expects {}), state has {}/{} (expects {h})",
            x.len(),
            w.input_dim(),
            prev.h.len(),
            prev.c.len()
        )));
    }
    let z = x.dot(&w.wx) + prev.h.dot(&w.wh) + &w.b;
    let mut next = LstmState::zeros(h);
    for j in 0..h {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[h + j]);
        let o = sigmoid(z[2 * h + j]);
        let cand = tanh(z[3 * h + j]);
        next.c[j] = f * prev.c[j] + i * cand;
        next.h[j] = o * tanh(next.c[j]);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    use super::*;
    use crate::rng;

    fn scalar(bi: f64, bf: f64, bo: f64, bc: f64) -> LstmLayer {
        let mut l = LstmLayer::zeros(1, 1);
        l.b = array![bi, bf, bo, bc];
        l
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let l = LstmLayer::zeros(3, 2);
        let s = lstm_step(array![1.0, -2.0, 0.5].view(), &LstmState::zeros(2), &l).unwrap();
        assert_eq!(s, LstmState::zeros(2));
    }

    #[test]
    fn saturated_gates_keep_cell() {
        let l = scalar(20.0, 20.0, 20.0, 0.0);
        let prev = LstmState {
            h: array![0.0],
            c: array![1.0],
        };
        let s = lstm_step(array![0.3].view(), &prev, &l).unwrap();
        assert_abs_diff_eq!(s.c[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.h[0], 0.761_594_155_955_764_9, epsilon = 1e-8);
    }

    #[test]
    fn closed_forget_gate_clears_cell() {
        let l = scalar(20.0, -20.0, 20.0, 0.0);
        let prev = LstmState {
            h: array![0.0],
            c: array![1.0],
        };
        let s = lstm_step(array![0.3].view(), &prev, &l).unwrap();
        assert_abs_diff_eq!(s.c[0], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn open_forget_closed_input_preserves_cell() {
        let l = scalar(-20.0, 20.0, 0.0, 0.7);
        let prev = LstmState {
            h: array![0.0],
            c: array![-0.42],
        };
        let s = lstm_step(array![5.0].view(), &prev, &l).unwrap();
        assert_abs_diff_eq!(s.c[0], -0.42, epsilon = 1e-8);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let l = LstmLayer::zeros(3, 2);
        assert!(lstm_step(array![1.0].view(), &LstmState::zeros(2), &l).is_err());
        assert!(lstm_step(array![1.0, 2.0, 3.0].view(), &LstmState::zeros(3), &l).is_err());
    }

    #[test]
    fn batched_forward_matches_stepwise() {
        let mut r = rng::stream(1, "test");
        let l = LstmLayer::init(3, 4, &mut r);
        let (steps, batch) = (5, 2);
        let x = Array2::from_shape_fn((steps * batch, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let cache = l.forward_seq(x.view(), batch);
        for b in 0..batch {
            let mut state = LstmState::zeros(4);
            for t in 0..steps {
                state = lstm_step(x.row(t * batch + b), &state, &l).unwrap();
                for j in 0..4 {
                    assert_abs_diff_eq!(cache.h[[t * batch + b, j]], state.h[j], epsilon = 1e-12);
                    assert_abs_diff_eq!(cache.c[[t * batch + b, j]], state.c[j], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn gate_accessors_round_trip() {
        let mut r = rng::stream(2, "test");
        let l = LstmLayer::init(3, 2, &mut r);
        let mut copy = LstmLayer::zeros(3, 2);
        for g in Gate::ALL {
            copy.set_gate(
                g,
                l.gate_input_weights(g).view(),
                l.gate_recurrent_weights(g).view(),
                l.gate_bias(g).view(),
            )
            .unwrap();
        }
        assert_eq!(copy, l);
        assert_eq!(l.gate_bias(Gate::Forget), array![1.0, 1.0]);
        assert_eq!(l.gate_input_weights(Gate::Cell).dim(), (2, 3));
    }
}
