//! LSTM sequence encoder with dueling value/advantage heads.
//!
//! All parameters live in one flat vector; [`Layout`] names the slices.
//! Weight matrices are stored row-major as `fan_in × fan_out` so a batch of
//! row vectors multiplies on the left. Gate blocks inside the LSTM matrices
//! are ordered input, forget, cell, output.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{gemm, View};

/// Layer sizes of one per-UE Q-network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Width of one encoded history tuple.
    pub input: usize,
    /// Number of tuples in a state.
    pub steps: usize,
    pub hidden: usize,
    pub fc1: usize,
    pub fc2: usize,
    pub actions: usize,
}

impl Architecture {
    /// LSTM(64) → FC(64) → FC(32) → dueling heads over `2C` actions.
    pub fn standard(channels: usize, history_len: usize) -> Self {
        Self::with_sizes(channels, history_len, 64, 64, 32)
    }

    pub fn with_sizes(channels: usize, history_len: usize, hidden: usize, fc1: usize, fc2: usize) -> Self {
        Self {
            input: super::tuple_width(channels),
            steps: history_len,
            hidden,
            fc1,
            fc2,
            actions: 2 * channels,
        }
    }

    pub fn state_len(&self) -> usize {
        self.steps * self.input
    }

    pub fn layout(&self) -> Layout {
        let g = 4 * self.hidden;
        let mut at = 0;
        let mut next = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        let wx = next(self.input * g);
        let wh = next(self.hidden * g);
        let b = next(g);
        let w1 = next(self.hidden * self.fc1);
        let b1 = next(self.fc1);
        let w2 = next(self.fc1 * self.fc2);
        let b2 = next(self.fc2);
        let wv = next(self.fc2);
        let bv = next(1);
        let wa = next(self.fc2 * self.actions);
        let ba = next(self.actions);
        Layout { wx, wh, b, w1, b1, w2, b2, wv, bv, wa, ba, len: at }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

/// Named slices of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub wx: Range<usize>,
    pub wh: Range<usize>,
    pub b: Range<usize>,
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
    pub wv: Range<usize>,
    pub bv: Range<usize>,
    pub wa: Range<usize>,
    pub ba: Range<usize>,
    pub len: usize,
}

impl Layout {
    /// `(name, range)` for every parameter tensor.
    pub fn tensors(&self) -> Vec<(&'static str, Range<usize>)> {
        vec![
            ("lstm.wx", self.wx.clone()),
            ("lstm.wh", self.wh.clone()),
            ("lstm.b", self.b.clone()),
            ("fc1.w", self.w1.clone()),
            ("fc1.b", self.b1.clone()),
            ("fc2.w", self.w2.clone()),
            ("fc2.b", self.b2.clone()),
            ("value.w", self.wv.clone()),
            ("value.b", self.bv.clone()),
            ("advantage.w", self.wa.clone()),
            ("advantage.b", self.ba.clone()),
        ]
    }
}

/// Uniform `±√(1/fan_in)` initialization. With `zero_heads` the value and
/// advantage heads start at zero, so every action has the same initial Q.
pub fn init_params<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R, zero_heads: bool) -> Vec<f64> {
    let l = arch.layout();
    let mut p = vec![0.0; l.len];
    let mut fill = |r: Range<usize>, fan_in: usize| {
        let bound = (1.0 / fan_in as f64).sqrt();
        for v in &mut p[r] {
            *v = rng.gen_range(-bound..bound);
        }
    };
    let lstm_fan = arch.input + arch.hidden;
    fill(l.wx.clone(), lstm_fan);
    fill(l.wh.clone(), lstm_fan);
    fill(l.b.clone(), lstm_fan);
    fill(l.w1.clone(), arch.hidden);
    fill(l.b1.clone(), arch.hidden);
    fill(l.w2.clone(), arch.fc1);
    fill(l.b2.clone(), arch.fc1);
    if !zero_heads {
        fill(l.wv.clone(), arch.fc2);
        fill(l.bv.clone(), arch.fc2);
        fill(l.wa.clone(), arch.fc2);
        fill(l.ba.clone(), arch.fc2);
    }
    p
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// libm tanh is roughly twice as slow as exp and this is the hot loop.
fn tanh(x: f64) -> f64 {
    let t = 1.0 - 2.0 / ((2.0 * x.abs()).exp() + 1.0);
    t.copysign(x)
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    inputs: Vec<f64>,
    /// Activated gates, `steps × batch × 4H`.
    gates: Vec<f64>,
    /// Cell states, `(steps + 1) × batch × H` (index 0 is the zero state).
    cells: Vec<f64>,
    hiddens: Vec<f64>,
    /// tanh of the cell state, `steps × batch × H`.
    cell_tanh: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    pub value: Vec<f64>,
    pub advantage: Vec<f64>,
    /// `batch × actions`
    pub q: Vec<f64>,
}

/// Batched forward pass. `inputs` holds `batch` states, each `steps × input`
/// values in chronological order.
pub fn forward(arch: &Architecture, params: &[f64], inputs: &[f64], batch: usize) -> ForwardCache {
    let l = arch.layout();
    let (d, h, s, na) = (arch.input, arch.hidden, arch.steps, arch.actions);
    let g = 4 * h;
    assert_eq!(inputs.len(), batch * s * d, "input length does not match batch × state size");
    assert_eq!(params.len(), l.len);

    let mut gates = vec![0.0; s * batch * g];
    let mut cells = vec![0.0; (s + 1) * batch * h];
    let mut hiddens = vec![0.0; (s + 1) * batch * h];
    let mut cell_tanh = vec![0.0; s * batch * h];

    for t in 0..s {
        let pre = &mut gates[t * batch * g..(t + 1) * batch * g];
        for row in pre.chunks_mut(g) {
            row.copy_from_slice(&params[l.b.clone()]);
        }
        let x_t = View { data: &inputs[t * d..], rs: s * d, cs: 1 };
        gemm(batch, d, g, x_t, View::rows(&params[l.wx.clone()], g), 1.0, pre);
        let h_prev = &hiddens[t * batch * h..(t + 1) * batch * h];
        gemm(batch, h, g, View::rows(h_prev, h), View::rows(&params[l.wh.clone()], g), 1.0, pre);

        let (c_prev_all, c_next_all) = cells.split_at_mut((t + 1) * batch * h);
        let c_prev = &c_prev_all[t * batch * h..];
        let c_next = &mut c_next_all[..batch * h];
        let h_next = &mut hiddens[(t + 1) * batch * h..(t + 2) * batch * h];
        let tc = &mut cell_tanh[t * batch * h..(t + 1) * batch * h];
        for b in 0..batch {
            let row = &mut pre[b * g..(b + 1) * g];
            for u in 0..h {
                let i = sigmoid(row[u]);
                let f = sigmoid(row[h + u]);
                let c = tanh(row[2 * h + u]);
                let o = sigmoid(row[3 * h + u]);
                row[u] = i;
                row[h + u] = f;
                row[2 * h + u] = c;
                row[3 * h + u] = o;
                let cell = f * c_prev[b * h + u] + i * c;
                let ct = tanh(cell);
                c_next[b * h + u] = cell;
                tc[b * h + u] = ct;
                h_next[b * h + u] = o * ct;
            }
        }
    }

    let h_last = &hiddens[s * batch * h..];
    let dense = |input: &[f64], fan_in: usize, w: &Range<usize>, bias: &Range<usize>, out: usize| {
        let mut z = Vec::with_capacity(batch * out);
        for _ in 0..batch {
            z.extend_from_slice(&params[bias.clone()]);
        }
        gemm(batch, fan_in, out, View::rows(input, fan_in), View::rows(&params[w.clone()], out), 1.0, &mut z);
        z
    };
    let z1 = dense(h_last, h, &l.w1, &l.b1, arch.fc1);
    let a1: Vec<f64> = z1.iter().map(|&v| v.max(0.0)).collect();
    let z2 = dense(&a1, arch.fc1, &l.w2, &l.b2, arch.fc2);
    let a2: Vec<f64> = z2.iter().map(|&v| v.max(0.0)).collect();
    let value = dense(&a2, arch.fc2, &l.wv, &l.bv, 1);
    let advantage = dense(&a2, arch.fc2, &l.wa, &l.ba, na);

    let mut q = vec![0.0; batch * na];
    for b in 0..batch {
        let adv = &advantage[b * na..(b + 1) * na];
        let mean = adv.iter().sum::<f64>() / na as f64;
        for a in 0..na {
            q[b * na + a] = value[b] + adv[a] - mean;
        }
    }

    ForwardCache {
        batch,
        inputs: inputs.to_vec(),
        gates,
        cells,
        hiddens,
        cell_tanh,
        z1,
        a1,
        z2,
        a2,
        value,
        advantage,
        q,
    }
}

/// Accumulates `∂L/∂params` into `grad` given `dq = ∂L/∂Q` (`batch × actions`).
pub fn backward(arch: &Architecture, params: &[f64], cache: &ForwardCache, dq: &[f64], grad: &mut [f64]) {
    let l = arch.layout();
    let (d, h, s, na) = (arch.input, arch.hidden, arch.steps, arch.actions);
    let (f1, f2) = (arch.fc1, arch.fc2);
    let g = 4 * h;
    let batch = cache.batch;
    assert_eq!(dq.len(), batch * na);
    assert_eq!(grad.len(), l.len);

    // dueling combine
    let mut dv = vec![0.0; batch];
    let mut da = vec![0.0; batch * na];
    for b in 0..batch {
        let row = &dq[b * na..(b + 1) * na];
        let sum: f64 = row.iter().sum();
        dv[b] = sum;
        for a in 0..na {
            da[b * na + a] = row[a] - sum / na as f64;
        }
    }

    let col_sum = |m: &[f64], cols: usize, out: &mut [f64]| {
        for row in m.chunks(cols) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
    };

    // heads
    gemm(f2, batch, 1, View::transposed(&cache.a2, f2), View::rows(&dv, 1), 1.0, &mut grad[l.wv.clone()]);
    col_sum(&dv, 1, &mut grad[l.bv.clone()]);
    gemm(f2, batch, na, View::transposed(&cache.a2, f2), View::rows(&da, na), 1.0, &mut grad[l.wa.clone()]);
    col_sum(&da, na, &mut grad[l.ba.clone()]);

    let mut dz2 = vec![0.0; batch * f2];
    gemm(batch, 1, f2, View::rows(&dv, 1), View::transposed(&params[l.wv.clone()], 1), 0.0, &mut dz2);
    gemm(batch, na, f2, View::rows(&da, na), View::transposed(&params[l.wa.clone()], na), 1.0, &mut dz2);
    for (dz, &z) in dz2.iter_mut().zip(&cache.z2) {
        if z <= 0.0 {
            *dz = 0.0;
        }
    }
    gemm(f1, batch, f2, View::transposed(&cache.a1, f1), View::rows(&dz2, f2), 1.0, &mut grad[l.w2.clone()]);
    col_sum(&dz2, f2, &mut grad[l.b2.clone()]);

    let mut dz1 = vec![0.0; batch * f1];
    gemm(batch, f2, f1, View::rows(&dz2, f2), View::transposed(&params[l.w2.clone()], f2), 0.0, &mut dz1);
    for (dz, &z) in dz1.iter_mut().zip(&cache.z1) {
        if z <= 0.0 {
            *dz = 0.0;
        }
    }
    let h_last = &cache.hiddens[s * batch * h..];
    gemm(h, batch, f1, View::transposed(h_last, h), View::rows(&dz1, f1), 1.0, &mut grad[l.w1.clone()]);
    col_sum(&dz1, f1, &mut grad[l.b1.clone()]);

    let mut dh = vec![0.0; batch * h];
    gemm(batch, f1, h, View::rows(&dz1, f1), View::transposed(&params[l.w1.clone()], f1), 0.0, &mut dh);

    // backpropagation through time
    let mut dc = vec![0.0; batch * h];
    let mut dpre = vec![0.0; batch * g];
    for t in (0..s).rev() {
        let gates = &cache.gates[t * batch * g..(t + 1) * batch * g];
        let c_prev = &cache.cells[t * batch * h..(t + 1) * batch * h];
        let tc = &cache.cell_tanh[t * batch * h..(t + 1) * batch * h];
        for b in 0..batch {
            let row = &gates[b * g..(b + 1) * g];
            let out = &mut dpre[b * g..(b + 1) * g];
            for u in 0..h {
                let k = b * h + u;
                let (i, f, c, o) = (row[u], row[h + u], row[2 * h + u], row[3 * h + u]);
                let dhk = dh[k];
                let dck = dc[k] + dhk * o * (1.0 - tc[k] * tc[k]);
                out[u] = dck * c * i * (1.0 - i);
                out[h + u] = dck * c_prev[k] * f * (1.0 - f);
                out[2 * h + u] = dck * i * (1.0 - c * c);
                out[3 * h + u] = dhk * tc[k] * o * (1.0 - o);
                dc[k] = dck * f;
            }
        }
        let x_t = View { data: &cache.inputs[t * d..], rs: 1, cs: s * d };
        gemm(d, batch, g, x_t, View::rows(&dpre, g), 1.0, &mut grad[l.wx.clone()]);
        let h_prev = &cache.hiddens[t * batch * h..(t + 1) * batch * h];
        gemm(h, batch, g, View::transposed(h_prev, h), View::rows(&dpre, g), 1.0, &mut grad[l.wh.clone()]);
        col_sum(&dpre, g, &mut grad[l.b.clone()]);
        if t > 0 {
            gemm(batch, g, h, View::rows(&dpre, g), View::transposed(&params[l.wh.clone()], g), 0.0, &mut dh);
        }
    }
}
