//! Per-UE Q-networks and the centralized value-decomposition learner.
//!
//! Each UE owns an LSTM + dueling-head network with online and target
//! parameter sets. Training minimizes the squared error between the sum of
//! the agents' Q-values for the taken actions and a double-Q target: actions
//! for the next states are selected by the online nets and evaluated by the
//! target nets.

mod encode;
mod linalg;
mod model;
mod optim;
mod replay;

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encode::{tuple_width, AgentObservation, ObservationTuple};
pub use model::{backward, forward, init_params, Architecture, ForwardCache, Layout};
pub use optim::{Optimizer, OptimizerKind};
pub use replay::{ReplayMemory, SlotBundle, Transition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QnetError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("training diverged: non-finite loss on batch seeded {batch_seed}")]
    Diverged { batch_seed: u64 },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Online,
    Target,
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy(q: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = a;
        }
    }
    best
}

/// One UE's online and target parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    arch: Architecture,
    online: Vec<f64>,
    target: Vec<f64>,
}

impl QNetwork {
    /// Fresh network; the target starts as a copy of the online parameters.
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R, zero_heads: bool) -> Self {
        let online = init_params(&arch, rng, zero_heads);
        Self { arch, target: online.clone(), online }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self, which: Which) -> &[f64] {
        match which {
            Which::Online => &self.online,
            Which::Target => &self.target,
        }
    }

    pub fn params_mut(&mut self, which: Which) -> &mut [f64] {
        match which {
            Which::Online => &mut self.online,
            Which::Target => &mut self.target,
        }
    }

    /// Q-values of one history.
    pub fn q_values(&self, state: &AgentObservation, which: Which) -> Result<Vec<f64>, QnetError> {
        let x = state.encode(self.arch.actions / 2)?;
        Ok(self.q_encoded(&x, 1, which))
    }

    /// Q-values of `batch` encoded states laid out back to back.
    pub fn q_encoded(&self, states: &[f64], batch: usize, which: Which) -> Vec<f64> {
        forward(&self.arch, self.params(which), states, batch).q
    }

    /// Hard copy of the online parameters into the target set.
    pub fn sync_target(&mut self) {
        self.target.copy_from_slice(&self.online);
    }
}

fn stack_states(batch: &[&SlotBundle], agent: usize, next: bool) -> Vec<f64> {
    let mut out = Vec::new();
    for b in batch {
        let t = &b.transitions[agent];
        out.extend_from_slice(if next { &t.next_state } else { &t.state });
    }
    out
}

/// `Y = R + γ Σ_i Q_i^target(s_i', argmax_a Q_i^online(s_i', a))` per bundle.
pub fn td_targets(nets: &[QNetwork], batch: &[&SlotBundle], gamma: f64) -> Vec<f64> {
    let mut y: Vec<f64> = batch.iter().map(|b| b.reward).collect();
    if gamma == 0.0 {
        return y;
    }
    let mut bootstrap = vec![0.0; batch.len()];
    for (i, net) in nets.iter().enumerate() {
        let na = net.arch.actions;
        let next = stack_states(batch, i, true);
        let online = net.q_encoded(&next, batch.len(), Which::Online);
        let target = net.q_encoded(&next, batch.len(), Which::Target);
        for (b, acc) in bootstrap.iter_mut().enumerate() {
            let a = greedy(&online[b * na..(b + 1) * na]);
            *acc += target[b * na + a];
        }
    }
    for (v, boot) in y.iter_mut().zip(bootstrap) {
        *v += gamma * boot;
    }
    y
}

/// `Q_tot = Σ_i Q_i(s_i, a_i)` with online parameters, per bundle.
pub fn joint_q(nets: &[QNetwork], batch: &[&SlotBundle]) -> Vec<f64> {
    let mut total = vec![0.0; batch.len()];
    for (i, net) in nets.iter().enumerate() {
        let na = net.arch.actions;
        let q = net.q_encoded(&stack_states(batch, i, false), batch.len(), Which::Online);
        for (b, acc) in total.iter_mut().enumerate() {
            *acc += q[b * na + batch[b].transitions[i].action];
        }
    }
    total
}

/// Mean squared TD error and its gradient w.r.t. every agent's online
/// parameters, with the targets held fixed.
pub fn loss_and_gradients(nets: &[QNetwork], batch: &[&SlotBundle], targets: &[f64]) -> (f64, Vec<Vec<f64>>) {
    let n = batch.len();
    let caches: Vec<ForwardCache> = nets
        .iter()
        .enumerate()
        .map(|(i, net)| forward(&net.arch, &net.online, &stack_states(batch, i, false), n))
        .collect();
    let mut q_tot = vec![0.0; n];
    for (i, (net, cache)) in nets.iter().zip(&caches).enumerate() {
        let na = net.arch.actions;
        for (b, acc) in q_tot.iter_mut().enumerate() {
            *acc += cache.q[b * na + batch[b].transitions[i].action];
        }
    }
    let err: Vec<f64> = q_tot.iter().zip(targets).map(|(q, y)| q - y).collect();
    let loss = err.iter().map(|e| e * e).sum::<f64>() / n as f64;

    let grads = nets
        .iter()
        .zip(&caches)
        .enumerate()
        .map(|(i, (net, cache))| {
            let na = net.arch.actions;
            let mut dq = vec![0.0; n * na];
            for b in 0..n {
                dq[b * na + batch[b].transitions[i].action] = 2.0 * err[b] / n as f64;
            }
            let mut grad = vec![0.0; net.online.len()];
            backward(&net.arch, &net.online, cache, &dq, &mut grad);
            grad
        })
        .collect();
    (loss, grads)
}

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= scale);
    }
    norm
}

/// All agents' networks and optimizers, trained jointly through `Q_tot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub nets: Vec<QNetwork>,
    pub optimizers: Vec<Optimizer>,
    pub gamma: f64,
    pub grad_clip: Option<f64>,
    train_steps: u64,
}

impl Learner {
    pub fn new(nets: Vec<QNetwork>, kind: OptimizerKind, learning_rate: f64, gamma: f64, grad_clip: Option<f64>) -> Self {
        let optimizers = nets.iter().map(|n| Optimizer::new(kind, learning_rate, n.online.len())).collect();
        Self { nets, optimizers, gamma, grad_clip, train_steps: 0 }
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// One gradient step on `batch`; returns the pre-update loss.
    pub fn train_step(&mut self, batch: &[&SlotBundle], batch_seed: u64) -> Result<f64, QnetError> {
        if batch.is_empty() {
            return Err(QnetError::Contract("empty training batch".into()));
        }
        let targets = td_targets(&self.nets, batch, self.gamma);
        let (loss, mut grads) = loss_and_gradients(&self.nets, batch, &targets);
        if !loss.is_finite() {
            return Err(QnetError::Diverged { batch_seed });
        }
        if let Some(max) = self.grad_clip {
            clip_global_norm(&mut grads, max);
        }
        for ((net, opt), g) in self.nets.iter_mut().zip(&mut self.optimizers).zip(&grads) {
            opt.step(&mut net.online, g);
        }
        self.train_steps += 1;
        Ok(loss)
    }

    pub fn sync_targets(&mut self) {
        self.nets.iter_mut().for_each(QNetwork::sync_target);
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Complete training state: networks, optimizer moments, RNG and schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub learner: Learner,
    pub rng: ChaCha8Rng,
    pub epsilon: f64,
    pub slot: u64,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String, QnetError> {
        serde_json::to_string(self).map_err(|e| QnetError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, QnetError> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| QnetError::Checkpoint(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(QnetError::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                c.version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), QnetError> {
        std::fs::write(path, self.to_json()?).map_err(|e| QnetError::Checkpoint(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QnetError> {
        let text = std::fs::read_to_string(path).map_err(|e| QnetError::Checkpoint(e.to_string()))?;
        Self::from_json(&text)
    }
}
