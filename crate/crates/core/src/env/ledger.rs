//! Windowed throughput accounting and the D2LT counters.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::EnvError;

/// Per-UE amounts credited in one slot, in segment units (unnormalized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotCredit {
    /// Σ_k a_{i,k} y_k
    pub total: Vec<f64>,
    /// Σ_k a_{i,k} z_i
    pub own: Vec<f64>,
    /// Σ_k a_{i,k} (1 − z_i) y_k^{−i}
    pub assisted: Vec<f64>,
    /// Σ_k a_{i,k}
    pub associated: Vec<f64>,
}

/// Normalized throughput of one UE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeThroughput {
    pub x: f64,
    pub self_x: f64,
    pub assisted_x: f64,
}

/// Sliding-window sums behind x, ẋ and ẍ. `window = None` keeps the whole
/// horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputLedger {
    window: Option<usize>,
    slots: VecDeque<SlotCredit>,
    recorded: u64,
    total: Vec<f64>,
    own: Vec<f64>,
    assisted: Vec<f64>,
    associated: Vec<f64>,
}

impl ThroughputLedger {
    pub fn new(ues: usize, window: Option<usize>) -> Self {
        Self {
            window,
            slots: VecDeque::new(),
            recorded: 0,
            total: vec![0.0; ues],
            own: vec![0.0; ues],
            assisted: vec![0.0; ues],
            associated: vec![0.0; ues],
        }
    }

    pub fn window(&self) -> Option<usize> {
        self.window
    }

    /// Slots recorded so far (including evicted ones).
    pub fn recorded(&self) -> u64 {
        self.recorded
    }

    pub fn push(&mut self, credit: SlotCredit) {
        add(&mut self.total, &credit.total, 1.0);
        add(&mut self.own, &credit.own, 1.0);
        add(&mut self.assisted, &credit.assisted, 1.0);
        add(&mut self.associated, &credit.associated, 1.0);
        self.recorded += 1;
        if let Some(w) = self.window {
            self.slots.push_back(credit);
            while self.slots.len() > w {
                let old = self.slots.pop_front().unwrap();
                add(&mut self.total, &old.total, -1.0);
                add(&mut self.own, &old.own, -1.0);
                add(&mut self.assisted, &old.assisted, -1.0);
                add(&mut self.associated, &old.associated, -1.0);
            }
        }
    }

    /// Raw window sums `(total, own, assisted, associated)` per UE.
    pub fn sums(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        (&self.total, &self.own, &self.assisted, &self.associated)
    }

    /// x, ẋ and ẍ over the current window.
    pub fn throughputs(&self) -> Result<Vec<UeThroughput>, EnvError> {
        if self.recorded == 0 {
            return Err(EnvError::Contract("throughput ledger has no recorded slot".into()));
        }
        Ok((0..self.total.len())
            .map(|i| {
                let omega = 1.0 / self.associated[i];
                UeThroughput {
                    x: self.total[i] * omega,
                    self_x: self.own[i] * omega,
                    assisted_x: self.assisted[i] * omega,
                }
            })
            .collect())
    }
}

fn add(acc: &mut [f64], v: &[f64], sign: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += sign * b;
    }
}

/// Delay to last successful transmission, per UE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct D2ltTracker {
    delays: Vec<u64>,
}

impl D2ltTracker {
    /// Every counter starts at 1 so the normalized values are uniform.
    pub fn new(ues: usize) -> Self {
        Self { delays: vec![1; ues] }
    }

    pub fn delays(&self) -> &[u64] {
        &self.delays
    }

    /// v̄_i = v_i / Σ_j v_j. When every counter is zero (all UEs succeeded in
    /// the same slot) the weights are uniform.
    pub fn normalized(&self) -> Vec<f64> {
        let sum: u64 = self.delays.iter().sum();
        let n = self.delays.len() as f64;
        if sum == 0 {
            return vec![1.0 / n; self.delays.len()];
        }
        self.delays.iter().map(|&v| v as f64 / sum as f64).collect()
    }

    pub fn update(&mut self, success: &[bool]) {
        for (v, &ok) in self.delays.iter_mut().zip(success) {
            *v = if ok { 0 } else { *v + 1 };
        }
    }
}
