//! Slot-bundle replay memory.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::QnetError;

/// One UE's transition, states already encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub next_state: Vec<f64>,
}

/// Everything stored for one slot: the shared reward and one transition per UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotBundle {
    pub reward: f64,
    pub transitions: Vec<Transition>,
}

/// FIFO ring buffer of slot bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<SlotBundle>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: VecDeque::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SlotBundle> {
        self.items.iter()
    }

    pub fn push(&mut self, bundle: SlotBundle) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(bundle);
    }

    /// Uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&SlotBundle>, QnetError> {
        if self.items.is_empty() {
            return Err(QnetError::Contract("cannot sample from an empty replay memory".into()));
        }
        Ok((0..batch_size).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect())
    }

    pub fn sample_seeded(&self, batch_size: usize, seed: u64) -> Result<Vec<&SlotBundle>, QnetError> {
        self.sample(batch_size, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}
