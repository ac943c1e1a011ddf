//! Per-UE observation history and its feature encoding.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::QnetError;
use crate::env::ChannelObs;

/// Width of one encoded tuple: v̄ (1) + observation one-hot (4) + ö (1) +
/// action one-hot (2C).
pub fn tuple_width(channels: usize) -> usize {
    1 + 4 + 1 + 2 * channels
}

/// One (normalized D2LT, channel observation, assisted ratio, action) entry.
/// `obs` and `action` are `None` in padding entries.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationTuple {
    pub d2lt: f64,
    pub obs: Option<ChannelObs>,
    pub assisted: f64,
    pub action: Option<usize>,
}

impl ObservationTuple {
    fn write(&self, channels: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[0] = self.d2lt;
        if let Some(o) = self.obs {
            out[1 + o.one_hot_index()] = 1.0;
        }
        out[5] = self.assisted;
        if let Some(a) = self.action {
            out[6 + a] = 1.0;
        }
        debug_assert!(self.action.is_none_or(|a| a < 2 * channels));
    }
}

/// The most recent `history_len` tuples seen by one UE, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentObservation {
    history_len: usize,
    tuples: VecDeque<ObservationTuple>,
}

impl AgentObservation {
    /// Zero-padded history.
    pub fn new(history_len: usize) -> Self {
        Self { history_len, tuples: std::iter::repeat_n(ObservationTuple::default(), history_len).collect() }
    }

    /// History from explicit tuples; the length is checked at encode time.
    pub fn from_tuples(history_len: usize, tuples: Vec<ObservationTuple>) -> Self {
        Self { history_len, tuples: tuples.into() }
    }

    pub fn history_len(&self) -> usize {
        self.history_len
    }

    pub fn tuples(&self) -> impl Iterator<Item = &ObservationTuple> {
        self.tuples.iter()
    }

    /// Appends the newest tuple and drops the oldest.
    pub fn push(&mut self, tuple: ObservationTuple) {
        self.tuples.push_back(tuple);
        while self.tuples.len() > self.history_len {
            self.tuples.pop_front();
        }
    }

    /// `history_len × tuple_width(C)` features in chronological order.
    pub fn encode(&self, channels: usize) -> Result<Vec<f64>, QnetError> {
        if self.tuples.len() != self.history_len {
            return Err(QnetError::Contract(format!(
                "history holds {} tuples, expected {}",
                self.tuples.len(),
                self.history_len
            )));
        }
        if let Some(a) = self.tuples.iter().filter_map(|t| t.action).find(|&a| a >= 2 * channels) {
            return Err(QnetError::Contract(format!("action {a} outside the {}-action space", 2 * channels)));
        }
        let w = tuple_width(channels);
        let mut out = vec![0.0; self.history_len * w];
        for (t, chunk) in self.tuples.iter().zip(out.chunks_mut(w)) {
            t.write(channels, chunk);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_encodes_to_zero() {
        let enc = AgentObservation::new(4).encode(2).unwrap();
        assert_eq!(enc.len(), 4 * 10);
        assert!(enc.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn success_in_last_tuple() {
        let mut h = AgentObservation::new(4);
        h.push(ObservationTuple { d2lt: 0.5, obs: Some(ChannelObs::Success), assisted: 0.0, action: Some(1) });
        let enc = h.encode(1).unwrap();
        let last = &enc[3 * 8..];
        assert_eq!(last, &[0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(enc[..3 * 8].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn width_for_three_channels() {
        assert_eq!(tuple_width(3), 12);
        assert_eq!(AgentObservation::new(4).encode(3).unwrap().len(), 48);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let h = AgentObservation::from_tuples(4, vec![ObservationTuple::default(); 3]);
        assert!(matches!(h.encode(1), Err(QnetError::Contract(_))));
    }

    #[test]
    fn push_keeps_length() {
        let mut h = AgentObservation::new(2);
        for i in 0..5 {
            h.push(ObservationTuple { d2lt: i as f64, ..Default::default() });
        }
        let d: Vec<f64> = h.tuples().map(|t| t.d2lt).collect();
        assert_eq!(d, vec![3.0, 4.0]);
    }
}
