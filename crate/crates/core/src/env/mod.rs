//! Time-slotted multi-channel MAC environment with shared semantic segments.
//!
//! Each slot every UE either senses or transmits on one channel. A UE that is
//! the only transmitter on its channel succeeds; a segment is received when
//! the combiner says so given every associated UE's success; per-UE
//! throughput is credited through the association matrix and split into the
//! UE's own contribution and the part delivered by others.

mod combiner;
mod export;
mod ledger;
mod matrix;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use combiner::{segment_indicator, CappedSumCombiner, Combiner, MinCombiner};
pub use export::{TrajectoryRecord, TrajectoryWriter, TRAJECTORY_SCHEMA_VERSION};
pub use ledger::{D2ltTracker, SlotCredit, ThroughputLedger, UeThroughput};
pub use matrix::AssociationMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sense,
    Transmit,
}

/// One UE's decision for a slot. Channels are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UeAction {
    pub mode: Mode,
    pub channel: usize,
}

impl UeAction {
    pub fn sense(channel: usize) -> Self {
        Self { mode: Mode::Sense, channel }
    }

    pub fn transmit(channel: usize) -> Self {
        Self { mode: Mode::Transmit, channel }
    }

    /// Index in the `2C`-element action space: `φ · C + c`.
    pub fn index(&self, channels: usize) -> usize {
        match self.mode {
            Mode::Sense => self.channel,
            Mode::Transmit => channels + self.channel,
        }
    }

    pub fn from_index(index: usize, channels: usize) -> Self {
        assert!(index < 2 * channels, "action index {index} out of range for {channels} channels");
        if index < channels {
            Self::sense(index)
        } else {
            Self::transmit(index - channels)
        }
    }
}

/// Decisions of all UEs for one slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction(pub Vec<UeAction>);

impl JointAction {
    pub fn from_indices(indices: &[usize], channels: usize) -> Self {
        Self(indices.iter().map(|&a| UeAction::from_index(a, channels)).collect())
    }

    /// Everyone senses channel 0 except the listed (UE, channel) transmitters.
    pub fn transmitters(ues: usize, tx: &[(usize, usize)]) -> Self {
        let mut acts = vec![UeAction::sense(0); ues];
        for &(ue, ch) in tx {
            acts[ue] = UeAction::transmit(ch);
        }
        Self(acts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelObs {
    Busy,
    Idle,
    Success,
    Collision,
}

impl ChannelObs {
    /// Position in the `{B, I, S, C}` one-hot encoding.
    pub fn one_hot_index(self) -> usize {
        match self {
            ChannelObs::Busy => 0,
            ChannelObs::Idle => 1,
            ChannelObs::Success => 2,
            ChannelObs::Collision => 3,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            ChannelObs::Busy => "B",
            ChannelObs::Idle => "I",
            ChannelObs::Success => "S",
            ChannelObs::Collision => "C",
        }
    }
}

impl fmt::Display for ChannelObs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Result of resolving one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    /// z_i
    pub success: Vec<bool>,
    pub observation: Vec<ChannelObs>,
    /// ö_i; zero on slots where UE i itself succeeded.
    pub assisted_ratio: Vec<f64>,
    /// y_k
    pub delivered: Vec<f64>,
    pub credit: SlotCredit,
    pub reward: f64,
}

/// Static environment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub channels: usize,
    pub matrix: AssociationMatrix,
    /// Throughput window in slots; `None` averages over the whole horizon.
    pub throughput_window: Option<usize>,
}

impl EnvConfig {
    pub fn new(matrix: AssociationMatrix, channels: usize) -> Self {
        Self { channels, matrix, throughput_window: None }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.channels == 0 {
            return Err(EnvError::Config("channel count C must be >= 1".into()));
        }
        if self.throughput_window == Some(0) {
            return Err(EnvError::Config("throughput_window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mutable per-instance state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub slot: u64,
    pub seed: u64,
    pub d2lt: D2ltTracker,
    /// Ledger over the configured throughput window.
    pub ledger: ThroughputLedger,
    /// Ledger over the whole horizon.
    pub all_time: ThroughputLedger,
}

/// Channel resolution and segment crediting for one slot, without touching
/// any state. `weights` are the pre-slot normalized D2LT values.
pub fn resolve_slot(
    matrix_block: &[u8],
    segments: usize,
    channels: usize,
    actions: &[UeAction],
    weights: &[f64],
    combiner: &dyn Combiner,
) -> SlotOutcome {
    let n = actions.len();
    let mut tx_count = vec![0usize; channels];
    for a in actions {
        if a.mode == Mode::Transmit {
            tx_count[a.channel] += 1;
        }
    }
    let success: Vec<bool> = actions
        .iter()
        .map(|a| a.mode == Mode::Transmit && tx_count[a.channel] == 1)
        .collect();
    let observation = actions
        .iter()
        .zip(&success)
        .map(|(a, &ok)| match (a.mode, ok) {
            (Mode::Transmit, true) => ChannelObs::Success,
            (Mode::Transmit, false) => ChannelObs::Collision,
            (Mode::Sense, _) if tx_count[a.channel] > 0 => ChannelObs::Busy,
            (Mode::Sense, _) => ChannelObs::Idle,
        })
        .collect();

    let assoc = |i: usize, k: usize| f64::from(matrix_block[i * segments + k]);
    let z = |j: usize| if success[j] { 1.0 } else { 0.0 };

    let mut contributions = vec![0.0; n];
    let mut delivered = vec![0.0; segments];
    for (k, y) in delivered.iter_mut().enumerate() {
        for (j, c) in contributions.iter_mut().enumerate() {
            *c = assoc(j, k) * z(j);
        }
        *y = combiner.combine(&contributions);
    }

    let mut credit = SlotCredit {
        total: vec![0.0; n],
        own: vec![0.0; n],
        assisted: vec![0.0; n],
        associated: vec![0.0; n],
    };
    let mut assisted_ratio = vec![0.0; n];
    for i in 0..n {
        let mut assisted = 0.0;
        for k in 0..segments {
            let a = assoc(i, k);
            if a == 0.0 {
                continue;
            }
            credit.associated[i] += a;
            credit.total[i] += a * delivered[k];
            credit.own[i] += a * z(i);
            if !success[i] {
                for (j, c) in contributions.iter_mut().enumerate() {
                    *c = if j == i { 0.0 } else { assoc(j, k) * z(j) };
                }
                assisted += a * combiner.combine(&contributions);
            }
        }
        credit.assisted[i] = assisted;
        assisted_ratio[i] = assisted / credit.associated[i];
    }

    let reward = success
        .iter()
        .zip(weights)
        .filter(|(&ok, _)| ok)
        .map(|(_, &w)| w)
        .sum::<f64>()
        / n as f64;

    SlotOutcome { success, observation, assisted_ratio, delivered, credit, reward }
}

/// A single environment instance.
#[derive(Debug, Clone)]
pub struct MacEnv {
    config: EnvConfig,
    combiner: Arc<dyn Combiner>,
    state: EnvState,
}

impl MacEnv {
    /// Fresh instance with the default `min` combiner.
    pub fn reset(config: &EnvConfig, seed: u64) -> Result<Self, EnvError> {
        Self::with_combiner(config, seed, Arc::new(MinCombiner))
    }

    pub fn with_combiner(
        config: &EnvConfig,
        seed: u64,
        combiner: Arc<dyn Combiner>,
    ) -> Result<Self, EnvError> {
        config.validate()?;
        let n = config.matrix.ues();
        Ok(Self {
            config: config.clone(),
            combiner,
            state: EnvState {
                slot: 0,
                seed,
                d2lt: D2ltTracker::new(n),
                ledger: ThroughputLedger::new(n, config.throughput_window),
                all_time: ThroughputLedger::new(n, None),
            },
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn ues(&self) -> usize {
        self.config.matrix.ues()
    }

    pub fn channels(&self) -> usize {
        self.config.channels
    }

    pub fn check_actions(&self, actions: &JointAction) -> Result<(), EnvError> {
        if actions.0.len() != self.ues() {
            return Err(EnvError::Contract(format!(
                "joint action has {} entries for {} UEs",
                actions.0.len(),
                self.ues()
            )));
        }
        if let Some((i, a)) = actions.0.iter().enumerate().find(|(_, a)| a.channel >= self.channels()) {
            return Err(EnvError::Contract(format!(
                "UE {i} chose channel {} but only {} exist",
                a.channel,
                self.channels()
            )));
        }
        Ok(())
    }

    /// Resolves one slot: reward uses the pre-slot D2LT weights, then the
    /// counters and ledgers advance.
    pub fn step(&mut self, actions: &JointAction) -> Result<SlotOutcome, EnvError> {
        self.check_actions(actions)?;
        let weights = self.state.d2lt.normalized();
        let matrix = &self.config.matrix;
        let outcome = resolve_slot(
            matrix.slot(self.state.slot),
            matrix.segments(),
            self.config.channels,
            &actions.0,
            &weights,
            self.combiner.as_ref(),
        );
        self.state.d2lt.update(&outcome.success);
        self.state.ledger.push(outcome.credit.clone());
        self.state.all_time.push(outcome.credit.clone());
        self.state.slot += 1;
        Ok(outcome)
    }

    /// Throughputs over the configured window.
    pub fn throughputs(&self) -> Result<Vec<UeThroughput>, EnvError> {
        self.state.ledger.throughputs()
    }

    pub fn all_time_throughputs(&self) -> Result<Vec<UeThroughput>, EnvError> {
        self.state.all_time.throughputs()
    }
}
