//! Per-slot trajectory CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EnvError, JointAction, Mode, SlotOutcome, UeThroughput};

pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;

const BASE_COLUMNS: [&str; 12] = [
    "schema_version",
    "t",
    "ue",
    "action_mode",
    "channel",
    "z",
    "obs",
    "assisted_ratio",
    "x",
    "self_x",
    "assisted_x",
    "reward",
];

/// One (slot, UE) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub ue: usize,
    pub mode: Mode,
    pub channel: usize,
    pub success: bool,
    pub obs: String,
    pub assisted_ratio: f64,
    pub x: f64,
    pub self_x: f64,
    pub assisted_x: f64,
    pub reward: f64,
}

impl TrajectoryRecord {
    /// Rows for every UE of one resolved slot.
    pub fn from_slot(
        t: u64,
        actions: &JointAction,
        outcome: &SlotOutcome,
        throughputs: &[UeThroughput],
    ) -> Vec<Self> {
        actions
            .0
            .iter()
            .enumerate()
            .map(|(ue, a)| TrajectoryRecord {
                t,
                ue,
                mode: a.mode,
                channel: a.channel,
                success: outcome.success[ue],
                obs: outcome.observation[ue].code().to_string(),
                assisted_ratio: outcome.assisted_ratio[ue],
                x: throughputs[ue].x,
                self_x: throughputs[ue].self_x,
                assisted_x: throughputs[ue].assisted_x,
                reward: outcome.reward,
            })
            .collect()
    }
}

/// CSV writer for trajectories; the objective column is optional.
pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
    with_objective: bool,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W, with_objective: bool) -> Result<Self, EnvError> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
        if with_objective {
            header.push("objective");
        }
        inner.write_record(&header).map_err(csv_err)?;
        Ok(Self { inner, with_objective })
    }

    pub fn write(&mut self, rec: &TrajectoryRecord, objective: Option<f64>) -> Result<(), EnvError> {
        let mode = match rec.mode {
            Mode::Sense => "sense",
            Mode::Transmit => "transmit",
        };
        let mut row = vec![
            TRAJECTORY_SCHEMA_VERSION.to_string(),
            rec.t.to_string(),
            rec.ue.to_string(),
            mode.to_string(),
            rec.channel.to_string(),
            u8::from(rec.success).to_string(),
            rec.obs.clone(),
            rec.assisted_ratio.to_string(),
            rec.x.to_string(),
            rec.self_x.to_string(),
            rec.assisted_x.to_string(),
            rec.reward.to_string(),
        ];
        if self.with_objective {
            row.push(objective.map(|v| v.to_string()).unwrap_or_default());
        }
        self.inner.write_record(&row).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<W, EnvError> {
        self.inner.flush().map_err(|e| EnvError::Io(e.to_string()))?;
        self.inner.into_inner().map_err(|e| EnvError::Io(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> EnvError {
    EnvError::Io(e.to_string())
}
