//! Decentralized ε-greedy execution with centralized value-decomposition
//! training, plus the semantic-oblivious and random baselines.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvConfig, EnvError, JointAction, MacEnv, TrajectoryRecord, TrajectoryWriter, UeAction, UeThroughput};
use crate::objective::{AlphaFairness, ObjectiveError};
use crate::qnet::{
    greedy, AgentObservation, Architecture, Learner, ObservationTuple, OptimizerKind, QNetwork, QnetError,
    ReplayMemory, SlotBundle, Transition, Which,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("slot {slot}: {source}")]
    Env { slot: u64, source: EnvError },
    #[error("slot {slot}: {source}")]
    Qnet { slot: u64, source: QnetError },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// Which agents drive the UEs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Semantic-aware agents: the assisted ratio is part of every state.
    Sama,
    /// Semantic-oblivious agents: assisted ratio zeroed, self throughput only.
    Ma,
    /// Uniformly random actions, no learning.
    #[serde(alias = "rnd")]
    Random,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Sama, Variant::Ma, Variant::Random];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sama => "sama",
            Variant::Ma => "ma",
            Variant::Random => "random",
        }
    }

    pub fn learns(self) -> bool {
        self != Variant::Random
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "sama" | "samad3ql" => Ok(Variant::Sama),
            "ma" | "mad3ql" => Ok(Variant::Ma),
            "random" | "rnd" => Ok(Variant::Random),
            other => Err(format!("unknown variant '{other}' (expected sama, ma or random)")),
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub history_len: usize,
    pub memory_capacity: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    /// Hard target copy every this many gradient steps.
    pub target_sync: u64,
    /// Global gradient-norm bound; 0 disables clipping.
    pub grad_clip: f64,
    pub optimizer: OptimizerKind,
    pub lstm_units: usize,
    pub fc1_units: usize,
    pub fc2_units: usize,
    pub zero_init_heads: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            history_len: 4,
            memory_capacity: 500,
            batch_size: 32,
            gamma: 0.9,
            learning_rate: 0.001,
            epsilon_start: 1.0,
            epsilon_min: 0.005,
            epsilon_decay: 0.995,
            target_sync: 50,
            grad_clip: 10.0,
            optimizer: OptimizerKind::default(),
            lstm_units: 64,
            fc1_units: 64,
            fc2_units: 32,
            zero_init_heads: false,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), String> {
        let counts = [
            ("history_len", self.history_len),
            ("memory_capacity", self.memory_capacity),
            ("batch_size", self.batch_size),
            ("lstm_units", self.lstm_units),
            ("fc1_units", self.fc1_units),
            ("fc2_units", self.fc2_units),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(format!("{name} must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) || !(self.epsilon_min..=1.0).contains(&self.epsilon_start) {
            return Err("epsilon values must satisfy 0 <= epsilon_min <= epsilon_start <= 1".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay) {
            return Err(format!("epsilon_decay must lie in [0, 1], got {}", self.epsilon_decay));
        }
        if self.target_sync == 0 {
            return Err("target_sync must be >= 1".into());
        }
        if !(self.grad_clip >= 0.0) {
            return Err("grad_clip must be >= 0".into());
        }
        Ok(())
    }

    pub fn architecture(&self, channels: usize) -> Architecture {
        Architecture::with_sizes(channels, self.history_len, self.lstm_units, self.fc1_units, self.fc2_units)
    }
}

/// Exploration probability with multiplicative per-slot decay and a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub value: f64,
    pub floor: f64,
    pub decay: f64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, floor: f64, decay: f64) -> Self {
        Self { value: start.max(floor), floor, decay }
    }

    pub fn decay(&mut self) {
        self.value = (self.value * self.decay).max(self.floor);
    }
}

/// One UE's action rule. It sees only that UE's own history.
pub fn select_action<R: Rng + ?Sized>(
    variant: Variant,
    net: Option<&QNetwork>,
    state: &AgentObservation,
    epsilon: f64,
    actions: usize,
    rng: &mut R,
) -> Result<usize, QnetError> {
    let explore = rng.gen::<f64>() < epsilon;
    match (variant, net) {
        (Variant::Random, _) => Ok(rng.gen_range(0..actions)),
        (_, Some(net)) if !explore => Ok(greedy(&net.q_values(state, Which::Online)?)),
        (_, Some(_)) => Ok(rng.gen_range(0..actions)),
        (_, None) => Err(QnetError::Contract(format!("variant {variant} needs a Q-network"))),
    }
}

/// Everything needed for one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub fairness: AlphaFairness,
    pub variant: Variant,
    /// Index of the last slot; the run covers `horizon + 1` slots.
    pub horizon: u64,
    pub hyper: Hyperparameters,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.env.validate().map_err(|source| TrainError::Env { slot: 0, source })?;
        self.fairness.validate()?;
        self.hyper.validate().map_err(TrainError::Config)
    }
}

/// Per-slot series and end-of-run scalars of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub variant: Variant,
    pub seed: u64,
    pub ues: usize,
    /// Semantic objective `U_α(x^t)` of the configured fairness.
    pub objective: Vec<f64>,
    /// The objective as the variant itself accounts it: semantic-oblivious
    /// agents only count their self throughput.
    pub own_objective: Vec<f64>,
    pub reward: Vec<f64>,
    /// Number of successful transmitters per slot.
    pub successes: Vec<u32>,
    /// Windowed per-UE throughput after every slot, `slots × ues`.
    pub x: Vec<f64>,
    pub self_x: Vec<f64>,
    pub all_time: Vec<UeThroughput>,
    pub final_epsilon: f64,
    pub train_steps: u64,
    pub mean_loss: Option<f64>,
    pub wall_clock_secs: f64,
}

impl RunResult {
    pub fn slots(&self) -> usize {
        self.reward.len()
    }

    pub fn throughput_at(&self, slot: usize) -> &[f64] {
        &self.x[slot * self.ues..(slot + 1) * self.ues]
    }

    pub fn self_throughput_at(&self, slot: usize) -> &[f64] {
        &self.self_x[slot * self.ues..(slot + 1) * self.ues]
    }

    /// The semantic objective series under another fairness level.
    pub fn objective_series(&self, fairness: &AlphaFairness) -> Result<Vec<f64>, ObjectiveError> {
        self.x.chunks(self.ues).map(|x| fairness.utility(x)).collect()
    }

    pub fn own_objective_series(&self, fairness: &AlphaFairness) -> Result<Vec<f64>, ObjectiveError> {
        let src = if self.variant == Variant::Ma { &self.self_x } else { &self.x };
        src.chunks(self.ues).map(|x| fairness.utility(x)).collect()
    }
}

/// Scalars summarizing the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub tail: usize,
    pub tail_objective: f64,
    pub tail_own_objective: f64,
    pub all_time: Vec<UeThroughput>,
}

fn tail_mean(series: &[f64], tail: usize) -> f64 {
    let tail = tail.min(series.len());
    series[series.len() - tail..].iter().sum::<f64>() / tail as f64
}

/// Mean objective over the last `tail` slots under `fairness`.
pub fn evaluate(result: &RunResult, fairness: &AlphaFairness, tail: usize) -> Result<Evaluation, TrainError> {
    if tail == 0 || tail > result.slots() {
        return Err(TrainError::Config(format!("tail {tail} outside 1..={}", result.slots())));
    }
    Ok(Evaluation {
        tail,
        tail_objective: tail_mean(&result.objective_series(fairness)?, tail),
        tail_own_objective: tail_mean(&result.own_objective_series(fairness)?, tail),
        all_time: result.all_time.clone(),
    })
}

/// Independent random streams derived from the run seed.
struct Streams {
    init: ChaCha8Rng,
    act: ChaCha8Rng,
    replay: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        Self { init: stream(0), act: stream(1), replay: stream(2) }
    }
}

pub fn run(config: &RunConfig, seed: u64) -> Result<RunResult, TrainError> {
    run_recorded::<std::io::Sink>(config, seed, None)
}

/// Runs training for `horizon + 1` slots and optionally
/// writes the per-slot trajectory.
pub fn run_recorded<W: Write>(
    config: &RunConfig,
    seed: u64,
    mut trajectory: Option<&mut TrajectoryWriter<W>>,
) -> Result<RunResult, TrainError> {
    config.validate()?;
    let started = Instant::now();
    let hp = &config.hyper;
    let mut env = MacEnv::reset(&config.env, seed).map_err(|source| TrainError::Env { slot: 0, source })?;
    let (n, channels) = (env.ues(), env.channels());
    let n_actions = 2 * channels;
    let arch = hp.architecture(channels);
    let mut streams = Streams::new(seed);

    let mut learner = config.variant.learns().then(|| {
        let nets = (0..n).map(|_| QNetwork::new(arch, &mut streams.init, hp.zero_init_heads)).collect();
        Learner::new(nets, hp.optimizer, hp.learning_rate, hp.gamma, (hp.grad_clip > 0.0).then_some(hp.grad_clip))
    });
    let mut memory = ReplayMemory::new(hp.memory_capacity);
    let warmup = hp.batch_size;
    let mut epsilon = EpsilonSchedule::new(hp.epsilon_start, hp.epsilon_min, hp.epsilon_decay);
    let mut histories: Vec<AgentObservation> = (0..n).map(|_| AgentObservation::new(hp.history_len)).collect();

    let slots = config.horizon as usize + 1;
    let mut result = RunResult {
        variant: config.variant,
        seed,
        ues: n,
        objective: Vec::with_capacity(slots),
        own_objective: Vec::with_capacity(slots),
        reward: Vec::with_capacity(slots),
        successes: Vec::with_capacity(slots),
        x: Vec::with_capacity(slots * n),
        self_x: Vec::with_capacity(slots * n),
        all_time: Vec::new(),
        final_epsilon: epsilon.value,
        train_steps: 0,
        mean_loss: None,
        wall_clock_secs: 0.0,
    };
    let mut loss_sum = 0.0;

    for t in 0..slots as u64 {
        let qerr = |source| TrainError::Qnet { slot: t, source };
        let states: Vec<Vec<f64>> =
            histories.iter().map(|h| h.encode(channels)).collect::<Result<_, _>>().map_err(qerr)?;
        let mut picks = Vec::with_capacity(n);
        for (i, h) in histories.iter().enumerate() {
            let net = learner.as_ref().map(|l| &l.nets[i]);
            let a = select_action(config.variant, net, h, epsilon.value, n_actions, &mut streams.act).map_err(qerr)?;
            picks.push(a);
        }
        let joint = JointAction(picks.iter().map(|&a| UeAction::from_index(a, channels)).collect());
        let outcome = env.step(&joint).map_err(|source| TrainError::Env { slot: t, source })?;

        let weights = env.state().d2lt.normalized();
        let mut transitions = Vec::with_capacity(n);
        for (i, (h, state)) in histories.iter_mut().zip(states).enumerate() {
            let assisted = if config.variant == Variant::Ma { 0.0 } else { outcome.assisted_ratio[i] };
            h.push(ObservationTuple {
                d2lt: weights[i],
                obs: Some(outcome.observation[i]),
                assisted,
                action: Some(picks[i]),
            });
            let next_state = h.encode(channels).map_err(qerr)?;
            transitions.push(Transition { state, action: picks[i], next_state });
        }

        if let Some(learner) = learner.as_mut() {
            memory.push(SlotBundle { reward: outcome.reward, transitions });
            if memory.len() >= warmup {
                let batch_seed = streams.replay.next_u64();
                let batch = memory.sample_seeded(hp.batch_size, batch_seed).map_err(qerr)?;
                loss_sum += learner.train_step(&batch, batch_seed).map_err(qerr)?;
                if learner.train_steps() % hp.target_sync == 0 {
                    learner.sync_targets();
                }
            }
        }
        epsilon.decay();

        let tp = env.throughputs().map_err(|source| TrainError::Env { slot: t, source })?;
        let x: Vec<f64> = tp.iter().map(|u| u.x).collect();
        let self_x: Vec<f64> = tp.iter().map(|u| u.self_x).collect();
        let objective = config.fairness.utility(&x)?;
        let own = if config.variant == Variant::Ma { config.fairness.utility(&self_x)? } else { objective };
        if let Some(w) = trajectory.as_deref_mut() {
            for rec in TrajectoryRecord::from_slot(t, &joint, &outcome, &tp) {
                w.write(&rec, Some(objective)).map_err(|source| TrainError::Env { slot: t, source })?;
            }
        }
        result.objective.push(objective);
        result.own_objective.push(own);
        result.reward.push(outcome.reward);
        result.successes.push(outcome.success.iter().filter(|&&z| z).count() as u32);
        result.x.extend_from_slice(&x);
        result.self_x.extend_from_slice(&self_x);
    }

    result.all_time = env.all_time_throughputs().map_err(|source| TrainError::Env { slot: config.horizon, source })?;
    result.final_epsilon = epsilon.value;
    if let Some(l) = &learner {
        result.train_steps = l.train_steps();
        result.mean_loss = (l.train_steps() > 0).then(|| loss_sum / l.train_steps() as f64);
    }
    result.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(result)
}
