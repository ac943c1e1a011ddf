//! Slotted multi-channel MAC with semantic segment sharing, alpha-fair
//! throughput objectives, exhaustive optimum oracles and a multi-agent
//! dueling double Q-learning trainer.

pub mod env;
pub mod objective;
pub mod oracle;
pub mod qnet;
pub mod trainer;
pub mod harness;
