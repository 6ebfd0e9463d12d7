//! Desk-scale simulator of an electricity-heat cooperative system — PV,
//! wind, dual heat pumps, water tank, steam accumulator, compressor and
//! grid — scheduled by a from-scratch TD3 agent, with an optional
//! grid-purchase-fluctuation penalty (the PVTD3 variant) for peak
//! shaving and valley filling.

pub mod config;
pub mod device;
pub mod env;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod scenario;
pub mod td3;
pub mod train;

pub use config::SystemConfig;
pub use env::{ActionKw, EnvState, RewardBreakdown, RewardWeights, StepOutcome};
pub use error::{Error, Result};
pub use eval::{compare, evaluate, Comparison, EvalReport};
pub use scenario::{default_profile, perturb, scenario_batch, Scenario, TypicalDayProfile, UncertaintyTier};
pub use td3::{OuNoise, ReplayBuffer, Td3Agent, Td3Config, Transition};
pub use train::{rollout, train, train_with_snapshots, TrainLog, TrainOutput};
