//! Off-policy actor-critic learners, their replay memory and the training
//! loop.

mod agent;
mod replay;
mod train;

pub use agent::{
    ddpg_target, td3_target, Agent, AgentCheckpoint, AgentConfig, AgentVariant, UpdateStats,
};
pub use replay::{Batch, ReplayBuffer};
pub use train::{
    evaluate_policy, load_checkpoint, train, EpisodeSummary, EvaluationReport, NoObserver,
    TrainObserver, TrainOutcome, CHECKPOINT_FILE,
};
