use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::agent::{Agent, AgentCheckpoint, UpdateStats};
use super::replay::ReplayBuffer;
use crate::config::RunConfig;
use crate::env::{EnvConfig, VecEnv};
use crate::error::{Error, Result};
use crate::rewards::RewardSet;
use crate::seeding;
use crate::telemetry::{jfi_at_best, write_atomic, Recorder, StepRecord};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Per-episode progress handed to a [`TrainObserver`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub noise_std: f64,
    pub mean_decisive: f64,
    pub mean_rewards: RewardSet,
    pub mean_jfi: f64,
    pub buffer_mean: f64,
    pub critic_updates: u64,
    pub last_critic_loss: Option<f64>,
}

pub trait TrainObserver {
    fn on_update(&mut self, _stats: &UpdateStats) {}
    fn on_episode(&mut self, _summary: &EpisodeSummary) {}
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub recorder: Recorder,
    pub transitions: u64,
    pub final_buffer_mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointFile {
    episode: usize,
    transitions: u64,
    agent: AgentCheckpoint,
}

fn save_checkpoint(dir: &Path, episode: usize, transitions: u64, agent: &Agent) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file = CheckpointFile {
        episode,
        transitions,
        agent: agent.checkpoint(),
    };
    let json = serde_json::to_vec(&file).expect("checkpoint serializes");
    write_atomic(&dir.join(CHECKPOINT_FILE), &json)
}

/// Restores the agent stored in `path` (a checkpoint file or a run
/// directory containing one).
pub fn load_checkpoint(path: &Path) -> Result<Agent> {
    let file: PathBuf = if path.is_dir() {
        path.join(CHECKPOINT_FILE)
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    let ckpt: CheckpointFile = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: file.clone(),
        reason: e.to_string(),
    })?;
    Agent::from_checkpoint(&ckpt.agent)
}

/// Trains one agent according to `cfg`.
///
/// Each round steps all environment instances once, stores their
/// transitions and runs at most one learner update. When `checkpoint_dir`
/// is given, checkpoints are written every `cfg.checkpoint_interval`
/// episodes and after the last one. The result depends only on `cfg`.
pub fn train(
    cfg: &RunConfig,
    checkpoint_dir: Option<&Path>,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (obs_dim, act_dim) = (cfg.observation_dim(), cfg.action_dim());
    let mut agent = Agent::new(
        cfg.variant,
        cfg.agent.clone(),
        obs_dim,
        act_dim,
        &mut seeding::rng(cfg.master_seed, seeding::AGENT_INIT),
    )?;
    let mut sample_rng = seeding::rng(cfg.master_seed, seeding::BATCH_SAMPLING);
    let mut smooth_rng = seeding::rng(cfg.master_seed, seeding::TARGET_SMOOTHING);
    let mut buffer = ReplayBuffer::new(cfg.agent.buffer_capacity, obs_dim, act_dim);
    let mut envs = VecEnv::new(&cfg.env, cfg.parallel_envs, cfg.master_seed)?;
    let mut recorder = Recorder::new();
    let mut timestep = 0u64;
    let critic_period = cfg.agent.critic_update_period as u64;

    for episode in 0..cfg.episodes {
        envs.reset_all()?;
        let noise_std = cfg.agent.exploration_std(episode, cfg.episodes);
        let mut decisive_sum = 0.0;
        let mut reward_sum = RewardSet::default();
        let mut jfi_sum = 0.0;
        let mut count = 0usize;
        let mut last_loss = None;
        for _ in 0..cfg.env.steps_per_episode {
            let round = envs.rollout_round(|obs| agent.policy(obs), noise_std)?;
            for step in &round {
                buffer.push(&step.transition)?;
            }
            timestep += 1;
            let mut learner_step = None;
            if buffer.len() >= cfg.agent.batch_size && timestep % critic_period == 0 {
                let batch = buffer.sample_batch(cfg.agent.batch_size, &mut sample_rng)?;
                let stats = agent.update(&batch, &mut smooth_rng)?;
                observer.on_update(&stats);
                last_loss = Some(stats.critic_loss);
                learner_step = Some(stats.critic_update);
            }
            let buffer_mean = buffer.mean_reward().expect("buffer is non-empty");
            let last = round.len() - 1;
            for (i, step) in round.iter().enumerate() {
                let r = &step.result;
                decisive_sum += r.decisive_reward;
                reward_sum.baseline += r.rewards.baseline;
                reward_sum.qos += r.rewards.qos;
                reward_sum.fqos += r.rewards.fqos;
                jfi_sum += r.jfi;
                count += 1;
                recorder.record_step(
                    episode,
                    step.instance,
                    StepRecord {
                        decisive: r.decisive_reward,
                        rewards: r.rewards,
                        jfi: r.jfi,
                    },
                    (i == last).then_some((timestep, buffer_mean)),
                    if i == last { learner_step } else { None },
                );
            }
        }
        recorder.flush_episode();
        let n = count.max(1) as f64;
        observer.on_episode(&EpisodeSummary {
            episode,
            noise_std,
            mean_decisive: decisive_sum / n,
            mean_rewards: RewardSet {
                baseline: reward_sum.baseline / n,
                qos: reward_sum.qos / n,
                fqos: reward_sum.fqos / n,
            },
            mean_jfi: jfi_sum / n,
            buffer_mean: buffer.mean_reward().unwrap_or(0.0),
            critic_updates: agent.critic_updates(),
            last_critic_loss: last_loss,
        });
        if let Some(dir) = checkpoint_dir {
            let interval = cfg.checkpoint_interval;
            let last = episode + 1 == cfg.episodes;
            if last || (interval > 0 && (episode + 1) % interval == 0) {
                save_checkpoint(dir, episode, buffer.len() as u64, &agent)?;
            }
        }
    }
    Ok(TrainOutcome {
        final_buffer_mean: buffer.mean_reward().unwrap_or(0.0),
        agent,
        recorder,
        transitions: timestep * cfg.parallel_envs as u64,
    })
}

/// Greedy-policy statistics over fresh scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub episodes: usize,
    pub instances: usize,
    pub mean_baseline: f64,
    pub mean_qos: f64,
    pub mean_fqos: f64,
    pub mean_jfi: f64,
    /// Jain index at the best decisive step, averaged over instances and
    /// episodes.
    pub mean_jfi_at_best: f64,
}

/// Runs the noiseless policy on `instances` environments for `episodes`
/// episodes, with scenes drawn from the evaluation stream of `seed`.
pub fn evaluate_policy(
    agent: &Agent,
    env: &EnvConfig,
    instances: usize,
    episodes: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    if episodes == 0 {
        return Err(Error::invalid("episodes", "must be at least 1"));
    }
    let eval_seed = seeding::rng(seed, seeding::EVALUATION).next_u64();
    let mut envs = VecEnv::new(env, instances, eval_seed)?;
    let (mut b, mut q, mut f, mut j, mut at_best, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0usize);
    for _ in 0..episodes {
        envs.reset_all()?;
        let mut logs = vec![Vec::new(); instances];
        for _ in 0..env.steps_per_episode {
            for step in envs.rollout_round(|obs| agent.policy(obs), 0.0)? {
                let r = &step.result;
                b += r.rewards.baseline;
                q += r.rewards.qos;
                f += r.rewards.fqos;
                j += r.jfi;
                n += 1;
                logs[step.instance].push(StepRecord {
                    decisive: r.decisive_reward,
                    rewards: r.rewards,
                    jfi: r.jfi,
                });
            }
        }
        for log in &logs {
            at_best += jfi_at_best(log)?;
        }
    }
    let n = n as f64;
    Ok(EvaluationReport {
        episodes,
        instances,
        mean_baseline: b / n,
        mean_qos: q / n,
        mean_fqos: f / n,
        mean_jfi: j / n,
        mean_jfi_at_best: at_best / (episodes * instances) as f64,
    })
}
