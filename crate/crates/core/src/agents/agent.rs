use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::replay::Batch;
use crate::env::perturb_action;
use crate::error::{check_len, Error, Result};
use crate::nn::{soft_update, Activation, AdamState, DenseSpec, Network, NetworkSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentVariant {
    Ddpg,
    Td3,
}

impl AgentVariant {
    pub fn name(&self) -> &'static str {
        match self {
            AgentVariant::Ddpg => "ddpg",
            AgentVariant::Td3 => "td3",
        }
    }

    pub fn critic_count(&self) -> usize {
        match self {
            AgentVariant::Ddpg => 1,
            AgentVariant::Td3 => 2,
        }
    }
}

impl std::str::FromStr for AgentVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ddpg" => Ok(AgentVariant::Ddpg),
            "td3" => Ok(AgentVariant::Td3),
            other => Err(format!("expected ddpg or td3, got `{other}`")),
        }
    }
}

impl std::fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub batch_size: usize,
    /// Critic updates between actor updates.
    pub actor_update_period: usize,
    /// Environment step-rounds between critic updates.
    pub critic_update_period: usize,
    pub gamma: f64,
    /// Exploration noise std at the first episode, decayed linearly to
    /// `noise_end` at the last one.
    pub noise_start: f64,
    pub noise_end: f64,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    pub hidden_layers: Vec<usize>,
    pub buffer_capacity: usize,
    pub actor_final_scale: f64,
    /// Weight of the mean squared pre-tanh actor output added to the actor
    /// loss; keeps the head out of saturation.
    #[serde(default)]
    pub preact_l2: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            actor_lr: 5e-3,
            critic_lr: 1e-3,
            tau: 5e-4,
            batch_size: 2048,
            actor_update_period: 2,
            critic_update_period: 1,
            gamma: 0.99,
            noise_start: 0.1,
            noise_end: 0.01,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            hidden_layers: vec![256, 256],
            buffer_capacity: 200_001,
            actor_final_scale: 1e-3,
            preact_l2: 0.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("agent.actor_lr", self.actor_lr),
            ("agent.critic_lr", self.critic_lr),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(key, "must be > 0"));
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid("agent.tau", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid("agent.gamma", "must lie in [0, 1]"));
        }
        for (key, v) in [
            ("agent.batch_size", self.batch_size),
            ("agent.actor_update_period", self.actor_update_period),
            ("agent.critic_update_period", self.critic_update_period),
            ("agent.buffer_capacity", self.buffer_capacity),
        ] {
            if v == 0 {
                return Err(Error::invalid(key, "must be at least 1"));
            }
        }
        for (key, v) in [
            ("agent.noise_start", self.noise_start),
            ("agent.noise_end", self.noise_end),
            ("agent.target_noise_std", self.target_noise_std),
            ("agent.target_noise_clip", self.target_noise_clip),
            ("agent.preact_l2", self.preact_l2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(key, "must be >= 0"));
            }
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("agent.hidden_layers", "sizes must be >= 1"));
        }
        Ok(())
    }

    /// Exploration std for `episode` out of `episodes`.
    pub fn exploration_std(&self, episode: usize, episodes: usize) -> f64 {
        if episodes <= 1 {
            return self.noise_start;
        }
        let frac = episode as f64 / (episodes - 1) as f64;
        self.noise_start + (self.noise_end - self.noise_start) * frac.min(1.0)
    }

    pub fn actor_spec(&self, obs_dim: usize, act_dim: usize) -> DenseSpec {
        let mut sizes = vec![obs_dim];
        sizes.extend(&self.hidden_layers);
        sizes.push(act_dim);
        DenseSpec::new(sizes, Activation::Tanh)
    }

    pub fn critic_spec(&self, obs_dim: usize, act_dim: usize) -> DenseSpec {
        let mut sizes = vec![obs_dim + act_dim];
        sizes.extend(&self.hidden_layers);
        sizes.push(1);
        DenseSpec::new(sizes, Activation::Identity)
    }
}

/// `y = r + gamma * q_next`.
pub fn ddpg_target(rewards: &Array1<f64>, q_next: &Array1<f64>, gamma: f64) -> Array1<f64> {
    rewards + &(q_next * gamma)
}

/// Clipped double-Q target `y = r + gamma * min(q1, q2)`.
pub fn td3_target(
    rewards: &Array1<f64>,
    q1_next: &Array1<f64>,
    q2_next: &Array1<f64>,
    gamma: f64,
) -> Array1<f64> {
    let min = ndarray::Zip::from(q1_next)
        .and(q2_next)
        .map_collect(|&a, &b| a.min(b));
    ddpg_target(rewards, &min, gamma)
}

/// Diagnostics from one learner update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_update: u64,
    pub critic_loss: f64,
    /// Mean `Q(s, pi(s))` when the actor was updated this call.
    pub actor_objective: Option<f64>,
}

impl UpdateStats {
    pub fn actor_updated(&self) -> bool {
        self.actor_objective.is_some()
    }
}

#[derive(Debug, Clone)]
struct Critic {
    online: Network,
    target: Network,
    opt: AdamState,
}

/// DDPG or TD3 learner: actor, one or two critics, their targets and
/// optimizer state.
#[derive(Debug, Clone)]
pub struct Agent {
    variant: AgentVariant,
    config: AgentConfig,
    obs_dim: usize,
    act_dim: usize,
    actor: Network,
    actor_target: Network,
    actor_opt: AdamState,
    critics: Vec<Critic>,
    critic_updates: u64,
    actor_updates: u64,
}

fn column(a: Array2<f64>) -> Array1<f64> {
    a.index_axis_move(Axis(1), 0)
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        variant: AgentVariant,
        config: AgentConfig,
        obs_dim: usize,
        act_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let actor = Network::init(
            config.actor_spec(obs_dim, act_dim),
            config.actor_final_scale,
            rng,
        )?;
        let critics = (0..variant.critic_count())
            .map(|_| {
                let online = Network::init(config.critic_spec(obs_dim, act_dim), 1.0, rng)?;
                Ok(Critic {
                    target: online.clone(),
                    opt: AdamState::new(&online),
                    online,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variant,
            obs_dim,
            act_dim,
            actor_target: actor.clone(),
            actor_opt: AdamState::new(&actor),
            actor,
            critics,
            config,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    pub fn variant(&self) -> AgentVariant {
        self.variant
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn actor(&self) -> &Network {
        &self.actor
    }

    pub fn actor_target(&self) -> &Network {
        &self.actor_target
    }

    pub fn critic(&self, i: usize) -> &Network {
        &self.critics[i].online
    }

    pub fn critic_target(&self, i: usize) -> &Network {
        &self.critics[i].target
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    /// Deterministic policy output for a batch of observations.
    pub fn policy(&self, observations: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.actor.predict(observations)
    }

    /// `clip(pi(obs) + N(0, noise_std^2), -1, 1)` when exploring, `pi(obs)`
    /// otherwise.
    pub fn select_action(
        &self,
        observation: &[f64],
        noise_std: f64,
        rng: &mut ChaCha8Rng,
        explore: bool,
    ) -> Result<Vec<f64>> {
        let mean = self.actor.predict_one(observation)?;
        Ok(if explore {
            perturb_action(&mean, noise_std, rng)
        } else {
            mean
        })
    }

    fn q_values(net: &Network, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array1<f64>> {
        let input = concatenate![Axis(1), states, actions];
        Ok(column(net.predict(input.view())?))
    }

    /// Target policy action for `next_states`, with TD3 smoothing noise.
    pub fn target_actions<R: Rng + ?Sized>(&self, next_states: ArrayView2<f64>, rng: &mut R) -> Result<Array2<f64>> {
        let mut a = self.actor_target.predict(next_states)?;
        if self.variant == AgentVariant::Td3 && self.config.target_noise_std > 0.0 {
            let noise = Normal::new(0.0, self.config.target_noise_std)
                .map_err(|e| Error::invalid("agent.target_noise_std", e.to_string()))?;
            let c = self.config.target_noise_clip;
            a.mapv_inplace(|v| (v + noise.sample(rng).clamp(-c, c)).clamp(-1.0, 1.0));
        }
        Ok(a)
    }

    /// Bootstrapped critic regression targets for `batch`.
    ///
    /// Episodes end by truncation, so every transition bootstraps.
    pub fn critic_targets<R: Rng + ?Sized>(&self, batch: &Batch, rng: &mut R) -> Result<Array1<f64>> {
        let next_actions = self.target_actions(batch.next_states.view(), rng)?;
        let gamma = self.config.gamma;
        let q1 = Self::q_values(&self.critics[0].target, batch.next_states.view(), next_actions.view())?;
        Ok(match self.variant {
            AgentVariant::Ddpg => ddpg_target(&batch.rewards, &q1, gamma),
            AgentVariant::Td3 => {
                let q2 = Self::q_values(&self.critics[1].target, batch.next_states.view(), next_actions.view())?;
                td3_target(&batch.rewards, &q1, &q2, gamma)
            }
        })
    }

    /// One learner step: every critic regresses to the shared target, and
    /// every `actor_update_period`-th call also updates the actor through
    /// critic 0. DDPG soft-updates the critic target after each critic step;
    /// TD3 delays all target updates to the actor steps.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<UpdateStats> {
        check_len("batch states", self.obs_dim, batch.states.ncols())?;
        check_len("batch actions", self.act_dim, batch.actions.ncols())?;
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let n = batch.len() as f64;
        let y = self.critic_targets(batch, rng)?;
        let input = concatenate![Axis(1), batch.states.view(), batch.actions.view()];

        let mut critic_loss = 0.0;
        for critic in &mut self.critics {
            let cache = critic.online.forward(input.view())?;
            let err = &cache.output.column(0) - &y;
            critic_loss += err.mapv(|e| e * e).sum() / n;
            let upstream = err.mapv(|e| 2.0 * e / n).insert_axis(Axis(1));
            let grads = critic.online.backward(&cache, &upstream)?;
            critic.opt.step(&mut critic.online, &grads, self.config.critic_lr)?;
        }
        critic_loss /= self.critics.len() as f64;
        if !critic_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "critic loss at update {}",
                self.critic_updates + 1
            )));
        }
        self.critic_updates += 1;
        let tau = self.config.tau;
        if self.variant == AgentVariant::Ddpg {
            let c = &mut self.critics[0];
            soft_update(&mut c.target, &c.online, tau)?;
        }

        let mut actor_objective = None;
        if self.critic_updates % self.config.actor_update_period as u64 == 0 {
            actor_objective = Some(self.update_actor(batch.states.view())?);
            self.actor_updates += 1;
            soft_update(&mut self.actor_target, &self.actor, tau)?;
            if self.variant == AgentVariant::Td3 {
                for c in &mut self.critics {
                    soft_update(&mut c.target, &c.online, tau)?;
                }
            }
        }
        Ok(UpdateStats {
            critic_update: self.critic_updates,
            critic_loss,
            actor_objective,
        })
    }

    /// Ascends mean `Q_0(s, pi(s))`; returns that mean before the step.
    fn update_actor(&mut self, states: ArrayView2<f64>) -> Result<f64> {
        let n = states.nrows() as f64;
        let actor_cache = self.actor.forward(states)?;
        let actions = &actor_cache.output;
        let input = concatenate![Axis(1), states, actions.view()];
        let critic = &self.critics[0].online;
        let critic_cache = critic.forward(input.view())?;
        let objective = critic_cache.output.mean().unwrap_or(0.0);
        // d(-mean Q)/dQ
        let upstream = Array2::from_elem((states.nrows(), 1), -1.0 / n);
        let critic_grads = critic.backward(&critic_cache, &upstream)?;
        let action_grad = critic_grads.input.slice(s![.., self.obs_dim..]).to_owned();
        let actor_grads = match actor_cache.output_pre_activation() {
            Some(z) if self.config.preact_l2 > 0.0 => {
                // d(l2 * mean_b mean_j z^2)/dz
                let c = 2.0 * self.config.preact_l2 / (n * self.act_dim as f64);
                self.actor.backward_with_pre_output(&actor_cache, &action_grad, &(z * c))?
            }
            _ => self.actor.backward(&actor_cache, &action_grad)?,
        };
        self.actor_opt.step(&mut self.actor, &actor_grads, self.config.actor_lr)?;
        if !objective.is_finite() {
            return Err(Error::NonFinite(format!(
                "actor objective at update {}",
                self.actor_updates + 1
            )));
        }
        Ok(objective)
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            variant: self.variant,
            config: self.config.clone(),
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            actor: NetworkSnapshot::capture(&self.actor, Some(&self.actor_opt)),
            actor_target: NetworkSnapshot::capture(&self.actor_target, None),
            critics: self
                .critics
                .iter()
                .map(|c| NetworkSnapshot::capture(&c.online, Some(&c.opt)))
                .collect(),
            critic_targets: self
                .critics
                .iter()
                .map(|c| NetworkSnapshot::capture(&c.target, None))
                .collect(),
            critic_updates: self.critic_updates,
            actor_updates: self.actor_updates,
        }
    }

    pub fn from_checkpoint(ckpt: &AgentCheckpoint) -> Result<Self> {
        ckpt.config.validate()?;
        check_len("checkpoint critics", ckpt.variant.critic_count(), ckpt.critics.len())?;
        check_len("checkpoint critic targets", ckpt.critics.len(), ckpt.critic_targets.len())?;
        let (actor, actor_opt) = ckpt.actor.restore()?;
        let (actor_target, _) = ckpt.actor_target.restore()?;
        check_len("actor input", ckpt.obs_dim, actor.input_dim())?;
        check_len("actor output", ckpt.act_dim, actor.output_dim())?;
        let critics = ckpt
            .critics
            .iter()
            .zip(&ckpt.critic_targets)
            .map(|(c, t)| {
                let (online, opt) = c.restore()?;
                let (target, _) = t.restore()?;
                check_len("critic input", ckpt.obs_dim + ckpt.act_dim, online.input_dim())?;
                let opt = opt.unwrap_or_else(|| AdamState::new(&online));
                Ok(Critic { online, target, opt })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variant: ckpt.variant,
            config: ckpt.config.clone(),
            obs_dim: ckpt.obs_dim,
            act_dim: ckpt.act_dim,
            actor_opt: actor_opt.unwrap_or_else(|| AdamState::new(&actor)),
            actor,
            actor_target,
            critics,
            critic_updates: ckpt.critic_updates,
            actor_updates: ckpt.actor_updates,
        })
    }
}

/// JSON checkpoint of every network, its optimizer state and the update
/// counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub variant: AgentVariant,
    pub config: AgentConfig,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub actor: NetworkSnapshot,
    pub actor_target: NetworkSnapshot,
    pub critics: Vec<NetworkSnapshot>,
    pub critic_targets: Vec<NetworkSnapshot>,
    pub critic_updates: u64,
    pub actor_updates: u64,
}
