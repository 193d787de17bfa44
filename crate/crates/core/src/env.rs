//! Episodic environment around the duplex RIS scene.
//!
//! Observation layout, in order:
//!
//! | block                         | length          |
//! |-------------------------------|-----------------|
//! | Re G, row-major               | `n_ris * nt`    |
//! | Im G                          | `n_ris * nt`    |
//! | Re h_i, UE by UE              | `k * n_ris`     |
//! | Im h_i                        | `k * n_ris`     |
//! | previous raw action           | `2 * nt * k + n_ris` |
//! | previous D_i, then U_i        | `2 * k`         |
//! | previous decisive reward      | 1               |
//!
//! Channel blocks are divided by the square root of their large-scale path
//! gain so the network sees unit-scale entries.

use std::f64::consts::{PI, TAU};

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::{
    downlink_rates, draw_channels, place_ues, uplink_rates, BeamformerState, ChannelRealization,
    SceneConfig, ScenePlacement,
};
use crate::rewards::{jain_fairness, secrecy_rate, RateReport, RewardKind, RewardSet, ThresholdConfig};
use crate::seeding;

/// Partition of the raw action vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionLayout {
    pub nt: usize,
    pub k: usize,
    pub n_ris: usize,
}

impl ActionLayout {
    pub fn new(scene: &SceneConfig) -> Self {
        Self {
            nt: scene.nt,
            k: scene.k,
            n_ris: scene.n_ris,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.nt * self.k + self.n_ris
    }

    pub fn re_range(&self) -> std::ops::Range<usize> {
        0..self.nt * self.k
    }

    pub fn im_range(&self) -> std::ops::Range<usize> {
        self.nt * self.k..2 * self.nt * self.k
    }

    pub fn phase_range(&self) -> std::ops::Range<usize> {
        2 * self.nt * self.k..self.dim()
    }
}

pub fn observation_len(scene: &SceneConfig) -> usize {
    let (n, nt, k) = (scene.n_ris, scene.nt, scene.k);
    2 * n * nt + 2 * n * k + ActionLayout::new(scene).dim() + 2 * k + 1
}

/// Maps a raw action in `[-1, 1]^dim` to a feasible precoder and RIS phases.
///
/// Entries are clipped first. Phases are `pi * (raw + 1)` wrapped into
/// `[0, 2pi)`. Precoder entries are `sqrt(p_max) * (re + j im)` with
/// `W[t, i]` at offset `t * k + i` of each block, projected onto the power
/// ball when `||W||_F^2 > p_max`.
pub fn decode_action(raw: &[f64], scene: &SceneConfig) -> Result<BeamformerState> {
    let layout = ActionLayout::new(scene);
    check_len("raw action", layout.dim(), raw.len())?;
    let clip = |v: f64| v.clamp(-1.0, 1.0);
    let amp = scene.p_max.sqrt();
    let (re, im) = (&raw[layout.re_range()], &raw[layout.im_range()]);
    let mut w = Array2::from_shape_fn((scene.nt, scene.k), |(t, i)| {
        let idx = t * scene.k + i;
        Complex64::new(clip(re[idx]), clip(im[idx])) * amp
    });
    let power: f64 = w.iter().map(|c| c.norm_sqr()).sum();
    if power > scene.p_max {
        let s = (scene.p_max / power).sqrt();
        w.mapv_inplace(|c| c * s);
    }
    let phi = raw[layout.phase_range()]
        .iter()
        .map(|&r| {
            let p = PI * (clip(r) + 1.0);
            if p >= TAU {
                p - TAU
            } else {
                p
            }
        })
        .collect();
    Ok(BeamformerState { w, phi })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub scene: SceneConfig,
    pub thresholds: ThresholdConfig,
    pub decisive_reward: RewardKind,
    pub steps_per_episode: usize,
    pub redraw_channels_each_step: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            thresholds: ThresholdConfig::default(),
            decisive_reward: RewardKind::Baseline,
            steps_per_episode: 250,
            redraw_channels_each_step: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.thresholds.validate(self.scene.k)?;
        if self.steps_per_episode == 0 {
            return Err(Error::invalid("env.steps_per_episode", "must be at least 1"));
        }
        Ok(())
    }

    pub fn action_dim(&self) -> usize {
        ActionLayout::new(&self.scene).dim()
    }

    pub fn observation_dim(&self) -> usize {
        observation_len(&self.scene)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Everything one `step` produces.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub decisive_reward: f64,
    pub rewards: RewardSet,
    pub report: RateReport,
    /// Jain index of the per-user rates `R_i`.
    pub jfi: f64,
    pub done: bool,
}

/// One environment instance with its own random stream.
#[derive(Debug, Clone)]
pub struct RisEnv {
    config: EnvConfig,
    rng: ChaCha8Rng,
    episode: u64,
    step: usize,
    placement: Option<ScenePlacement>,
    channel: Option<ChannelRealization>,
    g_scale: f64,
    h_scale: Vec<f64>,
    prev_action: Vec<f64>,
    prev_d: Vec<f64>,
    prev_u: Vec<f64>,
    prev_reward: f64,
    done: bool,
}

impl RisEnv {
    pub fn new(config: EnvConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let k = config.scene.k;
        let dim = config.action_dim();
        Ok(Self {
            config,
            rng,
            episode: 0,
            step: 0,
            placement: None,
            channel: None,
            g_scale: 1.0,
            h_scale: vec![1.0; k],
            prev_action: vec![0.0; dim],
            prev_d: vec![0.0; k],
            prev_u: vec![0.0; k],
            prev_reward: 0.0,
            done: false,
        })
    }

    pub fn from_seed(config: EnvConfig, seed: u64) -> Result<Self> {
        Self::new(config, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn placement(&self) -> Option<&ScenePlacement> {
        self.placement.as_ref()
    }

    pub fn channel(&self) -> Option<&ChannelRealization> {
        self.channel.as_ref()
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// Places the UEs, draws a channel and clears the history fields.
    pub fn reset(&mut self) -> Result<Vec<f64>> {
        let scene = &self.config.scene;
        let placement = place_ues(scene, &mut self.rng)?;
        let channel = draw_channels(scene, &placement, &mut self.rng, self.episode)?;
        self.g_scale = scene
            .pathloss_gain(
                scene.bs_position.distance(&scene.ris_position),
                scene.pathloss_exp_bs_ris,
            )
            .sqrt();
        self.h_scale = placement
            .ue_positions
            .iter()
            .map(|p| {
                scene
                    .pathloss_gain(scene.ris_position.distance(p), scene.pathloss_exp_ris_ue)
                    .sqrt()
            })
            .collect();
        self.placement = Some(placement);
        self.channel = Some(channel);
        self.episode += 1;
        self.step = 0;
        self.prev_action.iter_mut().for_each(|v| *v = 0.0);
        self.prev_d.iter_mut().for_each(|v| *v = 0.0);
        self.prev_u.iter_mut().for_each(|v| *v = 0.0);
        self.prev_reward = 0.0;
        self.done = false;
        self.observation()
    }

    pub fn observation(&self) -> Result<Vec<f64>> {
        let ch = self.channel.as_ref().ok_or(Error::NotReset)?;
        let mut obs = Vec::with_capacity(self.config.observation_dim());
        obs.extend(ch.g.iter().map(|c| c.re / self.g_scale));
        obs.extend(ch.g.iter().map(|c| c.im / self.g_scale));
        for (h, s) in ch.h_ru.iter().zip(&self.h_scale) {
            obs.extend(h.iter().map(|c| c.re / s));
        }
        for (h, s) in ch.h_ru.iter().zip(&self.h_scale) {
            obs.extend(h.iter().map(|c| c.im / s));
        }
        obs.extend_from_slice(&self.prev_action);
        obs.extend_from_slice(&self.prev_d);
        obs.extend_from_slice(&self.prev_u);
        obs.push(self.prev_reward);
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation".into()));
        }
        Ok(obs)
    }

    /// Rates and rewards of a decoded action on the current channel, without
    /// advancing the episode.
    pub fn evaluate(&self, beam: &BeamformerState) -> Result<(RateReport, RewardSet, f64)> {
        let ch = self.channel.as_ref().ok_or(Error::NotReset)?;
        let scene = &self.config.scene;
        let dl = downlink_rates(ch, beam, scene)?;
        let ul = uplink_rates(ch, beam, scene)?;
        let report = RateReport::new(dl.rate, ul.rate)?;
        let rewards = RewardSet::evaluate(&report, &self.config.thresholds);
        let jfi = jain_fairness(&secrecy_rate(&report));
        Ok((report, rewards, jfi))
    }

    pub fn step(&mut self, raw_action: &[f64]) -> Result<StepResult> {
        if self.channel.is_none() {
            return Err(Error::NotReset);
        }
        if self.done {
            return Err(Error::StepAfterDone);
        }
        let beam = decode_action(raw_action, &self.config.scene)?;
        let (report, rewards, jfi) = self.evaluate(&beam)?;
        let decisive = rewards.get(self.config.decisive_reward);
        if !decisive.is_finite() {
            return Err(Error::NonFinite("decisive reward".into()));
        }

        self.step += 1;
        self.done = self.step >= self.config.steps_per_episode;
        self.prev_action
            .iter_mut()
            .zip(raw_action)
            .for_each(|(p, &a)| *p = a.clamp(-1.0, 1.0));
        self.prev_d.clone_from(&report.d);
        self.prev_u.clone_from(&report.u);
        self.prev_reward = decisive;
        if self.config.redraw_channels_each_step && !self.done {
            let placement = self.placement.as_ref().expect("placement set at reset");
            self.channel = Some(draw_channels(
                &self.config.scene,
                placement,
                &mut self.rng,
                self.episode - 1,
            )?);
        }

        Ok(StepResult {
            observation: self.observation()?,
            decisive_reward: decisive,
            rewards,
            report,
            jfi,
            done: self.done,
        })
    }
}

/// `a = clip(mean + N(0, std^2), -1, 1)` per entry; plain clipping when `std`
/// is zero.
pub fn perturb_action(mean: &[f64], std: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if std > 0.0 {
        let noise = Normal::new(0.0, std).expect("std is positive and finite");
        mean.iter()
            .map(|&m| (m + noise.sample(rng)).clamp(-1.0, 1.0))
            .collect()
    } else {
        mean.iter().map(|m| m.clamp(-1.0, 1.0)).collect()
    }
}

/// A rollout worker: an environment and its exploration-noise stream.
#[derive(Debug, Clone)]
struct Worker {
    env: RisEnv,
    noise_rng: ChaCha8Rng,
    observation: Vec<f64>,
}

/// One environment transition together with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub instance: usize,
    pub transition: Transition,
    pub result: StepResult,
}

/// Independent environment instances stepped in lockstep.
///
/// Instance `i` draws its scene from stream `seeding::env_stream(i)` and its
/// exploration noise from `seeding::noise_stream(i)` of the master seed, so
/// results do not depend on how workers are scheduled.
#[derive(Debug, Clone)]
pub struct VecEnv {
    workers: Vec<Worker>,
}

impl VecEnv {
    pub fn new(config: &EnvConfig, instances: usize, master_seed: u64) -> Result<Self> {
        if instances == 0 {
            return Err(Error::invalid("run.parallel_envs", "must be at least 1"));
        }
        let workers = (0..instances)
            .map(|i| {
                Ok(Worker {
                    env: RisEnv::new(config.clone(), seeding::rng(master_seed, seeding::env_stream(i)))?,
                    noise_rng: seeding::rng(master_seed, seeding::noise_stream(i)),
                    observation: Vec::new(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { workers })
    }

    pub fn len(&self) -> usize {
        self.workers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workers.is_empty()
    }

    pub fn envs(&self) -> impl Iterator<Item = &RisEnv> {
        self.workers.iter().map(|w| &w.env)
    }

    pub fn reset_all(&mut self) -> Result<()> {
        self.workers.par_iter_mut().try_for_each(|w| {
            w.observation = w.env.reset()?;
            Ok(())
        })
    }

    /// Current observations stacked row-wise.
    pub fn observations(&self) -> Array2<f64> {
        let cols = self.workers.first().map_or(0, |w| w.observation.len());
        Array2::from_shape_fn((self.workers.len(), cols), |(r, c)| self.workers[r].observation[c])
    }

    /// Steps every instance once with `policy` applied to the stacked
    /// observations, adds exploration noise when `noise_std > 0`, and returns
    /// the transitions ordered by instance index.
    pub fn rollout_round<P>(&mut self, policy: P, noise_std: f64) -> Result<Vec<RolloutStep>>
    where
        P: FnOnce(ArrayView2<f64>) -> Result<Array2<f64>>,
    {
        let obs = self.observations();
        let means = policy(obs.view())?;
        check_len("policy batch", self.workers.len(), means.nrows())?;
        self.workers
            .par_iter_mut()
            .zip(means.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
            .enumerate()
            .map(|(instance, (w, mean))| {
                let action = perturb_action(&mean, noise_std, &mut w.noise_rng);
                let result = w.env.step(&action)?;
                let state = std::mem::replace(&mut w.observation, result.observation.clone());
                Ok(RolloutStep {
                    instance,
                    transition: Transition {
                        state,
                        action,
                        reward: result.decisive_reward,
                        next_state: result.observation.clone(),
                        done: result.done,
                    },
                    result,
                })
            })
            .collect()
    }
}
