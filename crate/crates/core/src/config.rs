//! Run configuration as flat dotted keys.
//!
//! A config file is TOML restricted to the keys listed in [`KEYS`]; dotted
//! keys (`scene.k = 2`) and tables (`[scene]` / `k = 2`) are equivalent.
//! Missing keys take the defaults of [`RunConfig::default`]. Overrides given
//! as `key=value` strings are applied after the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::agents::{AgentConfig, AgentVariant};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::geometry::dbm_to_watts;
use crate::rewards::{RewardKind, ThresholdConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub variant: AgentVariant,
    pub episodes: usize,
    pub parallel_envs: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Episodes between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: usize,
    pub export_svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
            variant: AgentVariant::Ddpg,
            episodes: 5000,
            parallel_envs: 15,
            master_seed: 2024,
            output_dir: PathBuf::from("runs/default"),
            checkpoint_interval: 100,
            export_svg: false,
        }
    }
}

/// Every accepted key, in resolution order.
pub const KEYS: &[&str] = &[
    "scene.k",
    "scene.n_ris",
    "scene.nt",
    "scene.nr",
    "scene.bs_x",
    "scene.bs_y",
    "scene.ris_x",
    "scene.ris_y",
    "scene.ue_x_min",
    "scene.ue_x_max",
    "scene.ue_y_min",
    "scene.ue_y_max",
    "scene.ue_grid_step",
    "scene.element_spacing",
    "scene.bs_boresight_deg",
    "scene.ris_boresight_deg",
    "scene.pathloss_ref_db",
    "scene.pathloss_exp_bs_ris",
    "scene.pathloss_exp_ris_ue",
    "scene.rician_k_bs_ris",
    "scene.rician_k_ris_ue",
    "scene.p_max",
    "scene.p_ue",
    "scene.noise_dl",
    "scene.noise_ul",
    "scene.noise_dl_dbm",
    "scene.noise_ul_dbm",
    "thresholds.eps_d",
    "thresholds.eps_u",
    "thresholds.mu",
    "thresholds.alpha",
    "env.decisive_reward",
    "env.steps_per_episode",
    "env.redraw_channels_each_step",
    "agent.variant",
    "agent.actor_lr",
    "agent.critic_lr",
    "agent.tau",
    "agent.batch_size",
    "agent.actor_update_period",
    "agent.critic_update_period",
    "agent.gamma",
    "agent.noise_start",
    "agent.noise_end",
    "agent.target_noise_std",
    "agent.target_noise_clip",
    "agent.hidden_layers",
    "agent.buffer_capacity",
    "agent.actor_final_scale",
    "agent.preact_l2",
    "run.episodes",
    "run.parallel_envs",
    "run.master_seed",
    "run.output_dir",
    "run.checkpoint_interval",
    "run.export_svg",
];

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Parses a TOML document into flat dotted keys.
pub fn parse_flat(text: &str) -> Result<BTreeMap<String, Value>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Format {
        path: PathBuf::from("<config>"),
        reason: e.to_string(),
    })?;
    let mut out = BTreeMap::new();
    flatten("", &table, &mut out);
    Ok(out)
}

/// Parses a `key=value` override; the value is read as a TOML literal and
/// falls back to a bare string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| Error::invalid(s, "override must look like key=value"))?;
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((key, parsed))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => s
            .parse()
            .map_err(|_| Error::invalid(key, format!("expected a number, got \"{s}\""))),
        other => Err(Error::invalid(key, format!("expected a number, got {other}"))),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        other => Err(Error::invalid(
            key,
            format!("expected a non-negative integer, got {other}"),
        )),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    as_u64(key, v).map(|u| u as usize)
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::invalid(key, format!("expected true or false, got {v}")))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::invalid(key, format!("expected a string, got {v}")))
}

fn as_f64_list(key: &str, v: &Value, k: usize) -> Result<Vec<f64>> {
    match v {
        Value::Array(items) => items.iter().map(|x| as_f64(key, x)).collect(),
        scalar => Ok(vec![as_f64(key, scalar)?; k]),
    }
}

impl RunConfig {
    /// Resolves flat keys over the defaults and validates the result.
    pub fn from_flat(entries: &BTreeMap<String, Value>) -> Result<Self> {
        Self::from_flat_over(RunConfig::default(), entries)
    }

    /// Resolves flat keys over `base` and validates the result.
    pub fn from_flat_over(base: RunConfig, entries: &BTreeMap<String, Value>) -> Result<Self> {
        if let Some(unknown) = entries.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::UnknownKey(unknown.clone()));
        }
        let mut cfg = base;
        for key in KEYS {
            if *key == "thresholds.eps_d" {
                // thresholds default to k entries once k is known
                let k = cfg.env.scene.k;
                if cfg.env.thresholds.eps_d.len() != k {
                    let d = ThresholdConfig::default();
                    cfg.env.thresholds = ThresholdConfig::uniform(k, d.eps_d[0], d.eps_u[0], d.mu, d.alpha);
                }
            }
            if let Some(v) = entries.get(*key) {
                cfg.apply(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_str_with_overrides(text: &str, overrides: &[(String, Value)]) -> Result<Self> {
        let mut flat = parse_flat(text)?;
        for (k, v) in overrides {
            flat.insert(k.clone(), v.clone());
        }
        Self::from_flat(&flat)
    }

    /// Loads a TOML config, or the `config` map of a run manifest when the
    /// path ends in `.json`, then applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        Self::load_over(RunConfig::default(), path, overrides)
    }

    /// As [`RunConfig::load`], with unspecified keys taken from `base`.
    pub fn load_over(base: RunConfig, path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut flat = match path {
            None => BTreeMap::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let parsed = if p.extension().is_some_and(|e| e == "json") {
                    manifest_flat(&text)
                } else {
                    parse_flat(&text)
                };
                parsed.map_err(|e| match e {
                    Error::Format { reason, .. } => Error::Format {
                        path: p.to_path_buf(),
                        reason,
                    },
                    other => other,
                })?
            }
        };
        for (k, v) in overrides {
            flat.insert(k.clone(), v.clone());
        }
        Self::from_flat_over(base, &flat)
    }

    fn apply(&mut self, key: &str, v: &Value) -> Result<()> {
        let s = &mut self.env.scene;
        let k = s.k;
        match key {
            "scene.k" => s.k = as_usize(key, v)?,
            "scene.n_ris" => s.n_ris = as_usize(key, v)?,
            "scene.nt" => s.nt = as_usize(key, v)?,
            "scene.nr" => s.nr = as_usize(key, v)?,
            "scene.bs_x" => s.bs_position.x = as_f64(key, v)?,
            "scene.bs_y" => s.bs_position.y = as_f64(key, v)?,
            "scene.ris_x" => s.ris_position.x = as_f64(key, v)?,
            "scene.ris_y" => s.ris_position.y = as_f64(key, v)?,
            "scene.ue_x_min" => s.ue_region.x_min = as_f64(key, v)?,
            "scene.ue_x_max" => s.ue_region.x_max = as_f64(key, v)?,
            "scene.ue_y_min" => s.ue_region.y_min = as_f64(key, v)?,
            "scene.ue_y_max" => s.ue_region.y_max = as_f64(key, v)?,
            "scene.ue_grid_step" => s.ue_region.step = as_f64(key, v)?,
            "scene.element_spacing" => s.element_spacing = as_f64(key, v)?,
            "scene.bs_boresight_deg" => s.bs_boresight_deg = as_f64(key, v)?,
            "scene.ris_boresight_deg" => s.ris_boresight_deg = as_f64(key, v)?,
            "scene.pathloss_ref_db" => s.pathloss_ref_db = as_f64(key, v)?,
            "scene.pathloss_exp_bs_ris" => s.pathloss_exp_bs_ris = as_f64(key, v)?,
            "scene.pathloss_exp_ris_ue" => s.pathloss_exp_ris_ue = as_f64(key, v)?,
            "scene.rician_k_bs_ris" => s.rician_k_bs_ris = as_f64(key, v)?,
            "scene.rician_k_ris_ue" => s.rician_k_ris_ue = as_f64(key, v)?,
            "scene.p_max" => s.p_max = as_f64(key, v)?,
            "scene.p_ue" => s.p_ue = as_f64(key, v)?,
            "scene.noise_dl" => s.noise_dl = as_f64(key, v)?,
            "scene.noise_ul" => s.noise_ul = as_f64(key, v)?,
            "scene.noise_dl_dbm" => s.noise_dl = dbm_to_watts(as_f64(key, v)?),
            "scene.noise_ul_dbm" => s.noise_ul = dbm_to_watts(as_f64(key, v)?),
            "thresholds.eps_d" => self.env.thresholds.eps_d = as_f64_list(key, v, k)?,
            "thresholds.eps_u" => self.env.thresholds.eps_u = as_f64_list(key, v, k)?,
            "thresholds.mu" => self.env.thresholds.mu = as_f64(key, v)?,
            "thresholds.alpha" => self.env.thresholds.alpha = as_f64(key, v)?,
            "env.decisive_reward" => {
                self.env.decisive_reward = as_str(key, v)?
                    .parse::<RewardKind>()
                    .map_err(|e| Error::invalid(key, e))?
            }
            "env.steps_per_episode" => self.env.steps_per_episode = as_usize(key, v)?,
            "env.redraw_channels_each_step" => self.env.redraw_channels_each_step = as_bool(key, v)?,
            "agent.variant" => {
                self.variant = as_str(key, v)?
                    .parse::<AgentVariant>()
                    .map_err(|e| Error::invalid(key, e))?
            }
            "agent.actor_lr" => self.agent.actor_lr = as_f64(key, v)?,
            "agent.critic_lr" => self.agent.critic_lr = as_f64(key, v)?,
            "agent.tau" => self.agent.tau = as_f64(key, v)?,
            "agent.batch_size" => self.agent.batch_size = as_usize(key, v)?,
            "agent.actor_update_period" => self.agent.actor_update_period = as_usize(key, v)?,
            "agent.critic_update_period" => self.agent.critic_update_period = as_usize(key, v)?,
            "agent.gamma" => self.agent.gamma = as_f64(key, v)?,
            "agent.noise_start" => self.agent.noise_start = as_f64(key, v)?,
            "agent.noise_end" => self.agent.noise_end = as_f64(key, v)?,
            "agent.target_noise_std" => self.agent.target_noise_std = as_f64(key, v)?,
            "agent.target_noise_clip" => self.agent.target_noise_clip = as_f64(key, v)?,
            "agent.hidden_layers" => {
                let items = v
                    .as_array()
                    .ok_or_else(|| Error::invalid(key, format!("expected an array, got {v}")))?;
                self.agent.hidden_layers = items.iter().map(|x| as_usize(key, x)).collect::<Result<_>>()?;
            }
            "agent.buffer_capacity" => self.agent.buffer_capacity = as_usize(key, v)?,
            "agent.actor_final_scale" => self.agent.actor_final_scale = as_f64(key, v)?,
            "agent.preact_l2" => self.agent.preact_l2 = as_f64(key, v)?,
            "run.episodes" => self.episodes = as_usize(key, v)?,
            "run.parallel_envs" => self.parallel_envs = as_usize(key, v)?,
            "run.master_seed" => self.master_seed = as_u64(key, v)?,
            "run.output_dir" => self.output_dir = PathBuf::from(as_str(key, v)?),
            "run.checkpoint_interval" => self.checkpoint_interval = as_usize(key, v)?,
            "run.export_svg" => self.export_svg = as_bool(key, v)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        if self.episodes == 0 {
            return Err(Error::invalid("run.episodes", "must be at least 1"));
        }
        if self.parallel_envs == 0 {
            return Err(Error::invalid("run.parallel_envs", "must be at least 1"));
        }
        // config files store integers as i64
        if self.master_seed > i64::MAX as u64 {
            return Err(Error::invalid("run.master_seed", "must not exceed 2^63 - 1"));
        }
        Ok(())
    }

    pub fn observation_dim(&self) -> usize {
        self.env.observation_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.env.action_dim()
    }

    /// The resolved configuration as flat keys (noise in watts).
    pub fn to_flat(&self) -> BTreeMap<String, Value> {
        let s = &self.env.scene;
        let th = &self.env.thresholds;
        let a = &self.agent;
        let f = Value::Float;
        let i = |v: usize| Value::Integer(v as i64);
        let list = |v: &[f64]| Value::Array(v.iter().map(|x| Value::Float(*x)).collect());
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        put("scene.k", i(s.k));
        put("scene.n_ris", i(s.n_ris));
        put("scene.nt", i(s.nt));
        put("scene.nr", i(s.nr));
        put("scene.bs_x", f(s.bs_position.x));
        put("scene.bs_y", f(s.bs_position.y));
        put("scene.ris_x", f(s.ris_position.x));
        put("scene.ris_y", f(s.ris_position.y));
        put("scene.ue_x_min", f(s.ue_region.x_min));
        put("scene.ue_x_max", f(s.ue_region.x_max));
        put("scene.ue_y_min", f(s.ue_region.y_min));
        put("scene.ue_y_max", f(s.ue_region.y_max));
        put("scene.ue_grid_step", f(s.ue_region.step));
        put("scene.element_spacing", f(s.element_spacing));
        put("scene.bs_boresight_deg", f(s.bs_boresight_deg));
        put("scene.ris_boresight_deg", f(s.ris_boresight_deg));
        put("scene.pathloss_ref_db", f(s.pathloss_ref_db));
        put("scene.pathloss_exp_bs_ris", f(s.pathloss_exp_bs_ris));
        put("scene.pathloss_exp_ris_ue", f(s.pathloss_exp_ris_ue));
        put("scene.rician_k_bs_ris", f(s.rician_k_bs_ris));
        put("scene.rician_k_ris_ue", f(s.rician_k_ris_ue));
        put("scene.p_max", f(s.p_max));
        put("scene.p_ue", f(s.p_ue));
        put("scene.noise_dl", f(s.noise_dl));
        put("scene.noise_ul", f(s.noise_ul));
        put("thresholds.eps_d", list(&th.eps_d));
        put("thresholds.eps_u", list(&th.eps_u));
        put("thresholds.mu", f(th.mu));
        put("thresholds.alpha", f(th.alpha));
        put("env.decisive_reward", Value::String(self.env.decisive_reward.to_string()));
        put("env.steps_per_episode", i(self.env.steps_per_episode));
        put(
            "env.redraw_channels_each_step",
            Value::Boolean(self.env.redraw_channels_each_step),
        );
        put("agent.variant", Value::String(self.variant.to_string()));
        put("agent.actor_lr", f(a.actor_lr));
        put("agent.critic_lr", f(a.critic_lr));
        put("agent.tau", f(a.tau));
        put("agent.batch_size", i(a.batch_size));
        put("agent.actor_update_period", i(a.actor_update_period));
        put("agent.critic_update_period", i(a.critic_update_period));
        put("agent.gamma", f(a.gamma));
        put("agent.noise_start", f(a.noise_start));
        put("agent.noise_end", f(a.noise_end));
        put("agent.target_noise_std", f(a.target_noise_std));
        put("agent.target_noise_clip", f(a.target_noise_clip));
        put(
            "agent.hidden_layers",
            Value::Array(a.hidden_layers.iter().map(|&h| i(h)).collect()),
        );
        put("agent.buffer_capacity", i(a.buffer_capacity));
        put("agent.actor_final_scale", f(a.actor_final_scale));
        put("agent.preact_l2", f(a.preact_l2));
        put("run.episodes", i(self.episodes));
        put("run.parallel_envs", i(self.parallel_envs));
        put("run.master_seed", Value::Integer(self.master_seed as i64));
        put(
            "run.output_dir",
            Value::String(self.output_dir.to_string_lossy().into_owned()),
        );
        put("run.checkpoint_interval", i(self.checkpoint_interval));
        put("run.export_svg", Value::Boolean(self.export_svg));
        m
    }

    /// Renders the resolved configuration as a config file.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_flat() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Flat keys as JSON values for the run manifest. Non-finite floats are
    /// written as strings.
    pub fn to_manifest_map(&self) -> BTreeMap<String, serde_json::Value> {
        self.to_flat()
            .into_iter()
            .map(|(k, v)| (k, toml_to_json(&v)))
            .collect()
    }

    /// Reduced profile that trains on one laptop core in minutes.
    pub fn desk() -> Self {
        let mut cfg = Self::default();
        cfg.episodes = 300;
        cfg.agent.hidden_layers = vec![64, 64];
        cfg.agent.batch_size = 128;
        // the small actor step and the pre-activation penalty keep the tanh
        // head out of saturation
        cfg.agent.actor_lr = 1e-4;
        cfg.agent.noise_start = 0.3;
        cfg.agent.noise_end = 0.03;
        cfg.agent.preact_l2 = 0.1;
        cfg.output_dir = PathBuf::from("runs/desk");
        cfg.checkpoint_interval = 50;
        cfg
    }
}

fn toml_to_json(v: &Value) -> serde_json::Value {
    use serde_json::Value as J;
    match v {
        Value::String(s) => J::String(s.clone()),
        Value::Integer(i) => J::from(*i),
        Value::Float(f) if f.is_finite() => J::from(*f),
        Value::Float(f) => J::String(f.to_string()),
        Value::Boolean(b) => J::Bool(*b),
        Value::Array(a) => J::Array(a.iter().map(toml_to_json).collect()),
        other => J::String(other.to_string()),
    }
}

fn json_to_toml(v: &serde_json::Value) -> Value {
    use serde_json::Value as J;
    match v {
        J::String(s) => Value::String(s.clone()),
        J::Number(n) => match n.as_i64() {
            Some(i) => Value::Integer(i),
            None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
        },
        J::Bool(b) => Value::Boolean(*b),
        J::Array(a) => Value::Array(a.iter().map(json_to_toml).collect()),
        J::Null => Value::String(String::new()),
        J::Object(_) => Value::String(v.to_string()),
    }
}

/// Flat keys stored in a run manifest.
pub fn manifest_flat(text: &str) -> Result<BTreeMap<String, Value>> {
    let json: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Format {
        path: PathBuf::from("<manifest>"),
        reason: e.to_string(),
    })?;
    let map = json
        .get("config")
        .and_then(|c| c.as_object())
        .ok_or_else(|| Error::Format {
            path: PathBuf::from("<manifest>"),
            reason: "no `config` object".into(),
        })?;
    Ok(map.iter().map(|(k, v)| (k.clone(), json_to_toml(v))).collect())
}
