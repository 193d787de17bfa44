//! Browser bindings: steered-array patterns, the reward calculator and a
//! live scene whose RIS phases can be aligned step by step.
//!
//! The plain functions are what the wasm exports wrap; they are usable (and
//! tested) natively.

use std::f64::consts::TAU;

use fairris::env::{EnvConfig, RisEnv};
use fairris::geometry::{beam_pattern, dbm_to_watts, effective_channels, steering_vector, BeamformerState};
use fairris::patterns::user_patterns;
use fairris::rewards::{jain_fairness, secrecy_rate, RateReport, RewardSet, ThresholdConfig};
use num_complex::Complex64;
use ndarray::Array2;
use wasm_bindgen::prelude::*;

/// Power pattern of an `elements`-long array steered to `steer_deg`, sampled
/// at `points` angles over [-90, 90] degrees.
pub fn steered_pattern(elements: usize, spacing: f64, steer_deg: f64, points: usize) -> fairris::Result<Vec<f64>> {
    if points < 2 {
        return Err(fairris::Error::invalid("points", "need at least 2"));
    }
    let weights: Vec<Complex64> = steering_vector(elements, spacing, steer_deg.to_radians())
        .iter()
        .map(|c| c.conj())
        .collect();
    beam_pattern(&weights, spacing, &angle_grid_deg(points))
}

fn angle_grid_deg(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| (-90.0 + 180.0 * i as f64 / (points - 1) as f64).to_radians())
        .collect()
}

/// `[sum rate, qos reward, fqos reward, jain index]` for per-user rates and
/// uniform thresholds.
pub fn reward_breakdown(
    downlink: Vec<f64>,
    uplink: Vec<f64>,
    eps_d: f64,
    eps_u: f64,
    mu: f64,
    alpha: f64,
) -> fairris::Result<Vec<f64>> {
    let report = RateReport::new(downlink, uplink)?;
    let th = ThresholdConfig::uniform(report.k(), eps_d, eps_u, mu, alpha);
    th.validate(report.k())?;
    let r = RewardSet::evaluate(&report, &th);
    Ok(vec![r.baseline, r.qos, r.fqos, jain_fairness(&secrecy_rate(&report))])
}

/// One random scene with a precoder matched to the current RIS phases.
pub struct LiveScene {
    env: RisEnv,
    phi: Vec<f64>,
    sweep_pos: usize,
}

impl LiveScene {
    pub fn new(seed: u64, users: usize, noise_dbm: f64) -> fairris::Result<Self> {
        let mut cfg = EnvConfig::default();
        cfg.scene.k = users;
        cfg.scene.noise_dl = dbm_to_watts(noise_dbm);
        cfg.scene.noise_ul = dbm_to_watts(noise_dbm);
        cfg.thresholds = ThresholdConfig::uniform(users, 1.0, 1.0, 1.0, 0.5);
        cfg.validate()?;
        let mut env = RisEnv::from_seed(cfg, seed)?;
        env.reset()?;
        let n = env.config().scene.n_ris;
        Ok(Self {
            env,
            phi: vec![0.0; n],
            sweep_pos: 0,
        })
    }

    /// Maximum-ratio precoder per user with the power split evenly.
    fn beam(&self, phi: &[f64]) -> BeamformerState {
        let scene = &self.env.config().scene;
        let probe = BeamformerState {
            w: Array2::zeros((scene.nt, scene.k)),
            phi: phi.to_vec(),
        };
        let h = effective_channels(self.env.channel().expect("scene is reset"), &probe);
        let amp = (scene.p_max / scene.k as f64).sqrt();
        let mut w = Array2::zeros((scene.nt, scene.k));
        for i in 0..scene.k {
            let norm = h.row(i).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                for t in 0..scene.nt {
                    w[[t, i]] = h[[i, t]].conj() / norm * amp;
                }
            }
        }
        BeamformerState { w, phi: phi.to_vec() }
    }

    fn sum_rate(&self, phi: &[f64]) -> fairris::Result<f64> {
        Ok(self.env.evaluate(&self.beam(phi))?.1.baseline)
    }

    /// `[x0, y0, x1, y1, ...]` in metres.
    pub fn ue_positions(&self) -> Vec<f64> {
        self.env
            .placement()
            .map(|p| p.ue_positions.iter().flat_map(|q| [q.x, q.y]).collect())
            .unwrap_or_default()
    }

    /// `[D_1..D_k, U_1..U_k, sum rate, jain index]`.
    pub fn rates(&self) -> fairris::Result<Vec<f64>> {
        let (report, rewards, jfi) = self.env.evaluate(&self.beam(&self.phi))?;
        let mut out = report.d.clone();
        out.extend(&report.u);
        out.push(rewards.baseline);
        out.push(jfi);
        Ok(out)
    }

    pub fn randomize_phases(&mut self, seed: u64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.phi {
            *p = rng.random_range(0.0..TAU);
        }
        self.sweep_pos = 0;
    }

    /// Sets the next `elements` RIS phases (cyclically) to the best of
    /// `levels` values and returns the new sum rate.
    pub fn align(&mut self, elements: usize, levels: usize) -> fairris::Result<f64> {
        let levels = levels.max(2);
        for _ in 0..elements {
            let m = self.sweep_pos;
            let mut best = (self.sum_rate(&self.phi)?, self.phi[m]);
            for q in 0..levels {
                let mut trial = self.phi.clone();
                trial[m] = TAU * q as f64 / levels as f64;
                let v = self.sum_rate(&trial)?;
                if v > best.0 {
                    best = (v, trial[m]);
                }
            }
            self.phi[m] = best.1;
            self.sweep_pos = (m + 1) % self.phi.len();
        }
        self.sum_rate(&self.phi)
    }

    /// RIS downlink power pattern toward `user` over [-90, 90] degrees
    /// followed by that user's bearing in degrees.
    pub fn ris_pattern(&self, user: usize, points: usize) -> fairris::Result<Vec<f64>> {
        if points < 2 {
            return Err(fairris::Error::invalid("points", "need at least 2"));
        }
        let scene = &self.env.config().scene;
        if user >= scene.k {
            return Err(fairris::Error::invalid("user", "out of range"));
        }
        let grid = angle_grid_deg(points);
        let patterns = user_patterns(
            scene,
            self.env.placement().expect("scene is reset"),
            self.env.channel().expect("scene is reset"),
            &self.beam(&self.phi),
            &grid,
        )?;
        let p = &patterns[user];
        let mut out = p.ris_downlink.clone();
        out.push(p.ue_bearing.to_degrees());
        Ok(out)
    }
}

fn js(e: fairris::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = steeredPattern)]
pub fn steered_pattern_js(elements: usize, spacing: f64, steer_deg: f64, points: usize) -> Result<Vec<f64>, JsError> {
    steered_pattern(elements, spacing, steer_deg, points).map_err(js)
}

#[wasm_bindgen(js_name = rewardBreakdown)]
pub fn reward_breakdown_js(
    downlink: Vec<f64>,
    uplink: Vec<f64>,
    eps_d: f64,
    eps_u: f64,
    mu: f64,
    alpha: f64,
) -> Result<Vec<f64>, JsError> {
    reward_breakdown(downlink, uplink, eps_d, eps_u, mu, alpha).map_err(js)
}

#[wasm_bindgen]
pub struct Scene(LiveScene);

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, users: usize, noise_dbm: f64) -> Result<Scene, JsError> {
        LiveScene::new(seed.into(), users, noise_dbm).map(Scene).map_err(js)
    }

    #[wasm_bindgen(js_name = uePositions)]
    pub fn ue_positions(&self) -> Vec<f64> {
        self.0.ue_positions()
    }

    pub fn rates(&self) -> Result<Vec<f64>, JsError> {
        self.0.rates().map_err(js)
    }

    #[wasm_bindgen(js_name = randomizePhases)]
    pub fn randomize_phases(&mut self, seed: u32) {
        self.0.randomize_phases(seed.into())
    }

    pub fn align(&mut self, elements: usize, levels: usize) -> Result<f64, JsError> {
        self.0.align(elements, levels).map_err(js)
    }

    #[wasm_bindgen(js_name = risPattern)]
    pub fn ris_pattern(&self, user: usize, points: usize) -> Result<Vec<f64>, JsError> {
        self.0.ris_pattern(user, points).map_err(js)
    }
}
