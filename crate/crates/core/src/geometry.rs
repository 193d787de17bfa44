//! Planar BS / RIS / UE scene, Rician block-fading channels and link rates.
//!
//! All arrays are uniform linear arrays. Each array has a boresight (the
//! normal of its aperture) given as a global bearing; a target seen at global
//! bearing `psi` sits at local angle `psi - boresight`, and element `m`
//! responds with `exp(j*2*pi*spacing*m*sin(local))`.
//!
//! The response vector `a(theta)` is used without conjugation for both
//! transmission and reception: a far-field point in direction `theta` sees
//! `a(theta)^T x` from element excitations `x`. With that convention
//!
//! * `G = sqrt(PL) * (sqrt(K/(K+1)) a_ris(theta_a) a_bs(theta_d)^T + sqrt(1/(K+1)) G~)`
//! * `h_i = sqrt(PL) * (sqrt(K/(K+1)) a_ris(theta_i) + sqrt(1/(K+1)) h~)`
//!
//! and the UE receives `h_i^T diag(e^{j phi}) G w`.

use std::f64::consts::{PI, TAU};

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Global bearing from `self` towards `other`, radians in (-pi, pi].
    pub fn bearing_to(&self, other: &Point2) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Axis-aligned placement rectangle with a regular coordinate grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
}

impl UeRegion {
    fn axis_points(lo: f64, hi: f64, step: f64) -> usize {
        if hi < lo {
            return 0;
        }
        ((hi - lo) / step + 1e-9).floor() as usize + 1
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (
            Self::axis_points(self.x_min, self.x_max, self.step),
            Self::axis_points(self.y_min, self.y_max, self.step),
        )
    }

    pub fn grid_len(&self) -> usize {
        let (nx, ny) = self.grid_dims();
        nx * ny
    }

    /// Coordinate of grid index `i` along an axis starting at `lo`.
    ///
    /// Computed as an integer count of steps divided by the inverse step so
    /// that, e.g., a 0.1 m grid yields the nearest double to `n / 10`.
    fn coord(lo: f64, step: f64, i: usize) -> f64 {
        let inv = 1.0 / step;
        if (inv - inv.round()).abs() < 1e-9 {
            let inv = inv.round();
            ((lo * inv).round() + i as f64) / inv
        } else {
            lo + i as f64 * step
        }
    }

    pub fn point(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            Self::coord(self.x_min, self.step, ix),
            Self::coord(self.y_min, self.step, iy),
        )
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub bs_position: Point2,
    pub ris_position: Point2,
    pub ue_region: UeRegion,
    pub k: usize,
    pub n_ris: usize,
    pub nt: usize,
    pub nr: usize,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
    /// Global bearing of the BS array normal, degrees.
    pub bs_boresight_deg: f64,
    /// Global bearing of the RIS normal, degrees.
    pub ris_boresight_deg: f64,
    pub pathloss_ref_db: f64,
    pub pathloss_exp_bs_ris: f64,
    pub pathloss_exp_ris_ue: f64,
    pub rician_k_bs_ris: f64,
    pub rician_k_ris_ue: f64,
    pub p_max: f64,
    pub p_ue: f64,
    pub noise_dl: f64,
    pub noise_ul: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            bs_position: Point2::new(0.0, 0.0),
            ris_position: Point2::new(20.0, 100.0),
            ue_region: UeRegion {
                x_min: 125.0,
                x_max: 200.0,
                y_min: 25.0,
                y_max: 100.0,
                step: 0.1,
            },
            k: 2,
            n_ris: 16,
            nt: 4,
            nr: 4,
            element_spacing: 0.5,
            bs_boresight_deg: 90.0,
            ris_boresight_deg: -58.0,
            pathloss_ref_db: -30.0,
            pathloss_exp_bs_ris: 2.2,
            pathloss_exp_ris_ue: 2.8,
            rician_k_bs_ris: 10.0,
            rician_k_ris_ue: 3.0,
            p_max: 1.0,
            p_ue: 0.1,
            noise_dl: dbm_to_watts(-125.0),
            noise_ul: dbm_to_watts(-125.0),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("scene.k", self.k),
            ("scene.n_ris", self.n_ris),
            ("scene.nt", self.nt),
            ("scene.nr", self.nr),
        ] {
            if v == 0 {
                return Err(Error::invalid(key, "must be at least 1"));
            }
        }
        if self.nr != self.nt {
            return Err(Error::invalid(
                "scene.nr",
                format!(
                    "uplink reuses the transmit array by reciprocity, so nr must equal nt ({})",
                    self.nt
                ),
            ));
        }
        for (key, v) in [
            ("scene.p_max", self.p_max),
            ("scene.p_ue", self.p_ue),
            ("scene.noise_dl", self.noise_dl),
            ("scene.noise_ul", self.noise_ul),
            ("scene.element_spacing", self.element_spacing),
            ("scene.ue_region.step", self.ue_region.step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(key, "must be strictly positive and finite"));
            }
        }
        for (key, v) in [
            ("scene.pathloss_exp_bs_ris", self.pathloss_exp_bs_ris),
            ("scene.pathloss_exp_ris_ue", self.pathloss_exp_ris_ue),
            ("scene.rician_k_bs_ris", self.rician_k_bs_ris),
            ("scene.rician_k_ris_ue", self.rician_k_ris_ue),
        ] {
            if !(v >= 0.0) {
                return Err(Error::invalid(key, "must be non-negative"));
            }
        }
        let r = &self.ue_region;
        if !(r.x_min <= r.x_max && r.y_min <= r.y_max) {
            return Err(Error::invalid("scene.ue_region", "min must not exceed max"));
        }
        if r.contains(&self.bs_position) {
            return Err(Error::invalid(
                "scene.ue_region",
                "region must not contain the BS position",
            ));
        }
        if r.contains(&self.ris_position) {
            return Err(Error::invalid(
                "scene.ue_region",
                "region must not contain the RIS position",
            ));
        }
        if self.bs_position == self.ris_position {
            return Err(Error::invalid("scene.ris_position", "coincides with the BS"));
        }
        Ok(())
    }

    /// Linear power gain of a link of length `d` with exponent `exp`.
    pub fn pathloss_gain(&self, d: f64, exp: f64) -> f64 {
        10f64.powf(self.pathloss_ref_db / 10.0) * d.powf(-exp)
    }

    /// Local angle at the RIS towards `p`.
    pub fn ris_local_angle(&self, p: &Point2) -> f64 {
        wrap_angle(self.ris_position.bearing_to(p) - self.ris_boresight_deg.to_radians())
    }

    /// Local angle at the BS towards `p`.
    pub fn bs_local_angle(&self, p: &Point2) -> f64 {
        wrap_angle(self.bs_position.bearing_to(p) - self.bs_boresight_deg.to_radians())
    }
}

/// Wraps to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePlacement {
    pub ue_positions: Vec<Point2>,
}

/// Places `k` distinct UEs uniformly on the region grid.
pub fn place_ues<R: Rng + ?Sized>(config: &SceneConfig, rng: &mut R) -> Result<ScenePlacement> {
    let (nx, ny) = config.ue_region.grid_dims();
    let available = nx * ny;
    if available < config.k {
        return Err(Error::RegionTooSmall {
            available,
            requested: config.k,
        });
    }
    let mut taken: Vec<(usize, usize)> = Vec::with_capacity(config.k);
    while taken.len() < config.k {
        let cell = (rng.random_range(0..nx), rng.random_range(0..ny));
        if !taken.contains(&cell) {
            taken.push(cell);
        }
    }
    Ok(ScenePlacement {
        ue_positions: taken
            .into_iter()
            .map(|(ix, iy)| config.ue_region.point(ix, iy))
            .collect(),
    })
}

/// One block-fading realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// BS to RIS, shape `n_ris x nt`.
    pub g: Array2<Complex64>,
    /// RIS to UE i, each of length `n_ris`.
    pub h_ru: Vec<Array1<Complex64>>,
    pub drawn_at: u64,
}

impl ChannelRealization {
    pub fn n_ris(&self) -> usize {
        self.g.nrows()
    }

    pub fn nt(&self) -> usize {
        self.g.ncols()
    }

    pub fn k(&self) -> usize {
        self.h_ru.len()
    }

    pub fn is_finite(&self) -> bool {
        self.g.iter().all(|c| c.re.is_finite() && c.im.is_finite())
            && self
                .h_ru
                .iter()
                .flat_map(|h| h.iter())
                .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Uniform linear array response `exp(j*2*pi*spacing*m*sin(angle))`.
pub fn steering_vector(array_size: usize, element_spacing: f64, angle: f64) -> Array1<Complex64> {
    let psi = TAU * element_spacing * angle.sin();
    Array1::from_iter((0..array_size).map(|m| Complex64::from_polar(1.0, psi * m as f64)))
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn rician_weights(k: f64) -> (f64, f64) {
    if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    }
}

/// Draws `G` then each `h_i` from the Rician model. Entries are consumed in
/// row-major order so the result is a pure function of the rng state.
pub fn draw_channels<R: Rng + ?Sized>(
    config: &SceneConfig,
    placement: &ScenePlacement,
    rng: &mut R,
    drawn_at: u64,
) -> Result<ChannelRealization> {
    check_len("UE placement", config.k, placement.ue_positions.len())?;
    let n = config.n_ris;
    let nt = config.nt;
    let d = config.element_spacing;

    let d_br = config.bs_position.distance(&config.ris_position);
    let amp_br = config.pathloss_gain(d_br, config.pathloss_exp_bs_ris).sqrt();
    let a_ris = steering_vector(n, d, config.ris_local_angle(&config.bs_position));
    let a_bs = steering_vector(nt, d, config.bs_local_angle(&config.ris_position));
    let (los, nlos) = rician_weights(config.rician_k_bs_ris);
    let mut g = Array2::zeros((n, nt));
    for r in 0..n {
        for c in 0..nt {
            let scatter = complex_normal(rng);
            g[[r, c]] = (a_ris[r] * a_bs[c] * los + scatter * nlos) * amp_br;
        }
    }

    let (los, nlos) = rician_weights(config.rician_k_ris_ue);
    let h_ru = placement
        .ue_positions
        .iter()
        .map(|ue| {
            let d_ru = config.ris_position.distance(ue);
            let amp = config.pathloss_gain(d_ru, config.pathloss_exp_ris_ue).sqrt();
            let a = steering_vector(n, d, config.ris_local_angle(ue));
            Array1::from_iter(
                a.iter()
                    .map(|&am| (am * los + complex_normal(rng) * nlos) * amp),
            )
        })
        .collect();

    Ok(ChannelRealization { g, h_ru, drawn_at })
}

/// The physical meaning of an action: BS precoder and RIS phases.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerState {
    /// `nt x k`, column i serves UE i.
    pub w: Array2<Complex64>,
    /// RIS phases in [0, 2pi).
    pub phi: Vec<f64>,
}

impl BeamformerState {
    pub fn power(&self) -> f64 {
        self.w.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn ris_coefficients(&self) -> Array1<Complex64> {
        self.phi.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }
}

/// Per-user SINR and achievable rate of one link direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRates {
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
}

impl LinkRates {
    fn from_sinr(sinr: Vec<f64>) -> Self {
        let rate = sinr.iter().map(|s| (1.0 + s).log2()).collect();
        Self { sinr, rate }
    }
}

fn check_shapes(channel: &ChannelRealization, beam: &BeamformerState) -> Result<()> {
    let n = channel.n_ris();
    check_len("RIS phase vector", n, beam.phi.len())?;
    check_len("precoder rows", channel.nt(), beam.w.nrows())?;
    check_len("precoder columns", channel.k(), beam.w.ncols())?;
    for h in &channel.h_ru {
        check_len("RIS-UE channel", n, h.len())?;
    }
    Ok(())
}

/// Cascaded channel `h_i^T diag(e^{j phi}) G` for every UE, one row per UE
/// (shape `k x nt`). By reciprocity row i is also the uplink channel `u_i`.
pub fn effective_channels(channel: &ChannelRealization, beam: &BeamformerState) -> Array2<Complex64> {
    let coeffs = beam.ris_coefficients();
    let mut h = Array2::zeros((channel.k(), channel.nt()));
    for (i, h_ru) in channel.h_ru.iter().enumerate() {
        let reflected = h_ru * &coeffs;
        h.row_mut(i).assign(&reflected.dot(&channel.g));
    }
    h
}

/// Downlink SINR and rate per UE, with inter-user interference from the
/// other precoder columns.
pub fn downlink_rates(
    channel: &ChannelRealization,
    beam: &BeamformerState,
    config: &SceneConfig,
) -> Result<LinkRates> {
    check_shapes(channel, beam)?;
    let k = channel.k();
    let gains = effective_channels(channel, beam).dot(&beam.w).mapv(|c| c.norm_sqr());
    let sinr = (0..k)
        .map(|i| {
            let interference: f64 = (0..k).filter(|&j| j != i).map(|j| gains[[i, j]]).sum();
            gains[[i, i]] / (interference + config.noise_dl)
        })
        .collect();
    Ok(LinkRates::from_sinr(sinr))
}

/// Uplink SINR and rate per UE with maximum-ratio combining at the BS.
pub fn uplink_rates(
    channel: &ChannelRealization,
    beam: &BeamformerState,
    config: &SceneConfig,
) -> Result<LinkRates> {
    check_shapes(channel, beam)?;
    let k = channel.k();
    let u = effective_channels(channel, beam);
    let sinr = (0..k)
        .map(|i| {
            let ui = u.row(i);
            let norm_sq: f64 = ui.iter().map(|c| c.norm_sqr()).sum();
            if norm_sq == 0.0 {
                return 0.0;
            }
            let interference: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| {
                    let proj: Complex64 = ui.iter().zip(u.row(j)).map(|(a, b)| a.conj() * b).sum();
                    config.p_ue * proj.norm_sqr() / norm_sq
                })
                .sum();
            config.p_ue * norm_sq / (interference + config.noise_ul)
        })
        .collect();
    Ok(LinkRates::from_sinr(sinr))
}

/// Array-factor power `|a(theta)^T w|^2` over `angle_grid`.
pub fn beam_pattern(
    weights: &[Complex64],
    element_spacing: f64,
    angle_grid: &[f64],
) -> Result<Vec<f64>> {
    if angle_grid.is_empty() {
        return Err(Error::Empty("angle grid"));
    }
    if weights.is_empty() {
        return Err(Error::Empty("weight vector"));
    }
    let w = Array1::from(weights.to_vec());
    Ok(angle_grid
        .iter()
        .map(|&theta| steering_vector(weights.len(), element_spacing, theta).dot(&w).norm_sqr())
        .collect())
}

/// `n` evenly spaced angles covering the full circle, starting at -pi.
pub fn full_circle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -PI + TAU * i as f64 / n as f64).collect()
}

/// Elements excitations seen by the RIS when the BS sends column `i` of `W`:
/// `diag(e^{j phi}) G w_i`.
pub fn ris_downlink_weights(
    channel: &ChannelRealization,
    beam: &BeamformerState,
    user: usize,
) -> Vec<Complex64> {
    let incident = channel.g.dot(&beam.w.column(user));
    incident
        .iter()
        .zip(&beam.phi)
        .map(|(x, &p)| x * Complex64::from_polar(1.0, p))
        .collect()
}

/// `diag(e^{j phi}) h_i`, the RIS excitation when UE `i` transmits.
pub fn ris_uplink_weights(
    channel: &ChannelRealization,
    beam: &BeamformerState,
    user: usize,
) -> Vec<Complex64> {
    channel.h_ru[user]
        .iter()
        .zip(&beam.phi)
        .map(|(x, &p)| x * Complex64::from_polar(1.0, p))
        .collect()
}
