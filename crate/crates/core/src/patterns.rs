//! Angular power profiles of a beamforming decision.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::{
    beam_pattern, ris_downlink_weights, ris_uplink_weights, BeamformerState, ChannelRealization,
    SceneConfig, ScenePlacement,
};

/// Profiles for one UE over a shared angle grid (local array angles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPatterns {
    pub user: usize,
    /// BS array factor of precoder column `user`.
    pub bs: Vec<f64>,
    /// RIS re-radiation while the BS serves `user`.
    pub ris_downlink: Vec<f64>,
    /// RIS re-radiation while `user` transmits.
    pub ris_uplink: Vec<f64>,
    /// True bearing of the UE seen from the RIS.
    pub ue_bearing: f64,
}

/// Bearings that the profiles should point at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneBearings {
    /// RIS direction seen from the BS.
    pub bs_to_ris: f64,
    /// BS direction seen from the RIS.
    pub ris_to_bs: f64,
}

pub fn scene_bearings(scene: &SceneConfig) -> SceneBearings {
    SceneBearings {
        bs_to_ris: scene.bs_local_angle(&scene.ris_position),
        ris_to_bs: scene.ris_local_angle(&scene.bs_position),
    }
}

pub fn user_patterns(
    scene: &SceneConfig,
    placement: &ScenePlacement,
    channel: &ChannelRealization,
    beam: &BeamformerState,
    grid: &[f64],
) -> Result<Vec<UserPatterns>> {
    let d = scene.element_spacing;
    (0..scene.k)
        .map(|i| {
            let column: Vec<_> = beam.w.column(i).to_vec();
            Ok(UserPatterns {
                user: i,
                bs: beam_pattern(&column, d, grid)?,
                ris_downlink: beam_pattern(&ris_downlink_weights(channel, beam, i), d, grid)?,
                ris_uplink: beam_pattern(&ris_uplink_weights(channel, beam, i), d, grid)?,
                ue_bearing: scene.ris_local_angle(&placement.ue_positions[i]),
            })
        })
        .collect()
}

/// Angle of the largest value within the front half-plane `|theta| <= pi/2`
/// (a linear array cannot tell front from back).
pub fn front_peak(grid: &[f64], values: &[f64]) -> Result<f64> {
    check_len("pattern values", grid.len(), values.len())?;
    grid.iter()
        .zip(values)
        .filter(|(t, _)| t.abs() <= FRAC_PI_2)
        .fold(None, |best: Option<(f64, f64)>, (&t, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((t, v)),
        })
        .map(|(t, _)| t)
        .ok_or(Error::Empty("front half of angle grid"))
}
