//! Simulator and training stack for fairness-aware RIS-assisted duplex links.
//!
//! A base station reaches `k` single-antenna users only through a
//! reconfigurable intelligent surface. A DDPG or TD3 controller picks the BS
//! precoder and the RIS phases jointly; rewards range from pure sum capacity
//! to a blend of per-user QoS and Jain fairness.

pub mod agents;
pub mod config;
pub mod env;
pub mod error;
pub mod geometry;
pub mod nn;
pub mod patterns;
pub mod rewards;
pub mod seeding;
pub mod telemetry;

pub use error::{Error, Result};
