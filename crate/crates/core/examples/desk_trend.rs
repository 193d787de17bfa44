//! Trains the desk profile in-process and prints the learning trend.
//!
//! ```text
//! cargo run --release --example desk_trend -- run.episodes=100 agent.preact_l2=0.0
//! ```
//!
//! Arguments are `key=value` config overrides.

use fairris::agents::{evaluate_policy, train, Agent, EpisodeSummary, TrainObserver};
use fairris::config::{parse_override, RunConfig};
use fairris::seeding;
use fairris::telemetry::{BUFFER_MEAN, EPISODE_BASELINE, EPISODE_MEAN_JFI};

struct Every(usize);

impl TrainObserver for Every {
    fn on_episode(&mut self, s: &EpisodeSummary) {
        if s.episode.is_multiple_of(self.0) {
            println!(
                "episode {:>4}  baseline {:.3}  jfi {:.3}  buffer {:.3}  noise {:.3}",
                s.episode, s.mean_rewards.baseline, s.mean_jfi, s.buffer_mean, s.noise_std
            );
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let overrides = std::env::args()
        .skip(1)
        .map(|a| parse_override(&a))
        .collect::<fairris::Result<Vec<_>>>()?;
    let cfg = RunConfig::load_over(RunConfig::desk(), None, &overrides)?;
    let started = std::time::Instant::now();
    let outcome = train(&cfg, None, &mut Every((cfg.episodes / 20).max(1)))?;
    println!("trained {} episodes in {:.0?}", cfg.episodes, started.elapsed());
    for name in [BUFFER_MEAN, EPISODE_BASELINE, EPISODE_MEAN_JFI] {
        let s = outcome.recorder.series(name).expect("recorded");
        let (head, tail) = (s.head_mean(0.1).unwrap_or(f64::NAN), s.tail_mean(0.1).unwrap_or(f64::NAN));
        println!("{name}: first decile {head:.4}, last decile {tail:.4}, ratio {:.3}", tail / head);
    }

    let mut rng = seeding::rng(cfg.master_seed, seeding::AGENT_INIT);
    let untrained = Agent::new(cfg.variant, cfg.agent.clone(), cfg.observation_dim(), cfg.action_dim(), &mut rng)?;
    for (label, agent) in [("untrained", &untrained), ("trained", &outcome.agent)] {
        let r = evaluate_policy(agent, &cfg.env, 5, 2, cfg.master_seed + 1)?;
        println!("{label:>9} greedy: baseline {:.3}  fqos {:.3}  jfi {:.3}", r.mean_baseline, r.mean_fqos, r.mean_jfi);
    }
    Ok(())
}
