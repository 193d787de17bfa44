use fairris::agents::*;
use fairris::env::Transition;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn transition(rng: &mut ChaCha8Rng, obs: usize, act: usize, reward: f64) -> Transition {
    Transition {
        state: (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect(),
        action: (0..act).map(|_| rng.random_range(-1.0..1.0)).collect(),
        reward,
        next_state: (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect(),
        done: false,
    }
}

#[test]
fn fifo_keeps_the_newest_transitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut buffer = ReplayBuffer::new(4, 2, 1);
    let pushed: Vec<Transition> = (0..11).map(|i| transition(&mut rng, 2, 1, i as f64)).collect();
    for (n, t) in pushed.iter().enumerate() {
        buffer.push(t).unwrap();
        let start = (n + 1).saturating_sub(4);
        let expected: Vec<f64> = (start..=n).map(|i| i as f64).collect();
        assert_eq!(buffer.rewards_in_order(), expected);
        assert_eq!(buffer.len(), expected.len());
    }
    for i in 0..4 {
        assert_eq!(buffer.get(i).unwrap(), pushed[7 + i]);
    }
}

#[test]
fn incremental_mean_matches_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for capacity in [1, 7, 100, 1000] {
        let mut buffer = ReplayBuffer::new(capacity, 3, 2);
        for step in 0..5000 {
            // widely varying magnitudes stress the running sum
            let scale = 10f64.powi(rng.random_range(-3..=4));
            let reward = rng.random_range(-1.0..1.0) * scale;
            buffer.push(&transition(&mut rng, 3, 2, reward)).unwrap();
            if step % 97 == 0 || step == 4999 {
                let stored = buffer.rewards_in_order();
                let oracle = stored.iter().sum::<f64>() / stored.len() as f64;
                let got = buffer.mean_reward().unwrap();
                let scale = stored.iter().map(|r| r.abs()).fold(1.0, f64::max);
                assert!((got - oracle).abs() <= 1e-12 * scale, "cap {capacity}: {got} vs {oracle}");
            }
        }
    }
}

#[test]
fn batch_sampling_is_uniform() {
    // chi-square goodness of fit on slot counts
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let cells = 50;
    let mut buffer = ReplayBuffer::new(cells, 1, 1);
    for i in 0..cells {
        buffer.push(&transition(&mut rng, 1, 1, i as f64)).unwrap();
    }
    let draws = 100_000;
    let mut counts = vec![0usize; cells];
    for slot in buffer.sample_slots(draws, &mut rng).unwrap() {
        counts[slot] += 1;
    }
    let expected = draws as f64 / cells as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 49 degrees of freedom: the 0.999 quantile is about 85.4
    assert!(chi2 < 85.4, "chi-square {chi2}");
}

#[test]
fn clipped_double_q_never_exceeds_either_critic() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..200 {
        let n = rng.random_range(1..64);
        let r = Array1::from_shape_fn(n, |_| rng.random_range(-5.0..5.0));
        let q1 = Array1::from_shape_fn(n, |_| rng.random_range(-50.0..50.0));
        let q2 = Array1::from_shape_fn(n, |_| rng.random_range(-50.0..50.0));
        let gamma = rng.random_range(0.0..=1.0);
        let y = td3_target(&r, &q1, &q2, gamma);
        let y1 = ddpg_target(&r, &q1, gamma);
        let y2 = ddpg_target(&r, &q2, gamma);
        for i in 0..n {
            assert!(y[i] <= y1[i] && y[i] <= y2[i]);
            assert!(y[i] == y1[i] || y[i] == y2[i]);
        }
    }
    let y = td3_target(&Array1::from(vec![1.0]), &Array1::from(vec![2.0]), &Array1::from(vec![3.0]), 0.99);
    assert!((y[0] - 2.98).abs() < 1e-12);
}

#[test]
fn learner_targets_use_the_smaller_critic() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let cfg = AgentConfig {
        hidden_layers: vec![6],
        batch_size: 8,
        target_noise_std: 0.0,
        ..AgentConfig::default()
    };
    let agent = Agent::new(AgentVariant::Td3, cfg, 3, 2, &mut rng).unwrap();
    let mut buffer = ReplayBuffer::new(32, 3, 2);
    for _ in 0..32 {
        let reward = rng.random_range(-1.0..1.0);
        buffer.push(&transition(&mut rng, 3, 2, reward)).unwrap();
    }
    let batch = buffer.sample_batch(16, &mut rng).unwrap();
    let y = agent.critic_targets(&batch, &mut rng).unwrap();
    let a = agent.actor_target().predict(batch.next_states.view()).unwrap();
    let input = ndarray::concatenate![ndarray::Axis(1), batch.next_states.view(), a.view()];
    for c in 0..2 {
        let q = agent.critic_target(c).predict(input.view()).unwrap().column(0).to_owned();
        let single = ddpg_target(&batch.rewards, &q, agent.config().gamma);
        assert!(y.iter().zip(&single).all(|(a, b)| a <= &(b + 1e-15)));
    }
}

#[test]
fn actor_updates_every_second_critic_update_over_100_steps() {
    for variant in [AgentVariant::Ddpg, AgentVariant::Td3] {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let cfg = AgentConfig {
            hidden_layers: vec![8],
            batch_size: 16,
            ..AgentConfig::default()
        };
        let mut agent = Agent::new(variant, cfg, 4, 2, &mut rng).unwrap();
        let mut buffer = ReplayBuffer::new(256, 4, 2);
        let mut log = Vec::new();
        for step in 0..100 {
            let reward = rng.random_range(-1.0..1.0);
            buffer.push(&transition(&mut rng, 4, 2, reward)).unwrap();
            if buffer.len() >= 16 {
                let batch = buffer.sample_batch(16, &mut rng).unwrap();
                let stats = agent.update(&batch, &mut rng).unwrap();
                log.push((step, stats));
            }
        }
        assert_eq!(log.len(), 85);
        for (i, (_, stats)) in log.iter().enumerate() {
            assert_eq!(stats.critic_update, i as u64 + 1);
            assert_eq!(stats.actor_updated(), stats.critic_update % 2 == 0, "{variant} update {}", i + 1);
        }
        assert_eq!(agent.actor_updates(), 42);
        assert_eq!(agent.critic_updates(), 85);
    }
}

#[test]
fn td3_targets_move_only_on_actor_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let cfg = AgentConfig {
        hidden_layers: vec![5],
        batch_size: 8,
        tau: 0.5,
        ..AgentConfig::default()
    };
    let mut agent = Agent::new(AgentVariant::Td3, cfg, 2, 1, &mut rng).unwrap();
    let mut buffer = ReplayBuffer::new(16, 2, 1);
    for _ in 0..16 {
        buffer.push(&transition(&mut rng, 2, 1, 1.0)).unwrap();
    }
    let batch = buffer.sample_batch(8, &mut rng).unwrap();
    let before = agent.critic_target(0).flat_params();
    let stats = agent.update(&batch, &mut rng).unwrap();
    assert!(!stats.actor_updated());
    assert_eq!(agent.critic_target(0).flat_params(), before);
    let stats = agent.update(&batch, &mut rng).unwrap();
    assert!(stats.actor_updated());
    assert_ne!(agent.critic_target(0).flat_params(), before);
}

#[test]
fn exploration_stays_in_the_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let agent = Agent::new(AgentVariant::Ddpg, AgentConfig { hidden_layers: vec![4], ..AgentConfig::default() }, 3, 5, &mut rng).unwrap();
    let obs = [0.2, -0.4, 0.9];
    let greedy = agent.select_action(&obs, 0.5, &mut rng, false).unwrap();
    assert_eq!(agent.select_action(&obs, 0.0, &mut rng, true).unwrap(), greedy);
    for _ in 0..100 {
        let a = agent.select_action(&obs, 1e6, &mut rng, true).unwrap();
        assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
    }
    let policy = agent.policy(Array2::from_shape_vec((1, 3), obs.to_vec()).unwrap().view()).unwrap();
    assert_eq!(policy.row(0).to_vec(), greedy);
}
