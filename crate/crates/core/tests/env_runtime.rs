use fairris::env::{decode_action, perturb_action, ActionLayout, EnvConfig, RisEnv, VecEnv};
use fairris::geometry::SceneConfig;
use fairris::seeding;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_env() -> EnvConfig {
    let mut cfg = EnvConfig::default();
    cfg.steps_per_episode = 6;
    cfg
}

#[test]
fn decoded_precoders_respect_the_power_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let scene = SceneConfig { p_max: 2.5, ..SceneConfig::default() };
    let layout = ActionLayout::new(&scene);
    for _ in 0..500 {
        // raw values beyond the box exercise the clip
        let raw: Vec<f64> = (0..layout.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let beam = decode_action(&raw, &scene).unwrap();
        let power = beam.power();
        assert!(power <= scene.p_max * (1.0 + 1e-12), "power {power}");
        let unprojected: f64 = raw[layout.re_range()]
            .iter()
            .chain(&raw[layout.im_range()])
            .map(|v| v.clamp(-1.0, 1.0).powi(2) * scene.p_max)
            .sum();
        if unprojected > scene.p_max {
            assert!((power - scene.p_max).abs() < 1e-9);
        } else {
            assert!((power - unprojected).abs() < 1e-9);
        }
        assert!(beam.phi.iter().all(|p| (0.0..std::f64::consts::TAU).contains(p)));
        assert!(beam.ris_coefficients().iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
    }
    let zero = decode_action(&vec![0.0; layout.dim()], &scene).unwrap();
    assert_eq!(zero.power(), 0.0);
    assert!(zero.phi.iter().all(|&p| (p - std::f64::consts::PI).abs() < 1e-15));
    assert!(decode_action(&[0.0; 3], &scene).is_err());
}

#[test]
fn same_seed_same_trajectory() {
    let run = || {
        let mut env = RisEnv::from_seed(small_env(), 99).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut out = Vec::new();
        for _ in 0..2 {
            out.push(env.reset().unwrap());
            for _ in 0..6 {
                let a: Vec<f64> = (0..env.config().action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = env.step(&a).unwrap();
                out.push(vec![r.decisive_reward, r.jfi, r.rewards.qos, r.rewards.fqos]);
                out.push(r.observation);
            }
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn episode_ends_on_time_limit() {
    let mut env = RisEnv::from_seed(small_env(), 3).unwrap();
    env.reset().unwrap();
    let a = vec![0.1; env.config().action_dim()];
    for step in 1..=6 {
        let r = env.step(&a).unwrap();
        assert_eq!(r.done, step == 6);
    }
    assert!(env.step(&a).is_err());
}

fn rollout(instances: usize, threads: usize) -> Vec<(usize, Vec<f64>, f64)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let cfg = small_env();
        let mut envs = VecEnv::new(&cfg, instances, 2024).unwrap();
        envs.reset_all().unwrap();
        let dim = cfg.action_dim();
        let mut out = Vec::new();
        for round in 0..4 {
            let steps = envs
                .rollout_round(|obs| Ok(Array2::from_elem((obs.nrows(), dim), 0.1 * round as f64 - 0.15)), 0.2)
                .unwrap();
            for s in steps {
                out.push((s.instance, s.transition.action, s.transition.reward));
            }
        }
        out
    })
}

#[test]
fn vec_env_is_independent_of_scheduling() {
    let serial = rollout(5, 1);
    assert_eq!(serial, rollout(5, 4));
    assert_eq!(serial, rollout(5, 3));
    // each instance owns its streams, so adding instances does not disturb the others
    let wider = rollout(7, 2);
    let first_five: Vec<_> = wider.into_iter().filter(|(i, _, _)| *i < 5).collect();
    assert_eq!(serial, first_five);
}

#[test]
fn vec_env_matches_standalone_instances() {
    let cfg = small_env();
    let mut envs = VecEnv::new(&cfg, 3, 11).unwrap();
    envs.reset_all().unwrap();
    let mut singles: Vec<RisEnv> = (0..3)
        .map(|i| RisEnv::new(cfg.clone(), seeding::rng(11, seeding::env_stream(i))).unwrap())
        .collect();
    let mut noise: Vec<ChaCha8Rng> = (0..3).map(|i| seeding::rng(11, seeding::noise_stream(i))).collect();
    for (env, row) in singles.iter_mut().zip(envs.observations().outer_iter()) {
        assert_eq!(env.reset().unwrap(), row.to_vec());
    }
    let mean = vec![0.3; cfg.action_dim()];
    let steps = envs
        .rollout_round(|obs| Ok(Array2::from_elem((obs.nrows(), mean.len()), 0.3)), 0.1)
        .unwrap();
    for (i, step) in steps.iter().enumerate() {
        let action = perturb_action(&mean, 0.1, &mut noise[i]);
        assert_eq!(step.transition.action, action);
        let r = singles[i].step(&action).unwrap();
        assert_eq!(step.transition.reward, r.decisive_reward);
        assert_eq!(step.transition.next_state, r.observation);
    }
}
