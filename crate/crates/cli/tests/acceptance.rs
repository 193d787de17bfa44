//! One PASS/FAIL line per acceptance criterion.
//!
//! The training criteria drive the `fairris` binary with the desk profile
//! and take on the order of an hour on one core. Set `FAIRRIS_REUSE_RUNS=1`
//! to reuse finished runs from a previous invocation.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fairris::agents::{ddpg_target, td3_target, Agent, AgentConfig, AgentVariant, ReplayBuffer};
use fairris::env::Transition;
use fairris::geometry::*;
use fairris::nn::{finite_difference_check, soft_update, Activation, DenseSpec, Network};
use fairris::rewards::*;
use fairris::telemetry::read_series_csv;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn within(started: Instant, budget: Duration, what: &str) -> Result<(), String> {
    let took = started.elapsed();
    if took < budget {
        Ok(())
    } else {
        Err(format!("{what} took {took:.1?}, budget {budget:?}"))
    }
}

fn report(d: &[f64], u: &[f64]) -> RateReport {
    RateReport::new(d.to_vec(), u.to_vec()).unwrap()
}

fn reward_algebra() -> Outcome {
    let started = Instant::now();
    let tol = 1e-12;
    let th = |eps_d: &[f64], eps_u: &[f64], mu: f64, alpha: f64| ThresholdConfig {
        eps_d: eps_d.to_vec(),
        eps_u: eps_u.to_vec(),
        mu,
        alpha,
    };

    let r = report(&[3.0, 0.4], &[0.4, 0.8]);
    let big_r = secrecy_rate(&r);
    ensure!(close(big_r[0], 3.4, tol) && close(big_r[1], 1.2, tol), "R_i {big_r:?}");
    ensure!(close(sum_secrecy_rate(&r), 4.6, tol), "baseline {}", sum_secrecy_rate(&r));

    // only D_2 = 0.4 < 1 is penalised
    let t = th(&[1.0, 1.0], &[0.3, 0.3], 1.5, 0.5);
    ensure!(qos_penalties(&r, &t) == (vec![0, 1], vec![0, 0]), "penalty flags {:?}", qos_penalties(&r, &t));
    ensure!(close(reward_qos(&r, &t), 4.6 - 1.5, tol), "qos {}", reward_qos(&r, &t));

    // strict: a rate equal to its threshold is not penalised
    let eq = report(&[1.0, 2.0], &[0.5, 0.25]);
    let t_eq = th(&[1.0, 2.0], &[0.5, 0.25], 3.0, 0.5);
    ensure!(qos_penalties(&eq, &t_eq) == (vec![0, 0], vec![0, 0]), "equality penalised");
    ensure!(close(reward_qos(&eq, &t_eq), 3.75, tol), "qos at equality");
    let below = report(&[1.0 - 1e-9, 2.0], &[0.5, 0.25]);
    ensure!(qos_penalties(&below, &t_eq).0 == vec![1, 0], "just-below not penalised");

    // non-strict: equality keeps the term
    ensure!(reward_q_per_user(1.0, 0.5, 1.0, 0.5) == 1.5, "Q at equality");
    ensure!(reward_q_per_user(0.99, 0.5, 1.0, 0.5) == 0.5, "Q without downlink");
    ensure!(reward_q_per_user(1.0, 0.49, 1.0, 0.5) == 1.0, "Q without uplink");
    ensure!(reward_q_per_user(0.2, 0.1, 1.0, 0.5) == 0.0, "Q with neither");

    // mu = 0 collapses to the baseline
    for mu_zero in [th(&[9.0, 9.0], &[9.0, 9.0], 0.0, 0.3), th(&[0.0, 0.0], &[0.0, 0.0], 0.0, 0.3)] {
        ensure!(close(reward_qos(&r, &mu_zero), sum_secrecy_rate(&r), tol), "mu = 0");
    }

    // Q = (3 + 0.4) + 0.8 (user 2 keeps only its uplink)
    let q = 3.4 + 0.8;
    let jfi = 4.6f64.powi(2) / (2.0 * (3.4f64.powi(2) + 1.2f64.powi(2)));
    ensure!(close(jain_fairness(&secrecy_rate(&r)), jfi, tol), "jfi");
    let t0 = th(&[1.0, 1.0], &[0.3, 0.3], 1.0, 0.0);
    let t1 = th(&[1.0, 1.0], &[0.3, 0.3], 1.0, 1.0);
    let th_mid = th(&[1.0, 1.0], &[0.3, 0.3], 1.0, 0.25);
    ensure!(close(reward_fqos(&r, &t0), q, tol), "alpha = 0: {}", reward_fqos(&r, &t0));
    ensure!(close(reward_fqos(&r, &t1), 2.0 * jfi, tol), "alpha = 1: {}", reward_fqos(&r, &t1));
    ensure!(close(reward_fqos(&r, &th_mid), 0.75 * q + 0.25 * 2.0 * jfi, tol), "alpha = 0.25");

    let set = RewardSet::evaluate(&r, &t);
    ensure!(set.get(RewardKind::Baseline) == set.baseline && set.get(RewardKind::Fqos) == set.fqos, "reward set");
    ensure!(RateReport::new(vec![1.0], vec![-0.1]).is_err(), "negative rate accepted");
    ensure!(RateReport::new(vec![1.0, 2.0], vec![1.0]).is_err(), "length mismatch accepted");
    within(started, Duration::from_secs(1), "reward suite")?;
    Ok(format!("hand oracles at 1e-12, {:.1?}", started.elapsed()))
}

fn jfi_properties() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 0..10_000 {
        let k = rng.random_range(1..=8);
        let equal = n % 5 == 0;
        let v: Vec<f64> = if equal {
            vec![rng.random_range(0.0..10.0); k]
        } else {
            (0..k).map(|_| rng.random_range(0.0..10.0)).collect()
        };
        let j = jain_fairness(&v);
        ensure!(j >= 1.0 / k as f64 && j <= 1.0, "jfi {j} outside [1/{k}, 1] for {v:?}");
        let all_equal = v.iter().all(|x| *x == v[0]);
        if all_equal {
            ensure!(close(j, 1.0, 1e-12), "equal vector {v:?} gives {j}");
        } else {
            ensure!(j < 1.0 - 1e-12, "unequal vector {v:?} gives {j}");
        }
        let c = 10f64.powf(rng.random_range(-6.0..6.0));
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        ensure!(close(jain_fairness(&scaled), j, 1e-12), "scale {c} moves {v:?}");
    }
    within(started, Duration::from_secs(5), "JFI suite")?;
    Ok(format!("10^4 vectors, {:.1?}", started.elapsed()))
}

fn cn(rng: &mut ChaCha8Rng) -> C {
    C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_instance(rng: &mut ChaCha8Rng) -> (SceneConfig, ChannelRealization, BeamformerState) {
    let (n, nt, k) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=3));
    let scene = SceneConfig {
        n_ris: n,
        nt,
        nr: nt,
        k,
        p_ue: rng.random_range(0.05..2.0),
        noise_dl: rng.random_range(1e-3..1.0),
        noise_ul: rng.random_range(1e-3..1.0),
        ..SceneConfig::default()
    };
    let channel = ChannelRealization {
        g: Array2::from_shape_fn((n, nt), |_| cn(rng)),
        h_ru: (0..k).map(|_| Array1::from_shape_fn(n, |_| cn(rng))).collect(),
        drawn_at: 0,
    };
    let beam = BeamformerState {
        w: Array2::from_shape_fn((nt, k), |_| cn(rng)),
        phi: (0..n).map(|_| rng.random_range(0.0..TAU)).collect(),
    };
    (scene, channel, beam)
}

/// Scalar loops over `h_i^T diag(e^{j phi}) G w_j` and the MRC combiner.
fn brute_sinr(scene: &SceneConfig, ch: &ChannelRealization, beam: &BeamformerState) -> (Vec<f64>, Vec<f64>) {
    let (k, nt, n) = (scene.k, scene.nt, scene.n_ris);
    let mut u = vec![vec![C::new(0.0, 0.0); nt]; k];
    for i in 0..k {
        for t in 0..nt {
            for m in 0..n {
                u[i][t] += ch.h_ru[i][m] * C::from_polar(1.0, beam.phi[m]) * ch.g[[m, t]];
            }
        }
    }
    let mut dl = Vec::new();
    let mut ul = Vec::new();
    for i in 0..k {
        let mut wanted = 0.0;
        let mut interference = 0.0;
        for j in 0..k {
            let mut s = C::new(0.0, 0.0);
            for t in 0..nt {
                s += u[i][t] * beam.w[[t, j]];
            }
            if i == j {
                wanted = s.norm_sqr();
            } else {
                interference += s.norm_sqr();
            }
        }
        dl.push(wanted / (interference + scene.noise_dl));
        let norm: f64 = u[i].iter().map(|c| c.norm_sqr()).sum();
        let mut leak = 0.0;
        for j in (0..k).filter(|&j| j != i) {
            let mut inner = C::new(0.0, 0.0);
            for t in 0..nt {
                inner += u[i][t].conj() * u[j][t];
            }
            leak += scene.p_ue * inner.norm_sqr() / norm;
        }
        ul.push(scene.p_ue * norm / (leak + scene.noise_ul));
    }
    (dl, ul)
}

fn sinr_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (scene, ch, beam) = random_instance(&mut rng);
        let dl = downlink_rates(&ch, &beam, &scene).map_err(|e| e.to_string())?;
        let ul = uplink_rates(&ch, &beam, &scene).map_err(|e| e.to_string())?;
        let (bd, bu) = brute_sinr(&scene, &ch, &beam);
        for (a, b) in dl.sinr.iter().zip(&bd).chain(ul.sinr.iter().zip(&bu)) {
            worst = worst.max(rel_err(*a, *b));
        }
    }
    ensure!(worst < 1e-10, "max relative error {worst:e}");
    within(started, Duration::from_secs(5), "SINR oracle")?;
    Ok(format!("100 instances, max rel err {worst:.1e}"))
}

fn physics_invariances() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (scene, ch, beam) = random_instance(&mut rng);
        let offset = rng.random_range(-PI..PI);
        let shifted = BeamformerState {
            w: beam.w.clone(),
            phi: beam.phi.iter().map(|p| (p + offset).rem_euclid(TAU)).collect(),
        };
        let pairs = [
            (downlink_rates(&ch, &beam, &scene), downlink_rates(&ch, &shifted, &scene)),
            (uplink_rates(&ch, &beam, &scene), uplink_rates(&ch, &shifted, &scene)),
        ];
        for (a, b) in pairs {
            let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
            for (x, y) in a.sinr.iter().zip(&b.sinr) {
                worst = worst.max(rel_err(*x, *y));
            }
        }
    }
    ensure!(worst < 1e-10, "phase offset moves SINR by {worst:e}");
    let grid = full_circle_grid(360);
    for (n, idx) in [(4usize, 190usize), (16, 200), (32, 225), (64, 170)] {
        let w: Vec<C> = steering_vector(n, 0.5, grid[idx]).iter().map(|c| c.conj()).collect();
        let p = beam_pattern(&w, 0.5, &grid).map_err(|e| e.to_string())?;
        let peak = p.iter().cloned().fold(f64::MIN, f64::max);
        let n2 = (n * n) as f64;
        ensure!(rel_err(p[idx], n2) < 1e-10, "N = {n}: value at target {}", p[idx]);
        ensure!(rel_err(peak, n2) < 1e-10, "N = {n}: peak {peak}");
    }
    within(started, Duration::from_secs(5), "physics suite")?;
    Ok(format!("offset drift {worst:.1e}, peaks N^2"))
}

fn gradient_checks() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let (obs, act) = (rng.random_range(1..=5), rng.random_range(1..=3));
        let depth = rng.random_range(1..=3);
        let actor = i % 2 == 0;
        let mut sizes = vec![if actor { obs } else { obs + act }];
        sizes.extend((0..depth).map(|_| rng.random_range(2..=7)));
        sizes.push(if actor { act } else { 1 });
        let out = *sizes.last().unwrap();
        let head = if actor { Activation::Tanh } else { Activation::Identity };
        let net = Network::init(DenseSpec::new(sizes, head), 1.0, &mut rng).map_err(|e| e.to_string())?;
        let batch = rng.random_range(1..=4);
        let x = Array2::from_shape_fn((batch, net.input_dim()), |_| rng.random_range(-1.0..1.0));
        let proj = Array2::from_shape_fn((batch, out), |_| rng.random_range(-1.0..1.0));
        let check = finite_difference_check(&net, x.view(), &proj, 1e-5).map_err(|e| e.to_string())?;
        worst = worst.max(check.max_rel_error);
        ensure!(check.passed, "net {i}: max relative error {:e}", check.max_rel_error);
    }
    within(started, Duration::from_secs(10), "gradient checks")?;
    Ok(format!("20 nets, max rel err {worst:.1e}"))
}

fn transition(rng: &mut ChaCha8Rng, obs: usize, act: usize, reward: f64) -> Transition {
    Transition {
        state: (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect(),
        action: (0..act).map(|_| rng.random_range(-1.0..1.0)).collect(),
        reward,
        next_state: (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect(),
        done: false,
    }
}

fn agent_mechanics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let err = |e: fairris::Error| e.to_string();

    let mut fifo = ReplayBuffer::new(3, 1, 1);
    for i in 0..8 {
        fifo.push(&transition(&mut rng, 1, 1, i as f64)).map_err(err)?;
    }
    ensure!(fifo.rewards_in_order() == vec![5.0, 6.0, 7.0], "FIFO order {:?}", fifo.rewards_in_order());

    let mut buffer = ReplayBuffer::new(100, 2, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..3000 {
        let reward = rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-2..=3));
        buffer.push(&transition(&mut rng, 2, 1, reward)).map_err(err)?;
        let stored = buffer.rewards_in_order();
        let oracle = stored.iter().sum::<f64>() / stored.len() as f64;
        worst = worst.max((buffer.mean_reward().unwrap() - oracle).abs());
    }
    ensure!(worst <= 1e-12, "incremental mean off by {worst:e}");

    for _ in 0..200 {
        let n = rng.random_range(1..64);
        let r = Array1::from_shape_fn(n, |_| rng.random_range(-5.0..5.0));
        let q1 = Array1::from_shape_fn(n, |_| rng.random_range(-50.0..50.0));
        let q2 = Array1::from_shape_fn(n, |_| rng.random_range(-50.0..50.0));
        let gamma = rng.random_range(0.0..=1.0);
        let y = td3_target(&r, &q1, &q2, gamma);
        let (y1, y2) = (ddpg_target(&r, &q1, gamma), ddpg_target(&r, &q2, gamma));
        ensure!((0..n).all(|i| y[i] <= y1[i] && y[i] <= y2[i]), "clipped target exceeds a single critic");
    }

    let spec = DenseSpec::new(vec![3, 5, 2], Activation::Tanh);
    let online = Network::init(spec.clone(), 1.0, &mut rng).map_err(err)?;
    for tau in [0.0, 5e-4, 0.3, 1.0] {
        let mut target = Network::init(spec.clone(), 1.0, &mut rng).map_err(err)?;
        let before = target.flat_params();
        soft_update(&mut target, &online, tau).map_err(err)?;
        let exact = target
            .flat_params()
            .iter()
            .zip(&before)
            .zip(online.flat_params())
            .all(|((t, b), o)| *t == (1.0 - tau) * b + tau * o);
        ensure!(exact, "soft update with tau {tau} is not exact");
    }

    for variant in [AgentVariant::Ddpg, AgentVariant::Td3] {
        let cfg = AgentConfig {
            hidden_layers: vec![8],
            batch_size: 8,
            ..AgentConfig::default()
        };
        let mut agent = Agent::new(variant, cfg, 3, 2, &mut rng).map_err(err)?;
        let mut replay = ReplayBuffer::new(64, 3, 2);
        for _ in 0..8 {
            replay.push(&transition(&mut rng, 3, 2, 0.5)).map_err(err)?;
        }
        let mut log = Vec::new();
        for _ in 0..100 {
            let reward = rng.random_range(-1.0..1.0);
            replay.push(&transition(&mut rng, 3, 2, reward)).map_err(err)?;
            let batch = replay.sample_batch(8, &mut rng).map_err(err)?;
            log.push(agent.update(&batch, &mut rng).map_err(err)?.actor_updated());
        }
        let expected: Vec<bool> = (1..=100).map(|c| c % 2 == 0).collect();
        ensure!(log == expected, "{variant}: actor cadence {log:?}");
    }
    Ok("FIFO, mean 1e-12, clipped double-Q, exact soft update, 1:2 cadence".into())
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairris"))
}

fn reuse() -> bool {
    std::env::var("FAIRRIS_REUSE_RUNS").is_ok_and(|v| v == "1")
}

/// Trains with the desk profile into `dir` unless a finished run may be reused.
fn desk_run(dir: &Path, extra: &[&str]) -> Result<(), String> {
    if reuse() && dir.join("manifest.json").is_file() {
        return Ok(());
    }
    let _ = std::fs::remove_dir_all(dir);
    let out = bin()
        .args(["train", "--desk", "--progress", "0", "--out"])
        .arg(dir)
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "train {extra:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn raw_series(dir: &Path, name: &str) -> Result<Vec<f64>, String> {
    read_series_csv(&dir.join(format!("{name}.csv")))
        .map(|(_, raw, _)| raw)
        .map_err(|e| e.to_string())
}

fn decile(v: &[f64], tail: bool) -> f64 {
    let n = (v.len() / 10).max(1);
    let part = if tail { &v[v.len() - n..] } else { &v[..n] };
    part.iter().sum::<f64>() / n as f64
}

fn determinism(root: &Path) -> Outcome {
    let started = Instant::now();
    let (a, b) = (root.join("det_a"), root.join("det_b"));
    for dir in [&a, &b] {
        let _ = std::fs::remove_dir_all(dir);
        let out = bin()
            .args(["train", "--desk", "--episodes", "50", "--seed", "77", "--progress", "0", "--out"])
            .arg(dir)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "train failed: {}", String::from_utf8_lossy(&out.stderr));
    }
    let mut compared = 0;
    for entry in std::fs::read_dir(&a).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        if !name.to_string_lossy().ends_with(".csv") {
            continue;
        }
        let (x, y) = (std::fs::read(a.join(&name)), std::fs::read(b.join(&name)));
        ensure!(
            matches!((&x, &y), (Ok(x), Ok(y)) if x == y),
            "{} differs",
            name.to_string_lossy()
        );
        compared += 1;
    }
    ensure!(compared >= 4, "only {compared} metric CSVs");
    within(started, Duration::from_secs(600), "two 50-episode runs")?;
    Ok(format!("{compared} CSVs byte-identical, {:.0?}", started.elapsed()))
}

const SIX: [(&str, &str); 6] = [
    ("ddpg", "baseline"),
    ("ddpg", "qos"),
    ("ddpg", "fqos"),
    ("td3", "baseline"),
    ("td3", "qos"),
    ("td3", "fqos"),
];

fn six_runs(root: &Path) -> Result<Vec<PathBuf>, String> {
    SIX.iter()
        .map(|(agent, reward)| {
            let dir = root.join(format!("{agent}-{reward}"));
            desk_run(&dir, &["--agent", agent, "--decisive", reward])?;
            Ok(dir)
        })
        .collect()
}

fn learning_trend(runs: &Result<Vec<PathBuf>, String>) -> Outcome {
    let runs = runs.as_ref().map_err(|e| e.clone())?;
    let buffer = raw_series(&runs[0], "buffer_mean_reward")?;
    let (head, tail) = (decile(&buffer, false), decile(&buffer, true));
    let ratio = tail / head;
    let detail = format!("first decile {head:.3}, last decile {tail:.3}, ratio {ratio:.3}");
    ensure!(ratio >= 1.5, "{detail} (< 1.5)");
    Ok(detail)
}

fn fairness_direction(runs: &Result<Vec<PathBuf>, String>) -> Outcome {
    let runs = runs.as_ref().map_err(|e| e.clone())?;
    let mut jfi = [Vec::new(), Vec::new(), Vec::new()];
    let mut base = [Vec::new(), Vec::new(), Vec::new()];
    for (dir, (_, reward)) in runs.iter().zip(SIX) {
        let slot = ["baseline", "qos", "fqos"].iter().position(|r| *r == reward).unwrap();
        jfi[slot].push(decile(&raw_series(dir, "episode_mean_jfi")?, true));
        base[slot].push(decile(&raw_series(dir, "episode_baseline_reward")?, true));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (jfi_fqos, jfi_base) = (mean(&jfi[2]), mean(&jfi[0]));
    let cap_fqos = mean(&base[2]);
    let cap_other = mean(&[base[0].clone(), base[1].clone()].concat());
    let detail = format!(
        "JFI fqos {jfi_fqos:.3} vs baseline {jfi_base:.3}; capacity baseline/qos {cap_other:.3} vs fqos {cap_fqos:.3}"
    );
    ensure!(jfi_fqos >= jfi_base && cap_other >= cap_fqos, "{detail}");
    Ok(detail)
}

fn beam_pattern_sanity(root: &Path) -> Outcome {
    let dir = root.join("ddpg-baseline-k1");
    desk_run(&dir, &["--set", "scene.k=1"])?;
    let out = bin()
        .args(["pattern", "--grid", "720", "--run"])
        .arg(&dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "pattern failed: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.join("patterns/pattern_summary.json")).map_err(|e| e.to_string())?;
    let summary: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let user = &summary["users"][0];
    let error = user["downlink_peak_error_deg"].as_f64().ok_or("missing peak error")?;
    let detail = format!(
        "peak {:.2} deg, bearing {:.2} deg, error {error:.2} deg",
        user["ris_downlink_peak_rad"].as_f64().unwrap_or(f64::NAN).to_degrees(),
        user["ris_to_ue_bearing_rad"].as_f64().unwrap_or(f64::NAN).to_degrees()
    );
    ensure!(error <= 5.0, "{detail}");
    Ok(detail)
}

#[test]
fn acceptance() {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&root).unwrap();
    let mut failed = Vec::new();
    let mut line = |name: &str, outcome: Outcome| {
        match &outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(reason) => {
                println!("FAIL {name}: {reason}");
                failed.push(name.to_string());
            }
        }
    };
    line("reward algebra", reward_algebra());
    line("JFI properties", jfi_properties());
    line("SINR oracle equivalence", sinr_oracle());
    line("physics invariances", physics_invariances());
    line("gradient checks", gradient_checks());
    line("agent mechanics", agent_mechanics());
    line("determinism", determinism(&root));
    let runs = six_runs(&root);
    line("learning trend", learning_trend(&runs));
    line("fairness-capacity direction", fairness_direction(&runs));
    line("beam-pattern sanity", beam_pattern_sanity(&root));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
