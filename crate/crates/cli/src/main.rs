use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fairris::agents::{self, EpisodeSummary, TrainObserver};
use fairris::config::{parse_override, RunConfig};
use fairris::env::{decode_action, RisEnv};
use fairris::geometry::full_circle_grid;
use fairris::patterns::{front_peak, scene_bearings, user_patterns};
use fairris::seeding;
use fairris::telemetry::{self, svg, write_atomic, RunManifest};

mod report;

#[derive(Parser)]
#[command(name = "fairris", version, about = "Fairness-aware RIS duplex beamforming trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write metrics, manifest and checkpoint.
    Train(TrainArgs),
    /// Run the greedy policy of a trained run on fresh scenes.
    Evaluate(EvaluateArgs),
    /// Write BS and RIS angular profiles of a trained policy.
    Pattern(PatternArgs),
    /// Compare metric series across runs.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file (TOML with dotted keys) or a run manifest (.json).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["baseline", "qos", "fqos"])]
    decisive: Option<String>,
    #[arg(long, value_parser = ["ddpg", "td3"])]
    agent: Option<String>,
    /// Extra `key=value` overrides, applied before the named flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Start from the reduced desk-scale profile instead of the full one.
    #[arg(long)]
    desk: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
    /// Print one progress line every N episodes (0 = silent).
    #[arg(long, default_value_t = 10)]
    progress: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value_t = 5)]
    episodes: usize,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PatternArgs {
    #[arg(long)]
    run: PathBuf,
    /// Output directory (defaults to `<run>/patterns`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scene seed; defaults to the run's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 360)]
    grid: usize,
    /// Greedy steps taken before the profiles are captured.
    #[arg(long, default_value_t = 1)]
    steps: usize,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories to compare.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Fraction of each series averaged in the summary table.
    #[arg(long, default_value_t = 0.1)]
    tail: f64,
    #[arg(long)]
    svg: bool,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<fairris::Error>() {
            Some(fairris::Error::InvalidConfig { .. } | fairris::Error::UnknownKey(_)) => Failure::Usage(e),
            _ => Failure::Runtime(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Pattern(a) => pattern(a),
        Command::Report(a) => report::run(&a.runs, &a.out, a.tail, a.svg),
    };
    match result.map_err(Failure::from) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn resolve(args: &ConfigArgs) -> anyhow::Result<RunConfig> {
    let mut overrides = args
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<fairris::Result<Vec<_>>>()?;
    let mut named = Vec::new();
    if let Some(seed) = args.seed {
        named.push(format!("run.master_seed={seed}"));
    }
    if let Some(n) = args.episodes {
        named.push(format!("run.episodes={n}"));
    }
    if let Some(out) = &args.out {
        let out = toml::Value::String(out.to_string_lossy().into_owned());
        named.push(format!("run.output_dir={out}"));
    }
    if let Some(d) = &args.decisive {
        named.push(format!("env.decisive_reward=\"{d}\""));
    }
    if let Some(a) = &args.agent {
        named.push(format!("agent.variant=\"{a}\""));
    }
    for s in &named {
        overrides.push(parse_override(s)?);
    }
    let base = if args.desk { RunConfig::desk() } else { RunConfig::default() };
    Ok(RunConfig::load_over(base, args.config.as_deref(), &overrides)?)
}

struct Progress {
    every: usize,
    episodes: usize,
}

impl TrainObserver for Progress {
    fn on_episode(&mut self, s: &EpisodeSummary) {
        if self.every > 0 && ((s.episode + 1) % self.every == 0 || s.episode + 1 == self.episodes) {
            eprintln!(
                "episode {:>5}/{}  decisive {:>8.4}  baseline {:>7.4}  jfi {:.4}  buffer {:>7.4}  noise {:.4}",
                s.episode + 1,
                self.episodes,
                s.mean_decisive,
                s.mean_rewards.baseline,
                s.mean_jfi,
                s.buffer_mean,
                s.noise_std
            );
        }
    }
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = resolve(&args.config)?;
    cfg.export_svg |= args.svg;
    run_training(&cfg, args.progress)?;
    println!("{}", cfg.output_dir.display());
    Ok(())
}

/// Trains `cfg` and writes everything under `cfg.output_dir`.
fn run_training(cfg: &RunConfig, progress: usize) -> anyhow::Result<()> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join("config.toml"), cfg.to_config_string().as_bytes())?;
    let started = telemetry::unix_now();
    let mut observer = Progress {
        every: progress,
        episodes: cfg.episodes,
    };
    let outcome = agents::train(cfg, Some(dir), &mut observer)?;
    let mut manifest = RunManifest {
        master_seed: cfg.master_seed,
        config: cfg.to_manifest_map(),
        version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
        started_unix: started,
        finished_unix: telemetry::unix_now(),
        files: Vec::new(),
    };
    telemetry::export(&outcome.recorder, &mut manifest, dir, cfg.export_svg)?;
    Ok(())
}

fn load_run(run: &Path) -> anyhow::Result<(RunConfig, agents::Agent)> {
    let manifest = run.join("manifest.json");
    let cfg = RunConfig::load(Some(&manifest), &[])
        .with_context(|| format!("reading {}", manifest.display()))?;
    let agent = agents::load_checkpoint(run)?;
    if agent.obs_dim() != cfg.observation_dim() || agent.act_dim() != cfg.action_dim() {
        bail!("checkpoint in {} does not match its manifest", run.display());
    }
    Ok((cfg, agent))
}

fn evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let (cfg, agent) = load_run(&args.run)?;
    let report = agents::evaluate_policy(
        &agent,
        &cfg.env,
        args.instances.unwrap_or(cfg.parallel_envs),
        args.episodes,
        args.seed.unwrap_or(cfg.master_seed),
    )?;
    let json = serde_json::to_string_pretty(&report)?;
    write_atomic(&args.run.join("evaluation.json"), json.as_bytes())?;
    println!("{json}");
    Ok(())
}

fn pattern_csv(grid: &[f64], values: &[f64]) -> String {
    let mut out = String::from("angle_rad,power_linear\n");
    for (t, v) in grid.iter().zip(values) {
        out.push_str(&format!("{},{}\n", telemetry::fmt_f64(*t), telemetry::fmt_f64(*v)));
    }
    out
}

fn pattern(args: PatternArgs) -> anyhow::Result<()> {
    let (cfg, agent) = load_run(&args.run)?;
    if args.grid < 4 {
        return Err(fairris::Error::invalid("grid", "needs at least 4 angles").into());
    }
    let out = args.out.clone().unwrap_or_else(|| args.run.join("patterns"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let seed = args.seed.unwrap_or(cfg.master_seed);
    let mut env = RisEnv::new(cfg.env.clone(), seeding::rng(seed, seeding::EVALUATION))?;
    let mut obs = env.reset()?;
    let mut action = agent.actor().predict_one(&obs)?;
    for _ in 1..args.steps.max(1) {
        obs = env.step(&action)?.observation;
        action = agent.actor().predict_one(&obs)?;
    }
    let beam = decode_action(&action, &cfg.env.scene)?;
    let (report, rewards, jfi) = env.evaluate(&beam)?;
    let grid = full_circle_grid(args.grid);
    let placement = env.placement().expect("reset places users");
    let profiles = user_patterns(&cfg.env.scene, placement, env.channel().expect("reset draws channels"), &beam, &grid)?;
    let bearings = scene_bearings(&cfg.env.scene);
    let mut users = Vec::new();
    for p in &profiles {
        let i = p.user;
        for (name, values) in [("bs", &p.bs), ("ris_dl", &p.ris_downlink), ("ris_ul", &p.ris_uplink)] {
            write_atomic(&out.join(format!("pattern_{name}_ue{i}.csv")), pattern_csv(&grid, values).as_bytes())?;
        }
        let peak_dl = front_peak(&grid, &p.ris_downlink)?;
        users.push(serde_json::json!({
            "user": i,
            "position": placement.ue_positions[i],
            "ris_to_ue_bearing_rad": p.ue_bearing,
            "ris_downlink_peak_rad": peak_dl,
            "ris_uplink_peak_rad": front_peak(&grid, &p.ris_uplink)?,
            "bs_peak_rad": front_peak(&grid, &p.bs)?,
            "downlink_peak_error_deg": (peak_dl - p.ue_bearing).abs().to_degrees(),
            "downlink_rate": report.d[i],
            "uplink_rate": report.u[i],
        }));
        if args.svg {
            let chart = svg::Chart {
                title: format!("UE {i} angular profiles (normalized)"),
                x_label: "angle (rad)".into(),
                curves: [("BS", &p.bs), ("RIS downlink", &p.ris_downlink), ("RIS uplink", &p.ris_uplink)]
                    .into_iter()
                    .map(|(label, v)| {
                        let max = v.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
                        svg::Curve {
                            label: label.into(),
                            x: grid.clone(),
                            y: v.iter().map(|x| x / max).collect(),
                            faint: false,
                        }
                    })
                    .collect(),
            };
            write_atomic(&out.join(format!("pattern_ue{i}.svg")), chart.render().as_bytes())?;
        }
    }
    let summary = serde_json::json!({
        "scene_seed": seed,
        "bs_to_ris_bearing_rad": bearings.bs_to_ris,
        "ris_to_bs_bearing_rad": bearings.ris_to_bs,
        "rewards": { "baseline": rewards.baseline, "qos": rewards.qos, "fqos": rewards.fqos },
        "jfi": jfi,
        "users": users,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    write_atomic(&out.join("pattern_summary.json"), text.as_bytes())?;
    println!("{text}");
    Ok(())
}
