//! Training metrics: replay-buffer mean reward per timestep, per-episode
//! reward means, mean Jain index and Jain index at the best decisive reward.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rewards::{RewardKind, RewardSet};

pub const BUFFER_MEAN: &str = "buffer_mean_reward";
pub const BUFFER_MEAN_LEARNER: &str = "buffer_mean_reward_learner";
pub const EPISODE_BASELINE: &str = "episode_baseline_reward";
pub const EPISODE_QOS: &str = "episode_qos_reward";
pub const EPISODE_FQOS: &str = "episode_fqos_reward";
pub const EPISODE_MEAN_JFI: &str = "episode_mean_jfi";
pub const EPISODE_JFI_AT_BEST: &str = "episode_jfi_at_best";

pub fn episode_reward_series(kind: RewardKind) -> &'static str {
    match kind {
        RewardKind::Baseline => EPISODE_BASELINE,
        RewardKind::Qos => EPISODE_QOS,
        RewardKind::Fqos => EPISODE_FQOS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XAxis {
    Timestep,
    LearnerStep,
    Episode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub x_axis: XAxis,
    pub x: Vec<f64>,
    pub raw: Vec<f64>,
    pub window: usize,
}

impl MetricSeries {
    pub fn new(name: &str, x_axis: XAxis, window: usize) -> Self {
        Self {
            name: name.to_string(),
            x_axis,
            x: Vec::new(),
            raw: Vec::new(),
            window,
        }
    }

    pub fn push(&mut self, x: f64, value: f64) {
        debug_assert!(self.x.last().is_none_or(|&last| x > last), "x must increase");
        self.x.push(x);
        self.raw.push(value);
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn smoothed(&self) -> Result<Vec<f64>> {
        rolling_mean(&self.raw, self.window)
    }

    /// Mean of the last `fraction` of raw values (at least one point).
    pub fn tail_mean(&self, fraction: f64) -> Option<f64> {
        let n = ((self.raw.len() as f64 * fraction).round() as usize).clamp(1, self.raw.len().max(1));
        tail_slice_mean(&self.raw[self.raw.len().saturating_sub(n)..])
    }

    /// Mean of the first `fraction` of raw values (at least one point).
    pub fn head_mean(&self, fraction: f64) -> Option<f64> {
        let n = ((self.raw.len() as f64 * fraction).round() as usize).clamp(1, self.raw.len().max(1));
        tail_slice_mean(&self.raw[..n.min(self.raw.len())])
    }
}

fn tail_slice_mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Trailing mean over `window` points; the first `window - 1` outputs
/// average the available prefix.
pub fn rolling_mean(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::Empty("series"));
    }
    if window == 0 {
        return Err(Error::invalid("window", "must be at least 1"));
    }
    // shifted direct sums: constant windows come back bit-exact
    Ok((0..series.len())
        .map(|i| {
            let n = (i + 1).min(window);
            let w = &series[i + 1 - n..=i];
            w[0] + w.iter().map(|v| v - w[0]).sum::<f64>() / n as f64
        })
        .collect())
}

/// Per-step record kept for one environment instance during an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub decisive: f64,
    pub rewards: RewardSet,
    pub jfi: f64,
}

/// Jain index at the step with the largest decisive reward (earliest on
/// ties).
pub fn jfi_at_best(episode: &[StepRecord]) -> Result<f64> {
    let mut best: Option<&StepRecord> = None;
    for rec in episode {
        if best.is_none_or(|b| rec.decisive > b.decisive) {
            best = Some(rec);
        }
    }
    best.map(|b| b.jfi).ok_or(Error::Empty("episode"))
}

/// Collects every metric stream of a training run.
#[derive(Debug, Clone)]
pub struct Recorder {
    series: BTreeMap<String, MetricSeries>,
    episode_logs: Vec<Vec<StepRecord>>,
    current_episode: Option<usize>,
}

pub const BUFFER_WINDOW: usize = 10;
pub const REWARD_WINDOW: usize = 10;
pub const JFI_WINDOW: usize = 50;

impl Default for Recorder {
    fn default() -> Self {
        Self::new()
    }
}

impl Recorder {
    pub fn new() -> Self {
        let mut series = BTreeMap::new();
        for (name, axis, window) in [
            (BUFFER_MEAN, XAxis::Timestep, BUFFER_WINDOW),
            (BUFFER_MEAN_LEARNER, XAxis::LearnerStep, BUFFER_WINDOW),
            (EPISODE_BASELINE, XAxis::Episode, REWARD_WINDOW),
            (EPISODE_QOS, XAxis::Episode, REWARD_WINDOW),
            (EPISODE_FQOS, XAxis::Episode, REWARD_WINDOW),
            (EPISODE_MEAN_JFI, XAxis::Episode, JFI_WINDOW),
            (EPISODE_JFI_AT_BEST, XAxis::Episode, JFI_WINDOW),
        ] {
            series.insert(name.to_string(), MetricSeries::new(name, axis, window));
        }
        Self {
            series,
            episode_logs: Vec::new(),
            current_episode: None,
        }
    }

    pub fn series(&self, name: &str) -> Option<&MetricSeries> {
        self.series.get(name)
    }

    pub fn all_series(&self) -> impl Iterator<Item = &MetricSeries> {
        self.series.values()
    }

    /// Records one environment step of `instance` in `episode`.
    ///
    /// `buffer_mean`, when given, is appended to the timestep series at
    /// `timestep` (and to the learner-step series when `learner_step` is set).
    #[allow(clippy::too_many_arguments)]
    pub fn record_step(
        &mut self,
        episode: usize,
        instance: usize,
        record: StepRecord,
        buffer_mean: Option<(u64, f64)>,
        learner_step: Option<u64>,
    ) {
        if self.current_episode != Some(episode) {
            self.flush_episode();
            self.current_episode = Some(episode);
        }
        if self.episode_logs.len() <= instance {
            self.episode_logs.resize_with(instance + 1, Vec::new);
        }
        self.episode_logs[instance].push(record);
        if let Some((timestep, mean)) = buffer_mean {
            self.series.get_mut(BUFFER_MEAN).unwrap().push(timestep as f64, mean);
            if let Some(step) = learner_step {
                self.series
                    .get_mut(BUFFER_MEAN_LEARNER)
                    .unwrap()
                    .push(step as f64, mean);
            }
        }
    }

    /// Closes the running episode: appends the mean of each reward and of
    /// the Jain index over all its steps and instances, and the instance
    /// average of the Jain index at the best decisive reward.
    pub fn flush_episode(&mut self) {
        let Some(episode) = self.current_episode.take() else {
            return;
        };
        let logs: Vec<Vec<StepRecord>> = std::mem::take(&mut self.episode_logs)
            .into_iter()
            .filter(|l| !l.is_empty())
            .collect();
        if logs.is_empty() {
            return;
        }
        let all: Vec<&StepRecord> = logs.iter().flatten().collect();
        let n = all.len() as f64;
        let mean = |f: &dyn Fn(&StepRecord) -> f64| all.iter().map(|r| f(r)).sum::<f64>() / n;
        let x = episode as f64;
        let push = |s: &mut BTreeMap<String, MetricSeries>, name: &str, v: f64| {
            s.get_mut(name).unwrap().push(x, v);
        };
        push(&mut self.series, EPISODE_BASELINE, mean(&|r| r.rewards.baseline));
        push(&mut self.series, EPISODE_QOS, mean(&|r| r.rewards.qos));
        push(&mut self.series, EPISODE_FQOS, mean(&|r| r.rewards.fqos));
        push(&mut self.series, EPISODE_MEAN_JFI, mean(&|r| r.jfi));
        let at_best: f64 = logs
            .iter()
            .map(|l| jfi_at_best(l).expect("non-empty"))
            .sum::<f64>()
            / logs.len() as f64;
        push(&mut self.series, EPISODE_JFI_AT_BEST, at_best);
    }
}

/// Everything needed to rerun and audit a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub master_seed: u64,
    /// Resolved configuration as flat dotted keys.
    pub config: BTreeMap<String, serde_json::Value>,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<String>,
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn series_csv(series: &MetricSeries) -> Result<String> {
    let smoothed = series.smoothed()?;
    let mut out = String::from("x,raw,smoothed\n");
    for ((x, r), s) in series.x.iter().zip(&series.raw).zip(&smoothed) {
        writeln!(out, "{},{},{}", fmt_f64(*x), fmt_f64(*r), fmt_f64(*s)).unwrap();
    }
    Ok(out)
}

/// Parses a `x,raw,smoothed` file back into columns.
pub fn read_series_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some("x,raw,smoothed") => {}
        other => return Err(bad(format!("unexpected header {other:?}"))),
    }
    let (mut x, mut raw, mut sm) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(bad(format!("line {} has {} columns", i + 2, cols.len())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 2)));
        x.push(parse(cols[0])?);
        raw.push(parse(cols[1])?);
        sm.push(parse(cols[2])?);
    }
    Ok((x, raw, sm))
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes one CSV per non-empty series, optional SVG charts, and the
/// manifest (whose `files` lists everything written, itself included).
pub fn export(
    recorder: &Recorder,
    manifest: &mut RunManifest,
    output_dir: &Path,
    svg: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let mut written = Vec::new();
    for series in recorder.all_series().filter(|s| !s.is_empty()) {
        let path = output_dir.join(format!("{}.csv", series.name));
        write_atomic(&path, series_csv(series)?.as_bytes())?;
        written.push(path);
        if svg {
            let path = output_dir.join(format!("{}.svg", series.name));
            let chart = svg::Chart {
                title: series.name.clone(),
                x_label: format!("{:?}", series.x_axis).to_lowercase(),
                curves: vec![
                    svg::Curve {
                        label: "raw".into(),
                        x: series.x.clone(),
                        y: series.raw.clone(),
                        faint: true,
                    },
                    svg::Curve {
                        label: format!("rolling mean ({})", series.window),
                        x: series.x.clone(),
                        y: series.smoothed()?,
                        faint: false,
                    },
                ],
            };
            write_atomic(&path, chart.render().as_bytes())?;
            written.push(path);
        }
    }
    let manifest_path = output_dir.join("manifest.json");
    written.push(manifest_path.clone());
    manifest.files = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_atomic(&manifest_path, json.as_bytes())?;
    Ok(written)
}

pub mod svg {
    //! Minimal line charts.

    use std::fmt::Write as _;

    const PALETTE: [&str; 8] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
    ];

    #[derive(Debug, Clone)]
    pub struct Curve {
        pub label: String,
        pub x: Vec<f64>,
        pub y: Vec<f64>,
        pub faint: bool,
    }

    #[derive(Debug, Clone)]
    pub struct Chart {
        pub title: String,
        pub x_label: String,
        pub curves: Vec<Curve>,
    }

    fn escape(s: &str) -> String {
        s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
    }

    impl Chart {
        pub fn render(&self) -> String {
            let (w, h, m) = (720.0, 420.0, 50.0);
            let finite = |v: &&f64| v.is_finite();
            let xs = self.curves.iter().flat_map(|c| c.x.iter()).filter(finite);
            let ys = self.curves.iter().flat_map(|c| c.y.iter()).filter(finite);
            let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let (x0, x1) = if x0 < x1 { (x0, x1) } else { (x0 - 1.0, x0 + 1.0) };
            let (y0, y1) = if y0 < y1 { (y0, y1) } else { (y0 - 1.0, y0 + 1.0) };
            let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
            let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

            let mut out = String::new();
            writeln!(
                out,
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
            )
            .unwrap();
            writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
            writeln!(
                out,
                r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
                w / 2.0,
                escape(&self.title)
            )
            .unwrap();
            writeln!(
                out,
                r##"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
                w - 2.0 * m,
                h - 2.0 * m
            )
            .unwrap();
            for (v, y) in [(y0, h - m), (y1, m)] {
                writeln!(
                    out,
                    r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{:.3}</text>"#,
                    m - 4.0,
                    y + 4.0,
                    v
                )
                .unwrap();
            }
            for (v, x) in [(x0, m), (x1, w - m)] {
                writeln!(
                    out,
                    r#"<text x="{x}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
                    h - m + 16.0,
                    v
                )
                .unwrap();
            }
            writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
                w / 2.0,
                h - 8.0,
                escape(&self.x_label)
            )
            .unwrap();
            for (i, c) in self.curves.iter().enumerate() {
                let color = PALETTE[i % PALETTE.len()];
                let mut pts = String::new();
                for (&x, &y) in c.x.iter().zip(&c.y) {
                    if x.is_finite() && y.is_finite() {
                        write!(pts, "{:.2},{:.2} ", px(x), py(y)).unwrap();
                    }
                }
                let opacity = if c.faint { 0.3 } else { 1.0 };
                writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-opacity="{opacity}" stroke-width="1.5" points="{}"/>"#,
                    pts.trim_end()
                )
                .unwrap();
                writeln!(
                    out,
                    r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
                    m + 8.0,
                    m + 14.0 + 14.0 * i as f64,
                    escape(&c.label)
                )
                .unwrap();
            }
            out.push_str("</svg>\n");
            out
        }
    }
}
