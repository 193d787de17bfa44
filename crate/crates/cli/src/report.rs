use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use fairris::config::RunConfig;
use fairris::telemetry::{fmt_f64, read_series_csv, svg, write_atomic};

struct Run {
    label: String,
    dir: PathBuf,
}

fn run_label(dir: &Path) -> anyhow::Result<String> {
    let manifest = dir.join("manifest.json");
    let cfg = RunConfig::load(Some(&manifest), &[])
        .with_context(|| format!("reading {}", manifest.display()))?;
    Ok(format!("{}-{}", cfg.variant, cfg.env.decisive_reward))
}

fn series_names(dir: &Path) -> anyhow::Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".csv") {
            names.insert(stem.to_string());
        }
    }
    Ok(names)
}

fn tail_mean(v: &[f64], fraction: f64) -> f64 {
    let n = ((v.len() as f64 * fraction).round() as usize).clamp(1, v.len());
    v[v.len() - n..].iter().sum::<f64>() / n as f64
}

/// Writes one comparison CSV (and optionally SVG) per metric shared by all
/// runs, plus `summary.csv` with the tail mean of every metric per run.
pub fn run(dirs: &[PathBuf], out: &Path, tail: f64, with_svg: bool) -> anyhow::Result<()> {
    if !(tail > 0.0 && tail <= 1.0) {
        return Err(fairris::Error::invalid("tail", "must lie in (0, 1]").into());
    }
    let mut runs = Vec::new();
    for dir in dirs {
        let mut label = run_label(dir)?;
        if runs.iter().any(|r: &Run| r.label == label) {
            label = format!("{label}@{}", dir.display());
        }
        runs.push(Run {
            label,
            dir: dir.clone(),
        });
    }
    let mut shared: Option<BTreeSet<String>> = None;
    for r in &runs {
        let names = series_names(&r.dir)?;
        shared = Some(match shared {
            None => names,
            Some(s) => s.intersection(&names).cloned().collect(),
        });
    }
    let shared = shared.unwrap_or_default();
    if shared.is_empty() {
        bail!("the runs share no metric series");
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut summary = String::from("metric");
    for r in &runs {
        summary.push(',');
        summary.push_str(&r.label);
    }
    summary.push('\n');
    let mut table = Vec::new();
    for metric in &shared {
        let data = runs
            .iter()
            .map(|r| read_series_csv(&r.dir.join(format!("{metric}.csv"))))
            .collect::<fairris::Result<Vec<_>>>()?;
        let rows = data.iter().map(|(x, _, _)| x.len()).max().unwrap_or(0);
        let mut csv = String::from("x");
        for r in &runs {
            csv.push_str(&format!(",{}", r.label));
        }
        csv.push('\n');
        for i in 0..rows {
            let x = data.iter().find_map(|(x, _, _)| x.get(i)).copied().unwrap_or(f64::NAN);
            csv.push_str(&fmt_f64(x));
            for (_, _, smoothed) in &data {
                csv.push(',');
                if let Some(v) = smoothed.get(i) {
                    csv.push_str(&fmt_f64(*v));
                }
            }
            csv.push('\n');
        }
        write_atomic(&out.join(format!("compare_{metric}.csv")), csv.as_bytes())?;
        if with_svg {
            let chart = svg::Chart {
                title: metric.clone(),
                x_label: "x".into(),
                curves: runs
                    .iter()
                    .zip(&data)
                    .map(|(r, (x, _, smoothed))| svg::Curve {
                        label: r.label.clone(),
                        x: x.clone(),
                        y: smoothed.clone(),
                        faint: false,
                    })
                    .collect(),
            };
            write_atomic(&out.join(format!("compare_{metric}.svg")), chart.render().as_bytes())?;
        }
        let means: Vec<f64> = data
            .iter()
            .map(|(_, raw, _)| if raw.is_empty() { f64::NAN } else { tail_mean(raw, tail) })
            .collect();
        summary.push_str(metric);
        for m in &means {
            summary.push(',');
            summary.push_str(&fmt_f64(*m));
        }
        summary.push('\n');
        table.push((metric.clone(), means));
    }
    write_atomic(&out.join("summary.csv"), summary.as_bytes())?;

    let width = shared.iter().map(|m| m.len()).max().unwrap_or(6).max(6);
    print!("{:<width$}", "metric");
    for r in &runs {
        print!("  {:>16}", r.label);
    }
    println!();
    for (metric, means) in table {
        print!("{metric:<width$}");
        for m in means {
            print!("  {m:>16.4}");
        }
        println!();
    }
    Ok(())
}
