//! The `articulate` command line: synthesize scenes, analyze sequences,
//! score reports, and tabulate results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use articulate_core::eval::{evaluate, MetricBlock};
use articulate_core::ingest::{
    load_ground_truth, load_report, load_sequence, save_report, AnalysisReport, MANIFEST_FILE,
};
use articulate_core::optimizer::OptimConfig;
use articulate_core::pipeline::analyze;
use articulate_core::synth::{builtin_suite, generate, SceneSpec};
use articulate_core::Error;

#[derive(Debug, Parser)]
#[command(name = "articulate", version, about = "Motion parts and screw axes from segmented point-cloud sequences")]
pub struct Cli {
    /// Progress and verdict details on stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic scenes with ground truth.
    Synth {
        /// Write every scene of the builtin suite.
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        suite: bool,
        /// Scene specification (JSON).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory; its parent must exist.
        out: PathBuf,
    },
    /// Recover motion parts and axes of a scene directory.
    Analyze {
        scene_dir: PathBuf,
        /// Optimizer settings (JSON); omitted fields keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Per-iteration loss trace (CSV).
        #[arg(long)]
        trace: Option<PathBuf>,
        report: PathBuf,
    },
    /// Score a report against ground truth and store the metrics in it.
    Eval { report: PathBuf, truth: PathBuf },
    /// Tabulate scored reports by category.
    Report {
        #[arg(long)]
        csv: bool,
        /// Glob of report files, e.g. 'out/*.json'.
        pattern: String,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { suite, spec, out } => {
            let dirs = cmd_synth(spec.as_deref(), suite, &out)?;
            if cli.verbose {
                for d in dirs {
                    eprintln!("wrote {}", d.display());
                }
            }
        }
        Command::Analyze {
            scene_dir,
            config,
            seed,
            trace,
            report,
        } => {
            let r = cmd_analyze(&scene_dir, config.as_deref(), seed, trace.as_deref(), &report)?;
            if cli.verbose {
                for p in &r.parts {
                    eprintln!(
                        "part {}: {} (α {:.4}, φ {:.4})",
                        p.label, p.motion_type, p.total_alpha, p.total_phi
                    );
                }
                for l in &r.pruned {
                    eprintln!("part {l}: pruned");
                }
            }
        }
        Command::Eval { report, truth } => {
            let m = cmd_eval(&report, &truth)?;
            print!("{}", metrics_table(&m));
        }
        Command::Report { csv, pattern } => {
            print!("{}", cmd_report(&pattern, csv)?);
        }
    }
    Ok(())
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    if out.is_dir() {
        return Ok(());
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        bail!(
            "cannot create {}: parent directory {} does not exist",
            out.display(),
            parent.display()
        );
    }
    fs::create_dir(out).with_context(|| format!("cannot create {}", out.display()))
}

/// Writes one scene directory per spec under `out`; returns their paths.
pub fn cmd_synth(spec: Option<&Path>, suite: bool, out: &Path) -> Result<Vec<PathBuf>> {
    let specs = match (spec, suite) {
        (Some(path), false) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read spec {}", path.display()))?;
            vec![SceneSpec::from_json(&text)
                .with_context(|| format!("invalid spec {}", path.display()))?]
        }
        (None, true) => builtin_suite(),
        _ => bail!("pass exactly one of --suite or --spec PATH"),
    };
    // generate everything before touching the filesystem
    let scenes = specs
        .iter()
        .map(|s| generate(s).map(|scene| (s.name.clone(), scene)))
        .collect::<std::result::Result<Vec<_>, Error>>()?;
    ensure_out_dir(out)?;
    let mut dirs = Vec::new();
    for (name, scene) in scenes {
        let dir = out.join(name);
        scene.save(&dir)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<OptimConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            serde_json::from_str::<OptimConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => OptimConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_analyze(
    scene_dir: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    trace: Option<&Path>,
    report_path: &Path,
) -> Result<AnalysisReport> {
    let cfg = load_config(config, seed)?;
    let seq = load_sequence(scene_dir)?;
    let (report, loss) = analyze(&seq, &cfg)?;
    save_report(&report, report_path)?;
    if let Some(t) = trace {
        loss.write_csv(t)?;
    }
    Ok(report)
}

/// Scores `report_path` against `truth_path`, stores the metrics in the
/// report, and returns them. The scene next to the truth file, if any, is
/// used for point-level IOU.
pub fn cmd_eval(report_path: &Path, truth_path: &Path) -> Result<MetricBlock> {
    let mut report = load_report(report_path)?;
    let truth = load_ground_truth(truth_path)?;
    let scene_dir = truth_path.parent().unwrap_or(Path::new("."));
    let seq = if scene_dir.join(MANIFEST_FILE).is_file() {
        Some(load_sequence(scene_dir)?)
    } else {
        None
    };
    let metrics = evaluate(&report, &truth, seq.as_ref())?;
    report.metrics = Some(metrics);
    save_report(&report, report_path)?;
    Ok(metrics)
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

pub fn metrics_table(m: &MetricBlock) -> String {
    let rows = [
        ("AE(deg)", m.ae_deg),
        ("PE", m.pe),
        ("TA", Some(m.ta)),
        ("IOU", Some(m.iou)),
    ];
    let mut out = String::new();
    for (name, v) in rows {
        let _ = writeln!(out, "{name:<8} {}", fmt_metric(v));
    }
    out
}

/// Category of a report file: its name up to the first '.'.
pub fn category_of(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_string()
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Category × metric table (metrics as rows) with a trailing Mean column
/// over categories.
pub fn cmd_report(pattern: &str, csv: bool) -> Result<String> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| anyhow!("bad pattern {pattern:?}: {e}"))?
        .collect::<std::result::Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no reports match {pattern:?}");
    }
    let mut by_category: BTreeMap<String, Vec<MetricBlock>> = BTreeMap::new();
    for path in &paths {
        let report = load_report(path)?;
        let metrics = report.metrics.ok_or_else(|| {
            anyhow!(
                "{} has no metrics; run `articulate eval {} TRUTH` first",
                path.display(),
                path.display()
            )
        })?;
        by_category.entry(category_of(path)).or_default().push(metrics);
    }

    type Pick = fn(&MetricBlock) -> Option<f64>;
    let rows: [(&str, Pick); 4] = [
        ("AE(deg)", |m| m.ae_deg),
        ("PE", |m| m.pe),
        ("TA", |m| Some(m.ta)),
        ("IOU", |m| Some(m.iou)),
    ];
    let mut header = vec!["metric".to_string()];
    header.extend(by_category.keys().cloned());
    header.push("Mean".into());
    let mut table = vec![header];
    for (name, pick) in rows {
        let per_cat: Vec<Option<f64>> = by_category
            .values()
            .map(|ms| mean(&ms.iter().filter_map(pick).collect::<Vec<_>>()))
            .collect();
        let overall = mean(&per_cat.iter().flatten().copied().collect::<Vec<_>>());
        let mut row = vec![name.to_string()];
        row.extend(per_cat.into_iter().map(fmt_metric));
        row.push(fmt_metric(overall));
        table.push(row);
    }

    let mut out = String::new();
    if csv {
        for row in table {
            out.push_str(&row.join(","));
            out.push('\n');
        }
    } else {
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        for row in table {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| {
                    if i == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
    }
    Ok(out)
}
