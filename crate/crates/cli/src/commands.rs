use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use treecast::export::{
    ic_table, write_attachments_csv, write_ic_csv, write_json, write_predictions_jsonl, write_regimes_csv,
    write_report_csv, TreeDoc, WindowDoc,
};
use treecast::oracle::{simulate_regime_panel, verify_panel, ClusterSpec};
use treecast::{
    attach_to_tree, attachment_scores, build_tree, path_to_root, predict as predict_at, run_backtest, Error,
    LevelEstimate, Panel, PipelineConfig, Side, TreeEpoch, WidthMetric,
};

use crate::manifest::Recorder;
use crate::{Invalid, PanelArgs};

fn read_text(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Invalid(format!("cannot read {what} {}: {e}", path.display())).into())
}

fn load_config(path: Option<&Path>, rec: &mut Recorder) -> Result<PipelineConfig> {
    let cfg = match path {
        Some(p) => {
            rec.input(p);
            PipelineConfig::from_kv_str(&read_text(p, "config file")?)
                .with_context(|| format!("in config file {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    rec.config(cfg.to_kv_string());
    Ok(cfg)
}

fn load_panel(path: &Path, target: &str, cfg: &PipelineConfig, rec: &mut Recorder) -> Result<Panel> {
    let file = File::open(path).map_err(|e| Invalid(format!("cannot open panel {}: {e}", path.display())))?;
    rec.input(path);
    rec.option("target", target);
    let panel = treecast::load_panel(std::io::BufReader::new(file), target, cfg.fill)
        .with_context(|| format!("in panel {}", path.display()))?;
    log::info!(
        "loaded {} rows x {} signals from {}",
        panel.len(),
        panel.n_signals(),
        path.display()
    );
    Ok(panel)
}

fn setup(args: &PanelArgs, rec: &mut Recorder) -> Result<(Panel, PipelineConfig)> {
    let cfg = load_config(args.config.as_deref(), rec)?;
    let panel = load_panel(&args.panel, &args.target, &cfg, rec)?;
    Ok((panel, cfg))
}

/// Row of the last panel date on or before `as_of`, or the last row.
fn as_of_row(panel: &Panel, as_of: Option<&str>, rec: &mut Recorder) -> Result<usize> {
    let Some(text) = as_of else {
        return Ok(panel.len() - 1);
    };
    rec.option("as_of", text);
    let date = chrono::NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .map_err(|_| Invalid(format!("--as-of expects YYYY-MM-DD, got {text:?}")))?;
    let after = panel.dates().partition_point(|d| *d <= date);
    after
        .checked_sub(1)
        .ok_or_else(|| Invalid(format!("--as-of {text} precedes the first panel date")).into())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_with<F>(path: &Path, rec: &mut Recorder, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> treecast::Result<()>,
{
    let mut w = create(path)?;
    body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    rec.output(path);
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn tree_doc(epoch: &TreeEpoch<f64>, panel: &Panel) -> TreeDoc {
    TreeDoc::new(
        &epoch.tree,
        epoch.score,
        epoch.side,
        WindowDoc::new(epoch.window, panel.dates()),
        panel.names(),
        &epoch.excluded,
    )
}

pub fn tree(args: &PanelArgs, as_of: Option<&str>, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("tree");
    let (panel, cfg) = setup(args, &mut rec)?;
    let t = as_of_row(&panel, as_of, &mut rec)?;
    let epoch = build_tree(&panel, t, &cfg.backtest)?;
    write_with(out, &mut rec, |w| write_json(&tree_doc(&epoch, &panel), w))?;
    rec.finish(&sidecar(out))
}

#[derive(Serialize)]
struct ScoreDoc<'a> {
    signal: &'a str,
    score: Option<f64>,
    in_tree: bool,
}

#[derive(Serialize)]
struct AttachDoc<'a> {
    as_of: chrono::NaiveDate,
    i_star: &'a str,
    preferred: &'a str,
    path: Vec<&'a str>,
    levels_used: usize,
    full_length: usize,
    scores: Vec<ScoreDoc<'a>>,
}

pub fn attach(args: &PanelArgs, as_of: Option<&str>, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("attach");
    let (panel, cfg) = setup(args, &mut rec)?;
    let t = as_of_row(&panel, as_of, &mut rec)?;
    let epoch = build_tree(&panel, t, &cfg.backtest)?;
    let acfg = cfg.backtest.attachment();
    let a = attach_to_tree(&panel, &epoch.tree, t, &acfg)?;
    let path = path_to_root(&epoch.tree, a.i_star, cfg.backtest.max_levels)?;
    let scores = attachment_scores(&panel, t, &acfg)?;
    let doc = AttachDoc {
        as_of: panel.dates()[t],
        i_star: panel.name(a.i_star),
        preferred: panel.name(a.preferred),
        path: path.nodes.iter().map(|&i| panel.name(i)).collect(),
        levels_used: path.levels_used,
        full_length: path.full_length,
        scores: scores
            .iter()
            .enumerate()
            .map(|(i, s)| ScoreDoc {
                signal: panel.name(i),
                score: *s,
                in_tree: epoch.tree.contains(i),
            })
            .collect(),
    };
    write_with(out, &mut rec, |w| write_json(&doc, w))?;
    rec.finish(&sidecar(out))
}

#[derive(Serialize)]
struct ConditionalDoc {
    level: usize,
    support: Vec<f64>,
    mass: Vec<f64>,
    realization: Vec<f64>,
    fallback_used: bool,
    clamped: bool,
}

#[derive(Serialize)]
struct PredictDoc<'a> {
    as_of: chrono::NaiveDate,
    i_star: &'a str,
    path: Vec<&'a str>,
    per_level: &'a [LevelEstimate<f64>],
    union_interval: (f64, f64),
    x_star: f64,
    conditionals: Vec<ConditionalDoc>,
}

pub fn predict(args: &PanelArgs, as_of: Option<&str>, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("predict");
    let (panel, cfg) = setup(args, &mut rec)?;
    let t = as_of_row(&panel, as_of, &mut rec)?;
    let epoch = build_tree(&panel, t, &cfg.backtest)?;
    let a = attach_to_tree(&panel, &epoch.tree, t, &cfg.backtest.attachment())?;
    let path = path_to_root(&epoch.tree, a.i_star, cfg.backtest.max_levels)?.at(panel.dates()[t]);
    let p = predict_at(&panel, &path, t, &cfg.backtest.predictor())?;
    let doc = PredictDoc {
        as_of: panel.dates()[t],
        i_star: panel.name(a.i_star),
        path: path.nodes.iter().map(|&i| panel.name(i)).collect(),
        per_level: &p.per_level,
        union_interval: p.union_interval,
        x_star: p.x_star,
        conditionals: p
            .conditionals
            .iter()
            .map(|c| ConditionalDoc {
                level: c.level,
                support: c.support.clone(),
                mass: c.mass.clone(),
                realization: c.realization.clone(),
                fallback_used: c.fallback_used,
                clamped: c.clamped,
            })
            .collect(),
    };
    write_with(out, &mut rec, |w| write_json(&doc, w))?;
    rec.finish(&sidecar(out))
}

pub fn backtest(args: &PanelArgs, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("backtest");
    let (panel, cfg) = setup(args, &mut rec)?;
    let log = run_backtest(&panel, &cfg.backtest)?;
    log::info!("{} evaluation days, {} attachment events", log.days.len(), log.attachments.len());
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_with(&out.join("predictions.jsonl"), &mut rec, |w| write_predictions_jsonl(&log, w))?;
    let ic = ic_table(&log)?;
    write_with(&out.join("monthly_ic.csv"), &mut rec, |w| write_ic_csv(&ic, w))?;
    write_with(&out.join("attachments.csv"), &mut rec, |w| write_attachments_csv(&log, w))?;
    if let Some(epoch) = log.trees.last() {
        write_with(&out.join("tree.json"), &mut rec, |w| write_json(&tree_doc(epoch, &panel), w))?;
    }
    rec.finish(&out.join("manifest.json"))
}

pub fn report(args: &PanelArgs, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("report");
    let (panel, cfg) = setup(args, &mut rec)?;
    let log = run_backtest(&panel, &cfg.backtest)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_with(&out.join("report.csv"), &mut rec, |w| write_report_csv(&log, w))?;
    rec.finish(&out.join("manifest.json"))
}

pub fn simulate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("simulate");
    let mut spec = match config {
        Some(p) => {
            rec.input(p);
            ClusterSpec::from_kv_str(&read_text(p, "config file")?)
                .with_context(|| format!("in config file {}", p.display()))?
        }
        None => ClusterSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    rec.config(spec.to_kv_string());
    let model = spec.model()?;
    let (panel, regimes) = simulate_regime_panel::<f64>(&model)?;
    write_with(out, &mut rec, |w| treecast::write_panel(&panel, w))?;
    let regimes_path = out.with_file_name("regimes.csv");
    write_with(&regimes_path, &mut rec, |w| {
        write_regimes_csv(panel.dates(), &regimes, panel.names(), w)
    })?;
    rec.finish(&sidecar(out))
}

pub fn verify_props(panel_path: &Path, target: &str, side: &str, tolerance: f64, out: &Path) -> Result<()> {
    let mut rec = Recorder::new("verify-props");
    let side: Side = side.parse().map_err(|e: Error| Invalid(format!("--side: {e}")))?;
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(Invalid("--tolerance must be nonnegative".into()).into());
    }
    rec.option("side", side);
    rec.option("tolerance", tolerance);
    let cfg = PipelineConfig::default();
    rec.config(cfg.to_kv_string());
    let panel = load_panel(panel_path, target, &cfg, &mut rec)?;
    let report = verify_panel(&panel, side, WidthMetric::default(), tolerance)?;
    if !report.is_clean() {
        log::warn!("property checks found violations; see {}", out.display());
    }
    write_with(out, &mut rec, |w| write_json(&report, w))?;
    rec.finish(&sidecar(out))
}

/// Remediation advice for common failures.
pub fn hint(err: &anyhow::Error) -> Option<&'static str> {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return Some(match e {
                Error::MissingTargetColumn(_) => "pass --target with a column name from the panel header",
                Error::MissingDateColumn(_) => "the first header cell must be `date`",
                Error::MalformedDate { .. } | Error::UnorderedDate { .. } | Error::DuplicateDate { .. } => {
                    "dates must be ISO YYYY-MM-DD, strictly increasing, one row per date"
                }
                Error::NonNumeric { .. } => "cells must be plain decimal numbers (no thousands separators)",
                Error::MissingValue { .. } | Error::GapTooLong { .. } => {
                    "fill the gap in the data or set fill_policy = forward_fill:N with a larger N"
                }
                Error::InsufficientHistory { .. } | Error::WindowTooShort { .. } => {
                    "use a later start_date or shorter windows (attach_window, min_tree_window)"
                }
                Error::InvalidConfig { .. } => "see the README for the accepted configuration keys and values",
                _ => return None,
            });
        }
        if cause.downcast_ref::<Invalid>().is_some() {
            return Some("check the command line; run with --help for usage");
        }
    }
    None
}
