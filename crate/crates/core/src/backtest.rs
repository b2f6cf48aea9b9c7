//! Walk-forward evaluation over an expanding window.
//!
//! Each evaluation row `t` predicts the target at row `t + 1` from data dated
//! up to `t`: the signal tree is re-estimated on the expanding window at the
//! configured refresh cadence, the attachment node is re-estimated every
//! `cadence` evaluation days, and daily effective estimates are summed within
//! each calendar month to score monthly information coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;

use crate::attachment::{attach_to_tree, path_to_root, AttachmentConfig, AttachmentPath, DemeanPolicy};
use crate::error::{Error, Result};
use crate::histogram::HistogramConfig;
use crate::panel::{RowWindow, Side, SignalPanel};
use crate::predictor::{predict, LevelEstimate, MixtureMode, PredictorConfig};
use crate::scalar::Scalar;
use crate::similarity::panel_similarity;
use crate::tree::{select_widest_tree, width_score, RootedTree, WidthMetric};

/// When the expanding-window tree is re-estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TreeRefresh {
    /// At the first evaluation day of every calendar month.
    #[default]
    Monthly,
    /// Every `n` evaluation days.
    EveryDays(usize),
    /// Once, at the first evaluation day.
    Once,
}

impl fmt::Display for TreeRefresh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeRefresh::Monthly => f.write_str("monthly"),
            TreeRefresh::EveryDays(n) => write!(f, "days:{n}"),
            TreeRefresh::Once => f.write_str("once"),
        }
    }
}

impl FromStr for TreeRefresh {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "monthly" => Ok(TreeRefresh::Monthly),
            "once" => Ok(TreeRefresh::Once),
            other => other
                .strip_prefix("days:")
                .and_then(|n| n.parse().ok())
                .filter(|n| *n > 0)
                .map(TreeRefresh::EveryDays)
                .ok_or_else(|| Error::config("tree_refresh", "expected monthly|once|days:N")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktestConfig {
    /// First predicted date (inclusive); defaults to the earliest feasible.
    pub start_date: Option<NaiveDate>,
    /// Last predicted date (inclusive).
    pub end_date: Option<NaiveDate>,
    pub attach_window: usize,
    pub cadence: usize,
    pub max_levels: usize,
    pub side: Side,
    pub histogram: HistogramConfig,
    pub tree_refresh: TreeRefresh,
    /// Minimum number of rows in the expanding tree window.
    pub min_tree_window: usize,
    pub width_metric: WidthMetric,
    pub mixture: MixtureMode,
    pub attach_demean: DemeanPolicy,
    pub demean_target: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            start_date: None,
            end_date: None,
            attach_window: 250,
            cadence: 5,
            max_levels: 4,
            side: Side::Upper,
            histogram: HistogramConfig::default(),
            tree_refresh: TreeRefresh::Monthly,
            min_tree_window: 250,
            width_metric: WidthMetric::PathCost,
            mixture: MixtureMode::Renormalized,
            attach_demean: DemeanPolicy::WindowLocal,
            demean_target: true,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        self.histogram.validate()?;
        if self.attach_window < self.histogram.bins_per_dim * 4 {
            return Err(Error::config(
                "attach_window",
                format!("must be at least 4 * bins_per_dim = {}", self.histogram.bins_per_dim * 4),
            ));
        }
        if self.cadence == 0 {
            return Err(Error::config("cadence", "must be at least 1"));
        }
        if self.max_levels == 0 {
            return Err(Error::config("max_levels", "must be at least 1"));
        }
        if self.min_tree_window < 2 {
            return Err(Error::config("min_tree_window", "must be at least 2"));
        }
        if let (Some(a), Some(b)) = (self.start_date, self.end_date) {
            if b < a {
                return Err(Error::config("end_date", "precedes start_date"));
            }
        }
        Ok(())
    }

    pub fn attachment(&self) -> AttachmentConfig {
        AttachmentConfig {
            window: self.attach_window,
            side: self.side,
            demean: self.attach_demean,
            demean_target: self.demean_target,
        }
    }

    pub fn predictor(&self) -> PredictorConfig {
        PredictorConfig {
            histogram: self.histogram,
            mixture: self.mixture,
            side: self.side,
        }
    }

    /// First as-of row with enough history for both the tree and attachment.
    pub fn first_feasible_row(&self) -> usize {
        self.attach_window.max(self.min_tree_window - 1)
    }
}

/// A tree estimated on the expanding window ending at `window.end`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEpoch<T> {
    pub built_at: NaiveDate,
    pub window: RowWindow,
    pub side: Side,
    pub tree: RootedTree<T>,
    pub score: T,
    pub excluded: Vec<usize>,
}

/// One per-level row of the prediction log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow<T> {
    /// Date of the predicted return.
    pub date: NaiveDate,
    pub as_of: NaiveDate,
    pub level: usize,
    pub x_star: T,
    /// Month-to-date sum of `x_star` at this level.
    pub x_star_mtd: T,
    pub realized: T,
    pub realized_mtd: T,
    pub interval: (T, T),
    pub i_star: usize,
    pub path: Vec<usize>,
}

/// Everything computed for one evaluation day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord<T> {
    pub date: NaiveDate,
    pub as_of: NaiveDate,
    pub as_of_row: usize,
    pub realized: T,
    /// Set when no prediction could be made for the day.
    pub gap: Option<String>,
    pub path: Option<AttachmentPath>,
    pub per_level: Vec<LevelEstimate<T>>,
    pub union_interval: Option<(T, T)>,
    pub x_star: Option<T>,
    /// Effective estimate for each level `0..max_levels`; levels past the end
    /// of a short path repeat the full-path estimate.
    pub x_star_by_level: Vec<T>,
}

/// Attachment re-estimation event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttachmentEvent {
    pub as_of: NaiveDate,
    pub i_star: usize,
    pub preferred: usize,
    pub path: Vec<usize>,
    pub levels_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionLog<T> {
    pub max_levels: usize,
    pub names: Vec<String>,
    pub days: Vec<DayRecord<T>>,
    pub rows: Vec<LogRow<T>>,
    pub attachments: Vec<AttachmentEvent>,
    pub trees: Vec<TreeEpoch<T>>,
    /// Number of panel rows per calendar month, for completeness checks.
    pub month_sizes: BTreeMap<(i32, u32), usize>,
}

fn month_key(d: NaiveDate) -> (i32, u32) {
    (d.year(), d.month())
}

/// Widest tree on the expanding window `[0, t]`.
pub fn build_tree<T: Scalar>(panel: &SignalPanel<T>, t: usize, cfg: &BacktestConfig) -> Result<TreeEpoch<T>> {
    let window = RowWindow::new(0, t + 1);
    let (sim, set) = panel_similarity(panel, cfg.side, window)?;
    let tree = if sim.len() == 1 {
        RootedTree {
            root: sim.nodes()[0],
            parent: BTreeMap::new(),
            edge_sim: BTreeMap::new(),
            birth_order: vec![sim.nodes()[0]],
        }
    } else {
        select_widest_tree(&sim, cfg.width_metric)?
    };
    Ok(TreeEpoch {
        built_at: panel.dates()[t],
        window,
        side: cfg.side,
        score: width_score(&tree, cfg.width_metric),
        tree,
        excluded: set.excluded,
    })
}

/// Evaluation as-of rows for the configured date range.
pub fn evaluation_rows<T: Scalar>(panel: &SignalPanel<T>, cfg: &BacktestConfig) -> Result<std::ops::Range<usize>> {
    let feasible = cfg.first_feasible_row();
    let last = panel.len().saturating_sub(1);
    // as-of row t predicts row t + 1
    let first = match cfg.start_date {
        Some(d) => {
            let predicted = panel.first_row_on_or_after(d);
            if predicted >= panel.len() {
                return Ok(0..0);
            }
            let t = predicted.saturating_sub(1);
            if t < feasible || predicted == 0 {
                return Err(Error::InsufficientHistory {
                    needed: feasible,
                    available: t,
                });
            }
            t
        }
        None => feasible,
    };
    let end = match cfg.end_date {
        Some(d) => panel.dates().partition_point(|x| *x <= d).saturating_sub(1),
        None => last,
    };
    Ok(first..end.max(first))
}

/// Tree and path for one evaluation day, or the reason there is none.
type PlannedDay<T> = std::result::Result<(Arc<TreeEpoch<T>>, AttachmentPath), String>;

/// Runs the walk-forward protocol over the panel.
pub fn run_backtest<T: Scalar>(panel: &SignalPanel<T>, cfg: &BacktestConfig) -> Result<PredictionLog<T>> {
    cfg.validate()?;
    if panel.n_signals() < 2 {
        return Err(Error::TooFewNodes(panel.n_signals()));
    }
    let rows = evaluation_rows(panel, cfg)?;
    let dates = panel.dates();
    let attach_cfg = cfg.attachment();

    // Sequential pass: tree epochs and attachment paths.
    let mut trees: Vec<TreeEpoch<T>> = Vec::new();
    let mut attachments = Vec::new();
    let mut plan: Vec<(usize, PlannedDay<T>)> = Vec::new();
    let mut epoch: Option<std::result::Result<Arc<TreeEpoch<T>>, String>> = None;
    let mut epoch_month = None;
    let mut current: Option<AttachmentPath> = None;
    for (k, t) in rows.clone().enumerate() {
        let refresh = match cfg.tree_refresh {
            TreeRefresh::Once => epoch.is_none(),
            TreeRefresh::EveryDays(n) => k % n == 0,
            TreeRefresh::Monthly => epoch_month != Some(month_key(dates[t])),
        };
        if refresh {
            epoch_month = Some(month_key(dates[t]));
            epoch = Some(match build_tree(panel, t, cfg) {
                Ok(e) => {
                    trees.push(e.clone());
                    Ok(Arc::new(e))
                }
                Err(Error::AllDegenerate) => Err("all signals degenerate in tree window".to_string()),
                Err(e) => return Err(e),
            });
        }
        let tree = match epoch.as_ref().expect("epoch set on first day") {
            Ok(tree) => tree.clone(),
            Err(reason) => {
                plan.push((t, Err(reason.clone())));
                current = None;
                continue;
            }
        };
        let stale = current.as_ref().is_some_and(|p| !tree.tree.contains(p.i_star));
        if k % cfg.cadence == 0 || current.is_none() || stale {
            match attach_to_tree(panel, &tree.tree, t, &attach_cfg) {
                Ok(a) => {
                    let path = path_to_root(&tree.tree, a.i_star, cfg.max_levels)?.at(dates[t]);
                    attachments.push(AttachmentEvent {
                        as_of: dates[t],
                        i_star: a.i_star,
                        preferred: a.preferred,
                        path: path.nodes.clone(),
                        levels_used: path.levels_used,
                    });
                    current = Some(path);
                }
                Err(Error::AllDegenerate) => {
                    plan.push((t, Err("all signals degenerate in attachment window".into())));
                    current = None;
                    continue;
                }
                Err(e) => return Err(e),
            }
        } else if let Some(p) = current.as_mut() {
            // Same attachment node; the path follows the current tree.
            if refresh {
                *p = path_to_root(&tree.tree, p.i_star, cfg.max_levels)?.at(p.as_of.unwrap_or(dates[t]));
            }
        }
        plan.push((t, Ok((tree, current.clone().expect("attachment set")))));
    }

    // Per-day predictions are independent given the plan.
    let pcfg = cfg.predictor();
    let days: Vec<DayRecord<T>> = plan
        .par_iter()
        .map(|(t, step)| {
            let t = *t;
            let base = DayRecord {
                date: dates[t + 1],
                as_of: dates[t],
                as_of_row: t,
                realized: panel.target()[t + 1],
                gap: None,
                path: None,
                per_level: Vec::new(),
                union_interval: None,
                x_star: None,
                x_star_by_level: Vec::new(),
            };
            match step {
                Err(reason) => Ok(DayRecord {
                    gap: Some(reason.clone()),
                    ..base
                }),
                Ok((_, path)) => {
                    let p = predict(panel, path, t, &pcfg)?;
                    let by_level = (0..cfg.max_levels)
                        .map(|l| p.per_level[l.min(p.per_level.len() - 1)].x_star)
                        .collect();
                    Ok(DayRecord {
                        path: Some(path.clone()),
                        union_interval: Some(p.union_interval),
                        x_star: Some(p.x_star),
                        per_level: p.per_level,
                        x_star_by_level: by_level,
                        ..base
                    })
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut rows_out = Vec::new();
    let mut mtd = vec![T::zero(); cfg.max_levels];
    let mut realized_mtd = T::zero();
    let mut month = None;
    for day in &days {
        if month != Some(month_key(day.date)) {
            month = Some(month_key(day.date));
            mtd.iter_mut().for_each(|v| *v = T::zero());
            realized_mtd = T::zero();
        }
        realized_mtd = realized_mtd + day.realized;
        let Some(path) = &day.path else { continue };
        for (level, est) in day.per_level.iter().enumerate() {
            mtd[level] = mtd[level] + est.x_star;
            rows_out.push(LogRow {
                date: day.date,
                as_of: day.as_of,
                level,
                x_star: est.x_star,
                x_star_mtd: mtd[level],
                realized: day.realized,
                realized_mtd,
                interval: est.interval,
                i_star: path.i_star,
                path: path.nodes.clone(),
            });
        }
        for (level, acc) in mtd.iter_mut().enumerate().skip(day.per_level.len()) {
            *acc = *acc + day.x_star_by_level[level];
        }
    }

    let mut month_sizes = BTreeMap::new();
    for d in dates {
        *month_sizes.entry(month_key(*d)).or_insert(0) += 1;
    }
    Ok(PredictionLog {
        max_levels: cfg.max_levels,
        names: panel.names().to_vec(),
        days,
        rows: rows_out,
        attachments,
        trees,
        month_sizes,
    })
}

/// Arithmetic compounding: the sum of daily returns.
pub fn compound_monthly<T: Scalar>(daily: &[T]) -> Result<T> {
    if daily.is_empty() {
        return Err(Error::EmptyMonth);
    }
    Ok(daily.iter().copied().sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonthlyPoint<T> {
    pub year: i32,
    pub month: u32,
    pub predicted: T,
    pub realized: T,
    pub days: usize,
}

/// Monthly compounded predictions at `level` against realized monthly
/// returns, over months in which every panel date was predicted.
pub fn monthly_series<T: Scalar>(log: &PredictionLog<T>, level: usize) -> Result<Vec<MonthlyPoint<T>>> {
    if level >= log.max_levels {
        return Err(Error::config("level", format!("level {level} exceeds max_levels {}", log.max_levels)));
    }
    let mut grouped: BTreeMap<(i32, u32), (Vec<T>, Vec<T>)> = BTreeMap::new();
    for day in log.days.iter().filter(|d| d.gap.is_none()) {
        let entry = grouped.entry(month_key(day.date)).or_default();
        entry.0.push(day.x_star_by_level[level]);
        entry.1.push(day.realized);
    }
    let mut out = Vec::new();
    for ((year, month), (pred, real)) in grouped {
        if log.month_sizes.get(&(year, month)) != Some(&pred.len()) {
            continue;
        }
        out.push(MonthlyPoint {
            year,
            month,
            predicted: compound_monthly(&pred)?,
            realized: compound_monthly(&real)?,
            days: pred.len(),
        });
    }
    Ok(out)
}

pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let mb = b.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x.as_f64() - ma;
        let dy = y.as_f64() - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationCoefficient {
    /// `NaN` when either monthly series has zero variance.
    pub ic: f64,
    pub n_months: usize,
}

/// Pearson correlation of monthly compounded predictions at `level` with
/// realized monthly returns.
pub fn information_coefficient<T: Scalar>(log: &PredictionLog<T>, level: usize) -> Result<InformationCoefficient> {
    let series = monthly_series(log, level)?;
    if series.len() < 3 {
        return Err(Error::TooFewMonths(series.len()));
    }
    let pred: Vec<T> = series.iter().map(|m| m.predicted).collect();
    let real: Vec<T> = series.iter().map(|m| m.realized).collect();
    let ic = pearson(&pred, &real);
    if ic.is_nan() {
        log::warn!("level {level}: monthly series has zero variance; information coefficient undefined");
    }
    Ok(InformationCoefficient {
        ic,
        n_months: series.len(),
    })
}
