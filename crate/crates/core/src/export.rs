//! File formats for trees, prediction logs, scores and plot data.

use std::io::Write;

use chrono::NaiveDate;
use serde::Serialize;

use crate::backtest::{information_coefficient, monthly_series, PredictionLog};
use crate::error::{Error, Result};
use crate::panel::{RowWindow, Side};
use crate::scalar::{Scalar, Weight};
use crate::tree::RootedTree;

#[derive(Debug, Clone, Serialize)]
pub struct WindowDoc {
    pub start: usize,
    pub end: usize,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
}

impl WindowDoc {
    pub fn new(window: RowWindow, dates: &[NaiveDate]) -> Self {
        Self {
            start: window.start,
            end: window.end,
            start_date: dates.get(window.start).copied(),
            end_date: window.end.checked_sub(1).and_then(|i| dates.get(i)).copied(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeDoc {
    pub child: String,
    pub parent: String,
    pub xi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeDoc {
    pub root: String,
    pub side: Side,
    pub window: WindowDoc,
    pub score: f64,
    pub birth_order: Vec<String>,
    pub edges: Vec<EdgeDoc>,
    pub excluded: Vec<String>,
}

impl TreeDoc {
    pub fn new<T: Scalar>(
        tree: &RootedTree<T>,
        score: T,
        side: Side,
        window: WindowDoc,
        names: &[String],
        excluded: &[usize],
    ) -> Self {
        let name = |i: usize| names[i].clone();
        Self {
            root: name(tree.root),
            side,
            window,
            score: score.as_f64(),
            birth_order: tree.birth_order.iter().map(|&i| name(i)).collect(),
            edges: tree
                .birth_order
                .iter()
                .filter_map(|&c| {
                    tree.parent_of(c).map(|p| EdgeDoc {
                        child: name(c),
                        parent: name(p),
                        xi: tree.edge_sim[&c].as_f64(),
                    })
                })
                .collect(),
            excluded: excluded.iter().map(|&i| name(i)).collect(),
        }
    }
}

pub fn write_json<S: Serialize, W: Write>(value: &S, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Tree of an arbitrary weight type, written with weights as decimal strings.
pub fn tree_edges_csv<Wt: Weight + std::fmt::Display, W: Write>(
    tree: &RootedTree<Wt>,
    names: &[String],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["child", "parent", "xi"])?;
    for &c in &tree.birth_order {
        if let Some(p) = tree.parent_of(c) {
            w.write_record([names[c].as_str(), names[p].as_str(), &tree.edge_sim[&c].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `attachments.csv`: one row per re-estimation event.
pub fn write_attachments_csv<T: Scalar, W: Write>(log: &PredictionLog<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "i_star", "preferred", "path", "levels_used"])?;
    for e in &log.attachments {
        let path: Vec<&str> = e.path.iter().map(|&i| log.names[i].as_str()).collect();
        w.write_record([
            e.as_of.to_string(),
            log.names[e.i_star].clone(),
            log.names[e.preferred].clone(),
            path.join(";"),
            e.levels_used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct LevelDoc {
    lambda: usize,
    interval: (f64, f64),
    mean: f64,
    x_star: f64,
    fallback: bool,
    clamped: bool,
}

#[derive(Debug, Serialize)]
struct DayDoc<'a> {
    date: NaiveDate,
    as_of: NaiveDate,
    realized: f64,
    gap: Option<&'a str>,
    i_star: Option<&'a str>,
    path: Vec<&'a str>,
    per_level: Vec<LevelDoc>,
    union_interval: Option<(f64, f64)>,
    x_star: Option<f64>,
    x_star_by_level: Vec<f64>,
}

fn pair<T: Scalar>(p: (T, T)) -> (f64, f64) {
    (p.0.as_f64(), p.1.as_f64())
}

/// `predictions.jsonl`: one JSON object per evaluation day, in date order.
pub fn write_predictions_jsonl<T: Scalar, W: Write>(log: &PredictionLog<T>, mut out: W) -> Result<()> {
    for day in &log.days {
        let names = &log.names;
        let doc = DayDoc {
            date: day.date,
            as_of: day.as_of,
            realized: day.realized.as_f64(),
            gap: day.gap.as_deref(),
            i_star: day.path.as_ref().map(|p| names[p.i_star].as_str()),
            path: day
                .path
                .as_ref()
                .map(|p| p.nodes.iter().map(|&i| names[i].as_str()).collect())
                .unwrap_or_default(),
            per_level: day
                .per_level
                .iter()
                .map(|l| LevelDoc {
                    lambda: l.lambda,
                    interval: pair(l.interval),
                    mean: l.mean.as_f64(),
                    x_star: l.x_star.as_f64(),
                    fallback: l.fallback,
                    clamped: l.clamped,
                })
                .collect(),
            union_interval: day.union_interval.map(pair),
            x_star: day.x_star.map(Scalar::as_f64),
            x_star_by_level: day.x_star_by_level.iter().map(|v| v.as_f64()).collect(),
        };
        serde_json::to_writer(&mut out, &doc)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcRow {
    /// 1-based level: 1 is the attachment node alone.
    pub level: usize,
    pub ic: f64,
    pub n_months: usize,
}

/// Information coefficient for every level; levels with too few complete
/// months get a `NaN` coefficient.
pub fn ic_table<T: Scalar>(log: &PredictionLog<T>) -> Result<Vec<IcRow>> {
    (0..log.max_levels)
        .map(|lambda| match information_coefficient(log, lambda) {
            Ok(ic) => Ok(IcRow { level: lambda + 1, ic: ic.ic, n_months: ic.n_months }),
            Err(Error::TooFewMonths(n)) => Ok(IcRow { level: lambda + 1, ic: f64::NAN, n_months: n }),
            Err(e) => Err(e),
        })
        .collect()
}

/// `monthly_ic.csv`: `level, ic, n_months`.
pub fn write_ic_csv<W: Write>(rows: &[IcRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "ic", "n_months"])?;
    for r in rows {
        w.write_record([r.level.to_string(), r.ic.to_string(), r.n_months.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `regimes.csv`: the driving signal for the return realized on the next day.
pub fn write_regimes_csv<W: Write>(dates: &[NaiveDate], regimes: &[usize], names: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "j_t"])?;
    for (d, j) in dates.iter().zip(regimes) {
        w.write_record([d.to_string(), names[*j].clone()])?;
    }
    w.flush()?;
    Ok(())
}

fn month_end(year: i32, month: u32) -> NaiveDate {
    let (y, m) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    NaiveDate::from_ymd_opt(y, m, 1).unwrap().pred_opt().unwrap()
}

/// Long-format plot data `date, series, value`.
///
/// Daily rows carry the month-to-date predictions per level and the
/// month-to-date realized return; monthly rows carry the compounded values
/// of complete months, dated at the calendar month end.
pub fn write_report_csv<T: Scalar, W: Write>(log: &PredictionLog<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "series", "value"])?;
    let mut last_realized: Option<NaiveDate> = None;
    for row in &log.rows {
        if last_realized != Some(row.date) {
            w.write_record([row.date.to_string(), "realized_mtd".into(), row.realized_mtd.to_string()])?;
            last_realized = Some(row.date);
        }
        w.write_record([
            row.date.to_string(),
            format!("predicted_mtd_level{}", row.level + 1),
            row.x_star_mtd.to_string(),
        ])?;
    }
    for lambda in 0..log.max_levels {
        for m in monthly_series(log, lambda)? {
            let date = month_end(m.year, m.month).to_string();
            if lambda == 0 {
                w.write_record([date.clone(), "realized_monthly".into(), m.realized.to_string()])?;
            }
            w.write_record([date, format!("predicted_monthly_level{}", lambda + 1), m.predicted.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
