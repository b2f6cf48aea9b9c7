//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may appear
//! at most once, and unknown keys are rejected.

use std::str::FromStr;

use chrono::NaiveDate;

use crate::backtest::BacktestConfig;
use crate::error::{Error, Result};
use crate::panel::FillPolicy;

/// Parses `key = value` lines, keeping file order.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line, format!("line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::config("", format!("line {}: empty key", i + 1)));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::config(&key, "duplicate key"));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse {value:?}")))
}

fn parse_date(key: &str, value: &str) -> Result<Option<NaiveDate>> {
    if value.is_empty() || value == "none" {
        return Ok(None);
    }
    NaiveDate::parse_from_str(value, "%Y-%m-%d")
        .map(Some)
        .map_err(|_| Error::config(key, format!("expected YYYY-MM-DD, got {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true|false, got {value:?}"))),
    }
}

/// Backtest settings plus the ingestion fill policy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    pub backtest: BacktestConfig,
    pub fill: FillPolicy,
}

impl PipelineConfig {
    pub const KEYS: &'static [&'static str] = &[
        "start_date",
        "end_date",
        "attach_window",
        "cadence",
        "max_levels",
        "side",
        "bins_per_dim",
        "range_policy",
        "estimation_window",
        "coverage",
        "conditioning",
        "tree_refresh",
        "min_tree_window",
        "width_metric",
        "mixture",
        "attach_demean",
        "demean_target",
        "fill_policy",
    ];

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (key, value) in parse_kv(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.backtest.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let b = &mut self.backtest;
        match key {
            "start_date" => b.start_date = parse_date(key, value)?,
            "end_date" => b.end_date = parse_date(key, value)?,
            "attach_window" => b.attach_window = parse_value(key, value)?,
            "cadence" => b.cadence = parse_value(key, value)?,
            "max_levels" => b.max_levels = parse_value(key, value)?,
            "side" => b.side = value.parse()?,
            "bins_per_dim" => b.histogram.bins_per_dim = parse_value(key, value)?,
            "range_policy" => b.histogram.range_policy = value.parse()?,
            "estimation_window" => b.histogram.estimation_window = value.parse()?,
            "coverage" => b.histogram.coverage = parse_value(key, value)?,
            "conditioning" => b.histogram.conditioning = value.parse()?,
            "tree_refresh" => b.tree_refresh = value.parse()?,
            "min_tree_window" => b.min_tree_window = parse_value(key, value)?,
            "width_metric" => b.width_metric = value.parse()?,
            "mixture" => b.mixture = value.parse()?,
            "attach_demean" => b.attach_demean = value.parse()?,
            "demean_target" => b.demean_target = parse_bool(key, value)?,
            "fill_policy" => self.fill = value.parse()?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Complete snapshot in the same format; parsing it back gives `self`.
    pub fn to_kv_string(&self) -> String {
        let b = &self.backtest;
        let date = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_else(|| "none".into());
        let pairs: Vec<(&str, String)> = vec![
            ("start_date", date(b.start_date)),
            ("end_date", date(b.end_date)),
            ("attach_window", b.attach_window.to_string()),
            ("cadence", b.cadence.to_string()),
            ("max_levels", b.max_levels.to_string()),
            ("side", b.side.to_string()),
            ("bins_per_dim", b.histogram.bins_per_dim.to_string()),
            ("range_policy", b.histogram.range_policy.to_string()),
            ("estimation_window", b.histogram.estimation_window.to_string()),
            ("coverage", b.histogram.coverage.to_string()),
            ("conditioning", b.histogram.conditioning.to_string()),
            ("tree_refresh", b.tree_refresh.to_string()),
            ("min_tree_window", b.min_tree_window.to_string()),
            ("width_metric", b.width_metric.to_string()),
            ("mixture", b.mixture.to_string()),
            ("attach_demean", b.attach_demean.to_string()),
            ("demean_target", b.demean_target.to_string()),
            ("fill_policy", self.fill.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
