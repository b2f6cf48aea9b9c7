//! Binned empirical joint distributions of next-period target values and the
//! conditioning signals along an attachment path.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attachment::AttachmentPath;
use crate::error::{Error, Result};
use crate::panel::{Side, SignalPanel};
use crate::scalar::Scalar;

/// How an axis range is derived from in-window data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangePolicy {
    ObservedMinMax,
    /// Empirical quantiles; observations outside are counted in the boundary
    /// bins.
    Quantile(f64, f64),
}

impl fmt::Display for RangePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RangePolicy::ObservedMinMax => f.write_str("minmax"),
            RangePolicy::Quantile(lo, hi) => write!(f, "quantile:{lo}:{hi}"),
        }
    }
}

impl FromStr for RangePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "minmax" {
            return Ok(RangePolicy::ObservedMinMax);
        }
        let bad = || Error::config("range_policy", "expected minmax|quantile:LO:HI");
        let rest = s.strip_prefix("quantile:").ok_or_else(bad)?;
        let (lo, hi) = rest.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        if !(0.0..1.0).contains(&lo) || !(lo < hi && hi <= 1.0) {
            return Err(Error::config("range_policy", "quantiles must satisfy 0 <= lo < hi <= 1"));
        }
        Ok(RangePolicy::Quantile(lo, hi))
    }
}

/// Rows contributing observations to a joint histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationWindow {
    /// Every row from the start of the panel.
    Expanding,
    /// The most recent `n` observations.
    Trailing(usize),
}

impl fmt::Display for EstimationWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimationWindow::Expanding => f.write_str("expanding"),
            EstimationWindow::Trailing(n) => write!(f, "trailing:{n}"),
        }
    }
}

impl FromStr for EstimationWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "expanding" {
            return Ok(EstimationWindow::Expanding);
        }
        s.strip_prefix("trailing:")
            .and_then(|n| n.parse().ok())
            .filter(|n| *n > 0)
            .map(EstimationWindow::Trailing)
            .ok_or_else(|| Error::config("estimation_window", "expected expanding|trailing:N"))
    }
}

/// What values of the conditioning signals are binned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Raw signal realizations.
    #[default]
    Raw,
    /// Demeaned, with the opposite side zeroed (expanding-window mean).
    OneSided,
}

impl fmt::Display for Conditioning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Conditioning::Raw => "raw",
            Conditioning::OneSided => "one_sided",
        })
    }
}

impl FromStr for Conditioning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "raw" => Ok(Conditioning::Raw),
            "one_sided" => Ok(Conditioning::OneSided),
            other => Err(Error::config("conditioning", format!("expected raw|one_sided, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramConfig {
    pub bins_per_dim: usize,
    pub range_policy: RangePolicy,
    pub estimation_window: EstimationWindow,
    /// Central coverage of the per-level confidence intervals.
    pub coverage: f64,
    pub conditioning: Conditioning,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            bins_per_dim: 7,
            range_policy: RangePolicy::Quantile(0.01, 0.99),
            estimation_window: EstimationWindow::Expanding,
            coverage: 0.9,
            conditioning: Conditioning::Raw,
        }
    }
}

impl HistogramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins_per_dim < 2 {
            return Err(Error::config("bins_per_dim", "must be at least 2"));
        }
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return Err(Error::config("coverage", "must lie strictly between 0 and 1"));
        }
        Ok(())
    }
}

/// Equal-width bins over a closed range.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis<T> {
    edges: Vec<T>,
    /// All observations shared one value; the axis has a single bin.
    pub constant: bool,
}

impl<T: Scalar> Axis<T> {
    /// Builds `bins` equal-width bins over the range chosen by `policy`.
    pub fn from_data(values: &[T], bins: usize, policy: RangePolicy) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite panel values"));
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        if !(max > min) {
            return Ok(Self::constant(min));
        }
        let (mut lo, mut hi) = match policy {
            RangePolicy::ObservedMinMax => (min, max),
            RangePolicy::Quantile(a, b) => (quantile(&sorted, a), quantile(&sorted, b)),
        };
        if !(hi > lo) {
            lo = min;
            hi = max;
        }
        Ok(Self::uniform(lo, hi, bins))
    }

    pub fn uniform(lo: T, hi: T, bins: usize) -> Self {
        assert!(bins >= 1 && hi > lo);
        let width = (hi - lo) / T::from_usize(bins).unwrap();
        let mut edges: Vec<T> = (0..bins).map(|k| lo + width * T::from_usize(k).unwrap()).collect();
        edges.push(hi);
        Self { edges, constant: false }
    }

    pub fn constant(value: T) -> Self {
        let pad = T::lit(1e-9) * value.abs().max(T::one());
        Self {
            edges: vec![value - pad, value + pad],
            constant: true,
        }
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn midpoints(&self) -> Vec<T> {
        let two = T::lit(2.0);
        if self.constant {
            return vec![(self.edges[0] + self.edges[1]) / two];
        }
        self.edges.windows(2).map(|w| (w[0] + w[1]) / two).collect()
    }

    /// Bin holding `value`; values outside the range clamp to the boundary
    /// bin and report `true`. Bins are `[e_k, e_k+1)`, the last one closed.
    pub fn locate(&self, value: T) -> (usize, bool) {
        let bins = self.bins();
        let outside = value < self.edges[0] || value > self.edges[bins];
        let inner = &self.edges[1..bins];
        (inner.partition_point(|e| *e <= value), outside)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Dense joint histogram over `(X, S_0, ..., S_level)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHistogram<T> {
    pub level: usize,
    /// X axis first, then one axis per conditioning signal.
    pub axes: Vec<Axis<T>>,
    /// Row-major counts, last axis fastest.
    pub counts: Vec<u64>,
    pub total: u64,
    /// Observations that fell outside an axis range and were clamped.
    pub clamped: u64,
    /// Fewer than `10 * bins_per_dim` observations.
    pub sparse: bool,
}

impl<T: Scalar> JointHistogram<T> {
    /// Counts observations `(x[k], conds[0][k], ..., conds[level][k])`.
    ///
    /// When `x_axis` is given it is used as the X axis so that several
    /// histograms share one X binning.
    pub fn from_columns(
        x: &[T],
        conds: &[&[T]],
        bins: usize,
        policy: RangePolicy,
        x_axis: Option<Axis<T>>,
    ) -> Result<Self> {
        if x.is_empty() || conds.is_empty() {
            return Err(Error::EmptyWindow);
        }
        if conds.iter().any(|c| c.len() != x.len()) {
            return Err(Error::Shape("joint histogram columns differ in length".into()));
        }
        let mut axes = Vec::with_capacity(conds.len() + 1);
        axes.push(match x_axis {
            Some(axis) => axis,
            None => Axis::from_data(x, bins, policy)?,
        });
        for c in conds {
            axes.push(Axis::from_data(c, bins, policy)?);
        }
        let strides = strides(&axes);
        let cells: usize = axes.iter().map(Axis::bins).product();
        let mut counts = vec![0u64; cells];
        let mut clamped = 0;
        for k in 0..x.len() {
            let (bx, ox) = axes[0].locate(x[k]);
            let mut cell = bx * strides[0];
            let mut outside = ox;
            for (d, c) in conds.iter().enumerate() {
                let (b, o) = axes[d + 1].locate(c[k]);
                cell += b * strides[d + 1];
                outside |= o;
            }
            counts[cell] += 1;
            clamped += u64::from(outside);
        }
        let sparse = x.len() < bins * 10;
        if sparse {
            log::warn!("joint histogram built from {} observations ({} bins per axis)", x.len(), bins);
        }
        Ok(Self {
            level: conds.len() - 1,
            axes,
            counts,
            total: x.len() as u64,
            clamped,
            sparse,
        })
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.axes)
    }

    /// Count in the cell with per-axis bin indices `index`.
    pub fn count(&self, index: &[usize]) -> u64 {
        let s = self.strides();
        self.counts[index.iter().zip(&s).map(|(i, s)| i * s).sum::<usize>()]
    }

    /// Counts along the X axis, summed over all conditioning cells.
    pub fn x_marginal(&self) -> Vec<u64> {
        let per_x = self.counts.len() / self.axes[0].bins();
        self.counts.chunks(per_x).map(|c| c.iter().sum()).collect()
    }
}

fn strides<T>(axes: &[Axis<T>]) -> Vec<usize> {
    let mut s = vec![1usize; axes.len()];
    for d in (0..axes.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * (axes[d + 1].edges.len() - 1);
    }
    s
}

/// Observation rows `tau` for a prediction made at row `t`: pairs
/// `(x[tau + 1], s[tau])` with `tau + 1 <= t`.
pub fn observation_rows(t: usize, window: EstimationWindow) -> std::ops::Range<usize> {
    let end = t;
    let start = match window {
        EstimationWindow::Expanding => 0,
        EstimationWindow::Trailing(n) => end.saturating_sub(n),
    };
    start..end
}

/// Conditioning values of one signal over rows `[0, t]`, transformed per
/// `cfg.conditioning`. Only data up to row `t` enters the transformation.
pub fn conditioning_values<T: Scalar>(
    panel: &SignalPanel<T>,
    signal: usize,
    t: usize,
    cfg: &HistogramConfig,
    side: Side,
) -> Vec<T> {
    let column = &panel.signal(signal)[..=t];
    match cfg.conditioning {
        Conditioning::Raw => column.to_vec(),
        Conditioning::OneSided => {
            let mean = column.iter().copied().sum::<T>() / T::from_usize(column.len()).unwrap();
            column.iter().map(|&v| side.keep(v - mean)).collect()
        }
    }
}

/// Joint histogram of next-period target values and the first `level + 1`
/// path signals, for the prediction made at row `t`.
pub fn estimate_joint<T: Scalar>(
    panel: &SignalPanel<T>,
    path: &AttachmentPath,
    level: usize,
    t: usize,
    cfg: &HistogramConfig,
    side: Side,
) -> Result<JointHistogram<T>> {
    estimate_joint_with_axis(panel, path, level, t, cfg, side, None)
}

pub(crate) fn estimate_joint_with_axis<T: Scalar>(
    panel: &SignalPanel<T>,
    path: &AttachmentPath,
    level: usize,
    t: usize,
    cfg: &HistogramConfig,
    side: Side,
    x_axis: Option<Axis<T>>,
) -> Result<JointHistogram<T>> {
    cfg.validate()?;
    if path.nodes.len() < level + 1 {
        return Err(Error::PathTooShort {
            level,
            needed: level + 1,
            len: path.nodes.len(),
        });
    }
    if t >= panel.len() {
        return Err(Error::Shape(format!("row {t} is past the end of the panel")));
    }
    let rows = observation_rows(t, cfg.estimation_window);
    if rows.is_empty() {
        return Err(Error::EmptyWindow);
    }
    debug_assert!(rows.end <= t, "observation window reaches past the as-of row");
    let x = &panel.target()[rows.start + 1..rows.end + 1];
    let conds: Vec<Vec<T>> = path.nodes[..=level]
        .iter()
        .map(|&s| conditioning_values(panel, s, t, cfg, side)[rows.clone()].to_vec())
        .collect();
    let refs: Vec<&[T]> = conds.iter().map(Vec::as_slice).collect();
    JointHistogram::from_columns(x, &refs, cfg.bins_per_dim, cfg.range_policy, x_axis)
}
