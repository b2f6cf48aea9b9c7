//! Conditional predictive distributions and their truncated mixture.
//!
//! For each level of the attachment path the joint histogram is sliced at the
//! day's signal realization, giving a distribution over next-period target
//! bins. Each conditional is cut to its central confidence interval, and the
//! cut conditionals are averaged with equal weights; the mean of that mixture
//! is the effective estimate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attachment::AttachmentPath;
use crate::error::{Error, Result};
use crate::histogram::{conditioning_values, estimate_joint_with_axis, observation_rows, Axis, HistogramConfig, JointHistogram};
use crate::panel::{Side, SignalPanel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDist<T> {
    pub level: usize,
    /// X-axis bin midpoints.
    pub support: Vec<T>,
    pub mass: Vec<T>,
    pub realization: Vec<T>,
    /// The conditioning cell was empty and the X marginal was used instead.
    pub fallback_used: bool,
    /// Some realization value fell outside its axis range.
    pub clamped: bool,
}

impl<T: Scalar> ConditionalDist<T> {
    pub fn mean(&self) -> T {
        self.support.iter().zip(&self.mass).map(|(&x, &m)| x * m).sum()
    }

    pub fn total_mass(&self) -> T {
        self.mass.iter().copied().sum()
    }

    /// Restriction to `[lo, hi]`, renormalized to unit mass.
    pub fn truncated(&self, interval: (T, T)) -> ConditionalDist<T> {
        let mut out = self.clone();
        for (m, &x) in out.mass.iter_mut().zip(&self.support) {
            if x < interval.0 || x > interval.1 {
                *m = T::zero();
            }
        }
        let total = out.total_mass();
        if total > T::zero() {
            out.mass.iter_mut().for_each(|m| *m = *m / total);
        }
        out
    }
}

fn normalized<T: Scalar>(counts: &[u64]) -> Vec<T> {
    let total: u64 = counts.iter().sum();
    let total = T::from_u64(total).unwrap();
    counts.iter().map(|&c| T::from_u64(c).unwrap() / total).collect()
}

/// X slice of `joint` through the cell holding `realization`.
///
/// Falls back to the X marginal when that cell is empty.
pub fn conditional_slice<T: Scalar>(joint: &JointHistogram<T>, realization: &[T]) -> Result<ConditionalDist<T>> {
    if realization.len() != joint.axes.len() - 1 {
        return Err(Error::Shape(format!(
            "level {} histogram needs {} conditioning values, got {}",
            joint.level,
            joint.axes.len() - 1,
            realization.len()
        )));
    }
    if joint.total == 0 {
        return Err(Error::EmptyWindow);
    }
    let strides = joint.strides();
    let mut offset = 0;
    let mut clamped = false;
    for (d, &v) in realization.iter().enumerate() {
        let (b, o) = joint.axes[d + 1].locate(v);
        offset += b * strides[d + 1];
        clamped |= o;
    }
    let bins_x = joint.axes[0].bins();
    let slice: Vec<u64> = (0..bins_x).map(|bx| joint.counts[bx * strides[0] + offset]).collect();
    let fallback_used = slice.iter().all(|&c| c == 0);
    let counts = if fallback_used { joint.x_marginal() } else { slice };
    Ok(ConditionalDist {
        level: joint.level,
        support: joint.axes[0].midpoints(),
        mass: normalized(&counts),
        realization: realization.to_vec(),
        fallback_used,
        clamped,
    })
}

/// Central interval on the support: `lo` is the first point whose CDF reaches
/// `(1 - coverage) / 2`, `hi` the first point whose CDF reaches
/// `1 - (1 - coverage) / 2`.
pub fn confidence_interval<T: Scalar>(cond: &ConditionalDist<T>, coverage: f64) -> (T, T) {
    debug_assert!(coverage > 0.0 && coverage < 1.0);
    let tail = T::lit((1.0 - coverage) / 2.0);
    let slack = T::lit(1e-12);
    let lower = tail - slack;
    let upper = T::one() - tail - slack;
    let mut cdf = T::zero();
    let mut lo = None;
    let mut hi = None;
    for (&x, &m) in cond.support.iter().zip(&cond.mass) {
        cdf = cdf + m;
        if lo.is_none() && cdf >= lower {
            lo = Some(x);
        }
        if hi.is_none() && cdf >= upper {
            hi = Some(x);
            break;
        }
    }
    let last = *cond.support.last().expect("non-empty support");
    let lo = lo.unwrap_or(last);
    (lo, hi.unwrap_or(last).max(lo))
}

/// How truncated components are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureMode {
    /// Each truncated component is renormalized before averaging.
    #[default]
    Renormalized,
    /// Raw truncated components are averaged and the sum renormalized once.
    RawTruncated,
}

impl fmt::Display for MixtureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixtureMode::Renormalized => "renormalized",
            MixtureMode::RawTruncated => "raw_truncated",
        })
    }
}

impl FromStr for MixtureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "renormalized" => Ok(MixtureMode::Renormalized),
            "raw_truncated" => Ok(MixtureMode::RawTruncated),
            other => Err(Error::config("mixture", format!("expected renormalized|raw_truncated, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureEstimate<T> {
    /// Components restricted to their intervals.
    pub components: Vec<ConditionalDist<T>>,
    pub intervals: Vec<(T, T)>,
    pub union_interval: (T, T),
    pub support: Vec<T>,
    pub mixture_mass: Vec<T>,
    pub x_star: T,
}

/// Equal-weight mixture of the conditionals, each truncated to its interval.
pub fn mixture<T: Scalar>(
    conds: &[ConditionalDist<T>],
    intervals: &[(T, T)],
    mode: MixtureMode,
) -> Result<MixtureEstimate<T>> {
    if conds.is_empty() || conds.len() != intervals.len() {
        return Err(Error::EmptyMixture);
    }
    let support = conds[0].support.clone();
    if conds.iter().any(|c| c.support != support) {
        return Err(Error::AxisMismatch);
    }
    let union_interval = intervals[1..].iter().fold(intervals[0], |(a, b), &(lo, hi)| (a.min(lo), b.max(hi)));
    let weight = T::one() / T::from_usize(conds.len()).unwrap();
    let mut mass = vec![T::zero(); support.len()];
    let mut components = Vec::with_capacity(conds.len());
    for (cond, &interval) in conds.iter().zip(intervals) {
        let component = match mode {
            MixtureMode::Renormalized => cond.truncated(interval),
            MixtureMode::RawTruncated => {
                let mut raw = cond.clone();
                for (m, &x) in raw.mass.iter_mut().zip(&support) {
                    if x < interval.0 || x > interval.1 {
                        *m = T::zero();
                    }
                }
                raw
            }
        };
        for (acc, &m) in mass.iter_mut().zip(&component.mass) {
            *acc = *acc + weight * m;
        }
        components.push(component);
    }
    if mode == MixtureMode::RawTruncated {
        let total: T = mass.iter().copied().sum();
        mass.iter_mut().for_each(|m| *m = *m / total);
    }
    let mut estimate = MixtureEstimate {
        components,
        intervals: intervals.to_vec(),
        union_interval,
        support,
        mixture_mass: mass,
        x_star: T::zero(),
    };
    estimate.x_star = effective_estimate(&estimate);
    Ok(estimate)
}

/// Mean of the mixture distribution.
pub fn effective_estimate<T: Scalar>(mix: &MixtureEstimate<T>) -> T {
    mix.support.iter().zip(&mix.mixture_mass).map(|(&x, &m)| x * m).sum()
}

/// Estimates for one conditioning level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelEstimate<T> {
    pub lambda: usize,
    pub interval: (T, T),
    /// Mean of this level's conditional restricted to its interval.
    pub mean: T,
    /// Mean of the mixture over levels `0..=lambda`.
    pub x_star: T,
    pub union_interval: (T, T),
    pub fallback: bool,
    pub clamped: bool,
}

/// Full prediction for one as-of row.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub as_of_row: usize,
    pub path: AttachmentPath,
    pub per_level: Vec<LevelEstimate<T>>,
    pub union_interval: (T, T),
    pub x_star: T,
    pub conditionals: Vec<ConditionalDist<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PredictorConfig {
    pub histogram: HistogramConfig,
    pub mixture: MixtureMode,
    pub side: Side,
}

/// Conditionals at the row-`t` realization for every path level, all on the
/// X axis built from the same observation window.
pub fn level_conditionals<T: Scalar>(
    panel: &SignalPanel<T>,
    path: &AttachmentPath,
    t: usize,
    cfg: &PredictorConfig,
) -> Result<Vec<ConditionalDist<T>>> {
    let hist = &cfg.histogram;
    let rows = observation_rows(t, hist.estimation_window);
    if rows.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let x_axis = Axis::from_data(&panel.target()[rows.start + 1..rows.end + 1], hist.bins_per_dim, hist.range_policy)?;
    let realization: Vec<T> = path
        .nodes
        .iter()
        .map(|&s| *conditioning_values(panel, s, t, hist, cfg.side).last().unwrap())
        .collect();
    (0..path.levels_used)
        .map(|level| {
            let joint = estimate_joint_with_axis(panel, path, level, t, hist, cfg.side, Some(x_axis.clone()))?;
            conditional_slice(&joint, &realization[..=level])
        })
        .collect()
}

/// Runs the whole per-date pipeline for the prediction of row `t + 1` made
/// with information up to row `t`.
pub fn predict<T: Scalar>(
    panel: &SignalPanel<T>,
    path: &AttachmentPath,
    t: usize,
    cfg: &PredictorConfig,
) -> Result<Prediction<T>> {
    let conditionals = level_conditionals(panel, path, t, cfg)?;
    let intervals: Vec<(T, T)> = conditionals
        .iter()
        .map(|c| confidence_interval(c, cfg.histogram.coverage))
        .collect();
    let mut per_level = Vec::with_capacity(conditionals.len());
    let mut last = None;
    for lambda in 0..conditionals.len() {
        let mix = mixture(&conditionals[..=lambda], &intervals[..=lambda], cfg.mixture)?;
        per_level.push(LevelEstimate {
            lambda,
            interval: intervals[lambda],
            mean: conditionals[lambda].truncated(intervals[lambda]).mean(),
            x_star: mix.x_star,
            union_interval: mix.union_interval,
            fallback: conditionals[lambda].fallback_used,
            clamped: conditionals[lambda].clamped,
        });
        last = Some(mix);
    }
    let mix = last.ok_or(Error::EmptyMixture)?;
    Ok(Prediction {
        as_of_row: t,
        path: path.clone(),
        per_level,
        union_interval: mix.union_interval,
        x_star: mix.x_star,
        conditionals,
    })
}
