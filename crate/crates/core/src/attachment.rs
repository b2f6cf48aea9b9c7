//! Attaching the forecast target to its currently dominant signal.
//!
//! Over a short trailing window the target is linked to the signal whose
//! one-sided covariance with next-period returns has the largest square; the
//! path from that node to the tree root defines the conditioning levels.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{one_sided_normalize_about, RowWindow, Side, SignalPanel};
use crate::scalar::{dot, Scalar, Weight};
use crate::tree::RootedTree;

/// Which mean is removed before side separation in the trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemeanPolicy {
    /// Mean over the trailing window itself.
    #[default]
    WindowLocal,
    /// Mean over all rows up to the end of the window.
    Expanding,
}

impl fmt::Display for DemeanPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DemeanPolicy::WindowLocal => "window_local",
            DemeanPolicy::Expanding => "expanding",
        })
    }
}

impl FromStr for DemeanPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "window_local" | "local" => Ok(DemeanPolicy::WindowLocal),
            "expanding" => Ok(DemeanPolicy::Expanding),
            other => Err(Error::config(
                "attach_demean",
                format!("expected window_local|expanding, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttachmentConfig {
    /// Trailing window length in rows.
    pub window: usize,
    pub side: Side,
    pub demean: DemeanPolicy,
    /// Demean the target before side separation.
    pub demean_target: bool,
}

impl Default for AttachmentConfig {
    fn default() -> Self {
        Self {
            window: 250,
            side: Side::Upper,
            demean: DemeanPolicy::WindowLocal,
            demean_target: true,
        }
    }
}

fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_usize(values.len()).unwrap()
}

/// Squared one-sided covariance of each signal with next-period target
/// values for the attachment made at row `t`.
///
/// Pairs signal rows `[t - window, t)` with target rows `[t - window + 1, t]`.
/// Degenerate signals score `None`.
pub fn attachment_scores<T: Scalar>(
    panel: &SignalPanel<T>,
    t: usize,
    cfg: &AttachmentConfig,
) -> Result<Vec<Option<T>>> {
    let window = cfg.window;
    if window < 2 {
        return Err(Error::WindowTooShort { len: window, min: 2 });
    }
    if t < window || t >= panel.len() {
        return Err(Error::InsufficientHistory {
            needed: window,
            available: t,
        });
    }
    let rows = RowWindow::new(t - window, t);
    let target = &panel.target()[t - window + 1..=t];
    let x_mean = match (cfg.demean_target, cfg.demean) {
        (false, _) => T::zero(),
        (true, DemeanPolicy::WindowLocal) => mean(target),
        (true, DemeanPolicy::Expanding) => mean(&panel.target()[..=t]),
    };
    let x: Vec<T> = target.iter().map(|&v| cfg.side.keep(v - x_mean)).collect();

    let mut scores = Vec::with_capacity(panel.n_signals());
    for i in 0..panel.n_signals() {
        let column = panel.signal(i);
        let m = match cfg.demean {
            DemeanPolicy::WindowLocal => mean(&column[rows.start..rows.end]),
            DemeanPolicy::Expanding => mean(&column[..rows.end]),
        };
        let slice = one_sided_normalize_about(&column[rows.start..rows.end], cfg.side, rows, m)?;
        scores.push((!slice.degenerate).then(|| {
            let c = dot(&slice.values, &x);
            c * c
        }));
    }
    Ok(scores)
}

/// Index of the largest score; ties go to the lowest index.
pub fn dominant_index<T: PartialOrd + Copy>(scores: &[Option<T>]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            match best {
                Some((_, b)) if !(s > b) => {}
                _ => best = Some((i, s)),
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Squared covariances of side-separated unit slices with a (not normalized)
/// target vector. `None` entries stand for degenerate slices.
pub fn covariance_scores<T: Scalar>(slices: &[Option<&[T]>], target: &[T]) -> Vec<Option<T>> {
    slices
        .iter()
        .map(|s| {
            s.map(|v| {
                let c = dot(v, target);
                c * c
            })
        })
        .collect()
}

/// Dominant signal for the prediction made at row `t`.
pub fn attach_target<T: Scalar>(panel: &SignalPanel<T>, t: usize, cfg: &AttachmentConfig) -> Result<usize> {
    dominant_index(&attachment_scores(panel, t, cfg)?).ok_or(Error::AllDegenerate)
}

/// Result of attaching to a specific tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attachment {
    pub i_star: usize,
    /// Unrestricted argmax; differs from `i_star` when that signal is not a
    /// tree node.
    pub preferred: usize,
}

impl Attachment {
    pub fn fell_back(&self) -> bool {
        self.i_star != self.preferred
    }
}

/// Like [`attach_target`] but restricted to nodes of `tree`, falling back to
/// the best-scoring signal that is present.
pub fn attach_to_tree<T: Scalar, W: Weight>(
    panel: &SignalPanel<T>,
    tree: &RootedTree<W>,
    t: usize,
    cfg: &AttachmentConfig,
) -> Result<Attachment> {
    let scores = attachment_scores(panel, t, cfg)?;
    let preferred = dominant_index(&scores).ok_or(Error::AllDegenerate)?;
    let restricted: Vec<Option<T>> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| if tree.contains(i) { *s } else { None })
        .collect();
    let i_star = dominant_index(&restricted).ok_or(Error::AllDegenerate)?;
    Ok(Attachment { i_star, preferred })
}

/// Conditioning path from the attachment node towards the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentPath {
    pub as_of: Option<NaiveDate>,
    pub i_star: usize,
    /// `nodes[0] = i_star`, each next entry is the parent of the previous.
    pub nodes: Vec<usize>,
    pub levels_used: usize,
    /// Length of the untruncated path (depth of `i_star` plus one).
    pub full_length: usize,
}

impl AttachmentPath {
    pub fn at(mut self, date: NaiveDate) -> Self {
        self.as_of = Some(date);
        self
    }

    /// Whether the truncated path still ends at the root.
    pub fn reaches_root(&self) -> bool {
        self.levels_used == self.full_length
    }
}

/// Follows parent links from `i_star`, keeping at most `level_cap` nodes.
pub fn path_to_root<W: Weight>(tree: &RootedTree<W>, i_star: usize, level_cap: usize) -> Result<AttachmentPath> {
    if level_cap == 0 {
        return Err(Error::config("max_levels", "level cap must be at least 1"));
    }
    let full = tree.path_to_root(i_star)?;
    let full_length = full.len();
    let nodes: Vec<usize> = full.into_iter().take(level_cap).collect();
    Ok(AttachmentPath {
        as_of: None,
        i_star,
        levels_used: nodes.len(),
        nodes,
        full_length,
    })
}
