//! Numerical checks of the parent-centrality and parent-estimator
//! properties of a Prim tree, plus edge-wise Pythagoras residuals.
//!
//! Both properties are checked against the tree-set present when the first
//! of a parent's children is attached, i.e. the nodes that precede it in
//! `birth_order`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::Result;
use crate::oracle::eigen::principal_direction;
use crate::panel::{RowWindow, Side, SignalPanel};
use crate::scalar::{dot, Scalar};
use crate::similarity::{panel_similarity, SliceSet};
use crate::tree::{select_widest_tree, RootedTree, WidthMetric};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PropositionReport {
    pub instances_checked: usize,
    /// `(instance id, margin)` for every margin above tolerance.
    pub violations: Vec<(String, f64)>,
    /// Largest margin seen, violating or not; 0 when nothing was checked.
    pub max_margin_violation: f64,
    pub tolerance: f64,
    /// Instances that compared against every non-child node instead of the
    /// attachment-time tree-set, and how often the parent still won.
    pub full_set_checked: usize,
    pub full_set_holds: usize,
    /// Instances skipped with the reason.
    pub skipped: Vec<(String, String)>,
}

impl PropositionReport {
    fn new(tolerance: f64) -> Self {
        Self { tolerance, ..Default::default() }
    }

    fn record(&mut self, id: String, margin: f64) {
        self.instances_checked += 1;
        self.max_margin_violation = self.max_margin_violation.max(margin);
        if margin > self.tolerance {
            self.violations.push((id, margin));
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Folds `other` into `self`, prefixing its instance ids with `prefix`.
    pub fn merge(&mut self, prefix: &str, other: PropositionReport) {
        self.instances_checked += other.instances_checked;
        self.max_margin_violation = self.max_margin_violation.max(other.max_margin_violation);
        self.tolerance = self.tolerance.max(other.tolerance);
        self.full_set_checked += other.full_set_checked;
        self.full_set_holds += other.full_set_holds;
        self.violations
            .extend(other.violations.into_iter().map(|(id, m)| (format!("{prefix}/{id}"), m)));
        self.skipped
            .extend(other.skipped.into_iter().map(|(id, r)| (format!("{prefix}/{id}"), r)));
    }
}

fn slice<T: Scalar>(slices: &SliceSet<T>, node: usize) -> &[T] {
    &slices
        .get(node)
        .unwrap_or_else(|| panic!("no slice for tree node {node}"))
        .values
}

/// Nodes present in the tree just before the first of `parent`'s children was
/// attached.
fn attachment_tree_set<W: Copy>(tree: &RootedTree<W>, children: &[usize]) -> Vec<usize> {
    let first = children
        .iter()
        .filter_map(|c| tree.birth_order.iter().position(|n| n == c))
        .min()
        .unwrap_or(tree.birth_order.len());
    tree.birth_order[..first].to_vec()
}

fn all_but<W: Copy>(tree: &RootedTree<W>, excluded: &[usize]) -> Vec<usize> {
    tree.birth_order.iter().copied().filter(|n| !excluded.contains(n)).collect()
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x - *y).as_f64().powi(2)).sum()
}

/// For every parent with more than one child, the parent must be the node of
/// the attachment-time tree-set closest to the principal direction of its
/// children.
pub fn check_parent_centrality<T: Scalar>(
    tree: &RootedTree<T>,
    slices: &SliceSet<T>,
    tolerance: f64,
) -> PropositionReport {
    let mut report = PropositionReport::new(tolerance);
    for p in tree.nodes() {
        let children = tree.children(p);
        if children.len() < 2 {
            continue;
        }
        let id = format!("parent={p}");
        let columns: Vec<&[T]> = children.iter().map(|&q| slice(slices, q)).collect();
        let v1 = match principal_direction(&columns) {
            Ok(pd) => pd.v1,
            Err(e) => {
                report.skipped.push((id, e.to_string()));
                continue;
            }
        };
        let dist = |n: usize| squared_distance(slice(slices, n), &v1);
        let d_p = dist(p);
        let set = attachment_tree_set(tree, &children);
        let best = set.iter().map(|&n| dist(n)).fold(f64::INFINITY, f64::min);
        report.record(id, d_p - best);

        let full = all_but(tree, &children);
        let best_full = full.iter().map(|&n| dist(n)).fold(f64::INFINITY, f64::min);
        report.full_set_checked += 1;
        if d_p <= best_full + tolerance {
            report.full_set_holds += 1;
        }
    }
    report
}

/// `sum_q ||x_q - s s^T x_q||^2` for a unit vector `s`.
pub fn uncertainty_error<T: Scalar>(s: &[T], targets: &[&[T]]) -> T {
    targets
        .iter()
        .map(|x| {
            let proj = dot(s, x);
            dot(x, x) - proj * proj
        })
        .sum()
}

/// Noise-free targets: each child drives the target with its own slice.
pub fn child_targets<T: Scalar>(tree: &RootedTree<T>, slices: &SliceSet<T>, parent: usize) -> Vec<Vec<T>> {
    tree.children(parent).into_iter().map(|q| slice(slices, q).to_vec()).collect()
}

/// For every parent, the parent slice must minimize the uncertainty error of
/// its children's targets over the attachment-time tree-set. `targets`
/// supplies the per-child target vectors for a parent.
pub fn check_parent_estimator<T, F>(
    tree: &RootedTree<T>,
    slices: &SliceSet<T>,
    mut targets: F,
    tolerance: f64,
) -> PropositionReport
where
    T: Scalar,
    F: FnMut(usize) -> Vec<Vec<T>>,
{
    let mut report = PropositionReport::new(tolerance);
    for p in tree.nodes() {
        let children = tree.children(p);
        if children.is_empty() {
            continue;
        }
        let xs = targets(p);
        let xs: Vec<&[T]> = xs.iter().map(Vec::as_slice).collect();
        let u = |n: usize| uncertainty_error(slice(slices, n), &xs).as_f64();
        let u_p = u(p);
        let set = attachment_tree_set(tree, &children);
        let best = set.iter().map(|&n| u(n)).fold(f64::INFINITY, f64::min);
        report.record(format!("parent={p}"), u_p - best);

        let full = all_but(tree, &children);
        let best_full = full.iter().map(|&n| u(n)).fold(f64::INFINITY, f64::min);
        report.full_set_checked += 1;
        if u_p <= best_full + tolerance {
            report.full_set_holds += 1;
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeResidual {
    pub parent: usize,
    pub child: usize,
    pub xi: f64,
    pub residual_norm_sq: f64,
    /// `xi + ||eps||^2 - 1`.
    pub residual: f64,
}

/// Decomposes every child slice into its projection on the parent slice and
/// an orthogonal residual.
pub fn pythagoras_residuals<T: Scalar>(tree: &RootedTree<T>, slices: &SliceSet<T>) -> Vec<EdgeResidual> {
    tree.parent
        .iter()
        .map(|(&q, &p)| {
            let s_q = slice(slices, q);
            let s_p = slice(slices, p);
            let c = dot(s_p, s_q);
            let eps_sq: T = s_q.iter().zip(s_p).map(|(a, b)| (*a - c * *b) * (*a - c * *b)).sum();
            let xi = tree.edge_sim[&q].as_f64();
            EdgeResidual {
                parent: p,
                child: q,
                xi,
                residual_norm_sq: eps_sq.as_f64(),
                residual: xi + eps_sq.as_f64() - 1.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SubtreeDiagnostic {
    /// Nodes with at least one grandchild.
    pub checked: usize,
    /// Of those, how many maximize the summed similarity to all their
    /// descendants among the nodes outside their subtree.
    pub holds: usize,
}

fn descendants<W: crate::scalar::Weight>(tree: &RootedTree<W>, node: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = tree.children(node);
    while let Some(n) = stack.pop() {
        out.push(n);
        stack.extend(tree.children(n));
    }
    out
}

/// Whether ancestors summarize their whole subtree; informational only.
pub fn subtree_diagnostic<T: Scalar>(tree: &RootedTree<T>, slices: &SliceSet<T>, tolerance: f64) -> SubtreeDiagnostic {
    let mut diag = SubtreeDiagnostic::default();
    for g in tree.nodes() {
        let has_grandchild = tree.children(g).iter().any(|&c| !tree.children(c).is_empty());
        if !has_grandchild {
            continue;
        }
        let desc = descendants(tree, g);
        let desc_set: BTreeSet<usize> = desc.iter().copied().collect();
        let score = |n: usize| -> f64 {
            let s = slice(slices, n);
            desc.iter().map(|&d| dot(s, slice(slices, d)).as_f64().powi(2)).sum()
        };
        let own = score(g);
        let best = tree
            .birth_order
            .iter()
            .filter(|n| !desc_set.contains(n))
            .map(|&n| score(n))
            .fold(f64::NEG_INFINITY, f64::max);
        diag.checked += 1;
        if own + tolerance >= best {
            diag.holds += 1;
        }
    }
    diag
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub side: Side,
    pub window: RowWindow,
    pub root: usize,
    pub root_name: String,
    pub nodes: usize,
    pub excluded: Vec<String>,
    pub tolerance: f64,
    pub pythagoras_edges: usize,
    pub pythagoras_max_abs_residual: f64,
    pub parent_centrality: PropositionReport,
    pub parent_estimator: PropositionReport,
    pub subtree: SubtreeDiagnostic,
}

impl VerificationReport {
    pub fn is_clean(&self) -> bool {
        self.parent_centrality.is_clean()
            && self.parent_estimator.is_clean()
            && self.pythagoras_max_abs_residual <= self.tolerance
    }
}

/// Every check on an already built tree, with noise-free child targets.
pub fn verify_tree<T: Scalar>(tree: &RootedTree<T>, slices: &SliceSet<T>, tolerance: f64) -> (PropositionReport, PropositionReport, f64, SubtreeDiagnostic) {
    let centrality = check_parent_centrality(tree, slices, tolerance);
    let estimator = check_parent_estimator(tree, slices, |p| child_targets(tree, slices, p), tolerance);
    let max_res = pythagoras_residuals(tree, slices)
        .iter()
        .map(|r| r.residual.abs())
        .fold(0.0, f64::max);
    (centrality, estimator, max_res, subtree_diagnostic(tree, slices, tolerance))
}

/// Builds the widest tree over the whole panel and runs every check on it.
pub fn verify_panel<T: Scalar>(
    panel: &SignalPanel<T>,
    side: Side,
    metric: WidthMetric,
    tolerance: f64,
) -> Result<VerificationReport> {
    let window = RowWindow::new(0, panel.len());
    let (sim, slices) = panel_similarity(panel, side, window)?;
    let tree = select_widest_tree(&sim, metric)?;
    let (centrality, estimator, max_res, subtree) = verify_tree(&tree, &slices, tolerance);
    Ok(VerificationReport {
        side,
        window,
        root: tree.root,
        root_name: panel.name(tree.root).to_string(),
        nodes: tree.len(),
        excluded: slices.excluded.iter().map(|&i| panel.name(i).to_string()).collect(),
        tolerance,
        pythagoras_edges: tree.parent.len(),
        pythagoras_max_abs_residual: max_res,
        parent_centrality: centrality,
        parent_estimator: estimator,
        subtree,
    })
}
