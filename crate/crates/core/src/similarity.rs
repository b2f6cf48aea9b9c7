//! One-sided similarity between signals: squared inner products of
//! unit-normalized side-separated series.

use crate::error::{Error, Result};
use crate::panel::{NormalizedSlice, RowWindow, Side, SignalPanel};
use crate::scalar::{dot, Scalar, Weight};

/// Symmetric matrix of pairwise similarities over a set of tree nodes.
///
/// `nodes[k]` is the panel signal index of local row/column `k`; nodes are
/// kept in increasing order so local and global index orders agree.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<W> {
    nodes: Vec<usize>,
    names: Vec<String>,
    xi: Vec<W>,
    pub side: Side,
    pub window: RowWindow,
}

impl<W: Weight> SimilarityMatrix<W> {
    /// Wraps a dense row-major matrix. Fails if the shape is wrong, an entry
    /// is not equal to itself (NaN), or symmetry does not hold.
    pub fn from_dense(
        nodes: Vec<usize>,
        names: Vec<String>,
        xi: Vec<W>,
        side: Side,
        window: RowWindow,
    ) -> Result<Self> {
        let n = nodes.len();
        if xi.len() != n * n || names.len() != n {
            return Err(Error::Shape(format!(
                "similarity matrix for {n} nodes has {} entries and {} names",
                xi.len(),
                names.len()
            )));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Shape("similarity nodes must be strictly increasing".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let v = xi[i * n + j];
                #[allow(clippy::eq_op)]
                if v != v {
                    return Err(Error::NonFiniteSimilarity(nodes[i], nodes[j]));
                }
                if v != xi[j * n + i] {
                    return Err(Error::Shape(format!(
                        "similarity not symmetric at ({}, {})",
                        nodes[i], nodes[j]
                    )));
                }
            }
        }
        Ok(Self {
            nodes,
            names,
            xi,
            side,
            window,
        })
    }

    /// Convenience constructor for tests and tools: nodes `0..n`, names `s0..`.
    pub fn from_rows(rows: Vec<Vec<W>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("similarity rows must be square".into()));
        }
        let names = (0..n).map(|i| format!("s{i}")).collect();
        Self::from_dense(
            (0..n).collect(),
            names,
            rows.into_iter().flatten().collect(),
            Side::Upper,
            RowWindow::new(0, 0),
        )
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Panel signal indices of the matrix rows.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Similarity between local indices `i` and `j`.
    pub fn get(&self, i: usize, j: usize) -> W {
        self.xi[i * self.nodes.len() + j]
    }

    /// Local index of panel signal `signal`.
    pub fn local(&self, signal: usize) -> Option<usize> {
        self.nodes.binary_search(&signal).ok()
    }

    /// Similarity between two panel signals, if both are nodes.
    pub fn between(&self, a: usize, b: usize) -> Option<W> {
        Some(self.get(self.local(a)?, self.local(b)?))
    }

    pub fn name_of(&self, signal: usize) -> Option<&str> {
        self.local(signal).map(|k| self.names[k].as_str())
    }
}

/// Signal slices entering a similarity matrix, plus the degenerate signals
/// that were left out of it.
#[derive(Debug, Clone)]
pub struct SliceSet<T> {
    /// `(panel signal index, slice)` pairs in increasing index order.
    pub slices: Vec<(usize, NormalizedSlice<T>)>,
    pub excluded: Vec<usize>,
}

impl<T: Scalar> SliceSet<T> {
    /// Normalizes every panel signal over `window`, separating degenerate ones.
    pub fn from_panel(panel: &SignalPanel<T>, side: Side, window: RowWindow) -> Result<Self> {
        let mut slices = Vec::new();
        let mut excluded = Vec::new();
        for i in 0..panel.n_signals() {
            let slice = panel.normalized_signal(i, side, window)?;
            if slice.degenerate {
                excluded.push(i);
            } else {
                slices.push((i, slice));
            }
        }
        Ok(Self { slices, excluded })
    }

    pub fn get(&self, signal: usize) -> Option<&NormalizedSlice<T>> {
        self.slices
            .binary_search_by_key(&signal, |(i, _)| *i)
            .ok()
            .map(|k| &self.slices[k].1)
    }
}

/// Squared inner products of every pair of non-degenerate slices.
///
/// `slices` pairs a panel signal index (increasing) with its slice; all must
/// share window and side.
pub fn similarity_matrix<T: Scalar>(
    slices: &[(usize, NormalizedSlice<T>)],
    names: &[String],
) -> Result<SimilarityMatrix<T>> {
    let (side, window) = match slices.first() {
        Some((_, s)) => (s.side, s.window),
        None => return Err(Error::AllDegenerate),
    };
    if slices.iter().any(|(_, s)| s.side != side || s.window != window || s.values.len() != window.len()) {
        return Err(Error::WindowMismatch);
    }
    let kept: Vec<&(usize, NormalizedSlice<T>)> = slices.iter().filter(|(_, s)| !s.degenerate).collect();
    if kept.is_empty() {
        return Err(Error::AllDegenerate);
    }
    let n = kept.len();
    let mut xi = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let ip = dot(&kept[i].1.values, &kept[j].1.values);
            let v = ip * ip;
            xi[i * n + j] = v;
            xi[j * n + i] = v;
        }
    }
    let nodes: Vec<usize> = kept.iter().map(|(i, _)| *i).collect();
    let node_names = nodes.iter().map(|&i| names[i].clone()).collect();
    SimilarityMatrix::from_dense(nodes, node_names, xi, side, window)
}

/// Similarity matrix of all panel signals over `window`, returning the
/// slices used (and the excluded degenerate signals) alongside.
pub fn panel_similarity<T: Scalar>(
    panel: &SignalPanel<T>,
    side: Side,
    window: RowWindow,
) -> Result<(SimilarityMatrix<T>, SliceSet<T>)> {
    let set = SliceSet::from_panel(panel, side, window)?;
    let sim = similarity_matrix(&set.slices, panel.names())?;
    Ok((sim, set))
}
