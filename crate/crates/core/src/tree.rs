//! Rooted minimum spanning trees over a similarity matrix.
//!
//! Edge cost is the negated similarity, so a minimum spanning tree keeps the
//! most similar links. Prim's growth direction (tree to outside vertex)
//! roots the tree at the start vertex; running it from every vertex gives a
//! family of candidate trees of equal total cost but different shapes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Weight;
use crate::similarity::SimilarityMatrix;

/// Directed spanning tree; node ids are panel signal indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTree<W> {
    pub root: usize,
    /// Child to parent. The root has no entry.
    pub parent: BTreeMap<usize, usize>,
    /// Child to similarity of the edge to its parent.
    pub edge_sim: BTreeMap<usize, W>,
    /// Vertices in the order Prim added them; starts with the root.
    pub birth_order: Vec<usize>,
}

impl<W: Weight> RootedTree<W> {
    pub fn len(&self) -> usize {
        self.birth_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.birth_order.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        node == self.root || self.parent.contains_key(&node)
    }

    /// Node ids in increasing order.
    pub fn nodes(&self) -> Vec<usize> {
        let mut nodes = self.birth_order.clone();
        nodes.sort_unstable();
        nodes
    }

    pub fn parent_of(&self, node: usize) -> Option<usize> {
        self.parent.get(&node).copied()
    }

    /// Children of `node` in the order they were attached.
    pub fn children(&self, node: usize) -> Vec<usize> {
        self.birth_order
            .iter()
            .copied()
            .filter(|c| self.parent.get(c) == Some(&node))
            .collect()
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = BTreeMap::new();
        for &p in self.parent.values() {
            has_child.insert(p, ());
        }
        self.nodes().into_iter().filter(|n| !has_child.contains_key(n)).collect()
    }

    /// Position of `node` in the birth order.
    pub fn birth_step(&self, node: usize) -> Option<usize> {
        self.birth_order.iter().position(|&n| n == node)
    }

    /// Nodes from `node` up to and including the root.
    pub fn path_to_root(&self, node: usize) -> Result<Vec<usize>> {
        if !self.contains(node) {
            return Err(Error::NodeNotInTree(node));
        }
        let mut path = vec![node];
        let mut current = node;
        while let Some(p) = self.parent_of(current) {
            if path.len() > self.len() {
                return Err(Error::Shape("parent map contains a cycle".into()));
            }
            path.push(p);
            current = p;
        }
        Ok(path)
    }

    pub fn depth(&self, node: usize) -> Result<usize> {
        Ok(self.path_to_root(node)?.len() - 1)
    }

    /// Sum of edge costs (negated similarities).
    pub fn total_cost(&self) -> W {
        self.edge_sim.values().fold(W::zero(), |acc, &xi| acc - xi)
    }

    /// Every structural invariant: `len - 1` edges, all nodes reach the root,
    /// the root comes first in the birth order.
    pub fn validate(&self) -> Result<()> {
        if self.birth_order.first() != Some(&self.root) || self.parent.len() + 1 != self.len() {
            return Err(Error::Shape("tree edge count does not match node count".into()));
        }
        if self.edge_sim.len() != self.parent.len() {
            return Err(Error::Shape("edge similarities do not match parent map".into()));
        }
        for &node in &self.birth_order {
            if *self.path_to_root(node)?.last().unwrap() != self.root {
                return Err(Error::Shape("path does not end at root".into()));
            }
        }
        Ok(())
    }
}

/// Grows a spanning tree from `root`, always adding the outside vertex with
/// the largest similarity to any tree vertex.
///
/// Ties prefer the lowest outside vertex, then the lowest tree vertex.
pub fn prim_rooted_mst<W: Weight>(sim: &SimilarityMatrix<W>, root: usize) -> Result<RootedTree<W>> {
    let n = sim.len();
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }
    let start = sim.local(root).ok_or(Error::NodeNotInTree(root))?;
    let nodes = sim.nodes();

    let mut in_tree = vec![false; n];
    // Best link of each outside vertex into the tree: (similarity, tree vertex).
    let mut best: Vec<(W, usize)> = (0..n).map(|v| (sim.get(start, v), start)).collect();
    in_tree[start] = true;

    let mut tree = RootedTree {
        root,
        parent: BTreeMap::new(),
        edge_sim: BTreeMap::new(),
        birth_order: vec![root],
    };
    for _ in 1..n {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            match pick {
                None => pick = Some(v),
                Some(p) if best[v].0 > best[p].0 => pick = Some(v),
                _ => {}
            }
        }
        let v = pick.expect("outside vertex remains");
        let (xi, u) = best[v];
        in_tree[v] = true;
        tree.parent.insert(nodes[v], nodes[u]);
        tree.edge_sim.insert(nodes[v], xi);
        tree.birth_order.push(nodes[v]);
        for w in 0..n {
            if in_tree[w] {
                continue;
            }
            let cand = sim.get(v, w);
            if cand > best[w].0 || (cand == best[w].0 && v < best[w].1) {
                best[w] = (cand, v);
            }
        }
    }
    Ok(tree)
}

/// Shape criterion used to pick among candidate trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthMetric {
    /// Sum over leaves of the leaf-to-root path cost.
    #[default]
    PathCost,
    /// Number of direct children of the root.
    RootOutdegree,
}

impl fmt::Display for WidthMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WidthMetric::PathCost => "path_cost",
            WidthMetric::RootOutdegree => "root_outdegree",
        })
    }
}

impl FromStr for WidthMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "path_cost" => Ok(WidthMetric::PathCost),
            "root_outdegree" => Ok(WidthMetric::RootOutdegree),
            other => Err(Error::config(
                "width_metric",
                format!("expected path_cost|root_outdegree, got {other:?}"),
            )),
        }
    }
}

/// Sum over leaves of the summed edge costs on the path to the root. Flatter
/// trees have shorter paths and therefore larger (less negative) scores.
pub fn tree_width_score<W: Weight>(tree: &RootedTree<W>) -> W {
    let mut score = W::zero();
    for leaf in tree.leaves() {
        let mut node = leaf;
        while let Some(p) = tree.parent_of(node) {
            score = score - tree.edge_sim[&node];
            node = p;
        }
    }
    score
}

pub fn width_score<W: Weight>(tree: &RootedTree<W>, metric: WidthMetric) -> W {
    match metric {
        WidthMetric::PathCost => tree_width_score(tree),
        WidthMetric::RootOutdegree => tree
            .parent
            .values()
            .filter(|&&p| p == tree.root)
            .fold(W::zero(), |acc, _| acc + W::one()),
    }
}

/// One Prim tree per possible root, in increasing root order.
pub fn candidate_trees<W: Weight>(sim: &SimilarityMatrix<W>) -> Result<Vec<RootedTree<W>>> {
    sim.nodes()
        .par_iter()
        .map(|&root| prim_rooted_mst(sim, root))
        .collect()
}

/// The candidate tree with the largest width score; ties keep the lowest root.
pub fn select_widest_tree<W: Weight>(sim: &SimilarityMatrix<W>, metric: WidthMetric) -> Result<RootedTree<W>> {
    let mut best: Option<(W, RootedTree<W>)> = None;
    for tree in candidate_trees(sim)? {
        let score = width_score(&tree, metric);
        match &best {
            Some((s, _)) if !(score > *s) => {}
            _ => best = Some((score, tree)),
        }
    }
    Ok(best.expect("at least two candidates").1)
}
