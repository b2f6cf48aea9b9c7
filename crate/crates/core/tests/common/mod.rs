//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treecast::oracle::business_days;
use treecast::*;

/// Every labelled spanning tree on `n >= 2` vertices, decoded from its Prüfer
/// sequence, as a list of undirected edges.
pub fn all_spanning_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    assert!(n >= 2);
    if n == 2 {
        return vec![vec![(0, 1)]];
    }
    let len = n - 2;
    let total = n.pow(len as u32);
    let mut out = Vec::with_capacity(total);
    let mut seq = vec![0usize; len];
    for code in 0..total {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = c % n;
            c /= n;
        }
        out.push(decode_prufer(&seq, n));
    }
    out
}

fn decode_prufer(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Minimum over all spanning trees of the summed edge cost `-xi`.
pub fn brute_force_min_cost<W: Weight>(xi: &[Vec<W>]) -> W {
    let n = xi.len();
    all_spanning_trees(n)
        .into_iter()
        .map(|edges| edges.iter().fold(W::zero(), |acc, &(a, b)| acc - xi[a][b]))
        .fold(None, |best: Option<W>, c| match best {
            Some(b) if b <= c => Some(b),
            _ => Some(c),
        })
        .unwrap()
}

/// Linear-interpolation quantile, computed from scratch.
pub fn reference_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = pos.ceil() as usize;
    let w = pos - i as f64;
    v[i] + (v[j] - v[i]) * w
}

/// Expected `(lo, hi)` range of an axis, `None` for a constant axis.
pub fn reference_range(values: &[f64], policy: RangePolicy) -> Option<(f64, f64)> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return None;
    }
    let (lo, hi) = match policy {
        RangePolicy::ObservedMinMax => (min, max),
        RangePolicy::Quantile(a, b) => (reference_quantile(values, a), reference_quantile(values, b)),
    };
    Some(if hi > lo { (lo, hi) } else { (min, max) })
}

/// Bin of `v` given the axis edges: the number of interior edges at or below
/// `v`, found by scanning.
pub fn reference_bin(edges: &[f64], v: f64) -> usize {
    let mut b = 0;
    for e in &edges[1..edges.len() - 1] {
        if *e <= v {
            b += 1;
        }
    }
    b
}

/// Observation columns `(x, s_0, ..., s_level)` for the prediction at row `t`.
pub fn reference_columns(
    panel: &Panel,
    nodes: &[usize],
    t: usize,
    cfg: &HistogramConfig,
    side: Side,
) -> Vec<Vec<f64>> {
    let start = match cfg.estimation_window {
        EstimationWindow::Expanding => 0,
        EstimationWindow::Trailing(n) => t.saturating_sub(n),
    };
    let mut cols = vec![(start..t).map(|r| panel.target()[r + 1]).collect::<Vec<f64>>()];
    for &s in nodes {
        let sig = panel.signal(s);
        let col: Vec<f64> = match cfg.conditioning {
            Conditioning::Raw => (start..t).map(|r| sig[r]).collect(),
            Conditioning::OneSided => {
                let mean = sig[..=t].iter().sum::<f64>() / (t + 1) as f64;
                (start..t)
                    .map(|r| {
                        let d = sig[r] - mean;
                        match side {
                            Side::Upper => d.max(0.0),
                            Side::Lower => d.min(0.0),
                        }
                    })
                    .collect()
            }
        };
        cols.push(col);
    }
    cols
}

/// Naive recount of a joint histogram over the given per-axis edges.
pub fn recount(cols: &[Vec<f64>], edges: &[Vec<f64>]) -> BTreeMap<Vec<usize>, u64> {
    let mut map = BTreeMap::new();
    for k in 0..cols[0].len() {
        let cell: Vec<usize> = cols.iter().zip(edges).map(|(c, e)| reference_bin(e, c[k])).collect();
        *map.entry(cell).or_insert(0) += 1;
    }
    map
}

/// Random panel with values on a coarse grid, so ties and values exactly on a
/// bin edge are common.
pub fn random_grid_panel(seed: u64, rows: usize, n_signals: usize) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = rng.random_range(3..40) as f64;
    let signals: Vec<Vec<f64>> = (0..n_signals)
        .map(|_| (0..rows).map(|_| (rng.random_range(-20..=20) as f64) / grid).collect())
        .collect();
    let target: Vec<f64> = (0..rows).map(|_| (rng.random_range(-50..=50) as f64) / 1000.0).collect();
    let names = (0..n_signals).map(|i| format!("s{i}")).collect();
    let dates = business_days(chrono::NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(), rows);
    SignalPanel::new(dates, names, signals, "ret", target).unwrap()
}

/// Level-0 benchmark computed from scratch: the slice of the `(X, S_{i*})`
/// histogram through the row-`t` realization, truncated to its central
/// interval, and its mean.
pub fn reference_level0_mean(panel: &Panel, i_star: usize, t: usize, cfg: &HistogramConfig) -> f64 {
    let cols = reference_columns(panel, &[i_star], t, cfg, Side::Upper);
    let bins = cfg.bins_per_dim;
    let axis = |values: &[f64]| -> Vec<f64> {
        match reference_range(values, cfg.range_policy) {
            None => {
                let v = values[0];
                let pad = 1e-9 * v.abs().max(1.0);
                vec![v - pad, v + pad]
            }
            Some((lo, hi)) => {
                let w = (hi - lo) / bins as f64;
                let mut e: Vec<f64> = (0..bins).map(|k| lo + w * k as f64).collect();
                e.push(hi);
                e
            }
        }
    };
    let ex = axis(&cols[0]);
    let es = axis(&cols[1]);
    let realization = match cfg.conditioning {
        Conditioning::Raw => panel.signal(i_star)[t],
        Conditioning::OneSided => unimplemented!("reference covers raw conditioning"),
    };
    let rb = reference_bin(&es, realization);
    let nx = ex.len() - 1;
    let mut slice = vec![0u64; nx];
    let mut marginal = vec![0u64; nx];
    for k in 0..cols[0].len() {
        let bx = reference_bin(&ex, cols[0][k]);
        marginal[bx] += 1;
        if reference_bin(&es, cols[1][k]) == rb {
            slice[bx] += 1;
        }
    }
    let counts = if slice.iter().all(|&c| c == 0) { marginal } else { slice };
    let total: u64 = counts.iter().sum();
    let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let mid: Vec<f64> = ex.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();

    let tail = (1.0 - cfg.coverage) / 2.0;
    let mut cdf = 0.0;
    let mut lo = None;
    let mut hi = None;
    for (i, m) in mass.iter().enumerate() {
        cdf += m;
        if lo.is_none() && cdf >= tail - 1e-12 {
            lo = Some(i);
        }
        if hi.is_none() && cdf >= 1.0 - tail - 1e-12 {
            hi = Some(i);
        }
    }
    let lo = lo.unwrap_or(nx - 1);
    let hi = hi.unwrap_or(nx - 1).max(lo);
    let kept: f64 = mass[lo..=hi].iter().sum();
    (lo..=hi).map(|i| mid[i] * (mass[i] / kept)).sum()
}
