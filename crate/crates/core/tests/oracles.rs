#![allow(clippy::needless_range_loop)]

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treecast::oracle::{simulate_regime_panel, ClusterSpec};
use treecast::*;

#[test]
fn prufer_enumeration_counts_cayley() {
    for n in 2..=6 {
        let trees = common::all_spanning_trees(n);
        assert_eq!(trees.len(), n.pow(n as u32 - 2));
        assert!(trees.iter().all(|t| t.len() == n - 1));
    }
}

#[test]
fn prim_matches_enumeration_on_rationals() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let n = rng.random_range(2..=6);
        let mut rows = vec![vec![Rational::from_integer(1); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                rows[i][j] = Rational::new(rng.random_range(0..=9), 9);
                rows[j][i] = rows[i][j];
            }
        }
        let best = common::brute_force_min_cost(&rows);
        let sim = ExactSimilarity::from_rows(rows).unwrap();
        for root in 0..n {
            assert_eq!(prim_rooted_mst(&sim, root).unwrap().total_cost(), best);
        }
    }
}

#[test]
fn prim_matches_enumeration_in_single_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..40 {
        let n = rng.random_range(3..=6);
        let mut rows = vec![vec![1.0f32; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                rows[i][j] = rng.random_range(0..=32) as f32 / 32.0;
                rows[j][i] = rows[i][j];
            }
        }
        let best = common::brute_force_min_cost(&rows);
        let sim = SimilarityMatrix::from_rows(rows).unwrap();
        assert_eq!(prim_rooted_mst(&sim, 0).unwrap().total_cost(), best);
    }
}

#[test]
fn widest_tree_from_panel_is_a_minimum_spanning_tree() {
    let spec = ClusterSpec { horizon: 400, seed: 5, n_clusters: 2, signals_per_cluster: 3, ..Default::default() };
    let (panel, _) = simulate_regime_panel::<f64>(&spec.model().unwrap()).unwrap();
    let (sim, _) = panel_similarity(&panel, Side::Upper, RowWindow::new(0, panel.len())).unwrap();
    let xi: Vec<Vec<f64>> = (0..sim.len()).map(|i| (0..sim.len()).map(|j| sim.get(i, j)).collect()).collect();
    let best = common::brute_force_min_cost(&xi);
    let tree = select_widest_tree(&sim, WidthMetric::PathCost).unwrap();
    assert!((tree.total_cost() - best).abs() < 1e-12);
}

#[test]
fn joint_counts_match_recount_on_small_panels() {
    for seed in 0..20u64 {
        let panel = common::random_grid_panel(100 + seed, 120, 3);
        let path = AttachmentPath { as_of: None, i_star: 2, nodes: vec![2, 0, 1], levels_used: 3, full_length: 3 };
        let cfg = HistogramConfig { bins_per_dim: 3, range_policy: RangePolicy::ObservedMinMax, ..Default::default() };
        let t = 100;
        let joint = estimate_joint(&panel, &path, 2, t, &cfg, Side::Upper).unwrap();
        let cols = common::reference_columns(&panel, &path.nodes, t, &cfg, Side::Upper);
        let edges: Vec<Vec<f64>> = joint.axes.iter().map(|a| a.edges().to_vec()).collect();
        for (cell, n) in common::recount(&cols, &edges) {
            assert_eq!(joint.count(&cell), n, "seed {seed} cell {cell:?}");
        }
        assert_eq!(joint.total, t as u64);
    }
}

#[test]
fn level_zero_prediction_is_the_benchmark() {
    let panel = common::random_grid_panel(77, 400, 4);
    let cfg = HistogramConfig::default();
    let pcfg = PredictorConfig { histogram: cfg, ..Default::default() };
    for t in [60, 150, 399] {
        for s in 0..4 {
            let path = AttachmentPath { as_of: None, i_star: s, nodes: vec![s], levels_used: 1, full_length: 1 };
            let p = predict(&panel, &path, t, &pcfg).unwrap();
            assert_eq!(p.x_star, common::reference_level0_mean(&panel, s, t, &cfg));
        }
    }
}

#[test]
fn example_panels_load() {
    let text = "date,a,b,ret\n2024-01-02,1,2,0.01\n2024-01-03,,3,0.02\n2024-01-04,2,4,-0.01\n";
    let p: Panel = load_panel(text.as_bytes(), "ret", FillPolicy::default()).unwrap();
    assert_eq!(p.signal(0), &[1.0, 1.0, 2.0]);
    let err = load_panel::<f64, _>(text.as_bytes(), "ret", FillPolicy::Strict).unwrap_err();
    assert!(matches!(err, Error::MissingValue { line: 3, .. }));
}
