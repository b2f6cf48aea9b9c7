//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

#[path = "../../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use treecast::oracle::{simulate_regime_panel, verify_panel, ClusterSpec, PropositionReport};
use treecast::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, budget_secs: u64) -> bool {
    elapsed <= Duration::from_secs(budget_secs)
}

fn mst_optimality() -> Outcome {
    let start = Instant::now();
    let results: Vec<(bool, String)> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x4d53_5400 + seed);
            let n = 3 + (seed as usize % 5);
            // Coarse grids force many ties; 64ths stay exact in binary floating point.
            let denom: i64 = if seed % 2 == 0 { 4 } else { 64 };
            let mut q = vec![vec![Rational::from_integer(1); n]; n];
            let mut f = vec![vec![1.0f64; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let k = rng.random_range(0..=denom);
                    q[i][j] = Rational::new(k, denom);
                    q[j][i] = q[i][j];
                    f[i][j] = k as f64 / denom as f64;
                    f[j][i] = f[i][j];
                }
            }
            let best_q = common::brute_force_min_cost(&q);
            let best_f = common::brute_force_min_cost(&f);
            let sim_q = ExactSimilarity::from_rows(q).unwrap();
            let sim_f = Similarity::from_rows(f).unwrap();
            for root in 0..n {
                let tq = prim_rooted_mst(&sim_q, root).unwrap();
                let tf = prim_rooted_mst(&sim_f, root).unwrap();
                if tq.total_cost() != best_q || tf.total_cost() != best_f || tq.validate().is_err() {
                    return (false, format!("seed {seed} n {n} root {root}"));
                }
            }
            (true, String::new())
        })
        .collect();
    let bad: Vec<&String> = results.iter().filter(|r| !r.0).map(|r| &r.1).collect();
    let elapsed = start.elapsed();
    outcome(
        bad.is_empty() && within(elapsed, 60),
        format!("200 matrices, {} mismatches{}, {:.1?}", bad.len(), bad.first().map(|b| format!(" (first {b:?})")).unwrap_or_default(), elapsed),
    )
}

fn histogram_counting() -> Outcome {
    let start = Instant::now();
    let results: Vec<Result<(), String>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x4849_5354 + seed);
            let rows = rng.random_range(30..=2000);
            let panel = common::random_grid_panel(seed, rows, 6);
            let mut nodes: Vec<usize> = (0..6).collect();
            for i in (1..nodes.len()).rev() {
                nodes.swap(i, rng.random_range(0..=i));
            }
            nodes.truncate(3);
            let path = AttachmentPath {
                as_of: None,
                i_star: nodes[0],
                nodes: nodes.clone(),
                levels_used: 3,
                full_length: 3,
            };
            let cfg = HistogramConfig {
                bins_per_dim: rng.random_range(2..=7),
                range_policy: if rng.random_bool(0.5) {
                    RangePolicy::ObservedMinMax
                } else {
                    RangePolicy::Quantile(0.01, 0.99)
                },
                estimation_window: if rng.random_bool(0.5) {
                    EstimationWindow::Expanding
                } else {
                    EstimationWindow::Trailing(rng.random_range(10..=500))
                },
                conditioning: if rng.random_bool(0.5) { Conditioning::Raw } else { Conditioning::OneSided },
                ..HistogramConfig::default()
            };
            let side = if rng.random_bool(0.5) { Side::Upper } else { Side::Lower };
            let t = rng.random_range(2..rows - 1);
            let level = rng.random_range(0..=2);
            let joint = estimate_joint(&panel, &path, level, t, &cfg, side).map_err(|e| e.to_string())?;
            let cols = common::reference_columns(&panel, &nodes[..=level], t, &cfg, side);
            let mut edges = Vec::new();
            for (axis, col) in joint.axes.iter().zip(&cols) {
                match common::reference_range(col, cfg.range_policy) {
                    None if axis.constant => edges.push(axis.edges().to_vec()),
                    Some((lo, hi)) if !axis.constant => {
                        let b = cfg.bins_per_dim;
                        let w = (hi - lo) / b as f64;
                        let mut e: Vec<f64> = (0..b).map(|k| lo + w * k as f64).collect();
                        e.push(hi);
                        if e != axis.edges() {
                            return Err(format!("seed {seed}: edges {:?} vs {:?}", e, axis.edges()));
                        }
                        edges.push(e);
                    }
                    _ => return Err(format!("seed {seed}: constant-axis disagreement")),
                }
            }
            let expected = common::recount(&cols, &edges);
            let total: u64 = expected.values().sum();
            if total != joint.total || joint.counts.iter().sum::<u64>() != total {
                return Err(format!("seed {seed}: totals differ"));
            }
            let shape: Vec<usize> = edges.iter().map(|e| e.len() - 1).collect();
            let cells: usize = shape.iter().product();
            for flat in 0..cells {
                let mut idx = vec![0; shape.len()];
                let mut rem = flat;
                for d in (0..shape.len()).rev() {
                    idx[d] = rem % shape[d];
                    rem /= shape[d];
                }
                let want = expected.get(&idx).copied().unwrap_or(0);
                if joint.count(&idx) != want {
                    return Err(format!("seed {seed}: cell {idx:?} has {} want {want}", joint.count(&idx)));
                }
            }
            Ok(())
        })
        .collect();
    let bad: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let elapsed = start.elapsed();
    outcome(
        bad.is_empty() && within(elapsed, 60),
        format!("100 panels, {} mismatches{}, {:.1?}", bad.len(), bad.first().map(|b| format!(" (first {b:?})")).unwrap_or_default(), elapsed),
    )
}

struct PropSweep {
    centrality: PropositionReport,
    estimator: PropositionReport,
    max_pythagoras: f64,
    edges: usize,
    elapsed: Duration,
}

fn cluster_spec(seed: u64) -> ClusterSpec {
    ClusterSpec {
        seed,
        noise_scale: 0.05 + 0.05 * (seed % 5) as f64,
        horizon: 1000,
        ..ClusterSpec::default()
    }
}

fn proposition_sweep() -> PropSweep {
    let start = Instant::now();
    let reports: Vec<_> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let (panel, _) = simulate_regime_panel::<f64>(&cluster_spec(seed).model().unwrap()).unwrap();
            (seed, verify_panel(&panel, Side::Upper, WidthMetric::PathCost, 1e-9).unwrap())
        })
        .collect();
    let mut sweep = PropSweep {
        centrality: PropositionReport { tolerance: 1e-9, ..Default::default() },
        estimator: PropositionReport { tolerance: 1e-9, ..Default::default() },
        max_pythagoras: 0.0,
        edges: 0,
        elapsed: Duration::ZERO,
    };
    for (seed, r) in reports {
        let id = format!("seed{seed}");
        sweep.centrality.merge(&id, r.parent_centrality);
        sweep.estimator.merge(&id, r.parent_estimator);
        sweep.max_pythagoras = sweep.max_pythagoras.max(r.pythagoras_max_abs_residual);
        sweep.edges += r.pythagoras_edges;
    }
    sweep.elapsed = start.elapsed();
    sweep
}

fn report_outcome(r: &PropositionReport, elapsed: Duration) -> Outcome {
    outcome(
        r.is_clean() && r.instances_checked > 0 && within(elapsed, 300),
        format!(
            "{} instances, {} violations, max margin {:.3e}, {} skipped, tree-set-free check held {}/{}, {:.1?}",
            r.instances_checked,
            r.violations.len(),
            r.max_margin_violation,
            r.skipped.len(),
            r.full_set_holds,
            r.full_set_checked,
            elapsed
        ),
    )
}

fn masses_are_normalized() -> Result<usize, String> {
    let checked: Vec<Result<usize, String>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let (panel, _) = simulate_regime_panel::<f64>(&cluster_spec(seed).model().unwrap()).unwrap();
            let cfg = BacktestConfig::default();
            let pcfg = cfg.predictor();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut n = 0;
            for _ in 0..3 {
                let t = rng.random_range(cfg.first_feasible_row()..panel.len() - 1);
                let epoch = build_tree(&panel, t, &cfg).map_err(|e| e.to_string())?;
                let a = attach_to_tree(&panel, &epoch.tree, t, &cfg.attachment()).map_err(|e| e.to_string())?;
                let path = path_to_root(&epoch.tree, a.i_star, cfg.max_levels).map_err(|e| e.to_string())?;
                let conds = level_conditionals(&panel, &path, t, &pcfg).map_err(|e| e.to_string())?;
                let intervals: Vec<(f64, f64)> = conds.iter().map(|c| confidence_interval(c, 0.9)).collect();
                let bad = |m: f64| (m - 1.0).abs() > 1e-9;
                for (lambda, c) in conds.iter().enumerate() {
                    let mix = mixture(&conds[..=lambda], &intervals[..=lambda], MixtureMode::Renormalized)
                        .map_err(|e| e.to_string())?;
                    let raw = mixture(&conds[..=lambda], &intervals[..=lambda], MixtureMode::RawTruncated)
                        .map_err(|e| e.to_string())?;
                    let masses = [
                        c.total_mass(),
                        c.truncated(intervals[lambda]).total_mass(),
                        mix.mixture_mass.iter().sum(),
                        raw.mixture_mass.iter().sum(),
                    ];
                    if let Some(m) = masses.iter().find(|m| bad(**m)) {
                        return Err(format!("seed {seed} t {t} level {lambda}: mass {m}"));
                    }
                    n += masses.len();
                }
            }
            Ok(n)
        })
        .collect();
    checked.into_iter().sum()
}

fn normalization(sweep: &PropSweep) -> Outcome {
    let masses = masses_are_normalized();
    let pyth_ok = sweep.max_pythagoras <= 1e-9;
    let detail = format!(
        "{} edges, max |xi + |eps|^2 - 1| = {:.3e}; masses: {}",
        sweep.edges,
        sweep.max_pythagoras,
        match &masses {
            Ok(n) => format!("{n} checked within 1e-9"),
            Err(e) => e.clone(),
        }
    );
    outcome(pyth_ok && masses.is_ok(), detail)
}

fn coverage_calibration() -> Outcome {
    fn binomial(n: usize, p: f64) -> Vec<f64> {
        let mut pmf = vec![0.0; n + 1];
        let mut c = 1.0f64;
        for k in 0..=n {
            pmf[k] = c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
            c = c * (n - k) as f64 / (k + 1) as f64;
        }
        pmf
    }
    fn poisson(lambda: f64, max: usize) -> Vec<f64> {
        let mut pmf = vec![(-lambda).exp()];
        for k in 1..=max {
            pmf.push(pmf[k - 1] * lambda / k as f64);
        }
        pmf
    }
    fn normal_grid(points: usize) -> Vec<f64> {
        (0..points)
            .map(|k| {
                let z = -4.0 + 8.0 * k as f64 / (points - 1) as f64;
                (-0.5 * z * z).exp()
            })
            .collect()
    }
    let cases: Vec<(&str, Vec<f64>)> = vec![
        ("binomial(200, 0.3)", binomial(200, 0.3)),
        ("poisson(40)", poisson(40.0, 120)),
        ("uniform(1000)", vec![1.0; 1000]),
        ("discretized normal(401)", normal_grid(401)),
        ("skewed mixture", {
            let mut v = poisson(15.0, 150);
            for (k, p) in poisson(80.0, 150).iter().enumerate() {
                v[k] += 0.3 * p;
            }
            v
        }),
    ];
    let mut lines = Vec::new();
    let mut pass = true;
    for (i, (name, weights)) in cases.into_iter().enumerate() {
        let total: f64 = weights.iter().sum();
        let mass: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let cond = ConditionalDist {
            level: 0,
            support: (0..mass.len()).map(|k| k as f64).collect(),
            mass: mass.clone(),
            realization: vec![],
            fallback_used: false,
            clamped: false,
        };
        let (lo, hi) = confidence_interval(&cond, 0.90);
        let mut cdf = Vec::with_capacity(mass.len());
        let mut acc = 0.0;
        for m in &mass {
            acc += m;
            cdf.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0 + i as u64);
        let draws = 100_000;
        let inside = (0..draws)
            .filter(|_| {
                let u: f64 = rng.random();
                let x = cdf.partition_point(|c| *c < u).min(mass.len() - 1) as f64;
                x >= lo && x <= hi
            })
            .count();
        let coverage = inside as f64 / draws as f64;
        pass &= (0.87..=0.93).contains(&coverage);
        lines.push(format!("{name} {coverage:.4}"));
    }
    outcome(pass, format!("10^5 draws each: {}", lines.join(", ")))
}

fn ic_by_level() -> Outcome {
    let start = Instant::now();
    let cfg = BacktestConfig::default();
    let ics: Vec<Result<Vec<f64>, String>> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let spec = ClusterSpec { seed, ..ClusterSpec::default() };
            let (panel, _) = simulate_regime_panel::<f64>(&spec.model().unwrap()).map_err(|e| e.to_string())?;
            let log = run_backtest(&panel, &cfg).map_err(|e| e.to_string())?;
            (0..cfg.max_levels)
                .map(|l| information_coefficient(&log, l).map(|ic| ic.ic).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();
    let elapsed = start.elapsed();
    let ics: Vec<Vec<f64>> = match ics.into_iter().collect() {
        Ok(v) => v,
        Err(e) => return outcome(false, e),
    };
    let wins = ics.iter().filter(|r| r[1] > r[0]).count();
    let means: Vec<f64> = (0..cfg.max_levels)
        .map(|l| ics.iter().map(|r| r[l]).sum::<f64>() / ics.len() as f64)
        .collect();
    let monotone = means.windows(2).all(|w| w[1] >= w[0]);
    let share = wins as f64 / ics.len() as f64;
    outcome(
        share >= 0.7 && monotone && within(elapsed, 900),
        format!(
            "IC(2) > IC(1) in {wins}/{} seeds, mean IC by level {:?}, {:.1?}",
            ics.len(),
            means.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>(),
            elapsed
        ),
    )
}

fn digest(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    format!("{:x}", Sha256::digest(&bytes))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_treecast"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn determinism() -> Outcome {
    let run = || -> Result<(usize, bool), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = dir.path();
        let sim_cfg = d.join("sim.cfg");
        std::fs::write(&sim_cfg, "horizon = 900\n").map_err(|e| e.to_string())?;
        let mut digests = Vec::new();
        for (k, jobs) in ["1", "3"].iter().enumerate() {
            let sim = d.join(format!("sim{k}"));
            let panel = sim.join("panel.csv");
            run_cli(&["--jobs", jobs, "simulate", "--config", sim_cfg.to_str().unwrap(), "--seed", "7", "--out", panel.to_str().unwrap()])?;
            let bt = d.join(format!("bt{k}"));
            run_cli(&["--jobs", jobs, "backtest", "--panel", panel.to_str().unwrap(), "--target", "ret", "--out", bt.to_str().unwrap()])?;
            let files = [
                sim.join("panel.csv"),
                sim.join("regimes.csv"),
                bt.join("predictions.jsonl"),
                bt.join("monthly_ic.csv"),
                bt.join("attachments.csv"),
                bt.join("tree.json"),
            ];
            digests.push(files.iter().map(|f| digest(f)).collect::<Vec<_>>());
        }
        Ok((digests[0].len(), digests[0] == digests[1]))
    };
    match run() {
        Ok((n, same)) => outcome(same, format!("{n} output files, sha256 identical across runs and --jobs 1/3: {same}")),
        Err(e) => outcome(false, e),
    }
}

fn benchmark_level0() -> Outcome {
    let cfg = BacktestConfig { max_levels: 1, ..BacktestConfig::default() };
    let results: Vec<Result<usize, String>> = (0..6u64)
        .into_par_iter()
        .map(|seed| {
            let spec = ClusterSpec { seed: 900 + seed, horizon: 800, ..ClusterSpec::default() };
            let (panel, _) = simulate_regime_panel::<f64>(&spec.model().unwrap()).map_err(|e| e.to_string())?;
            let log = run_backtest(&panel, &cfg).map_err(|e| e.to_string())?;
            let days: Vec<&DayRecord<f64>> = log.days.iter().filter(|d| d.gap.is_none()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let day = days[rng.random_range(0..days.len())];
                let i_star = day.path.as_ref().unwrap().i_star;
                let want = common::reference_level0_mean(&panel, i_star, day.as_of_row, &cfg.histogram);
                let got = day.x_star.unwrap();
                if got != want || day.per_level[0].mean != want || day.x_star_by_level[0] != want {
                    return Err(format!("seed {seed} {}: x* {got} vs level-0 mean {want}", day.date));
                }
            }
            Ok(20)
        })
        .collect();
    match results.into_iter().collect::<Result<Vec<_>, _>>() {
        Ok(v) => outcome(true, format!("{} panels x 20 dates, x* == level-0 conditional mean bit-for-bit", v.len())),
        Err(e) => outcome(false, e),
    }
}

fn main() {
    let sweep = proposition_sweep();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("MST optimality oracle", Box::new(mst_optimality)),
        ("histogram counting oracle", Box::new(histogram_counting)),
        ("parent centrality (principal direction)", Box::new(|| report_outcome(&sweep.centrality, sweep.elapsed))),
        ("parent estimator (uncertainty error)", Box::new(|| report_outcome(&sweep.estimator, sweep.elapsed))),
        ("Pythagoras and unit mass", Box::new(|| normalization(&sweep))),
        ("interval coverage calibration", Box::new(coverage_calibration)),
        ("IC increases with level", Box::new(ic_by_level)),
        ("determinism", Box::new(determinism)),
        ("level-0 benchmark", Box::new(benchmark_level0)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] {} {}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, name, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
