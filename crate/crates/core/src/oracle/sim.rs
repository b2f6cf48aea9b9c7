//! Synthetic regime-switching panels.
//!
//! Signals come in clusters that load on a common latent factor; cluster
//! factors in turn share a global factor. The target at `t + 1` is the upside
//! of whichever signal is dominant at `t`, plus noise, where the dominant
//! index follows a sticky Markov chain.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{parse_kv, parse_value};
use crate::error::{Error, Result};
use crate::panel::SignalPanel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeModel {
    /// Signal indices per cluster; together a partition of `0..n_signals`.
    pub clusters: Vec<Vec<usize>>,
    /// Signals that can drive the target; indexes the transition matrix.
    pub active: Vec<usize>,
    /// Row-stochastic transition matrix over `active`.
    pub transition: Vec<Vec<f64>>,
    pub dominance: f64,
    /// Idiosyncratic noise added to each signal (signals have unit factor loading).
    pub noise_scale: f64,
    /// Noise on the target, relative to the signal scale.
    pub target_noise: f64,
    /// Variance share of the global factor in every cluster factor.
    pub global_share: f64,
    /// AR(1) coefficient of the latent factors.
    pub persistence: f64,
    /// Multiplier mapping signal units to returns.
    pub return_scale: f64,
    pub horizon: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
}

impl RegimeModel {
    pub fn n_signals(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn cluster_of(&self, signal: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(&signal))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_signals();
        let mut seen = vec![false; n];
        for &s in self.clusters.iter().flatten() {
            if s >= n || seen[s] {
                return Err(Error::InvalidModel("clusters must partition 0..n_signals".into()));
            }
            seen[s] = true;
        }
        if n == 0 || self.active.is_empty() || self.active.iter().any(|&a| a >= n) {
            return Err(Error::InvalidModel("active signals must be valid, non-empty".into()));
        }
        if !(0.0..1.0).contains(&self.dominance) {
            return Err(Error::InvalidModel("dominance must lie in [0, 1)".into()));
        }
        let m = self.active.len();
        if self.transition.len() != m || self.transition.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidModel("transition matrix must be m x m over active signals".into()));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!("transition row {i} is not a probability vector")));
            }
            if row[i] < self.dominance {
                return Err(Error::InvalidModel(format!("transition diagonal {i} below dominance")));
            }
        }
        let nonneg = [self.noise_scale, self.target_noise, self.return_scale];
        if nonneg.iter().any(|v| !(*v >= 0.0)) || !(0.0..=1.0).contains(&self.global_share) {
            return Err(Error::InvalidModel("scales must be nonnegative, global_share in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.persistence.abs()) {
            return Err(Error::InvalidModel("persistence must lie in (-1, 1)".into()));
        }
        Ok(())
    }
}

/// Parameters of the standard clustered model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSpec {
    pub n_clusters: usize,
    pub signals_per_cluster: usize,
    pub dominance: f64,
    /// Share of the switching mass that stays inside the current cluster.
    pub within_cluster_share: f64,
    pub noise_scale: f64,
    pub target_noise: f64,
    pub global_share: f64,
    pub persistence: f64,
    pub return_scale: f64,
    pub horizon: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self {
            n_clusters: 3,
            signals_per_cluster: 5,
            dominance: 0.9,
            within_cluster_share: 0.8,
            noise_scale: 0.25,
            target_noise: 0.25,
            global_share: 0.3,
            persistence: 0.0,
            return_scale: 0.01,
            horizon: 3000,
            seed: 0,
            start_date: NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(),
        }
    }
}

impl ClusterSpec {
    pub const KEYS: &'static [&'static str] = &[
        "n_clusters",
        "signals_per_cluster",
        "dominance",
        "within_cluster_share",
        "noise_scale",
        "target_noise",
        "global_share",
        "persistence",
        "return_scale",
        "horizon",
        "seed",
        "start_date",
    ];

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut spec = ClusterSpec::default();
        for (key, value) in parse_kv(text)? {
            let v = value.as_str();
            let k = key.as_str();
            match k {
                "n_clusters" => spec.n_clusters = parse_value(k, v)?,
                "signals_per_cluster" => spec.signals_per_cluster = parse_value(k, v)?,
                "dominance" => spec.dominance = parse_value(k, v)?,
                "within_cluster_share" => spec.within_cluster_share = parse_value(k, v)?,
                "noise_scale" => spec.noise_scale = parse_value(k, v)?,
                "target_noise" => spec.target_noise = parse_value(k, v)?,
                "global_share" => spec.global_share = parse_value(k, v)?,
                "persistence" => spec.persistence = parse_value(k, v)?,
                "return_scale" => spec.return_scale = parse_value(k, v)?,
                "horizon" => spec.horizon = parse_value(k, v)?,
                "seed" => spec.seed = parse_value(k, v)?,
                "start_date" => {
                    spec.start_date = NaiveDate::parse_from_str(v, "%Y-%m-%d")
                        .map_err(|_| Error::config(k, "expected YYYY-MM-DD"))?
                }
                _ => return Err(Error::config(k, "unknown key")),
            }
        }
        spec.model()?;
        Ok(spec)
    }

    pub fn to_kv_string(&self) -> String {
        let pairs = [
            ("n_clusters", self.n_clusters.to_string()),
            ("signals_per_cluster", self.signals_per_cluster.to_string()),
            ("dominance", self.dominance.to_string()),
            ("within_cluster_share", self.within_cluster_share.to_string()),
            ("noise_scale", self.noise_scale.to_string()),
            ("target_noise", self.target_noise.to_string()),
            ("global_share", self.global_share.to_string()),
            ("persistence", self.persistence.to_string()),
            ("return_scale", self.return_scale.to_string()),
            ("horizon", self.horizon.to_string()),
            ("seed", self.seed.to_string()),
            ("start_date", self.start_date.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Builds the model: every signal is active, the diagonal of the
    /// transition matrix equals `dominance`, and the remaining mass is split
    /// between same-cluster and other-cluster signals.
    pub fn model(&self) -> Result<RegimeModel> {
        if self.n_clusters == 0 || self.signals_per_cluster == 0 {
            return Err(Error::InvalidModel("need at least one cluster with one signal".into()));
        }
        if !(0.0..=1.0).contains(&self.within_cluster_share) {
            return Err(Error::InvalidModel("within_cluster_share must lie in [0, 1]".into()));
        }
        let k = self.signals_per_cluster;
        let clusters: Vec<Vec<usize>> = (0..self.n_clusters).map(|c| (c * k..(c + 1) * k).collect()).collect();
        let n = self.n_clusters * k;
        let rest = 1.0 - self.dominance;
        let same_others = k - 1;
        let cross_others = n - k;
        let (w_same, w_cross) = match (same_others, cross_others) {
            (0, 0) => (0.0, 0.0),
            (0, _) => (0.0, rest / cross_others as f64),
            (_, 0) => (rest / same_others as f64, 0.0),
            _ => (
                rest * self.within_cluster_share / same_others as f64,
                rest * (1.0 - self.within_cluster_share) / cross_others as f64,
            ),
        };
        let transition: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n)
                    .map(|j| match () {
                        _ if i == j => 0.0,
                        _ if i / k == j / k => w_same,
                        _ => w_cross,
                    })
                    .collect();
                let off: f64 = row.iter().sum();
                row[i] = 1.0 - off;
                row
            })
            .collect();
        let model = RegimeModel {
            clusters,
            active: (0..n).collect(),
            transition,
            dominance: self.dominance,
            noise_scale: self.noise_scale,
            target_noise: self.target_noise,
            global_share: self.global_share,
            persistence: self.persistence,
            return_scale: self.return_scale,
            horizon: self.horizon,
            seed: self.seed,
            start_date: self.start_date,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Consecutive weekdays starting at the first weekday on or after `start`.
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// Simulated panel plus the dominant signal index `j_t` for each row.
pub fn simulate_regime_panel<T: Scalar>(model: &RegimeModel) -> Result<(SignalPanel<T>, Vec<usize>)> {
    model.validate()?;
    let n = model.n_signals();
    let h = model.horizon;
    if h < 2 {
        return Err(Error::InvalidModel("horizon must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let n_clusters = model.clusters.len();
    let phi = model.persistence;
    let innov = (1.0 - phi * phi).sqrt();
    let g_share = model.global_share.sqrt();
    let c_share = (1.0 - model.global_share).sqrt();

    let mut global = normal(&mut rng);
    let mut local: Vec<f64> = (0..n_clusters).map(|_| normal(&mut rng)).collect();
    let mut signals = vec![vec![T::zero(); h]; n];
    let mut target = vec![T::zero(); h];
    let mut raw = vec![vec![0.0f64; h]; n];
    #[allow(clippy::needless_range_loop)]
    for t in 0..h {
        if t > 0 {
            global = phi * global + innov * normal(&mut rng);
            for l in local.iter_mut() {
                *l = phi * *l + innov * normal(&mut rng);
            }
        }
        for (c, members) in model.clusters.iter().enumerate() {
            let factor = g_share * global + c_share * local[c];
            for &s in members {
                raw[s][t] = factor + model.noise_scale * normal(&mut rng);
            }
        }
    }
    let target_noise: Vec<f64> = (0..h).map(|_| normal(&mut rng)).collect();

    let m = model.active.len();
    let mut state = rng.random_range(0..m);
    let mut regimes = Vec::with_capacity(h);
    for t in 0..h {
        if t > 0 {
            state = sample_index(&mut rng, &model.transition[state]);
        }
        regimes.push(model.active[state]);
    }

    for (t, (x, eps)) in target.iter_mut().zip(&target_noise).enumerate() {
        let driven = if t == 0 {
            0.0
        } else {
            raw[regimes[t - 1]][t - 1].max(0.0)
        };
        *x = T::from_f64(model.return_scale * (driven + model.target_noise * eps)).unwrap();
    }
    for (s, column) in raw.iter().enumerate() {
        for (t, v) in column.iter().enumerate() {
            signals[s][t] = T::from_f64(*v).unwrap();
        }
    }
    let width = (n.max(1) as f64).log10().floor() as usize + 1;
    let names = (0..n).map(|i| format!("s{:0width$}", i + 1, width = width.max(2))).collect();
    let panel = SignalPanel::new(business_days(model.start_date, h), names, signals, "ret", target)?;
    Ok((panel, regimes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_is_valid() {
        let m = ClusterSpec::default().model().unwrap();
        assert_eq!(m.n_signals(), 15);
        for (i, row) in m.transition.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row[i] >= 0.9 - 1e-15);
        }
    }

    #[test]
    fn identity_chain_never_switches() {
        let mut m = ClusterSpec { horizon: 200, ..Default::default() }.model().unwrap();
        m.dominance = 0.0;
        m.transition = (0..15).map(|i| (0..15).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let (_, j) = simulate_regime_panel::<f64>(&m).unwrap();
        assert!(j.iter().all(|&x| x == j[0]));
    }

    #[test]
    fn dwell_time_matches_geometric_mean() {
        let spec = ClusterSpec {
            n_clusters: 1,
            signals_per_cluster: 2,
            horizon: 100_000,
            seed: 11,
            ..Default::default()
        };
        let (_, j) = simulate_regime_panel::<f64>(&spec.model().unwrap()).unwrap();
        let switches = j.windows(2).filter(|w| w[0] != w[1]).count();
        let mean_dwell = j.len() as f64 / (switches + 1) as f64;
        assert!((mean_dwell - 10.0).abs() < 1.0, "mean dwell {mean_dwell}");
    }

    #[test]
    fn noise_free_single_cluster_signals_coincide() {
        let spec = ClusterSpec {
            n_clusters: 1,
            signals_per_cluster: 4,
            noise_scale: 0.0,
            horizon: 50,
            ..Default::default()
        };
        let (p, _) = simulate_regime_panel::<f64>(&spec.model().unwrap()).unwrap();
        for i in 1..4 {
            assert_eq!(p.signal(i), p.signal(0));
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let spec = ClusterSpec { horizon: 300, seed: 7, ..Default::default() };
        let a = simulate_regime_panel::<f64>(&spec.model().unwrap()).unwrap();
        let b = simulate_regime_panel::<f64>(&spec.model().unwrap()).unwrap();
        assert_eq!(a, b);
        let c = simulate_regime_panel::<f64>(&ClusterSpec { seed: 8, ..spec }.model().unwrap()).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut m = ClusterSpec::default().model().unwrap();
        m.transition[0][0] = 0.5;
        assert!(m.validate().is_err());
        assert!(ClusterSpec { dominance: 1.0, ..Default::default() }.model().is_err());
    }

    #[test]
    fn weekdays_only() {
        let d = business_days(NaiveDate::from_ymd_opt(2024, 1, 5).unwrap(), 3);
        assert_eq!(d[1], NaiveDate::from_ymd_opt(2024, 1, 8).unwrap());
    }

    #[test]
    fn spec_round_trips() {
        let s = ClusterSpec { seed: 42, noise_scale: 0.1, ..Default::default() };
        assert_eq!(ClusterSpec::from_kv_str(&s.to_kv_string()).unwrap(), s);
    }
}
