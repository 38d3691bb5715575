//! Success-probability posteriors and bootstrap time-to-solution.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decode::DecodedSet;
use crate::seed;

pub const THETA_CLAMP: f64 = 1e-12;
pub const DEFAULT_BOOTSTRAP: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("call {call} has {y} successes out of {n} anneals")]
    CountOutOfRange { call: usize, y: u64, n: u64 },
    #[error("no calls given")]
    NoCalls,
    #[error("no posteriors to bootstrap")]
    NoPosteriors,
    #[error("percentile {0} outside (0, 100)")]
    BadPercentile(f64),
}

/// Beta posterior of the per-read success probability under the
/// Beta(1/2, 1/2) prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub a: f64,
    pub b: f64,
    pub anneals_per_call: u64,
    pub successes: Vec<u64>,
}

impl PosteriorSummary {
    pub fn calls(&self) -> usize {
        self.successes.len()
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

pub fn posterior(y_per_call: &[u64], n: u64) -> Result<PosteriorSummary, StatsError> {
    if y_per_call.is_empty() {
        return Err(StatsError::NoCalls);
    }
    if let Some((call, &y)) = y_per_call.iter().enumerate().find(|(_, &y)| y > n) {
        return Err(StatsError::CountOutOfRange { call, y, n });
    }
    let total: u64 = y_per_call.iter().sum();
    let trials = n * y_per_call.len() as u64;
    Ok(PosteriorSummary {
        a: 0.5 + total as f64,
        b: 0.5 + (trials - total) as f64,
        anneals_per_call: n,
        successes: y_per_call.to_vec(),
    })
}

/// Repetitions needed to see a success with probability 0.99:
/// `ln(0.01) / ln(1 - theta)`. `theta <= 0` gives infinity and `theta >= 1`
/// gives 1; both are logged.
pub fn r99(theta: f64) -> f64 {
    if theta <= 0.0 {
        log::warn!("r99 of theta = {theta}: never succeeds");
        return f64::INFINITY;
    }
    if theta >= 1.0 {
        log::warn!("r99 of theta = {theta}: always succeeds");
        return 1.0;
    }
    0.01f64.ln() / (1.0 - theta).ln()
}

/// Which energy decides success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Mv,
    Refined,
}

/// Per-call counts of reads within `tol` of the ground energy.
pub fn success_probability(calls: &[DecodedSet], ground: f64, tol: f64, stage: Stage) -> Vec<u64> {
    calls
        .iter()
        .map(|d| {
            let energies = match stage {
                Stage::Mv => &d.mv_energies,
                Stage::Refined => &d.refined_energies,
            };
            energies.iter().filter(|&&e| e <= ground + tol).count() as u64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub value: f64,
    /// Set when the ground energy is zero and the absolute gap is reported.
    pub absolute: bool,
}

pub fn residual_energy(best: f64, ground: f64) -> Residual {
    if ground == 0.0 {
        Residual {
            value: best - ground,
            absolute: true,
        }
    } else {
        Residual {
            value: (best - ground) / ground.abs(),
            absolute: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtsDistribution {
    pub q: f64,
    pub tau_us: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub values_us: Vec<f64>,
    pub mean_us: f64,
    pub std_us: f64,
    pub clamped_draws: u64,
}

impl TtsDistribution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Nearest-rank `p`-th percentile of sorted data.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Bootstrap distribution of the `q`-th percentile TTS over instances.
///
/// Each iteration resamples the instances with replacement, draws one
/// success probability from each resampled posterior, takes the
/// `(100 - q)`-th percentile `p` of the draws and records `tau * R99(p)`.
/// Posteriors are put in a canonical order first, so the result depends only
/// on their multiset. Iteration `i` uses a sub-seed of `(seed, i)`.
pub fn bootstrap_tts(
    posteriors: &[PosteriorSummary],
    q: f64,
    b: usize,
    tau_us: f64,
    seed: u64,
) -> Result<TtsDistribution, StatsError> {
    if posteriors.is_empty() {
        return Err(StatsError::NoPosteriors);
    }
    if !(q > 0.0 && q < 100.0) {
        return Err(StatsError::BadPercentile(q));
    }
    let mut params: Vec<(f64, f64)> = posteriors.iter().map(|p| (p.a, p.b)).collect();
    params.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let dists: Vec<Beta<f64>> = params
        .iter()
        .map(|&(a, b)| Beta::new(a, b).expect("posterior parameters are positive"))
        .collect();
    let m = dists.len();
    let runs: Vec<(f64, u64)> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::sub_rng(seed, i as u64);
            let mut clamped = 0;
            let mut draws: Vec<f64> = (0..m)
                .map(|_| {
                    let theta = dists[rng.random_range(0..m)].sample(&mut rng);
                    let c = theta.clamp(THETA_CLAMP, 1.0 - THETA_CLAMP);
                    clamped += u64::from(c != theta);
                    c
                })
                .collect();
            draws.sort_by(f64::total_cmp);
            let p = nearest_rank(&draws, 100.0 - q);
            (tau_us * r99(p), clamped)
        })
        .collect();
    let values_us: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let clamped_draws = runs.iter().map(|r| r.1).sum();
    let mean_us = values_us.iter().sum::<f64>() / b as f64;
    let std_us = (values_us.iter().map(|v| (v - mean_us).powi(2)).sum::<f64>() / b as f64).sqrt();
    Ok(TtsDistribution {
        q,
        tau_us,
        b,
        values_us,
        mean_us,
        std_us,
        clamped_draws,
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn posterior_examples() {
        let p = posterior(&[0; 5], 10_000).unwrap();
        assert_eq!((p.a, p.b), (0.5, 50_000.5));
        let p = posterior(&[1], 1).unwrap();
        assert_eq!((p.a, p.b), (1.5, 0.5));
        let p = posterior(&[3, 7], 10).unwrap();
        assert_eq!((p.a, p.b), (10.5, 10.5));
        assert!(posterior(&[11], 10).is_err());
    }

    #[test]
    fn posterior_mean_tracks_rate() {
        let p = posterior(&[3000; 10], 10_000).unwrap();
        assert!((p.mean() - 0.3).abs() < 1e-2);
    }

    #[test]
    fn r99_examples() {
        assert_eq!(r99(0.99), 1.0);
        // 0.9 is not representable; the float input lies 2e-17 above it.
        assert!((r99(0.9) - 2.0).abs() <= 2.0 * f64::EPSILON);
        assert_relative_eq!(r99(0.5), 6.6439, epsilon = 1e-3);
        assert_eq!(r99(0.0), f64::INFINITY);
        assert_eq!(r99(1.0), 1.0);
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residual_energy(-10.0, -10.0).value, 0.0);
        assert_relative_eq!(residual_energy(-9.0, -10.0).value, 0.1);
        assert_eq!(residual_energy(0.5, 0.0), Residual { value: 0.5, absolute: true });
    }

    fn decoded(energies: &[f64]) -> DecodedSet {
        DecodedSet {
            refined_energies: energies.to_vec(),
            mv_energies: energies.iter().map(|e| e + 1.0).collect(),
            ..DecodedSet::default()
        }
    }

    #[test]
    fn success_examples() {
        let all = decoded(&[-2.0; 4]);
        assert_eq!(success_probability(&[all.clone(), all], -2.0, 1e-9, Stage::Refined), vec![4, 4]);
        assert_eq!(success_probability(&[decoded(&[0.0; 3])], -2.0, 1e-9, Stage::Refined), vec![0]);
        let mut mixed = vec![-1.0; 10];
        mixed[..3].fill(-2.0);
        assert_eq!(success_probability(&[decoded(&mixed)], -2.0, 1e-9, Stage::Refined), vec![3]);
        assert_eq!(success_probability(&[decoded(&mixed)], -2.0, 1e-9, Stage::Mv), vec![0]);
    }

    fn point_mass(n: usize) -> Vec<PosteriorSummary> {
        (0..n)
            .map(|_| PosteriorSummary {
                a: 5e6,
                b: 5e6,
                anneals_per_call: 1,
                successes: vec![],
            })
            .collect()
    }

    #[test]
    fn bootstrap_degenerate() {
        let d = bootstrap_tts(&point_mass(10), 50.0, 200, 5.0, 1).unwrap();
        let expected = 5.0 * 0.01f64.ln() / 0.5f64.ln();
        assert!(d.values_us.iter().all(|v| (v - expected).abs() / expected < 0.02));
        let one = bootstrap_tts(&point_mass(1), 50.0, 1, 5.0, 1).unwrap();
        assert_eq!((one.values_us.len(), one.std_us), (1, 0.0));
    }

    #[test]
    fn percentile_monotonicity() {
        let spread: Vec<PosteriorSummary> = (1..=20).map(|i| posterior(&[i * 40], 1000).unwrap()).collect();
        let median = bootstrap_tts(&spread, 50.0, 300, 5.0, 3).unwrap();
        let upper = bootstrap_tts(&spread, 75.0, 300, 5.0, 3).unwrap();
        assert!(median.mean_us <= upper.mean_us);
        let json: serde_json::Value = serde_json::from_str(&median.to_json()).unwrap();
        for key in ["q", "tau_us", "B", "values_us", "mean_us", "std_us", "clamped_draws"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn clamp_counts_certain_success() {
        let sure = vec![PosteriorSummary {
            a: 1e9,
            b: 1e-3,
            anneals_per_call: 1,
            successes: vec![],
        }];
        let d = bootstrap_tts(&sure, 50.0, 20, 5.0, 0).unwrap();
        assert!(d.values_us.iter().all(|v| v.is_finite()));
        assert!(d.clamped_draws > 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn bootstrap_symmetries(ys in proptest::collection::vec(0u64..=100, 1..8), rot in 0usize..8, seed in any::<u64>()) {
            let ps: Vec<PosteriorSummary> = ys.iter().map(|&y| posterior(&[y], 100).unwrap()).collect();
            let mut rotated = ps.clone();
            rotated.rotate_left(rot % ps.len());
            let a = bootstrap_tts(&ps, 50.0, 50, 5.0, seed).unwrap();
            let b = bootstrap_tts(&rotated, 50.0, 50, 5.0, seed).unwrap();
            prop_assert_eq!(&a.values_us, &b.values_us);
            let doubled = bootstrap_tts(&ps, 50.0, 50, 10.0, seed).unwrap();
            for (x, y) in a.values_us.iter().zip(&doubled.values_us) {
                prop_assert_eq!(2.0 * x, *y);
            }
        }

        #[test]
        fn r99_is_decreasing(a in 0.001f64..0.998, d in 0.0001f64..0.001) {
            prop_assert!(r99(a + d) < r99(a));
        }
    }
}
