//! Shared helpers for integration tests, including an independent
//! product-form Gaussian naive Bayes used as an oracle.

#![allow(dead_code, clippy::needless_range_loop, clippy::useless_vec)]

use std::f64::consts::PI;
use std::path::PathBuf;

use chrono::NaiveDate;
use pve_core::dataset::{Category, FeatureVector, LabeledSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn cassette_dir() -> PathBuf {
    fixture_dir().join("cassettes")
}

pub fn ymd(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y%m%d").unwrap()
}

/// Parameters estimated with plain accumulation loops, unsorted.
pub struct OracleFit {
    pub priors: Vec<f64>,
    pub means: Vec<[f64; 3]>,
    pub variances: Vec<[f64; 3]>,
}

pub fn oracle_fit(train: &[LabeledSample]) -> OracleFit {
    let mut counts = vec![0usize; 5];
    let mut sums = vec![[0.0f64; 3]; 5];
    for s in train {
        let k = s.label.index();
        counts[k] += 1;
        let x = [s.features.t_avg, s.features.kt, s.features.s_mod];
        for j in 0..3 {
            sums[k][j] += x[j];
        }
    }
    let mut means = vec![[0.0f64; 3]; 5];
    for k in 0..5 {
        for j in 0..3 {
            if counts[k] > 0 {
                means[k][j] = sums[k][j] / counts[k] as f64;
            }
        }
    }
    let mut sq = vec![[0.0f64; 3]; 5];
    for s in train {
        let k = s.label.index();
        let x = [s.features.t_avg, s.features.kt, s.features.s_mod];
        for j in 0..3 {
            sq[k][j] += (x[j] - means[k][j]).powi(2);
        }
    }
    let mut variances = vec![[0.0f64; 3]; 5];
    for k in 0..5 {
        for j in 0..3 {
            if counts[k] > 0 {
                variances[k][j] = sq[k][j] / counts[k] as f64;
            }
        }
    }
    OracleFit {
        priors: counts.iter().map(|&c| c as f64 / train.len() as f64).collect(),
        means,
        variances,
    }
}

/// Unnormalised posterior `P(C_k) * prod_j N(x_j; mu, var)` per class.
pub fn oracle_joint(fit: &OracleFit, x: [f64; 3]) -> Vec<f64> {
    (0..5)
        .map(|k| {
            if fit.priors[k] == 0.0 {
                return 0.0;
            }
            let mut p = fit.priors[k];
            for j in 0..3 {
                let v = fit.variances[k][j];
                p *= (1.0 / (2.0 * PI * v).sqrt()) * (-(x[j] - fit.means[k][j]).powi(2) / (2.0 * v)).exp();
            }
            p
        })
        .collect()
}

pub fn oracle_posterior(fit: &OracleFit, x: [f64; 3]) -> Vec<f64> {
    let joint = oracle_joint(fit, x);
    let total: f64 = joint.iter().sum();
    joint.iter().map(|p| p / total).collect()
}

pub fn oracle_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..values.len() {
        if values[k] > values[best] {
            best = k;
        }
    }
    best
}

/// A random training set with well-separated variances so the product form
/// stays inside f64 range. Returns samples plus query points.
pub fn random_instance(seed: u64) -> (Vec<LabeledSample>, Vec<[f64; 3]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = rng.random_range(1..=5usize);
    let mut classes: Vec<usize> = (0..5).collect();
    // random subset of class indices
    for i in (1..classes.len()).rev() {
        let j = rng.random_range(0..=i);
        classes.swap(i, j);
    }
    classes.truncate(n_classes);

    let date = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
    let mut samples = Vec::new();
    let budget = rng.random_range(2 * n_classes..=100);
    let centers: Vec<[f64; 3]> = (0..5)
        .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(0.2..0.8), rng.random_range(1.5..6.0)])
        .collect();
    for (i, &k) in classes.iter().enumerate() {
        let remaining_classes = n_classes - i - 1;
        let max_here = budget - samples.len() - 2 * remaining_classes;
        let n = if remaining_classes == 0 { max_here } else { rng.random_range(2..=max_here.min(30)) };
        let spread = [rng.random_range(0.5..1.5), rng.random_range(0.05..0.15), rng.random_range(0.5..1.5)];
        for _ in 0..n {
            let c = centers[k];
            samples.push(LabeledSample {
                date,
                features: FeatureVector {
                    t_avg: c[0] + spread[0] * rng.random_range(-1.0..1.0),
                    kt: c[1] + spread[1] * rng.random_range(-1.0..1.0),
                    s_mod: c[2] + spread[2] * rng.random_range(-1.0..1.0),
                },
                pve: 0.0,
                label: Category::new(k).unwrap(),
            });
        }
    }
    // Queries land near the training data; far outside it every class
    // density underflows and the product form has nothing to compare.
    let queries = (0..8)
        .map(|_| {
            let s = &samples[rng.random_range(0..samples.len())];
            [
                s.features.t_avg + rng.random_range(-1.0..1.0),
                (s.features.kt + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0),
                (s.features.s_mod + rng.random_range(-1.0..1.0)).max(0.0),
            ]
        })
        .collect();
    (samples, queries)
}
