//! Scoring against the hidden ground truth: mean squared error, maximum
//! entrywise error, and distance-concentration diagnostics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{oracle_distance_with_exponent, DistanceMatrix};
use crate::estimator::DenseEstimate;
use crate::model::LatentModel;
use crate::rng;
use crate::triples::multiplicity;

/// Headline metrics of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub max_error: f64,
    /// Fraction of ordered queries answered by the global-mean fallback.
    pub fallback_fraction: f64,
    /// Fraction of unordered coordinate pairs with a valid distance.
    pub valid_pair_fraction: f64,
    pub seed: u64,
}

fn ground_truth_fn(model: &LatentModel) -> impl Fn(usize, usize, usize) -> f64 + '_ {
    let q = model.q_matrix();
    let lambdas = model.lambdas.clone();
    let scale = model.scale;
    move |u: usize, v: usize, w: usize| {
        let mut acc = 0.0;
        for (k, &l) in lambdas.iter().enumerate() {
            acc += l * (q[k][u] * q[k][v] * q[k][w]);
        }
        scale * acc
    }
}

/// Accumulate squared and maximum errors over all ordered triples by
/// symmetric expansion of the canonical estimates.
fn error_sums(estimates: &DenseEstimate, model: &LatentModel) -> (f64, f64) {
    assert_eq!(estimates.n, model.n, "estimate and model sizes differ");
    let n = model.n;
    let truth = ground_truth_fn(model);
    // parallel over the first coordinate; chunk results reduced in order
    let partials: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut sq = 0.0;
            let mut mx: f64 = 0.0;
            for v in u..n {
                for w in v..n {
                    let err = estimates.value(u, v, w) - truth(u, v, w);
                    sq += multiplicity(u, v, w) as f64 * err * err;
                    mx = mx.max(err.abs());
                }
            }
            (sq, mx)
        })
        .collect();
    let mut total = 0.0;
    let mut mx: f64 = 0.0;
    for (sq, m) in partials {
        total += sq;
        mx = mx.max(m);
    }
    (total, mx)
}

/// Empirical mean squared error over all `n^3` ordered triples.
pub fn mse(estimates: &DenseEstimate, model: &LatentModel) -> f64 {
    let n = model.n;
    let (total, _) = error_sums(estimates, model);
    total / (n * n * n) as f64
}

/// Maximum absolute entrywise error.
pub fn max_error(estimates: &DenseEstimate, model: &LatentModel) -> f64 {
    let (_, mx) = error_sums(estimates, model);
    mx
}

/// Both error metrics in one pass.
pub fn error_metrics(estimates: &DenseEstimate, model: &LatentModel) -> (f64, f64) {
    let n = model.n;
    let (total, mx) = error_sums(estimates, model);
    (total / (n * n * n) as f64, mx)
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let mut ranks = vec![0.0; vals.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && vals[order[j + 1]] == vals[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &order[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let nf = xs.len() as f64;
    let mean = (nf + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..xs.len() {
        let dx = rx[i] - mean;
        let dy = ry[i] - mean;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return 0.0;
    }
    cov / (var_x * var_y).sqrt()
}

/// Deviation statistics between estimated and oracle distances over sampled
/// valid pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// Number of valid pairs actually sampled.
    pub pairs: usize,
    pub mean_abs_deviation: f64,
    pub median_abs_deviation: f64,
    /// 90th percentile of |estimate - oracle|.
    pub p90_abs_deviation: f64,
    pub spearman: f64,
    /// Fraction of sampled pairs with deviation above the supplied budget.
    pub fraction_over_budget: f64,
    pub budget: f64,
}

/// Sample valid off-diagonal pairs and compare the estimated distances with
/// the oracle distance at exponent `2t + 1`.
pub fn distance_concentration_report(
    dist: &DistanceMatrix,
    model: &LatentModel,
    t: usize,
    sample_pairs: usize,
    budget: f64,
    seed: u64,
) -> ConcentrationReport {
    let mut gen = rng::stream(seed, "concentration");
    let n = dist.n;
    let mut est = Vec::with_capacity(sample_pairs);
    let mut oracle = Vec::with_capacity(sample_pairs);
    let mut attempts = 0usize;
    while est.len() < sample_pairs && attempts < 100 * sample_pairs.max(1) {
        attempts += 1;
        let u = gen.random_range(0..n);
        let v = gen.random_range(0..n);
        if u == v {
            continue;
        }
        if let Some(d) = dist.get(u, v) {
            est.push(d);
            oracle.push(oracle_distance_with_exponent(model, 2 * t as u32 + 1, u, v));
        }
    }
    let mut devs: Vec<f64> = est.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).collect();
    devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| -> f64 {
        if devs.is_empty() {
            f64::NAN
        } else {
            devs[((devs.len() - 1) as f64 * q).round() as usize]
        }
    };
    let mean = if devs.is_empty() { f64::NAN } else { devs.iter().sum::<f64>() / devs.len() as f64 };
    let over = if devs.is_empty() {
        f64::NAN
    } else {
        devs.iter().filter(|&&d| d > budget).count() as f64 / devs.len() as f64
    };
    ConcentrationReport {
        pairs: est.len(),
        mean_abs_deviation: mean,
        median_abs_deviation: quantile(0.5),
        p90_abs_deviation: quantile(0.9),
        spearman: spearman(&est, &oracle),
        fraction_over_budget: over,
        budget,
    }
}
