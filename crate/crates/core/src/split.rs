//! Observation splitting and coordinate partitioning.
//!
//! Distance estimation and final averaging must not share data, so the
//! observation set is divided into two independent halves. Coordinates are
//! partitioned into a lower half (whose pairs form the bipartite graph) and
//! an upper half (whose pairs supply the held-out distance columns).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_observations, Entry, LatentModel, ObservationSet};
use crate::rng;
use crate::triples::strict_pair_count;
use rand::Rng;

/// The two observation halves plus the coordinate partition.
///
/// `omega1` drives graph construction and distance estimation; `omega3`
/// drives the nearest-neighbor averaging. Each half's `p` field records its
/// own effective density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitObservations {
    pub omega1: ObservationSet,
    pub omega3: ObservationSet,
    /// Size of the lower coordinate half; the lower half is `0..set_a_len`
    /// and the upper half is `set_a_len..n`.
    pub set_a_len: usize,
}

/// Number of coordinates in the lower half.
pub fn lower_half_len(n: usize) -> usize {
    n / 2
}

/// Assign each entry independently to the first half with probability
/// `split_prob`, else to the second. The halves carry effective densities
/// `split_prob * p` and `(1 - split_prob) * p`. Deterministic per seed.
pub fn split_observations_with(
    obs: &ObservationSet,
    split_prob: f64,
    seed: u64,
) -> Result<SplitObservations> {
    if !(0.0..=1.0).contains(&split_prob) {
        return Err(Error::InvalidParameter(format!(
            "split_prob = {split_prob}, need value in [0, 1]"
        )));
    }
    let mut gen = rng::stream(seed, "split");
    let mut first: Vec<Entry> = Vec::new();
    let mut second: Vec<Entry> = Vec::new();
    for &e in &obs.entries {
        if gen.random::<f64>() < split_prob {
            first.push(e);
        } else {
            second.push(e);
        }
    }
    Ok(SplitObservations {
        omega1: ObservationSet {
            n: obs.n,
            p: obs.p * split_prob,
            sigma: obs.sigma,
            entries: first,
        },
        omega3: ObservationSet {
            n: obs.n,
            p: obs.p * (1.0 - split_prob),
            sigma: obs.sigma,
            entries: second,
        },
        set_a_len: lower_half_len(obs.n),
    })
}

/// 50/50 split.
pub fn split_observations(obs: &ObservationSet, seed: u64) -> Result<SplitObservations> {
    split_observations_with(obs, 0.5, seed)
}

/// Draw two independent full-density observation sets instead of splitting
/// one. Each half then carries the full density `p`.
pub fn fresh_observation_pair(
    model: &LatentModel,
    p: f64,
    sigma: f64,
    seed: u64,
) -> Result<SplitObservations> {
    let omega1 = sample_observations(model, p, sigma, rng::subseed(seed, "fresh/1"))?;
    let omega3 = sample_observations(model, p, sigma, rng::subseed(seed, "fresh/3"))?;
    Ok(SplitObservations { omega1, omega3, set_a_len: lower_half_len(model.n) })
}

/// Strict pairs `(b, c)` with `b < c` inside the lower coordinate half.
pub fn lower_half_pairs(n: usize) -> Result<Vec<(usize, usize)>> {
    half_pairs(n, 0, lower_half_len(n))
}

/// Strict pairs `(b, c)` with `b < c` inside the upper coordinate half.
pub fn upper_half_pairs(n: usize) -> Result<Vec<(usize, usize)>> {
    half_pairs(n, lower_half_len(n), n)
}

fn half_pairs(n: usize, lo: usize, hi: usize) -> Result<Vec<(usize, usize)>> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "n = {n}: both halves need at least two coordinates"
        )));
    }
    let mut out = Vec::with_capacity(strict_pair_count(hi - lo));
    for b in lo..hi {
        for c in (b + 1)..hi {
            out.push((b, c));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_latent_model, Basis};

    #[test]
    fn empty_set_splits_into_empty_halves() {
        let obs = ObservationSet::empty(10, 0.5, 0.0);
        let s = split_observations(&obs, 1).unwrap();
        assert!(s.omega1.is_empty() && s.omega3.is_empty());
        assert_eq!(s.omega1.p, 0.25);
        assert_eq!(s.omega3.p, 0.25);
    }

    #[test]
    fn split_is_a_partition_for_any_seed() {
        let m = sample_latent_model(20, 1, &[1.0], Basis::Legendre, 0).unwrap();
        let obs = sample_observations(&m, 0.6, 0.05, 3).unwrap();
        for seed in [0u64, 1, 17, 123456] {
            let s = split_observations(&obs, seed).unwrap();
            let mut merged: Vec<Entry> = s.omega1.entries.clone();
            merged.extend_from_slice(&s.omega3.entries);
            merged.sort_by_key(|e| (e.u, e.v, e.w));
            assert_eq!(merged, obs.entries);
            // no triple on both sides
            let keys1: std::collections::HashSet<_> =
                s.omega1.entries.iter().map(|e| (e.u, e.v, e.w)).collect();
            assert!(s.omega3.entries.iter().all(|e| !keys1.contains(&(e.u, e.v, e.w))));
        }
    }

    #[test]
    fn split_sizes_track_binomial() {
        // 10^4 synthetic entries
        let entries: Vec<Entry> =
            (0..10_000).map(|i| Entry { u: i, v: i, w: i, value: 0.0 }).collect();
        let obs = ObservationSet { n: 10_000, p: 1.0, sigma: 0.0, entries };
        let s = split_observations(&obs, 42).unwrap();
        let dev = (s.omega1.len() as f64 - 5000.0).abs();
        assert!(dev < 4.0 * (10_000f64 * 0.25).sqrt(), "|omega1| = {}", s.omega1.len());
    }

    #[test]
    fn pair_sets_enumerate_each_half() {
        assert_eq!(lower_half_pairs(6).unwrap(), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(upper_half_pairs(6).unwrap(), vec![(3, 4), (3, 5), (4, 5)]);
        assert_eq!(lower_half_pairs(4).unwrap().len(), 1);
        assert_eq!(upper_half_pairs(4).unwrap().len(), 1);
        assert_eq!(lower_half_pairs(100).unwrap().len(), 1225);
        assert!(lower_half_pairs(3).is_err());
    }

    #[test]
    fn odd_n_gives_floor_half_to_lower_set() {
        assert_eq!(lower_half_len(7), 3);
        assert_eq!(lower_half_pairs(7).unwrap().len(), 3);
        assert_eq!(upper_half_pairs(7).unwrap().len(), 6);
    }

    #[test]
    fn fresh_pair_draws_independent_sets() {
        let m = sample_latent_model(12, 1, &[1.0], Basis::Legendre, 5).unwrap();
        let s = fresh_observation_pair(&m, 1.0, 0.0, 9).unwrap();
        assert_eq!(s.omega1.len(), crate::triples::triple_count(12));
        assert_eq!(s.omega3.len(), crate::triples::triple_count(12));
        assert_eq!(s.omega1.p, 1.0);
        assert_eq!(s.omega3.p, 1.0);
    }
}
