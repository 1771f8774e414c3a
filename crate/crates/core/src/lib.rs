//! Iterative collaborative filtering for sparse symmetric 3-order tensor
//! estimation.
//!
//! The pipeline recovers a low-rank latent-variable tensor from sparse noisy
//! observations of its entries:
//!
//! 1. generate or load a synthetic latent model and sample observations
//!    ([`model`]),
//! 2. split the observations into two independent halves and partition the
//!    coordinates ([`split`]),
//! 3. build a weighted bipartite graph between coordinates and coordinate
//!    pairs from the flattened tensor ([`graph`]),
//! 4. expand a coordinate-disjoint BFS tree around every coordinate and
//!    collect path-product weight vectors ([`bfs`]),
//! 5. estimate pairwise coordinate distances with a clipped quadratic form
//!    over held-out columns ([`distance`]),
//! 6. average held-out observations whose coordinates are all within a
//!    distance threshold of the query ([`estimator`]),
//! 7. score the result against the ground truth ([`metrics`]), and
//! 8. drive everything from a config-driven experiment runner
//!    ([`experiment`]).

pub mod bfs;
pub mod distance;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod split;
pub mod triples;

pub use error::{Error, Result};
