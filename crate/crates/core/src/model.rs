//! Synthetic latent-variable instances: ground-truth tensor and noisy
//! Bernoulli-sampled observations.
//!
//! The ground truth is `T(u,v,w) = scale * sum_k lambda_k q_k(x_u) q_k(x_v)
//! q_k(x_w)` for latent coordinates `x_u ~ U[0,1]` and an orthonormal bounded
//! eigenfunction family `q_k`. The default family is the shifted Legendre
//! basis, orthonormal on `[0,1]` with `sup |q_k| = sqrt(2k-1)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::triples::{sort3, TripleIndexer};

/// Eigenfunction family identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// Shifted Legendre polynomials normalized to unit L^2([0,1]) norm.
    #[default]
    Legendre,
}

/// Legendre polynomial P_d(x) on [-1, 1] by the three-term recurrence.
fn legendre(d: usize, x: f64) -> f64 {
    match d {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for k in 1..d {
                let next = ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k + 1) as f64;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Evaluate the k-th eigenfunction (1-indexed) at `theta` in [0, 1].
///
/// For the Legendre family, `q_k(t) = sqrt(2k-1) P_{k-1}(2t - 1)`; the first
/// function is the constant 1.
pub fn eigenfunction(basis: Basis, k: usize, theta: f64) -> f64 {
    assert!(k >= 1, "eigenfunction index is 1-based");
    match basis {
        Basis::Legendre => {
            let norm = ((2 * k - 1) as f64).sqrt();
            norm * legendre(k - 1, 2.0 * theta - 1.0)
        }
    }
}

/// Uniform bound on |q_k| over k in 1..=r for the given family.
pub fn eigenfunction_bound(basis: Basis, r: usize) -> f64 {
    match basis {
        Basis::Legendre => ((2 * r - 1) as f64).sqrt(),
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
///
/// Nodes are the roots of P_n found by Newton iteration from Chebyshev
/// initial guesses, then mapped from [-1, 1] to [0, 1].
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let p = legendre(n, x);
            // derivative via P'_n(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
            let pm1 = legendre(n - 1, x);
            let dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let pm1 = legendre(n - 1, x);
        let dp = n as f64 * (x * legendre(n, x) - pm1) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map to [0, 1]: node (x+1)/2, weight w/2
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 0.5 * w;
    }
    // ascending node order
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nodes[a].partial_cmp(&nodes[b]).unwrap());
    let nodes_sorted = idx.iter().map(|&i| nodes[i]).collect();
    let weights_sorted = idx.iter().map(|&i| weights[i]).collect();
    (nodes_sorted, weights_sorted)
}

/// Hidden ground truth: latent coordinates, spectrum, and eigenfunction
/// family, with a normalization factor keeping `sup |T| <= 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentModel {
    pub n: usize,
    pub r: usize,
    /// Raw eigenvalues, sorted by |lambda| descending.
    pub lambdas: Vec<f64>,
    /// Latent coordinates in [0, 1], one per tensor coordinate.
    pub thetas: Vec<f64>,
    pub basis: Basis,
    /// Uniform bound on |q_k| over the family.
    pub bound: f64,
    /// Normalization applied to the spectrum so that sup |T| <= 1.
    pub scale: f64,
}

/// Draw a latent model with i.i.d. uniform coordinates.
///
/// The spectrum is rescaled by `min(1, 1 / (sum_k |lambda_k| B^3))` so the
/// entry bound holds regardless of the supplied eigenvalues.
pub fn sample_latent_model(
    n: usize,
    r: usize,
    lambdas: &[f64],
    basis: Basis,
    seed: u64,
) -> Result<LatentModel> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n}, need n >= 2")));
    }
    if r < 1 || lambdas.is_empty() {
        return Err(Error::InvalidParameter("need at least one eigenvalue".into()));
    }
    if r != lambdas.len() {
        return Err(Error::InvalidParameter(format!(
            "r = {r} does not match {} eigenvalues",
            lambdas.len()
        )));
    }
    if r > n {
        return Err(Error::InvalidParameter(format!("r = {r} exceeds n = {n}")));
    }
    if lambdas.iter().any(|&l| l == 0.0 || !l.is_finite()) {
        return Err(Error::InvalidParameter("eigenvalues must be nonzero and finite".into()));
    }
    let mut lambdas = lambdas.to_vec();
    lambdas.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
    let bound = eigenfunction_bound(basis, r);
    let mass: f64 = lambdas.iter().map(|l| l.abs()).sum::<f64>() * bound.powi(3);
    let scale = if mass > 1.0 { 1.0 / mass } else { 1.0 };
    let mut gen = rng::stream(seed, "model/thetas");
    let thetas: Vec<f64> = (0..n).map(|_| gen.random::<f64>()).collect();
    Ok(LatentModel { n, r, lambdas, thetas, basis, bound, scale })
}

impl LatentModel {
    /// Effective spectrum after normalization; these are the eigenvalues of
    /// the tensor that is actually observed.
    pub fn effective_lambdas(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l * self.scale).collect()
    }

    /// `r x n` matrix of eigenfunction values at the latent coordinates.
    pub fn q_matrix(&self) -> Vec<Vec<f64>> {
        (1..=self.r)
            .map(|k| self.thetas.iter().map(|&t| eigenfunction(self.basis, k, t)).collect())
            .collect()
    }
}

/// Ground-truth tensor entry. Indices are sorted internally so the result is
/// bit-exact under any permutation of `(u, v, w)`.
pub fn eval_tensor(model: &LatentModel, u: usize, v: usize, w: usize) -> f64 {
    assert!(u < model.n && v < model.n && w < model.n, "index out of range");
    let (u, v, w) = sort3(u, v, w);
    let mut acc = 0.0;
    for (k, &l) in model.lambdas.iter().enumerate() {
        let q = |i: usize| eigenfunction(model.basis, k + 1, model.thetas[i]);
        acc += l * (q(u) * q(v) * q(w));
    }
    model.scale * acc
}

/// One observed entry: the canonical triple and its noisy value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub u: u32,
    pub v: u32,
    pub w: u32,
    pub value: f64,
}

/// Sparse list of observed triples `u <= v <= w` with noisy values, plus the
/// sampling density they were drawn at.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationSet {
    pub n: usize,
    /// Per-triple inclusion probability of this set.
    pub p: f64,
    pub sigma: f64,
    /// Entries sorted by canonical triple; each distinct triple appears at
    /// most once.
    pub entries: Vec<Entry>,
}

impl ObservationSet {
    pub fn empty(n: usize, p: f64, sigma: f64) -> Self {
        ObservationSet { n, p, sigma, entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sample each distinct triple `u <= v <= w` independently with probability
/// `p`; observed values are the tensor entry plus uniform noise on
/// `[-sigma*sqrt(3), sigma*sqrt(3)]` (variance `sigma^2`), clamped to
/// `[-1, 1]`. Deterministic per seed.
pub fn sample_observations(
    model: &LatentModel,
    p: f64,
    sigma: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p}, need p in (0, 1]")));
    }
    if sigma < 0.0 {
        return Err(Error::InvalidParameter(format!("sigma = {sigma}, need sigma >= 0")));
    }
    let ix = TripleIndexer::new(model.n);
    let total = ix.len();
    let mut gen = rng::stream(seed, "observations");
    let half_width = sigma * 3f64.sqrt();
    let mut entries = Vec::new();
    let mut push = |idx: usize, gen: &mut rand_chacha::ChaCha8Rng| {
        let (u, v, w) = ix.decode(idx);
        let mut value = eval_tensor(model, u, v, w);
        if sigma > 0.0 {
            let eps = gen.random_range(-half_width..=half_width);
            value = (value + eps).clamp(-1.0, 1.0);
        }
        entries.push(Entry { u: u as u32, v: v as u32, w: w as u32, value });
    };
    if p >= 1.0 {
        for idx in 0..total {
            push(idx, &mut gen);
        }
    } else {
        // geometric gap sampling: equivalent to a Bernoulli(p) scan but
        // O(expected included) RNG draws.
        let ln_q = (1.0 - p).ln();
        let mut pos = 0usize;
        loop {
            let u: f64 = 1.0 - gen.random::<f64>(); // (0, 1]
            let skip = (u.ln() / ln_q).floor() as usize;
            pos = match pos.checked_add(skip) {
                Some(x) => x,
                None => break,
            };
            if pos >= total {
                break;
            }
            push(pos, &mut gen);
            pos += 1;
        }
    }
    Ok(ObservationSet { n: model.n, p, sigma, entries })
}
