//! From-the-definitions brute-force oracle used to validate the pipeline.
//!
//! Everything here recomputes results directly from first principles:
//! distances via full double loops over all coordinate pairs and columns,
//! path products by walking tree parents, estimates by exhaustively
//! filtering the held-out set. Deliberately slow and independent of the
//! library's optimized paths (the BFS trees themselves are shared inputs:
//! the distance definition is a function of a chosen valid tree).

use std::collections::HashMap;

use tensorcf::bfs::BfsTree;
use tensorcf::distance::clip_term;
use tensorcf::graph::BipartiteGraph;
use tensorcf::model::ObservationSet;
use tensorcf::triples::sort3;

pub struct TripleTable {
    values: HashMap<(u32, u32, u32), f64>,
}

impl TripleTable {
    pub fn new(obs: &ObservationSet) -> Self {
        TripleTable { values: obs.entries.iter().map(|e| ((e.u, e.v, e.w), e.value)).collect() }
    }

    /// Symmetric tensor lookup; unobserved entries read as zero.
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        let (x, y, z) = sort3(a, b, c);
        self.values.get(&(x as u32, y as u32, z as u32)).copied().unwrap_or(0.0)
    }
}

/// Recompute the depth-`s` weight vector by walking parents to the root and
/// multiplying raw graph edge weights; independent of the incremental
/// products stored in the tree.
pub fn path_product_vector(tree: &BfsTree, graph: &BipartiteGraph, s: usize) -> Vec<(u32, f64)> {
    let edge_weight = |coord: u32, pair: u32| -> f64 {
        graph
            .coord_edges(coord as usize)
            .iter()
            .find(|&&(id, _)| id == pair)
            .map(|&(_, x)| x)
            .expect("tree edge exists in graph")
    };
    let mut out = Vec::new();
    for node in tree.coord_layer(s) {
        // path root -> pair_1 -> coord_1 -> ... -> pair_s -> coord_s uses
        // two incident edges per intermediate coordinate node
        let mut product = edge_weight(node.coord, node.parent_pair);
        let mut pair = node.parent_pair;
        let mut depth = s;
        loop {
            let pair_node = tree
                .pair_layer(depth)
                .iter()
                .find(|p| p.pair_id == pair)
                .expect("parent pair in previous layer");
            product *= edge_weight(pair_node.parent_coord, pair);
            if depth == 1 {
                break;
            }
            depth -= 1;
            let coord_node = tree
                .coord_layer(depth)
                .iter()
                .find(|c| c.coord == pair_node.parent_coord)
                .expect("parent coord in previous layer");
            pair = coord_node.parent_pair;
            product *= edge_weight(coord_node.coord, pair);
        }
        out.push((node.coord, product));
    }
    out
}

/// All coordinates a tree has seen, reconstructed from its layers.
pub fn visited_from_layers(tree: &BfsTree, graph: &BipartiteGraph, n: usize) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[tree.root] = true;
    for s in 1..=tree.radius {
        for p in tree.pair_layer(s) {
            let (b, c) = graph.pair_members(p.pair_id);
            seen[b] = true;
            seen[c] = true;
        }
        for c in tree.coord_layer(s) {
            seen[c.coord as usize] = true;
        }
    }
    seen
}

pub struct BruteDistances {
    pub n: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl BruteDistances {
    pub fn value(&self, u: usize, v: usize) -> f64 {
        self.values[u * self.n + v]
    }
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.valid[u * self.n + v]
    }
}

/// Distance matrix recomputed from the definitions: restricted pair set by
/// scanning every upper-half pair, cross terms by full double loops over
/// `[n]^2`, four separately normalized quadratic forms.
#[allow(clippy::too_many_arguments)]
pub fn brute_distance_matrix(
    trees: &[BfsTree],
    graph: &BipartiteGraph,
    omega1: &ObservationSet,
    m: usize,
    n: usize,
    t: usize,
    p_eff: f64,
    phi: Option<u32>,
) -> BruteDistances {
    let table = TripleTable::new(omega1);
    let weights: Vec<Vec<(u32, f64)>> =
        trees.iter().map(|tree| path_product_vector(tree, graph, t)).collect();
    let visited: Vec<Vec<bool>> =
        trees.iter().map(|tree| visited_from_layers(tree, graph, n)).collect();
    let dense = |sparse: &[(u32, f64)]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(a, x) in sparse {
            out[a as usize] = x;
        }
        out
    };
    let mut values = vec![f64::NAN; n * n];
    let mut valid = vec![false; n * n];
    let cross = |nu: &[f64], nv: &[f64], alpha: usize, beta: usize| -> f64 {
        let mut acc = 0.0;
        for a in 0..n {
            if nu[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                if a == b || nv[b] == 0.0 {
                    continue;
                }
                acc += nu[a] * nv[b] * table.get(a, alpha, beta) * table.get(b, alpha, beta);
            }
        }
        acc
    };
    for u in 0..n {
        let ok_u = !trees[u].coord_layer(t).is_empty();
        if ok_u {
            values[u * n + u] = 0.0;
            valid[u * n + u] = true;
        }
        for v in (u + 1)..n {
            let ok_v = !trees[v].coord_layer(t).is_empty();
            if !ok_u || !ok_v {
                continue;
            }
            let mut pairs = Vec::new();
            for alpha in m..n {
                for beta in (alpha + 1)..n {
                    if !visited[u][alpha]
                        && !visited[u][beta]
                        && !visited[v][alpha]
                        && !visited[v][beta]
                    {
                        pairs.push((alpha, beta));
                    }
                }
            }
            if pairs.is_empty() {
                continue;
            }
            let nu = dense(&weights[u]);
            let nv = dense(&weights[v]);
            let su = weights[u].len() as f64;
            let sv = weights[v].len() as f64;
            let norm = pairs.len() as f64 * p_eff * p_eff;
            let z = |na: &[f64], nb: &[f64], sa: f64, sb: f64| -> f64 {
                let mut sum = 0.0;
                for &(alpha, beta) in &pairs {
                    sum += clip_term(cross(na, nb, alpha, beta), phi);
                }
                sum / (norm * sa * sb)
            };
            let d = z(&nu, &nu, su, su) + z(&nv, &nv, sv, sv)
                - z(&nu, &nv, su, sv)
                - z(&nv, &nu, sv, su);
            values[u * n + v] = d;
            values[v * n + u] = d;
            valid[u * n + v] = true;
            valid[v * n + u] = true;
        }
    }
    BruteDistances { n, values, valid }
}

pub struct BruteEstimate {
    pub value: f64,
    pub neighbor_count: usize,
    pub fallback_used: bool,
}

/// Exhaustive neighbor filter and mean over the held-out half, driven by the
/// brute-force distance matrix.
pub fn brute_estimate(
    dist: &BruteDistances,
    omega3: &ObservationSet,
    u: usize,
    v: usize,
    w: usize,
    eta: f64,
) -> BruteEstimate {
    let (q1, q2, q3) = sort3(u, v, w);
    let near = |x: usize, a: usize| dist.is_valid(x, a) && dist.value(x, a) < eta;
    let mut sum = 0.0;
    let mut count = 0usize;
    for e in &omega3.entries {
        if near(q1, e.u as usize) && near(q2, e.v as usize) && near(q3, e.w as usize) {
            sum += e.value;
            count += 1;
        }
    }
    if count == 0 {
        let mean = if omega3.is_empty() {
            0.0
        } else {
            omega3.entries.iter().map(|e| e.value).sum::<f64>() / omega3.len() as f64
        };
        BruteEstimate { value: mean, neighbor_count: 0, fallback_used: true }
    } else {
        BruteEstimate { value: sum / count as f64, neighbor_count: count, fallback_used: false }
    }
}
