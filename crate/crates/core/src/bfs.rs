//! Constrained BFS expansion around a root coordinate.
//!
//! Layers alternate between pair vertices (odd depths) and coordinate
//! vertices (even depths). No coordinate may recur across depths: a pair
//! vertex is admissible only if neither member was seen at any strictly
//! earlier depth, and a coordinate vertex only if it is new. Repetition
//! within one depth is allowed, so a depth's coordinates are committed to
//! the visited set only after the whole depth is expanded. When a vertex
//! has several valid parents, one is chosen uniformly at random from the
//! per-root stream.
//!
//! Each tree node carries the product of edge weights along its root path;
//! the coordinate-layer products form the weight vectors consumed by the
//! distance estimator.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::rng;

/// Pair vertex in the tree: reached from a coordinate parent at the previous
/// depth; `weight` is the root-path product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairNode {
    pub pair_id: u32,
    pub parent_coord: u32,
    pub weight: f64,
}

/// Coordinate vertex in the tree: reached from a pair parent; `weight` is
/// the root-path product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordNode {
    pub coord: u32,
    pub parent_pair: u32,
    pub weight: f64,
}

/// Layered expansion around one root, with path-product weights.
#[derive(Debug, Clone)]
pub struct BfsTree {
    pub root: usize,
    /// Requested radius: the tree has layers `s = 1..=radius`, each holding
    /// a pair layer (depth `2s - 1`) and a coordinate layer (depth `2s`).
    pub radius: usize,
    pair_layers: Vec<Vec<PairNode>>,
    coord_layers: Vec<Vec<CoordNode>>,
    /// Coordinates seen anywhere in the tree (root included), as singles or
    /// pair members.
    visited: Vec<bool>,
}

/// Expansion radius `t`: the number of coordinate layers the BFS expands,
/// chosen so the deepest layer is still well below the scale of `n`.
///
/// Signals the sub-threshold regime when `p^2 n^3 <= 1`, where the graph is
/// disconnected and no radius is defined.
pub fn expansion_radius(n: usize, p: f64) -> Result<usize> {
    let growth = p * p * (n as f64).powi(3);
    if growth <= 1.0 {
        return Err(Error::BelowThreshold { n, p, value: growth });
    }
    let val = (n as f64).ln() / (2.0 * growth.ln());
    // tolerate fp rounding at integer boundaries
    Ok(((val - 1e-9).ceil() as usize).max(1))
}

/// Build the constrained BFS tree of the given radius around `root`.
///
/// Stalled expansions are legal: once a layer comes up empty every deeper
/// layer stays empty and the tree is returned as-is.
pub fn build_constrained_bfs(
    graph: &BipartiteGraph,
    root: usize,
    radius: usize,
    seed: u64,
) -> BfsTree {
    let mut gen = rng::stream(seed, &format!("bfs/{root}"));
    let mut visited = vec![false; graph.n];
    visited[root] = true;
    let mut pair_layers = Vec::with_capacity(radius);
    let mut coord_layers = Vec::with_capacity(radius);
    // frontier: coordinate -> root-path product, ascending by coordinate
    let mut frontier: BTreeMap<u32, f64> = BTreeMap::new();
    frontier.insert(root as u32, 1.0);
    for _s in 1..=radius {
        // pair layer: collect all admissible children with their candidate
        // parents against the pre-layer visited snapshot
        let mut candidates: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
        for (&coord, &nval) in &frontier {
            for &(pair_id, x) in graph.coord_edges(coord as usize) {
                let (b, c) = graph.pair_members(pair_id);
                if visited[b] || visited[c] {
                    continue;
                }
                candidates.entry(pair_id).or_default().push((coord, x * nval));
            }
        }
        let mut pair_layer = Vec::with_capacity(candidates.len());
        for (pair_id, parents) in candidates {
            let pick =
                if parents.len() == 1 { 0 } else { gen.random_range(0..parents.len()) };
            let (parent_coord, weight) = parents[pick];
            pair_layer.push(PairNode { pair_id, parent_coord, weight });
        }
        for node in &pair_layer {
            let (b, c) = graph.pair_members(node.pair_id);
            visited[b] = true;
            visited[c] = true;
        }
        // coordinate layer, same discipline
        let mut candidates: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
        for node in &pair_layer {
            for &(a, x) in graph.pair_edges(node.pair_id) {
                if visited[a as usize] {
                    continue;
                }
                candidates.entry(a).or_default().push((node.pair_id, x * node.weight));
            }
        }
        let mut coord_layer = Vec::with_capacity(candidates.len());
        for (coord, parents) in candidates {
            let pick =
                if parents.len() == 1 { 0 } else { gen.random_range(0..parents.len()) };
            let (parent_pair, weight) = parents[pick];
            coord_layer.push(CoordNode { coord, parent_pair, weight });
        }
        for node in &coord_layer {
            visited[node.coord as usize] = true;
        }
        let mut next: BTreeMap<u32, f64> = BTreeMap::new();
        for node in &coord_layer {
            next.insert(node.coord, node.weight);
        }
        pair_layers.push(pair_layer);
        coord_layers.push(coord_layer);
        frontier = next;
    }
    BfsTree { root, radius, pair_layers, coord_layers, visited }
}

impl BfsTree {
    /// Pair layer at depth `2s - 1` (1-based `s`), ascending by pair id.
    pub fn pair_layer(&self, s: usize) -> &[PairNode] {
        &self.pair_layers[s - 1]
    }

    /// Coordinate layer at depth `2s` (1-based `s`), ascending by coordinate.
    pub fn coord_layer(&self, s: usize) -> &[CoordNode] {
        &self.coord_layers[s - 1]
    }

    /// Sparse root-path product vector over the coordinate layer at `s`.
    pub fn coord_weights(&self, s: usize) -> Vec<(u32, f64)> {
        self.coord_layer(s).iter().map(|c| (c.coord, c.weight)).collect()
    }

    /// Whether some layer up to the radius is empty.
    pub fn stalled(&self) -> bool {
        self.coord_layers.iter().any(|l| l.is_empty()) || self.pair_layers.iter().any(|l| l.is_empty())
    }

    /// The deepest coordinate layer is nonempty, so the tree supports
    /// distance estimation.
    pub fn has_full_depth(&self) -> bool {
        self.coord_layers.last().map(|l| !l.is_empty()).unwrap_or(false)
    }

    /// True if the coordinate was seen anywhere in the tree (root included).
    pub fn saw_coord(&self, coord: usize) -> bool {
        self.visited[coord]
    }

    /// Sorted list of all coordinates seen by the tree.
    pub fn visited_coords(&self) -> Vec<u32> {
        self.visited
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| if v { Some(i as u32) } else { None })
            .collect()
    }

    /// Plain-text dump for debugging: one line per layer with vertex lists
    /// and path products.
    pub fn dump(&self, graph: &BipartiteGraph) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "root {} radius {}", self.root, self.radius).unwrap();
        for s in 1..=self.radius {
            let pairs: Vec<String> = self
                .pair_layer(s)
                .iter()
                .map(|p| {
                    let (b, c) = graph.pair_members(p.pair_id);
                    format!("({b},{c})<-{}:{:.4}", p.parent_coord, p.weight)
                })
                .collect();
            writeln!(out, "  depth {}: [{}]", 2 * s - 1, pairs.join(" ")).unwrap();
            let coords: Vec<String> = self
                .coord_layer(s)
                .iter()
                .map(|c| {
                    let (b, cc) = graph.pair_members(c.parent_pair);
                    format!("{}<-({b},{cc}):{:.4}", c.coord, c.weight)
                })
                .collect();
            writeln!(out, "  depth {}: [{}]", 2 * s, coords.join(" ")).unwrap();
        }
        out
    }
}

/// Entrywise division of the coordinate-layer weights by the layer size.
pub fn normalized_coord_weights(tree: &BfsTree, s: usize) -> Result<Vec<(u32, f64)>> {
    let layer = tree.coord_layer(s);
    if layer.is_empty() {
        return Err(Error::EmptyLayer { root: tree.root, layer: 2 * s });
    }
    let size = layer.len() as f64;
    Ok(layer.iter().map(|c| (c.coord, c.weight / size)).collect())
}

/// Per-layer comparison of observed layer sizes against the regular-growth
/// interval endpoints (asymptotic correction terms dropped). Diagnostic
/// only; never a hard assertion.
#[derive(Debug, Clone, Serialize)]
pub struct LayerGrowth {
    pub s: usize,
    pub pair_count: usize,
    pub pair_lo: f64,
    pub pair_hi: f64,
    pub pair_ok: bool,
    pub coord_count: usize,
    pub coord_lo: f64,
    pub coord_hi: f64,
    pub coord_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub root: usize,
    pub layers: Vec<LayerGrowth>,
}

/// Compare the tree's layer sizes against the growth intervals implied by
/// density `p` on `n` coordinates with slack `delta`.
pub fn layer_growth_report(tree: &BfsTree, n: usize, p: f64, delta: f64) -> GrowthReport {
    let nf = n as f64;
    let pair_rate = |s: usize| p.powi(2 * s as i32 - 1) * nf.powi(3 * s as i32 - 1);
    let coord_rate = |s: usize| (p * p * nf.powi(3)).powi(s as i32);
    let t = tree.radius;
    let layers = (1..=t)
        .map(|s| {
            let pair_lo = (1.0 - delta).powi(2 * s as i32 - 1) * 8f64.powi(-(s as i32)) * pair_rate(s);
            let pair_hi = (1.0 + delta).powi(2 * s as i32 - 1) * 2f64.powi(-(s as i32)) * pair_rate(s);
            // the deepest coordinate layer draws from only half the
            // coordinate pool, hence the extra factor of 1/2 on its floor
            let last = if s == t { 0.5 } else { 1.0 };
            let coord_lo =
                last * (1.0 - delta).powi(2 * s as i32) * 8f64.powi(-(s as i32)) * coord_rate(s);
            let coord_hi = (1.0 + delta).powi(2 * s as i32) * 2f64.powi(-(s as i32)) * coord_rate(s);
            let pair_count = tree.pair_layer(s).len();
            let coord_count = tree.coord_layer(s).len();
            LayerGrowth {
                s,
                pair_count,
                pair_lo,
                pair_hi,
                pair_ok: (pair_lo..=pair_hi).contains(&(pair_count as f64)),
                coord_count,
                coord_lo,
                coord_hi,
                coord_ok: (coord_lo..=coord_hi).contains(&(coord_count as f64)),
            }
        })
        .collect();
    GrowthReport { root: tree.root, layers }
}
