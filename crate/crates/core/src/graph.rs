//! Weighted bipartite graph between coordinate vertices and pair vertices,
//! built from the flattened tensor.
//!
//! Pair vertices are the strict pairs `(b, c)`, `b < c`, inside the lower
//! coordinate half, enumerated lexicographically so ids are deterministic.
//! An observed triple contributes one edge for every way of reading it as
//! `(a, (b, c))` with both pair members in the lower half and `a` distinct
//! from both. Triples with repeated coordinates never qualify and are
//! dropped silently.

use std::io::Write;

use crate::model::ObservationSet;
use crate::triples::{strict_pair_count, strict_pair_decode, strict_pair_index};

#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    pub n: usize,
    /// Size of the lower coordinate half; pair vertices live inside `0..m`.
    pub m: usize,
    /// For each coordinate vertex, edges to pair vertices: `(pair_id, weight)`.
    coord_adj: Vec<Vec<(u32, f64)>>,
    /// For each pair vertex, edges to coordinate vertices: `(coord, weight)`.
    pair_adj: Vec<Vec<(u32, f64)>>,
    edge_count: usize,
}

/// Build the graph from the first observation half.
///
/// `set_a_len` is the size of the lower coordinate half (pass `n` to build
/// the unsplit all-pairs variant used in diagnostics and tests).
pub fn build_bipartite_graph(omega1: &ObservationSet, set_a_len: usize, n: usize) -> BipartiteGraph {
    let m = set_a_len;
    let mut coord_adj = vec![Vec::new(); n];
    let mut pair_adj = vec![Vec::new(); strict_pair_count(m)];
    let mut edge_count = 0usize;
    let mut add = |a: usize, b: usize, c: usize, x: f64| {
        debug_assert!(b < c && c < m && a != b && a != c);
        let id = strict_pair_index(b, c, m) as u32;
        coord_adj[a].push((id, x));
        pair_adj[id as usize].push((a as u32, x));
        edge_count += 1;
    };
    for e in &omega1.entries {
        let (u, v, w) = (e.u as usize, e.v as usize, e.w as usize);
        let x = e.value;
        // readings (a, (b, c)); entries are sorted so pairs are too
        if v < m && u < v && w != u && w != v {
            add(w, u, v, x);
        }
        if w < m && u < w && v != u && v != w {
            add(v, u, w, x);
        }
        if w < m && v < w && u != v && u != w {
            add(u, v, w, x);
        }
    }
    for adj in coord_adj.iter_mut() {
        adj.sort_unstable_by_key(|&(id, _)| id);
    }
    for adj in pair_adj.iter_mut() {
        adj.sort_unstable_by_key(|&(a, _)| a);
    }
    BipartiteGraph { n, m, coord_adj, pair_adj, edge_count }
}

impl BipartiteGraph {
    pub fn pair_vertex_count(&self) -> usize {
        self.pair_adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Edges incident to a coordinate vertex, ascending by pair id.
    pub fn coord_edges(&self, a: usize) -> &[(u32, f64)] {
        &self.coord_adj[a]
    }

    /// Edges incident to a pair vertex, ascending by coordinate.
    pub fn pair_edges(&self, pair_id: u32) -> &[(u32, f64)] {
        &self.pair_adj[pair_id as usize]
    }

    /// The two coordinates of a pair vertex.
    pub fn pair_members(&self, pair_id: u32) -> (usize, usize) {
        strict_pair_decode(pair_id as usize, self.m)
    }

    /// Debug export, one line per edge: `a b c weight`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (a, adj) in self.coord_adj.iter().enumerate() {
            for &(id, x) in adj {
                let (b, c) = self.pair_members(id);
                writeln!(out, "{a} {b} {c} {x}")?;
            }
        }
        Ok(())
    }
}
