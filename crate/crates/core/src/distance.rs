//! Pairwise coordinate distances from a thresholded quadratic form over
//! held-out columns, plus the naive shared-pair baseline and the
//! latent-variable oracle distance.
//!
//! For coordinates `u, v` the estimate combines four normalized quadratic
//! forms `Z` computed from the depth-`t` weight vectors of their BFS trees
//! against columns indexed by upper-half pairs, restricted to pairs whose
//! coordinates neither tree has seen. Per-column cross terms are clipped at
//! `phi^2` to suppress heavy-tailed contributions from dense columns.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::bfs::{build_constrained_bfs, BfsTree};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::model::{LatentModel, ObservationSet};
use crate::triples::{sort3, strict_pair_count, strict_pair_decode, strict_pair_index};

/// Clip threshold: per-column cross terms with magnitude at or above the
/// square of this value are zeroed.
///
/// Defined only in the sparse regime `p n < 1`; in denser regimes clipping
/// is disabled and the caller should pass `None` downstream.
pub fn clip_threshold(n: usize, p: f64) -> Result<u32> {
    let pn = p * n as f64;
    if pn >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "clip threshold undefined for p*n = {pn} >= 1; clipping is disabled in dense regimes"
        )));
    }
    let val = 2.0 * (n as f64).ln() / (1.0 / pn).ln();
    // tolerate fp rounding at integer boundaries
    Ok((val - 1e-9).ceil().max(1.0) as u32)
}

/// Identity below the clip threshold, zero at or above it.
pub fn clip_term(t: f64, phi: Option<u32>) -> f64 {
    match phi {
        Some(phi) => {
            let limit = (phi as f64) * (phi as f64);
            if t.abs() < limit {
                t
            } else {
                0.0
            }
        }
        None => t,
    }
}

/// Cross term of two sparse weight vectors against one column, excluding the
/// diagonal: `sum_{a != b} nu(a) nv(b) x_a x_b`, evaluated in product form
/// for O(nnz) cost.
pub fn column_cross_term(nu: &[(u32, f64)], nv: &[(u32, f64)], column: &[(u32, f64)]) -> f64 {
    let lookup = |vec: &[(u32, f64)], coord: u32| -> f64 {
        match vec.binary_search_by_key(&coord, |&(c, _)| c) {
            Ok(i) => vec[i].1,
            Err(_) => 0.0,
        }
    };
    let mut su = 0.0;
    let mut sv = 0.0;
    let mut cross = 0.0;
    for &(a, x) in column {
        let wu = lookup(nu, a);
        let wv = lookup(nv, a);
        su += wu * x;
        sv += wv * x;
        cross += wu * wv * x * x;
    }
    su * sv - cross
}

/// Sparse column access over upper-half pair columns: for each coordinate
/// `a`, the columns `(alpha, beta)` with an observed triple `{a, alpha,
/// beta}`, and the transpose.
pub struct ColumnIndex {
    /// Lower-half size; upper-half coordinates are `m..n`.
    pub m: usize,
    pub n: usize,
    rows: Vec<Vec<(u32, f64)>>,
    cols: Vec<Vec<(u32, f64)>>,
}

impl ColumnIndex {
    pub fn build(omega1: &ObservationSet, m: usize) -> ColumnIndex {
        let n = omega1.n;
        let m2 = n - m;
        let mut rows = vec![Vec::new(); n];
        let mut cols = vec![Vec::new(); strict_pair_count(m2)];
        let mut add = |a: usize, alpha: usize, beta: usize, x: f64| {
            let id = strict_pair_index(alpha - m, beta - m, m2) as u32;
            rows[a].push((id, x));
            cols[id as usize].push((a as u32, x));
        };
        // Enumerate distinct (row, column) cells of the flattening; a row
        // coordinate may coincide with a pair member (for triples with
        // repeats), those cells exist but are unreachable once pair sets are
        // restricted to unvisited coordinates.
        for e in &omega1.entries {
            let (u, v, w) = (e.u as usize, e.v as usize, e.w as usize);
            let x = e.value;
            if v >= m && v < w {
                add(u, v, w, x);
            }
            if u >= m && u < w && u != v {
                add(v, u, w, x);
            }
            if u >= m && u < v && v != w {
                add(w, u, v, x);
            }
        }
        for r in rows.iter_mut() {
            r.sort_unstable_by_key(|&(id, _)| id);
        }
        for c in cols.iter_mut() {
            c.sort_unstable_by_key(|&(a, _)| a);
        }
        ColumnIndex { m, n, rows, cols }
    }

    pub fn column_count(&self) -> usize {
        self.cols.len()
    }

    /// Column for the pair id, ascending by coordinate.
    pub fn column(&self, id: u32) -> &[(u32, f64)] {
        &self.cols[id as usize]
    }

    /// Columns observed for coordinate `a`, ascending by id.
    pub fn row(&self, a: usize) -> &[(u32, f64)] {
        &self.rows[a]
    }

    /// Pair id of upper-half coordinates `alpha < beta`.
    pub fn pair_id(&self, alpha: usize, beta: usize) -> u32 {
        strict_pair_index(alpha - self.m, beta - self.m, self.n - self.m) as u32
    }

    /// Upper-half coordinates of a pair id.
    pub fn pair_members(&self, id: u32) -> (usize, usize) {
        let (a, b) = strict_pair_decode(id as usize, self.n - self.m);
        (a + self.m, b + self.m)
    }
}

/// Upper-half pairs whose coordinates were seen by neither tree.
pub fn restricted_pairs(
    u_tree: &BfsTree,
    v_tree: &BfsTree,
    m: usize,
    n: usize,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for alpha in m..n {
        if u_tree.saw_coord(alpha) || v_tree.saw_coord(alpha) {
            continue;
        }
        for beta in (alpha + 1)..n {
            if u_tree.saw_coord(beta) || v_tree.saw_coord(beta) {
                continue;
            }
            out.push((alpha, beta));
        }
    }
    out
}

/// Normalized quadratic form between two trees over an explicit pair set:
/// the clipped per-column cross terms summed and divided by
/// `|pairs| * p_eff^2 * |S_u| * |S_v|`.
pub fn normalized_quadratic(
    u_tree: &BfsTree,
    v_tree: &BfsTree,
    columns: &ColumnIndex,
    pair_set: &[(usize, usize)],
    p_eff: f64,
    phi: Option<u32>,
) -> Result<f64> {
    let t = u_tree.radius;
    let su = u_tree.coord_layer(t).len();
    let sv = v_tree.coord_layer(t).len();
    if su == 0 {
        return Err(Error::EmptyLayer { root: u_tree.root, layer: 2 * t });
    }
    if sv == 0 {
        return Err(Error::EmptyLayer { root: v_tree.root, layer: 2 * t });
    }
    if pair_set.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    let nu = u_tree.coord_weights(t);
    let nv = v_tree.coord_weights(t);
    let mut sum = 0.0;
    for &(alpha, beta) in pair_set {
        let col = columns.column(columns.pair_id(alpha, beta));
        let term = column_cross_term(&nu, &nv, col);
        sum += clip_term(term, phi);
    }
    Ok(sum / (pair_set.len() as f64 * p_eff * p_eff * su as f64 * sv as f64))
}

/// Distance estimate for one pair from the definition: four normalized
/// quadratic forms over the shared restricted pair set. The flag is false
/// when either tree stalled or no restricted pair survives.
pub fn estimate_distance(
    u_tree: &BfsTree,
    v_tree: &BfsTree,
    columns: &ColumnIndex,
    p_eff: f64,
    phi: Option<u32>,
) -> (f64, bool) {
    if !u_tree.has_full_depth() || !v_tree.has_full_depth() {
        return (f64::NAN, false);
    }
    if u_tree.root == v_tree.root {
        return (0.0, true);
    }
    let pairs = restricted_pairs(u_tree, v_tree, columns.m, columns.n);
    if pairs.is_empty() {
        return (f64::NAN, false);
    }
    let z_uu = normalized_quadratic(u_tree, u_tree, columns, &pairs, p_eff, phi);
    let z_vv = normalized_quadratic(v_tree, v_tree, columns, &pairs, p_eff, phi);
    let z_uv = normalized_quadratic(u_tree, v_tree, columns, &pairs, p_eff, phi);
    let z_vu = normalized_quadratic(v_tree, u_tree, columns, &pairs, p_eff, phi);
    match (z_uu, z_vv, z_uv, z_vu) {
        (Ok(a), Ok(b), Ok(c), Ok(d)) => (a + b - c - d, true),
        _ => (f64::NAN, false),
    }
}

/// Parameters shared by every pair in an all-pairs computation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistanceParams {
    pub t: usize,
    /// Effective density of the observation half the columns come from.
    pub p_eff: f64,
    pub phi: Option<u32>,
}

/// Symmetric matrix of estimated distances with a validity mask.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub n: usize,
    pub t: usize,
    pub phi: Option<u32>,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DistanceMatrix {
    /// Build a matrix directly from a symmetric pair function returning
    /// `Some(distance)` or `None` for invalid; the diagonal is zero and
    /// valid. Used by diagnostics and tests.
    pub fn from_fn(n: usize, t: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        let mut dm = DistanceMatrix {
            n,
            t,
            phi: None,
            values: vec![f64::NAN; n * n],
            valid: vec![false; n * n],
        };
        for u in 0..n {
            dm.values[u * n + u] = 0.0;
            dm.valid[u * n + u] = true;
            for v in (u + 1)..n {
                let (value, ok) = match f(u, v) {
                    Some(d) => (d, true),
                    None => (f64::NAN, false),
                };
                dm.values[u * n + v] = value;
                dm.values[v * n + u] = value;
                dm.valid[u * n + v] = ok;
                dm.valid[v * n + u] = ok;
            }
        }
        dm
    }

    fn idx(&self, u: usize, v: usize) -> usize {
        u * self.n + v
    }

    pub fn value(&self, u: usize, v: usize) -> f64 {
        self.values[self.idx(u, v)]
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.valid[self.idx(u, v)]
    }

    /// Distance if the pair is valid.
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        if self.is_valid(u, v) {
            Some(self.value(u, v))
        } else {
            None
        }
    }

    /// Fraction of unordered off-diagonal pairs with a valid estimate.
    pub fn valid_pair_fraction(&self) -> f64 {
        let mut ok = 0usize;
        let mut total = 0usize;
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                total += 1;
                if self.is_valid(u, v) {
                    ok += 1;
                }
            }
        }
        if total == 0 {
            1.0
        } else {
            ok as f64 / total as f64
        }
    }

    /// CSV export: one row per unordered pair with the validity mask as a
    /// companion column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# tensorcf distances v1")?;
        writeln!(out, "u,v,dist,valid")?;
        for u in 0..self.n {
            for v in u..self.n {
                let d = self.value(u, v);
                let val = if d.is_nan() { String::from("") } else { format!("{d}") };
                writeln!(out, "{u},{v},{val},{}", self.is_valid(u, v))?;
            }
        }
        Ok(())
    }
}

/// Per-tree projection onto the column index used by the fast all-pairs
/// path: every `(column, coordinate)` hit with its `N * x` product.
struct TreeColumns {
    /// Sorted by (column, coordinate).
    hits: Vec<(u32, u32, f64)>,
    s_size: usize,
    /// Visited coordinates inside the upper half, shifted to `0..n-m`.
    excluded: Vec<u32>,
    full_depth: bool,
}

impl TreeColumns {
    fn build(tree: &BfsTree, columns: &ColumnIndex) -> TreeColumns {
        let t = tree.radius;
        let layer = tree.coord_layer(t);
        let mut hits = Vec::new();
        for node in layer {
            for &(col, x) in columns.row(node.coord as usize) {
                hits.push((col, node.coord, node.weight * x));
            }
        }
        hits.sort_unstable_by_key(|&(col, coord, _)| (col, coord));
        let excluded = tree
            .visited_coords()
            .into_iter()
            .filter(|&c| (c as usize) >= columns.m)
            .map(|c| c - columns.m as u32)
            .collect();
        TreeColumns { hits, s_size: layer.len(), excluded, full_depth: tree.has_full_depth() }
    }
}

fn merge_excluded(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                if x <= y {
                    i += 1;
                    if x == y {
                        j += 1;
                    }
                    x
                } else {
                    j += 1;
                    y
                }
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => break,
        };
        out.push(next);
    }
    out
}

/// Fast single-pair evaluation over the union of the trees' touched columns;
/// untouched columns contribute zero and are skipped.
fn fast_pair_distance(
    tu: &TreeColumns,
    tv: &TreeColumns,
    columns: &ColumnIndex,
    p_eff: f64,
    phi: Option<u32>,
) -> (f64, bool) {
    debug_assert!(tu.full_depth && tv.full_depth);
    let m2 = columns.n - columns.m;
    let excl = merge_excluded(&tu.excluded, &tv.excluded);
    let available = m2 - excl.len();
    let pair_count = strict_pair_count(available);
    if pair_count == 0 {
        return (f64::NAN, false);
    }
    let mut sum_uv = 0.0;
    let mut sum_uu = 0.0;
    let mut sum_vv = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    let hu = &tu.hits;
    let hv = &tv.hits;
    while i < hu.len() || j < hv.len() {
        let col = match (hu.get(i), hv.get(j)) {
            (Some(&(cu, _, _)), Some(&(cv, _, _))) => cu.min(cv),
            (Some(&(cu, _, _)), None) => cu,
            (None, Some(&(cv, _, _))) => cv,
            (None, None) => break,
        };
        let iu0 = i;
        while i < hu.len() && hu[i].0 == col {
            i += 1;
        }
        let jv0 = j;
        while j < hv.len() && hv[j].0 == col {
            j += 1;
        }
        let (alpha, beta) = strict_pair_decode(col as usize, m2);
        if excl.binary_search(&(alpha as u32)).is_ok() || excl.binary_search(&(beta as u32)).is_ok()
        {
            continue;
        }
        let us = &hu[iu0..i];
        let vs = &hv[jv0..j];
        let mut pu = 0.0;
        let mut pv = 0.0;
        let mut squ = 0.0;
        let mut sqv = 0.0;
        for &(_, _, nx) in us {
            pu += nx;
            squ += nx * nx;
        }
        for &(_, _, nx) in vs {
            pv += nx;
            sqv += nx * nx;
        }
        // shared-coordinate diagonal correction for the cross form
        let mut shared = 0.0;
        let (mut a, mut b) = (0usize, 0usize);
        while a < us.len() && b < vs.len() {
            match us[a].1.cmp(&vs[b].1) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    shared += us[a].2 * vs[b].2;
                    a += 1;
                    b += 1;
                }
            }
        }
        sum_uv += clip_term(pu * pv - shared, phi);
        sum_uu += clip_term(pu * pu - squ, phi);
        sum_vv += clip_term(pv * pv - sqv, phi);
    }
    let base = pair_count as f64 * p_eff * p_eff;
    let su = tu.s_size as f64;
    let sv = tv.s_size as f64;
    let z_uu = sum_uu / (base * su * su);
    let z_vv = sum_vv / (base * sv * sv);
    let z_uv = sum_uv / (base * su * sv);
    (z_uu + z_vv - 2.0 * z_uv, true)
}

/// Build all trees once, then fill the symmetric distance matrix; pairs are
/// evaluated independently in parallel.
pub fn all_pairs_distances(
    graph: &BipartiteGraph,
    omega1: &ObservationSet,
    params: &DistanceParams,
    seed: u64,
) -> DistanceMatrix {
    let trees = build_all_trees(graph, params.t, seed);
    distances_from_trees(&trees, omega1, graph.m, params)
}

/// Tree construction for every root against the shared graph.
pub fn build_all_trees(graph: &BipartiteGraph, t: usize, seed: u64) -> Vec<BfsTree> {
    (0..graph.n)
        .into_par_iter()
        .map(|root| build_constrained_bfs(graph, root, t, seed))
        .collect()
}

/// Fill the matrix from prebuilt trees.
pub fn distances_from_trees(
    trees: &[BfsTree],
    omega1: &ObservationSet,
    m: usize,
    params: &DistanceParams,
) -> DistanceMatrix {
    let n = omega1.n;
    let columns = ColumnIndex::build(omega1, m);
    let tree_cols: Vec<TreeColumns> =
        trees.par_iter().map(|tr| TreeColumns::build(tr, &columns)).collect();
    let mut values = vec![f64::NAN; n * n];
    let mut valid = vec![false; n * n];
    for u in 0..n {
        if tree_cols[u].full_depth {
            values[u * n + u] = 0.0;
            valid[u * n + u] = true;
        }
    }
    let pair_total = strict_pair_count(n);
    let results: Vec<(f64, bool)> = (0..pair_total)
        .into_par_iter()
        .map(|k| {
            let (u, v) = strict_pair_decode(k, n);
            let (tu, tv) = (&tree_cols[u], &tree_cols[v]);
            if !tu.full_depth || !tv.full_depth {
                return (f64::NAN, false);
            }
            fast_pair_distance(tu, tv, &columns, params.p_eff, params.phi)
        })
        .collect();
    for (k, &(d, ok)) in results.iter().enumerate() {
        let (u, v) = strict_pair_decode(k, n);
        values[u * n + v] = d;
        values[v * n + u] = d;
        valid[u * n + v] = ok;
        valid[v * n + u] = ok;
    }
    DistanceMatrix { n, t: params.t, phi: params.phi, values, valid }
}

/// Latent-variable distance `sum_k lambda_k^(2 exponent) (q_k(x_u) -
/// q_k(x_v))^2` using the effective (normalized) spectrum; computable only
/// for synthetic instances.
pub fn oracle_distance_with_exponent(
    model: &LatentModel,
    exponent: u32,
    u: usize,
    v: usize,
) -> f64 {
    let mut acc = 0.0;
    for (k, l) in model.effective_lambdas().iter().enumerate() {
        let qk = |i: usize| crate::model::eigenfunction(model.basis, k + 1, model.thetas[i]);
        let diff = qk(u) - qk(v);
        acc += l.powi(2 * exponent as i32) * diff * diff;
    }
    acc
}

/// Oracle distance at the default exponent `2t + 1`, the power the distance
/// estimate concentrates around.
pub fn oracle_distance(model: &LatentModel, t: usize, u: usize, v: usize) -> f64 {
    oracle_distance_with_exponent(model, 2 * t as u32 + 1, u, v)
}

/// Index for the naive baseline: mean squared difference over pairs shared
/// by two coordinates' observed triples.
pub struct SharedPairIndex {
    values: HashMap<(u32, u32, u32), f64>,
    rows: Vec<Vec<(u32, u32)>>,
}

impl SharedPairIndex {
    pub fn build(omega: &ObservationSet) -> SharedPairIndex {
        let mut values = HashMap::with_capacity(omega.len());
        let mut rows = vec![Vec::new(); omega.n];
        for e in &omega.entries {
            values.insert((e.u, e.v, e.w), e.value);
            let mut seen: [Option<(u32, (u32, u32))>; 3] = [None; 3];
            let readings = [(e.u, (e.v, e.w)), (e.v, (e.u, e.w)), (e.w, (e.u, e.v))];
            for (slot, reading) in readings.into_iter().enumerate() {
                if seen.iter().flatten().any(|&r| r == reading) {
                    continue;
                }
                seen[slot] = Some(reading);
                rows[reading.0 as usize].push(reading.1);
            }
        }
        SharedPairIndex { values, rows }
    }

    /// Mean of squared value differences over pairs `(b, c)` observed with
    /// both `u` and `v`; the count of shared pairs is returned alongside
    /// (zero means the distance is undefined).
    pub fn distance(&self, u: usize, v: usize) -> (f64, usize) {
        self.distance_corrected(u, v, None)
    }

    /// Same with an optional additive-noise correction `-2 sigma^2`.
    pub fn distance_corrected(&self, u: usize, v: usize, sigma: Option<f64>) -> (f64, usize) {
        let mut acc = 0.0;
        let mut count = 0usize;
        for &(b, c) in &self.rows[u] {
            let (x, y, z) = sort3(u, b as usize, c as usize);
            let xu = self.values[&(x as u32, y as u32, z as u32)];
            let (x, y, z) = sort3(v, b as usize, c as usize);
            if let Some(&xv) = self.values.get(&(x as u32, y as u32, z as u32)) {
                let d = xu - xv;
                acc += d * d;
                count += 1;
            }
        }
        if count == 0 {
            return (f64::NAN, 0);
        }
        let mut mean = acc / count as f64;
        if let Some(s) = sigma {
            mean -= 2.0 * s * s;
        }
        (mean, count)
    }
}
