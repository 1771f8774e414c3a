//! Index arithmetic for canonical triples and ordered pairs.
//!
//! Canonical triples are the sorted index tuples `u <= v <= w` over `0..n`;
//! the symmetric tensor is fully described by its values on them. They are
//! enumerated lexicographically, which gives every triple a stable linear
//! index used by the samplers and the dense estimator.

/// Number of canonical triples `u <= v <= w` over `0..n`.
pub fn triple_count(n: usize) -> usize {
    n * (n + 1) * (n + 2) / 6
}

/// Number of canonical pairs `v <= w` over `0..m`.
pub fn pair_with_rep_count(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Number of strict pairs `b < c` over `0..m`.
pub fn strict_pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Lexicographic enumerator over canonical triples with precomputed offsets,
/// supporting O(log n) decoding of a linear index.
#[derive(Debug, Clone)]
pub struct TripleIndexer {
    n: usize,
    /// `offsets[u]` = number of triples whose first coordinate is `< u`.
    offsets: Vec<usize>,
}

impl TripleIndexer {
    pub fn new(n: usize) -> Self {
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0usize;
        for u in 0..=n {
            offsets.push(acc);
            if u < n {
                acc += pair_with_rep_count(n - u);
            }
        }
        TripleIndexer { n, offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets[self.n]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index of canonical triple `(u, v, w)` with `u <= v <= w`.
    pub fn encode(&self, u: usize, v: usize, w: usize) -> usize {
        debug_assert!(u <= v && v <= w && w < self.n);
        // Within the block for u, pairs (v, w) with u <= v <= w are again
        // enumerated lexicographically over m = n - u values starting at u.
        // Pairs whose first element is the j-th value have (m - j) choices,
        // so the offset of dv = v - u is sum_{j<dv}(m - j) = dv*m - dv(dv-1)/2.
        let m = self.n - u;
        let dv = v - u;
        let dw = w - v;
        let pair_off = dv * m - dv * dv.saturating_sub(1) / 2;
        self.offsets[u] + pair_off + dw
    }

    /// Decode a linear index back to `(u, v, w)`.
    pub fn decode(&self, idx: usize) -> (usize, usize, usize) {
        debug_assert!(idx < self.len());
        // binary search the largest u with offsets[u] <= idx
        let u = match self.offsets.binary_search(&idx) {
            Ok(mut k) => {
                // offsets may repeat only at the tail; step back over equals
                while k + 1 <= self.n && self.offsets[k + 1] == idx {
                    k += 1;
                }
                k
            }
            Err(k) => k - 1,
        };
        let mut rem = idx - self.offsets[u];
        let m = self.n - u;
        // find dv: largest d with sum_{j<d}(m - j) <= rem; linear scan is
        // fine for decode-heavy loops because rem shrinks geometrically, but
        // use closed form to stay O(1).
        // sum_{j<d}(m-j) = d*m - d(d-1)/2 <= rem
        // solve d approximately then fix up.
        let mut dv = {
            let mf = m as f64;
            let r = rem as f64;
            let disc = (2.0 * mf + 1.0) * (2.0 * mf + 1.0) - 8.0 * r;
            let d = ((2.0 * mf + 1.0) - disc.max(0.0).sqrt()) / 2.0;
            d.floor().max(0.0) as usize
        };
        let block = |d: usize| d * m - d * d.saturating_sub(1) / 2;
        while dv > 0 && block(dv) > rem {
            dv -= 1;
        }
        while dv + 1 <= m && block(dv + 1) <= rem {
            dv += 1;
        }
        rem -= block(dv);
        let v = u + dv;
        let w = v + rem;
        (u, v, w)
    }
}

/// Lexicographic index of the strict pair `(b, c)`, `b < c`, over `0..m`.
pub fn strict_pair_index(b: usize, c: usize, m: usize) -> usize {
    debug_assert!(b < c && c < m);
    b * m - b * (b + 1) / 2 + (c - b - 1)
}

/// Inverse of [`strict_pair_index`].
pub fn strict_pair_decode(idx: usize, m: usize) -> (usize, usize) {
    // find b: largest b with sum_{j<b}(m-1-j) <= idx
    let block = |b: usize| b * m - b * (b + 1) / 2;
    let mut b = 0usize;
    // closed-form initial guess
    let mf = m as f64;
    let r = idx as f64;
    let disc = (2.0 * mf - 1.0) * (2.0 * mf - 1.0) - 8.0 * r;
    if disc > 0.0 {
        b = (((2.0 * mf - 1.0) - disc.sqrt()) / 2.0).floor().max(0.0) as usize;
    }
    while b > 0 && block(b) > idx {
        b -= 1;
    }
    while block(b + 1) <= idx {
        b += 1;
    }
    let c = b + 1 + (idx - block(b));
    (b, c)
}

/// Number of ordered permutations of a canonical triple: 6 when all three
/// coordinates are distinct, 3 when exactly two coincide, 1 on the diagonal.
pub fn multiplicity(u: usize, v: usize, w: usize) -> usize {
    if u == v && v == w {
        1
    } else if u == v || v == w {
        3
    } else {
        6
    }
}

/// Sort three indices ascending.
pub fn sort3(a: usize, b: usize, c: usize) -> (usize, usize, usize) {
    let (mut x, mut y, mut z) = (a, b, c);
    if x > y {
        std::mem::swap(&mut x, &mut y);
    }
    if y > z {
        std::mem::swap(&mut y, &mut z);
    }
    if x > y {
        std::mem::swap(&mut x, &mut y);
    }
    (x, y, z)
}
