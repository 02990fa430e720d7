//! Integer-weighted vectors over vertices, edges and triangles, boundary maps,
//! and triangle matchings.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{edge_key, triple_edges, Edge, Graph, Triple};

/// A sparse integer vector indexed by simplices of one dimension.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseVec<K: Ord> {
    pub n: usize,
    weights: BTreeMap<K, i64>,
}

/// Edge-weighted multigraph with signed weights.
pub type IntGraph = SparseVec<Edge>;
/// Signed triangle vector.
pub type TriangleVec = SparseVec<Triple>;
/// Signed vertex vector.
pub type VertexVec = SparseVec<u32>;

impl<K: Ord + Copy> SparseVec<K> {
    pub fn new(n: usize) -> Self {
        SparseVec {
            n,
            weights: BTreeMap::new(),
        }
    }

    pub fn get(&self, k: &K) -> i64 {
        self.weights.get(k).copied().unwrap_or(0)
    }

    /// Adds `w` to entry `k`, dropping it when it reaches zero.
    pub fn add(&mut self, k: K, w: i64) {
        if w == 0 {
            return;
        }
        let e = self.weights.entry(k).or_insert(0);
        *e = e.checked_add(w).expect("weight overflow");
        if *e == 0 {
            self.weights.remove(&k);
        }
    }

    pub fn add_scaled(&mut self, other: &Self, alpha: i64) {
        for (k, w) in &other.weights {
            self.add(*k, w.checked_mul(alpha).expect("weight overflow"));
        }
    }

    pub fn scaled(&self, alpha: i64) -> Self {
        let mut out = Self::new(self.n);
        out.add_scaled(self, alpha);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    /// Entries with nonzero weight, in key order.
    pub fn iter(&self) -> impl Iterator<Item = (K, i64)> + '_ {
        self.weights.iter().map(|(k, w)| (*k, *w))
    }

    pub fn keys(&self) -> impl Iterator<Item = K> + '_ {
        self.weights.keys().copied()
    }

    pub fn positive(&self) -> Self {
        SparseVec {
            n: self.n,
            weights: self
                .weights
                .iter()
                .filter(|(_, w)| **w > 0)
                .map(|(k, w)| (*k, *w))
                .collect(),
        }
    }

    /// `v⁻`, so that `v = v⁺ − v⁻`.
    pub fn negative(&self) -> Self {
        SparseVec {
            n: self.n,
            weights: self
                .weights
                .iter()
                .filter(|(_, w)| **w < 0)
                .map(|(k, w)| (*k, -*w))
                .collect(),
        }
    }

    pub fn l1(&self) -> i64 {
        self.weights.values().map(|w| w.abs()).sum()
    }

    pub fn sum(&self) -> i64 {
        self.weights.values().sum()
    }

    pub fn max_abs(&self) -> i64 {
        self.weights.values().map(|w| w.abs()).max().unwrap_or(0)
    }

    pub fn from_iter_weights(n: usize, it: impl IntoIterator<Item = (K, i64)>) -> Self {
        let mut v = Self::new(n);
        for (k, w) in it {
            v.add(k, w);
        }
        v
    }
}

impl<K: Ord + Copy> std::ops::Add for &SparseVec<K> {
    type Output = SparseVec<K>;
    fn add(self, rhs: Self) -> SparseVec<K> {
        let mut out = self.clone();
        out.add_scaled(rhs, 1);
        out
    }
}

impl<K: Ord + Copy> std::ops::Sub for &SparseVec<K> {
    type Output = SparseVec<K>;
    fn sub(self, rhs: Self) -> SparseVec<K> {
        let mut out = self.clone();
        out.add_scaled(rhs, -1);
        out
    }
}

impl IntGraph {
    pub fn indicator(g: &Graph) -> Self {
        Self::from_iter_weights(g.n(), g.edges().map(|e| (e, 1)))
    }

    /// Support as a simple graph.
    pub fn support(&self) -> Graph {
        let mut g = Graph::new(self.n);
        for (u, v) in self.keys() {
            g.insert(u, v);
        }
        g
    }

    /// True iff all weights are 1, i.e. this is the indicator of a simple graph.
    pub fn is_simple(&self) -> bool {
        self.weights.values().all(|&w| w == 1)
    }

    /// `Σ_u |J_uv|` for each vertex `v`.
    pub fn abs_degrees(&self) -> Vec<i64> {
        let mut d = vec![0i64; self.n];
        for ((u, v), w) in self.iter() {
            d[u as usize] += w.abs();
            d[v as usize] += w.abs();
        }
        d
    }

    /// Weighted tridivisibility: total weight divisible by 3, every weighted degree even.
    pub fn is_tridivisible(&self) -> bool {
        self.sum().rem_euclid(3) == 0 && boundary_1(self).iter().all(|(_, w)| w.rem_euclid(2) == 0)
    }

    /// `|J(v)| < c·n` for every vertex, counting multiplicity.
    pub fn is_bounded(&self, c: f64) -> bool {
        let limit = c * self.n as f64;
        self.abs_degrees().iter().all(|&d| (d as f64) < limit)
    }

    /// Smallest `c` with `|J(v)| ≤ c·n` for all `v`.
    pub fn boundedness(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.abs_degrees().into_iter().max().unwrap_or(0) as f64 / self.n as f64
    }
}

pub fn is_bounded(j: &IntGraph, c: f64) -> bool {
    j.is_bounded(c)
}

/// `∂₂`: each triangle contributes its weight to its three edges.
pub fn boundary_2(t: &TriangleVec) -> IntGraph {
    let mut out = IntGraph::new(t.n);
    for (tri, w) in t.iter() {
        for e in triple_edges(&tri) {
            out.add(e, w);
        }
    }
    out
}

/// `∂₁`: each edge contributes its weight to both endpoints.
pub fn boundary_1(j: &IntGraph) -> VertexVec {
    let mut out = VertexVec::new(j.n);
    for ((u, v), w) in j.iter() {
        out.add(u, w);
        out.add(v, w);
    }
    out
}

/// A vector over `K_i` for `i ∈ {0,1,2,3}`; `K_0` is a single empty set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Chain {
    Scalar(i64),
    Vertices(VertexVec),
    Edges(IntGraph),
    Triangles(TriangleVec),
}

impl Chain {
    pub fn dim(&self) -> usize {
        match self {
            Chain::Scalar(_) => 0,
            Chain::Vertices(_) => 1,
            Chain::Edges(_) => 2,
            Chain::Triangles(_) => 3,
        }
    }
}

/// `(∂_j v)_f = Σ_{f ⊆ e} v_e`.
pub fn boundary(j: usize, v: &Chain) -> Result<Chain> {
    let i = v.dim();
    if j > i {
        return Err(Error::Precondition(format!(
            "boundary target {j} exceeds source dimension {i}"
        )));
    }
    Ok(match (v, j) {
        (_, j) if j == i => v.clone(),
        (Chain::Triangles(t), 2) => Chain::Edges(boundary_2(t)),
        (Chain::Triangles(t), 1) => {
            let mut out = VertexVec::new(t.n);
            for (tri, w) in t.iter() {
                for x in tri {
                    out.add(x, w);
                }
            }
            Chain::Vertices(out)
        }
        (Chain::Triangles(t), 0) => Chain::Scalar(t.sum()),
        (Chain::Edges(e), 1) => Chain::Vertices(boundary_1(e)),
        (Chain::Edges(e), 0) => Chain::Scalar(e.sum()),
        (Chain::Vertices(x), 0) => Chain::Scalar(x.sum()),
        _ => unreachable!(),
    })
}

/// An ordered set of pairwise edge-disjoint triangles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matching {
    triangles: Vec<Triple>,
}

impl Matching {
    pub fn new() -> Self {
        Matching::default()
    }

    /// Checks edge-disjointness.
    pub fn from_triangles(triangles: Vec<Triple>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &triangles {
            if !(t[0] < t[1] && t[1] < t[2]) {
                return Err(Error::Precondition(format!("triangle {t:?} is not sorted")));
            }
            for e in triple_edges(t) {
                if !seen.insert(edge_key(e)) {
                    return Err(Error::Precondition(format!("triangles share edge {e:?}")));
                }
            }
        }
        Ok(Matching { triangles })
    }

    /// Builds from the positive part of a 0/1 triangle vector.
    pub fn from_indicator(v: &TriangleVec) -> Result<Self> {
        if v.iter().any(|(_, w)| w != 1) {
            return Err(Error::InternalConsistency(
                "triangle vector is not a 0/1 indicator".into(),
            ));
        }
        Self::from_triangles(v.keys().collect())
    }

    pub(crate) fn push_unchecked(&mut self, t: Triple) {
        self.triangles.push(t);
    }

    pub fn triangles(&self) -> &[Triple] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn indicator(&self, n: usize) -> TriangleVec {
        TriangleVec::from_iter_weights(n, self.triangles.iter().map(|t| (*t, 1)))
    }

    /// `∪M`, the union of edges.
    pub fn edge_union(&self, n: usize) -> Graph {
        let mut g = Graph::new(n);
        for t in &self.triangles {
            for (u, v) in triple_edges(t) {
                g.insert(u, v);
            }
        }
        g
    }

    pub fn extend(&mut self, other: &Matching) {
        self.triangles.extend_from_slice(&other.triangles);
    }

    pub fn sorted(&self) -> Matching {
        let mut t = self.triangles.clone();
        t.sort_unstable();
        Matching { triangles: t }
    }
}

/// True iff `M` partitions the edge set of `G` into triangles.
pub fn verify_decomposition(g: &Graph, m: &Matching) -> bool {
    let mut seen = HashSet::with_capacity(3 * m.len());
    for t in m.triangles() {
        for e in triple_edges(t) {
            if e.0 == e.1 || !g.contains_edge(e) || !seen.insert(edge_key(e)) {
                return false;
            }
        }
    }
    seen.len() == g.edge_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{edge, triple};
    use proptest::prelude::*;

    fn fano() -> (Graph, Matching) {
        // vertices 0..7 stand for the labels 1..=7 of F_8 ∖ {0}
        let mut tris = Vec::new();
        for x in 1u32..8 {
            for y in x + 1..8 {
                let z = x ^ y;
                if z > y {
                    tris.push(triple(x - 1, y - 1, z - 1));
                }
            }
        }
        (Graph::complete(7), Matching::from_triangles(tris).unwrap())
    }

    #[test]
    fn fano_plane_decomposes_k7() {
        let (g, m) = fano();
        assert_eq!(m.len(), 7);
        assert!(verify_decomposition(&g, &m));
        assert_eq!(boundary_2(&m.indicator(7)), IntGraph::indicator(&g));
    }

    #[test]
    fn decomposition_failures() {
        let (g, m) = fano();
        let mut short = m.triangles().to_vec();
        short.pop();
        assert!(!verify_decomposition(&g, &Matching::from_triangles(short).unwrap()));
        assert!(Matching::from_triangles(vec![[0, 1, 2], [0, 1, 3]]).is_err());
        let mut dup = Matching::new();
        dup.push_unchecked([0, 1, 2]);
        dup.push_unchecked([0, 1, 3]);
        assert!(!verify_decomposition(&Graph::complete(4), &dup));
    }

    #[test]
    fn unit_boundaries() {
        let t = TriangleVec::from_iter_weights(5, [([0, 2, 4], 1)]);
        let Chain::Edges(e) = boundary(2, &Chain::Triangles(t)).unwrap() else {
            panic!()
        };
        assert_eq!(
            e.iter().collect::<Vec<_>>(),
            vec![((0, 2), 1), ((0, 4), 1), ((2, 4), 1)]
        );
        let j = IntGraph::from_iter_weights(5, [(edge(3, 1), 1)]);
        assert_eq!(boundary_1(&j).iter().collect::<Vec<_>>(), vec![(1, 1), (3, 1)]);
        assert!(boundary(3, &Chain::Edges(j)).is_err());
    }

    #[test]
    fn boundedness_examples() {
        let n = 10;
        assert!(IntGraph::new(n).is_bounded(0.01));
        // star with ⌈cn⌉ = 3 edges at the centre, c = 0.3
        let star = IntGraph::from_iter_weights(n, (1..4).map(|v| (edge(0, v), 1)));
        assert!(!star.is_bounded(0.3));
        let pm = IntGraph::from_iter_weights(n, (0..5).map(|i| (edge(2 * i, 2 * i + 1), 1)));
        assert!(pm.is_bounded(2.0 / n as f64));
        // multiplicity counts
        let heavy = IntGraph::from_iter_weights(n, [(edge(0, 1), -2)]);
        assert!(!heavy.is_bounded(0.2));
        assert!(heavy.is_bounded(0.21));
    }

    #[test]
    fn positive_negative_split() {
        let v = IntGraph::from_iter_weights(4, [((0, 1), 2), ((1, 2), -3), ((2, 3), 1)]);
        let (p, m) = (v.positive(), v.negative());
        assert_eq!(&p - &m, v);
        assert!(p.keys().all(|k| m.get(&k) == 0));
        assert!(m.iter().all(|(_, w)| w > 0));
    }

    fn arb_tri_vec(n: u32) -> impl Strategy<Value = TriangleVec> {
        proptest::collection::vec(((0..n), (0..n), (0..n), -3i64..=3), 0..20).prop_map(move |es| {
            TriangleVec::from_iter_weights(
                n as usize,
                es.into_iter()
                    .filter(|(x, y, z, _)| x != y && y != z && x != z)
                    .map(|(x, y, z, w)| (triple(x, y, z), w)),
            )
        })
    }

    fn arb_int_graph(n: u32) -> impl Strategy<Value = IntGraph> {
        proptest::collection::vec(((0..n), (0..n), -3i64..=3), 0..20).prop_map(move |es| {
            IntGraph::from_iter_weights(
                n as usize,
                es.into_iter()
                    .filter(|(u, v, _)| u != v)
                    .map(|(u, v, w)| (edge(u, v), w)),
            )
        })
    }

    proptest! {
        #[test]
        fn boundary_is_linear(u in arb_tri_vec(9), v in arb_tri_vec(9), a in -4i64..5, b in -4i64..5) {
            let mut comb = u.scaled(a);
            comb.add_scaled(&v, b);
            for j in 0..=3 {
                let lhs = boundary(j, &Chain::Triangles(comb.clone())).unwrap();
                let bu = boundary(j, &Chain::Triangles(u.clone())).unwrap();
                let bv = boundary(j, &Chain::Triangles(v.clone())).unwrap();
                let rhs = match (bu, bv) {
                    (Chain::Scalar(x), Chain::Scalar(y)) => Chain::Scalar(a * x + b * y),
                    (Chain::Vertices(x), Chain::Vertices(y)) => { let mut r = x.scaled(a); r.add_scaled(&y, b); Chain::Vertices(r) }
                    (Chain::Edges(x), Chain::Edges(y)) => { let mut r = x.scaled(a); r.add_scaled(&y, b); Chain::Edges(r) }
                    (Chain::Triangles(x), Chain::Triangles(y)) => { let mut r = x.scaled(a); r.add_scaled(&y, b); Chain::Triangles(r) }
                    _ => unreachable!(),
                };
                prop_assert_eq!(lhs, rhs);
            }
        }

        #[test]
        fn boundary_0_of_1_is_twice_total(j in arb_int_graph(12)) {
            let Chain::Vertices(v) = boundary(1, &Chain::Edges(j.clone())).unwrap() else { unreachable!() };
            let Chain::Scalar(s) = boundary(0, &Chain::Vertices(v)).unwrap() else { unreachable!() };
            prop_assert_eq!(s, 2 * j.sum());
        }

        #[test]
        fn triangle_boundaries_are_tridivisible(u in arb_tri_vec(10), v in arb_tri_vec(10), a in -3i64..4, b in -3i64..4) {
            let (bu, bv) = (boundary_2(&u), boundary_2(&v));
            prop_assert!(bu.is_tridivisible() && bv.is_tridivisible());
            let mut comb = bu.scaled(a);
            comb.add_scaled(&bv, b);
            prop_assert!(comb.is_tridivisible());
        }

        #[test]
        fn decomposition_implies_exact_boundary(seed in 0u64..50) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // a random edge-disjoint family, and the graph it covers
            let mut tris = Graph::complete(15).triangles();
            tris.shuffle(&mut rng);
            let mut used = HashSet::new();
            let mut picked = Vec::new();
            for t in tris {
                if triple_edges(&t).iter().all(|e| !used.contains(e)) {
                    used.extend(triple_edges(&t));
                    picked.push(t);
                }
            }
            let m = Matching::from_triangles(picked).unwrap();
            let g = m.edge_union(15);
            prop_assert!(verify_decomposition(&g, &m));
            prop_assert_eq!(boundary_2(&m.indicator(15)), IntGraph::indicator(&g));
        }
    }
}
