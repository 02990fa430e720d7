//! Simple graphs with bitset adjacency rows.

use std::io::BufRead;
use std::path::Path;

use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};

/// Canonical edge key: smaller endpoint first.
pub type Edge = (u32, u32);
/// Canonical triangle key: ascending vertices.
pub type Triple = [u32; 3];

#[inline]
pub fn edge(u: u32, v: u32) -> Edge {
    debug_assert_ne!(u, v);
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

#[inline]
pub fn triple(x: u32, y: u32, z: u32) -> Triple {
    let mut t = [x, y, z];
    t.sort_unstable();
    t
}

#[inline]
pub fn triple_edges(t: &Triple) -> [Edge; 3] {
    [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])]
}

/// Packs an edge into one word; handy as a hash key.
#[inline]
pub fn edge_key(e: Edge) -> u64 {
    (e.0 as u64) << 32 | e.1 as u64
}

#[inline]
pub fn key_edge(k: u64) -> Edge {
    ((k >> 32) as u32, k as u32)
}

#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    words: usize,
    rows: Vec<u64>,
    m: usize,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Graph {{ n: {}, m: {} }}", self.n, self.m)
    }
}

impl Graph {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Graph {
            n,
            words,
            rows: vec![0; n * words],
            m: 0,
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::new(n);
        for u in 0..n as u32 {
            for v in u + 1..n as u32 {
                g.insert(u, v);
            }
        }
        g
    }

    /// Erdős–Rényi G(n, p).
    pub fn random<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut g = Graph::new(n);
        for u in 0..n as u32 {
            for v in u + 1..n as u32 {
                if rng.gen_bool(p) {
                    g.insert(u, v);
                }
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut g = Graph::new(n);
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Edge count `|G|`.
    #[inline]
    pub fn edge_count(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, v: u32) -> &[u64] {
        let s = v as usize * self.words;
        &self.rows[s..s + self.words]
    }

    #[inline]
    pub fn words(&self) -> usize {
        self.words
    }

    #[inline]
    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        if u == v || u as usize >= self.n || v as usize >= self.n {
            return false;
        }
        self.rows[u as usize * self.words + (v as usize >> 6)] >> (v & 63) & 1 == 1
    }

    #[inline]
    pub fn contains_edge(&self, e: Edge) -> bool {
        self.has_edge(e.0, e.1)
    }

    pub fn has_triangle(&self, t: &Triple) -> bool {
        triple_edges(t).iter().all(|&e| self.contains_edge(e))
    }

    /// Inserts without checks; returns whether the edge was new.
    pub(crate) fn insert(&mut self, u: u32, v: u32) -> bool {
        let (u, v) = (u as usize, v as usize);
        let w = u * self.words + (v >> 6);
        let bit = 1u64 << (v & 63);
        if self.rows[w] & bit != 0 {
            return false;
        }
        self.rows[w] |= bit;
        self.rows[v * self.words + (u >> 6)] |= 1u64 << (u & 63);
        self.m += 1;
        true
    }

    pub fn add_edge(&mut self, u: u32, v: u32) -> Result<bool> {
        if u == v {
            return Err(Error::Precondition(format!("self-loop at {u}")));
        }
        if u as usize >= self.n || v as usize >= self.n {
            return Err(Error::Precondition(format!(
                "edge {u}-{v} out of range for n = {}",
                self.n
            )));
        }
        Ok(self.insert(u, v))
    }

    pub fn remove_edge(&mut self, u: u32, v: u32) -> bool {
        if !self.has_edge(u, v) {
            return false;
        }
        let (u, v) = (u as usize, v as usize);
        self.rows[u * self.words + (v >> 6)] &= !(1u64 << (v & 63));
        self.rows[v * self.words + (u >> 6)] &= !(1u64 << (u & 63));
        self.m -= 1;
        true
    }

    pub fn degree(&self, v: u32) -> usize {
        self.row(v).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n as u32).map(|v| self.degree(v)).collect()
    }

    pub fn codegree(&self, u: u32, v: u32) -> usize {
        self.row(u)
            .iter()
            .zip(self.row(v))
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn neighbours(&self, v: u32) -> BitIter<'_> {
        BitIter::new(self.row(v))
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.n as u32).flat_map(move |u| self.neighbours(u).filter(move |&v| v > u).map(move |v| (u, v)))
    }

    /// Triangles of the graph, sorted lexicographically.
    pub fn triangles(&self) -> Vec<Triple> {
        let mut out = Vec::new();
        let mut buf = vec![0u64; self.words];
        for (u, v) in self.edges() {
            for (b, (x, y)) in buf.iter_mut().zip(self.row(u).iter().zip(self.row(v))) {
                *b = x & y;
            }
            out.extend(BitIter::new(&buf).filter(|&w| w > v).map(|w| [u, v, w]));
        }
        out
    }

    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.n == other.n && self.rows.iter().zip(&other.rows).all(|(a, b)| a & !b == 0)
    }

    /// `self ∖ other` on the same vertex set.
    pub fn difference(&self, other: &Graph) -> Graph {
        let mut g = self.clone();
        for (u, v) in other.edges() {
            g.remove_edge(u, v);
        }
        g
    }

    /// Exact density `|G| / C(n,2)`.
    pub fn density(&self) -> Result<Ratio<u64>> {
        if self.n < 2 {
            return Err(Error::DegenerateInput(format!("density needs n >= 2, got {}", self.n)));
        }
        let pairs = (self.n as u64) * (self.n as u64 - 1) / 2;
        Ok(Ratio::new(self.m as u64, pairs))
    }

    pub fn density_f64(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m as f64 / (self.n as f64 * (self.n as f64 - 1.0) / 2.0)
    }

    /// `|G| ≡ 0 mod 3` and every degree even.
    pub fn is_tridivisible(&self) -> bool {
        self.m % 3 == 0 && (0..self.n as u32).all(|v| self.degree(v) % 2 == 0)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    /// Reads the "n m" then "u v" per line format.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut g = Graph::new(0);
        let mut seen = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let mut it = t.split_whitespace();
            let a: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("expected integer"))?;
            let b: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("expected two integers"))?;
            if it.next().is_some() {
                return Err(bad("trailing tokens"));
            }
            match header {
                None => {
                    header = Some((a, b));
                    g = Graph::new(a);
                }
                Some((n, _)) => {
                    if a >= n || b >= n || a == b {
                        return Err(bad("vertex out of range or self-loop"));
                    }
                    if !g.insert(a as u32, b as u32) {
                        return Err(bad("duplicate edge"));
                    }
                    seen += 1;
                }
            }
        }
        let (_, m) = header.ok_or(Error::Parse {
            line: 0,
            msg: "missing header".into(),
        })?;
        if seen != m {
            return Err(Error::Parse {
                line: 0,
                msg: format!("header promises {m} edges, found {seen}"),
            });
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.m);
        for (u, v) in self.edges() {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }
}

/// Iterates set bits of a bitset row.
pub struct BitIter<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl<'a> BitIter<'a> {
    pub fn new(words: &'a [u64]) -> Self {
        BitIter {
            words,
            idx: 0,
            cur: words.first().copied().unwrap_or(0),
        }
    }
}

impl Iterator for BitIter<'_> {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        loop {
            if self.cur != 0 {
                let b = self.cur.trailing_zeros();
                self.cur &= self.cur - 1;
                return Some((self.idx * 64) as u32 + b);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}

/// Picks the `k`-th set bit (0-based) of a bitset, if it exists.
pub fn nth_set_bit(words: &[u64], mut k: usize) -> Option<u32> {
    for (i, &w) in words.iter().enumerate() {
        let c = w.count_ones() as usize;
        if k < c {
            let mut w = w;
            for _ in 0..k {
                w &= w - 1;
            }
            return Some((i * 64) as u32 + w.trailing_zeros());
        }
        k -= c;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cycle(n: u32) -> Graph {
        Graph::from_edges(n as usize, (0..n).map(|i| edge(i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn density_examples() {
        assert_eq!(Graph::complete(4).density().unwrap(), Ratio::from_integer(1));
        assert_eq!(Graph::new(10).density().unwrap(), Ratio::from_integer(0));
        assert_eq!(cycle(5).density().unwrap(), Ratio::new(1, 2));
        assert!(matches!(Graph::new(1).density(), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn tridivisibility_of_complete_graphs() {
        for n in 1..30 {
            let expected = n % 6 == 1 || n % 6 == 3;
            assert_eq!(Graph::complete(n).is_tridivisible(), expected, "K_{n}");
        }
    }

    #[test]
    fn triangles_of_k5() {
        let t = Graph::complete(5).triangles();
        assert_eq!(t.len(), 10);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn parse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Graph::random(40, 0.3, &mut rng);
        let text = format!("# comment\n\n{}", g.to_text());
        assert_eq!(Graph::parse(&text).unwrap(), g);
    }

    #[test]
    fn parse_errors() {
        assert!(Graph::parse("3 1\n0 3\n").is_err());
        assert!(Graph::parse("3 2\n0 1\n").is_err());
        assert!(Graph::parse("3 2\n0 1\n1 0\n").is_err());
        assert!(Graph::parse("").is_err());
        assert!(Graph::parse("3 1\n1 1\n").is_err());
    }

    #[test]
    fn codegree_and_neighbours() {
        let g = Graph::complete(70);
        assert_eq!(g.codegree(0, 69), 68);
        assert_eq!(g.neighbours(5).count(), 69);
        assert_eq!(nth_set_bit(g.row(0), 0), Some(1));
        assert_eq!(nth_set_bit(g.row(0), 68), Some(69));
        assert_eq!(nth_set_bit(g.row(0), 69), None);
    }

    #[test]
    fn remove_and_difference() {
        let mut g = Graph::complete(6);
        assert!(g.remove_edge(1, 0));
        assert!(!g.remove_edge(0, 1));
        assert_eq!(g.edge_count(), 14);
        let d = Graph::complete(6).difference(&g);
        assert_eq!(d.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert!(g.is_subgraph_of(&Graph::complete(6)));
        assert!(!Graph::complete(6).is_subgraph_of(&g));
    }
}
