//! Integral relaxation of the spill and octahedral elimination into an
//! outer/inner matching pair.
//!
//! `integral_relaxation` finds an integer triangle vector `Φ` with `∂₂Φ = S`
//! in three steps (random triangles, vertex pairing, signed walks coned off
//! at random apexes). `octahedral_eliminate_hole` then rewrites `Φ` with
//! signed octahedra until every surviving triangle lies in `G*` with weight
//! ±1, giving `Mo = Ψ⁺` and `Mi = Ψ⁻`.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::chain::{boundary_1, boundary_2, IntGraph, Matching, TriangleVec};
use crate::error::{Error, Result, Stage};
use crate::graph::{edge, triple, triple_edges, BitIter, Edge, Graph, Triple};
use crate::rng::{self, Rng};

pub const HOLE_STREAM: u64 = 0x686f_6c65;

/// Closed walk `v₀ v₁ … v_{2m−1} v₀` whose `k`-th edge has weight `sign·(−1)^k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedWalk {
    pub vertices: Vec<u32>,
    pub sign: i64,
}

impl SignedWalk {
    pub fn new(vertices: Vec<u32>, sign: i64) -> Result<Self> {
        let w = SignedWalk { vertices, sign };
        w.validate()?;
        Ok(w)
    }

    fn validate(&self) -> Result<()> {
        let len = self.vertices.len();
        if self.sign != 1 && self.sign != -1 {
            return Err(Error::Precondition("walk sign must be ±1".into()));
        }
        if len < 4 || len % 2 != 0 {
            return Err(Error::Precondition(format!(
                "alternating walk needs even length ≥ 4, got {len}"
            )));
        }
        for k in 0..len {
            if self.vertices[k] == self.vertices[(k + 1) % len] {
                return Err(Error::Precondition(format!("walk has a loop at position {k}")));
            }
        }
        Ok(())
    }

    /// Half the length.
    pub fn m(&self) -> usize {
        self.vertices.len() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (Edge, i64)> + '_ {
        let len = self.vertices.len();
        (0..len).map(move |k| {
            let s = if k % 2 == 0 { self.sign } else { -self.sign };
            (edge(self.vertices[k], self.vertices[(k + 1) % len]), s)
        })
    }

    pub fn to_intgraph(&self, n: usize) -> IntGraph {
        IntGraph::from_iter_weights(n, self.edges())
    }

    fn rotated(&self, r: usize) -> SignedWalk {
        let mut v = self.vertices.clone();
        v.rotate_left(r);
        let sign = if r % 2 == 0 { self.sign } else { -self.sign };
        SignedWalk { vertices: v, sign }
    }
}

/// `sign·({ab} − {bc} + {cd} − {da})` for `v = [a, b, c, d]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourCycle {
    pub v: [u32; 4],
    pub sign: i64,
}

impl FourCycle {
    pub fn edges(&self) -> [(Edge, i64); 4] {
        let [a, b, c, d] = self.v;
        let s = self.sign;
        [(edge(a, b), s), (edge(b, c), -s), (edge(c, d), s), (edge(d, a), -s)]
    }

    /// A diagonal collision makes the edge sum vanish.
    pub fn is_null(&self) -> bool {
        self.v[0] == self.v[2] || self.v[1] == self.v[3]
    }

    pub fn to_intgraph(&self, n: usize) -> IntGraph {
        IntGraph::from_iter_weights(n, self.edges())
    }
}

/// Signed `K_{2,2,2}`: parts `{(j,0),(j,1)}`, triangle `f_x` has sign `(−1)^{Σx}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Octahedron {
    pub parts: [[u32; 2]; 3],
}

impl Octahedron {
    pub fn new(parts: [[u32; 2]; 3]) -> Result<Self> {
        let mut all: Vec<u32> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        if all.len() != 6 {
            return Err(Error::Precondition(format!(
                "octahedron vertices must be distinct: {parts:?}"
            )));
        }
        Ok(Octahedron { parts })
    }

    pub fn triangle(&self, x: [usize; 3]) -> Triple {
        triple(self.parts[0][x[0]], self.parts[1][x[1]], self.parts[2][x[2]])
    }

    pub fn signed_triangles(&self) -> [(Triple, i64); 8] {
        std::array::from_fn(|m| {
            let x = [m & 1, (m >> 1) & 1, (m >> 2) & 1];
            let s = if (x[0] + x[1] + x[2]) % 2 == 0 { 1 } else { -1 };
            (self.triangle(x), s)
        })
    }

    pub fn omega(&self, n: usize) -> TriangleVec {
        TriangleVec::from_iter_weights(n, self.signed_triangles())
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(12);
        for i in 0..3 {
            for j in i + 1..3 {
                for &u in &self.parts[i] {
                    for &v in &self.parts[j] {
                        out.push(edge(u, v));
                    }
                }
            }
        }
        out
    }
}

/// Greedy alternating-walk decomposition of a cycle-space element.
pub fn extract_signed_walks(j: &IntGraph) -> Result<Vec<SignedWalk>> {
    if let Some((v, w)) = boundary_1(j).iter().next() {
        return Err(Error::Precondition(format!(
            "∂₁J is nonzero (vertex {v} has weight {w})"
        )));
    }
    let n = j.n;
    // adj[0] holds positive weights, adj[1] negative ones.
    let mut adj: [Vec<BTreeMap<u32, i64>>; 2] = [vec![BTreeMap::new(); n], vec![BTreeMap::new(); n]];
    for ((u, v), w) in j.iter() {
        let side = usize::from(w < 0);
        adj[side][u as usize].insert(v, w.abs());
        adj[side][v as usize].insert(u, w.abs());
    }
    let take = |adj: &mut [Vec<BTreeMap<u32, i64>>; 2], side: usize, u: u32, v: u32| {
        for (a, b) in [(u, v), (v, u)] {
            let m = &mut adj[side][a as usize];
            let c = m.get_mut(&b).expect("edge present");
            *c -= 1;
            if *c == 0 {
                m.remove(&b);
            }
        }
    };

    let mut walks = Vec::new();
    for start in 0..n as u32 {
        while let Some((&first, _)) = adj[0][start as usize].iter().next() {
            take(&mut adj, 0, start, first);
            let mut vertices = vec![start];
            let mut cur = first;
            let mut side = 0usize;
            while !(cur == start && side == 1) {
                let need = 1 - side;
                let next = match adj[need][cur as usize].keys().next() {
                    Some(&x) => x,
                    None => {
                        return Err(Error::InternalConsistency(format!(
                            "alternating walk stuck at vertex {cur}"
                        )))
                    }
                };
                take(&mut adj, need, cur, next);
                vertices.push(cur);
                cur = next;
                side = need;
            }
            walks.push(SignedWalk { vertices, sign: 1 });
        }
    }
    Ok(walks)
}

/// Splits a closed alternating walk of length `2m` into `m − 1` signed
/// four-cycles with the same edge sum.
pub fn walk_to_four_cycles(w: &SignedWalk) -> Result<Vec<FourCycle>> {
    split_walk(w).map(|(c, _)| c)
}

/// Returns the cycles and whether the chord fallback was needed.
pub(crate) fn split_walk(w: &SignedWalk) -> Result<(Vec<FourCycle>, bool)> {
    w.validate()?;
    let len = w.vertices.len();
    for r in 0..len {
        if let Some(c) = chain_split(&w.rotated(r)) {
            return Ok((c, false));
        }
    }
    chord_split(w).map(|c| (c, true))
}

/// The ladder identity on `x_i = w_i`, `y_i = w_{2m+1−i}`, with the
/// two-summand replacement around each rung where `x_i = y_i`.
fn chain_split(w: &SignedWalk) -> Option<Vec<FourCycle>> {
    let m = w.m();
    let len = 2 * m;
    let x = |i: usize| w.vertices[i];
    let y = |i: usize| w.vertices[(len + 1 - i) % len];
    let degenerate = |i: usize| x(i) == y(i);
    for i in 1..=m {
        if degenerate(i) && !(1 < i && i < m && !degenerate(i - 1) && !degenerate(i + 1) && x(i + 1) != y(i - 1)) {
            return None;
        }
    }
    let sgn = |i: usize| if i % 2 == 0 { w.sign } else { -w.sign };
    let mut out = Vec::with_capacity(m - 1);
    let mut i = 1;
    while i < m {
        if degenerate(i + 1) {
            let j = i + 1;
            out.push(FourCycle {
                v: [x(j - 1), x(j), x(j + 1), y(j - 1)],
                sign: sgn(j - 1),
            });
            out.push(FourCycle {
                v: [x(j + 1), y(j - 1), y(j), y(j + 1)],
                sign: sgn(j),
            });
            i += 2;
        } else {
            out.push(FourCycle {
                v: [x(i), x(i + 1), y(i + 1), y(i)],
                sign: sgn(i),
            });
            i += 1;
        }
    }
    Some(out)
}

/// Repeatedly cuts off `w₀w₁w₂w₃` and replaces it by the chord `w₀w₃`.
fn chord_split(w: &SignedWalk) -> Result<Vec<FourCycle>> {
    let mut cur = w.clone();
    let mut out = Vec::with_capacity(w.m() - 1);
    while cur.vertices.len() > 4 {
        let len = cur.vertices.len();
        let r = (0..len)
            .find(|&k| cur.vertices[k] != cur.vertices[(k + 3) % len])
            .ok_or_else(|| Error::Precondition("walk cancels itself; no four-cycle split exists".into()))?;
        cur = cur.rotated(r);
        let v = &cur.vertices;
        out.push(FourCycle {
            v: [v[0], v[1], v[2], v[3]],
            sign: cur.sign,
        });
        let mut rest = vec![v[0]];
        rest.extend_from_slice(&v[3..]);
        cur.vertices = rest;
    }
    let v = &cur.vertices;
    out.push(FourCycle {
        v: [v[0], v[1], v[2], v[3]],
        sign: cur.sign,
    });
    Ok(out)
}

/// Output of the integral relaxation, with its boundedness diagnostics.
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub phi: TriangleVec,
    pub step0_triangles: usize,
    pub step1_pairs: usize,
    pub walks: usize,
    pub four_cycles: usize,
    pub chord_fallbacks: usize,
    /// Boundedness of `∂₂Φ⁺`.
    pub plus_boundedness: f64,
    /// Boundedness of the cone edges `{xa, xb, xc, xd}`.
    pub cone_boundedness: f64,
}

fn random_triangle(n: usize, rng: &mut Rng) -> Triple {
    let s = index::sample(rng, n, 3);
    triple(s.index(0) as u32, s.index(1) as u32, s.index(2) as u32)
}

fn random_vertex_avoiding(n: usize, avoid: &[u32], rng: &mut Rng) -> u32 {
    loop {
        let v = rng.gen_range(0..n as u32);
        if !avoid.contains(&v) {
            return v;
        }
    }
}

/// Finds `Φ` with `∂₂Φ = S` exactly.
pub fn integral_relaxation(s: &IntGraph, rng: &mut Rng) -> Result<Relaxation> {
    let n = s.n;
    let empty = Relaxation {
        phi: TriangleVec::new(n),
        step0_triangles: 0,
        step1_pairs: 0,
        walks: 0,
        four_cycles: 0,
        chord_fallbacks: 0,
        plus_boundedness: 0.0,
        cone_boundedness: 0.0,
    };
    if !s.is_tridivisible() {
        return Err(Error::NotTridivisible(
            "integral relaxation needs total weight ≡ 0 mod 3 and even vertex weights".into(),
        ));
    }
    if s.is_zero() {
        return Ok(empty);
    }
    if n < 5 {
        return Err(Error::DegenerateInput(format!(
            "integral relaxation needs n ≥ 5, got {n}"
        )));
    }

    // Step 0: |S|/3 uniform triangles fix the total weight.
    let mut phi = TriangleVec::new(n);
    let k = s.sum() / 3;
    for _ in 0..k.unsigned_abs() {
        phi.add(random_triangle(n, rng), k.signum());
    }
    let j0 = s - &boundary_2(&phi);

    // Step 1: pair up surplus and deficit vertices through random edges ab.
    let jstar = boundary_1(&j0);
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (x, w) in jstar.iter() {
        debug_assert!(w % 2 == 0);
        let list = if w > 0 { &mut plus } else { &mut minus };
        list.extend(std::iter::repeat(x).take((w.abs() / 2) as usize));
    }
    if plus.len() != minus.len() {
        return Err(Error::InternalConsistency("∂₀J⁰ is nonzero after step 0".into()));
    }
    let mut phi1 = TriangleVec::new(n);
    for (&xp, &xm) in plus.iter().zip(&minus) {
        let a = random_vertex_avoiding(n, &[xp, xm], rng);
        let b = random_vertex_avoiding(n, &[xp, xm, a], rng);
        phi1.add(triple(xp, a, b), 1);
        phi1.add(triple(xm, a, b), -1);
    }
    let j1 = &j0 - &boundary_2(&phi1);
    phi.add_scaled(&phi1, 1);

    // Step 2: signed walks, split into four-cycles, coned from random apexes.
    let walks = extract_signed_walks(&j1)?;
    let mut cone = IntGraph::new(n);
    let mut four_cycles = 0;
    let mut chord_fallbacks = 0;
    for w in &walks {
        let (cycles, fallback) = split_walk(w)?;
        chord_fallbacks += usize::from(fallback);
        for c in cycles {
            four_cycles += 1;
            if c.is_null() {
                continue;
            }
            let [a, b, cc, d] = c.v;
            let x = random_vertex_avoiding(n, &c.v, rng);
            phi.add(triple(x, a, b), c.sign);
            phi.add(triple(x, b, cc), -c.sign);
            phi.add(triple(x, cc, d), c.sign);
            phi.add(triple(x, d, a), -c.sign);
            for v in c.v {
                cone.add(edge(x, v), 1);
            }
        }
    }

    if boundary_2(&phi) != *s {
        return Err(Error::InternalConsistency("∂₂Φ ≠ S after relaxation".into()));
    }
    let plus_boundedness = boundary_2(&phi.positive()).boundedness();
    Ok(Relaxation {
        phi,
        step0_triangles: k.unsigned_abs() as usize,
        step1_pairs: plus.len(),
        walks: walks.len(),
        four_cycles,
        chord_fallbacks,
        plus_boundedness,
        cone_boundedness: cone.boundedness(),
    })
}

#[derive(Debug, Clone)]
pub struct HoleOptions {
    /// Rejection samples per elimination step.
    pub budget: usize,
    /// Fresh attempts (relaxation and elimination) before giving up.
    pub max_retries: usize,
    /// Edges that new octahedron edges must also avoid.
    pub reserved: Option<Graph>,
    /// Retry when `∪Mo` is not `cap`-bounded.
    pub cap: Option<f64>,
}

impl Default for HoleOptions {
    fn default() -> Self {
        HoleOptions {
            budget: 10_000,
            max_retries: 8,
            reserved: None,
            cap: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HoleReport {
    pub s_edges: usize,
    pub s_boundedness: f64,
    pub relax_plus_boundedness: f64,
    pub cone_boundedness: f64,
    pub walks: usize,
    pub four_cycles: usize,
    pub chord_fallbacks: usize,
    pub phase1_steps: usize,
    pub phase2_steps: usize,
    pub samples: usize,
    pub new_edges_1_boundedness: f64,
    pub new_edges_2_boundedness: f64,
    pub outer_boundedness: f64,
    pub attempts: usize,
}

#[derive(Debug, Clone)]
pub struct HoleOutcome {
    pub mo: Matching,
    pub mi: Matching,
    pub report: HoleReport,
}

fn common_neighbours(g: &Graph, vs: &[u32], avoid: &[u32]) -> Vec<u32> {
    let mut acc = g.row(vs[0]).to_vec();
    for &v in &vs[1..] {
        for (a, b) in acc.iter_mut().zip(g.row(v)) {
            *a &= b;
        }
    }
    BitIter::new(&acc).filter(|x| !avoid.contains(x)).collect()
}

fn pick(list: &[u32], rng: &mut Rng) -> u32 {
    list[rng.gen_range(0..list.len())]
}

fn check_omega(o: &Octahedron, n: usize) -> Result<()> {
    if boundary_2(&o.omega(n)).is_zero() {
        Ok(())
    } else {
        Err(Error::InternalConsistency(format!("∂₂Ω ≠ 0 for {o:?}")))
    }
}

struct Eliminator<'a> {
    n: usize,
    opts: &'a HoleOptions,
    avail: Graph,
    psi: TriangleVec,
    samples: usize,
}

impl Eliminator<'_> {
    fn use_edges(&mut self, o: &Octahedron, keep: &[Triple], fresh: &mut Graph) {
        for (u, v) in o.edges() {
            if keep.iter().any(|t| triple_edges(t).contains(&(u, v))) {
                continue;
            }
            self.avail.remove_edge(u, v);
            fresh.insert(u, v);
        }
    }

    /// Replaces the signed element `sigma·f` by seven triangles of `−sigma·Ω_f`.
    fn phase1(&mut self, step: usize, f: Triple, sigma: i64, rng: &mut Rng) -> Result<Octahedron> {
        let [u1, u2, u3] = f;
        let c1 = common_neighbours(&self.avail, &[u2, u3], &[u1]);
        let c2 = common_neighbours(&self.avail, &[u1, u3], &[u2]);
        let c3 = common_neighbours(&self.avail, &[u1, u2], &[u3]);
        if c1.is_empty() || c2.is_empty() || c3.is_empty() {
            return Err(Error::abort(
                Stage::Hole,
                step,
                format!("phase I: no octahedron apex available for {f:?}"),
            ));
        }
        for _ in 0..self.opts.budget {
            self.samples += 1;
            let (v1, v2, v3) = (pick(&c1, rng), pick(&c2, rng), pick(&c3, rng));
            if v1 == v2 || v1 == v3 || v2 == v3 {
                continue;
            }
            if !(self.avail.has_edge(v1, v2) && self.avail.has_edge(v1, v3) && self.avail.has_edge(v2, v3)) {
                continue;
            }
            let o = Octahedron::new([[u1, v1], [u2, v2], [u3, v3]])?;
            check_omega(&o, self.n)?;
            self.psi.add_scaled(&o.omega(self.n), -sigma);
            return Ok(o);
        }
        Err(Error::abort(
            Stage::Hole,
            step,
            format!("phase I: sample budget exhausted for {f:?}"),
        ))
    }

    /// Cancels `sigma·f` against `−sigma·f'` where `f ∩ f' = {a, b}`.
    fn phase2(&mut self, step: usize, (a, b): Edge, c: u32, c2: u32, sigma: i64, rng: &mut Rng) -> Result<Octahedron> {
        let ps = common_neighbours(&self.avail, &[b, c, c2], &[a]);
        let qs = common_neighbours(&self.avail, &[a, c, c2], &[b]);
        if ps.is_empty() || qs.is_empty() {
            return Err(Error::abort(
                Stage::Hole,
                step,
                format!("phase II: no octahedron available for edge {:?}", (a, b)),
            ));
        }
        for _ in 0..self.opts.budget {
            self.samples += 1;
            let (p, q) = (pick(&ps, rng), pick(&qs, rng));
            if p == q || !self.avail.has_edge(p, q) {
                continue;
            }
            let o = Octahedron::new([[a, p], [b, q], [c, c2]])?;
            check_omega(&o, self.n)?;
            self.psi.add_scaled(&o.omega(self.n), -sigma);
            return Ok(o);
        }
        Err(Error::abort(
            Stage::Hole,
            step,
            format!("phase II: sample budget exhausted for edge {:?}", (a, b)),
        ))
    }
}

/// Rewrites `Φ` into `Ψ = Mo − Mi` with `∂₂Ψ = ∂₂Φ`, all of `Ψ` inside `G*`.
pub fn octahedral_eliminate_hole(
    phi: &TriangleVec,
    gstar: &Graph,
    opts: &HoleOptions,
    rng: &mut Rng,
) -> Result<HoleOutcome> {
    let n = phi.n;
    if gstar.n() != n {
        return Err(Error::Precondition("Φ and G* have different vertex counts".into()));
    }
    let s = boundary_2(phi);
    if s.iter().any(|(_, w)| w != 1) {
        return Err(Error::Precondition("∂₂Φ must be a simple graph".into()));
    }
    let s_graph = s.support();
    if !s_graph.is_subgraph_of(gstar) {
        return Err(Error::Containment("∂₂Φ is not contained in G*".into()));
    }
    let mut report = HoleReport {
        s_edges: s_graph.edge_count(),
        s_boundedness: s.boundedness(),
        ..HoleReport::default()
    };
    if phi.is_zero() {
        return Ok(HoleOutcome {
            mo: Matching::new(),
            mi: Matching::new(),
            report,
        });
    }

    let old_plus = boundary_2(&phi.positive());
    let old = old_plus.support();
    let mut avail = gstar.difference(&old);
    if let Some(r) = &opts.reserved {
        avail = avail.difference(r);
    }
    let mut el = Eliminator {
        n,
        opts,
        avail,
        psi: phi.clone(),
        samples: 0,
    };

    // Phase I. For each old edge remember the surviving triangles through it.
    let mut at_edge: BTreeMap<Edge, [Vec<(Triple, u32)>; 2]> = BTreeMap::new();
    let mut fresh1 = Graph::new(n);
    let mut step = 0;
    for (f, w) in phi.iter() {
        let sigma = w.signum();
        for _ in 0..w.abs() {
            let o = el.phase1(step, f, sigma, rng)?;
            el.use_edges(&o, &[f], &mut fresh1);
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                let e = edge(f[i], f[j]);
                let third = o.parts[k][1];
                let side = usize::from(sigma < 0);
                at_edge.entry(e).or_default()[side].push((triple(f[i], f[j], third), third));
            }
            step += 1;
        }
    }
    report.phase1_steps = step;
    if boundary_2(&el.psi) != s {
        return Err(Error::InternalConsistency("∂₂ changed during phase I".into()));
    }
    for (t, _) in el.psi.iter() {
        if triple_edges(&t).iter().filter(|e| old.contains_edge(**e)).count() > 1 {
            return Err(Error::InternalConsistency(format!(
                "after phase I, {t:?} meets ∂₂Φ⁺ in more than one edge"
            )));
        }
    }

    // Phase II: pair opposite-sign triangles on each edge of ∂₂Φ⁻, scanned
    // in canonical edge order.
    let mut fresh2 = Graph::new(n);
    let mut step2 = 0;
    for (e, [pos, neg]) in &at_edge {
        if neg.len() > pos.len() {
            return Err(Error::InternalConsistency(format!(
                "edge {e:?} has more negative than positive triangles"
            )));
        }
        for (&(_, c_neg), &(_, c_pos)) in neg.iter().zip(pos) {
            let o = el.phase2(step + step2, *e, c_pos, c_neg, 1, rng)?;
            el.use_edges(&o, &[triple(e.0, e.1, c_pos), triple(e.0, e.1, c_neg)], &mut fresh2);
            step2 += 1;
        }
    }
    report.phase2_steps = step2;
    report.samples = el.samples;

    let psi = el.psi;
    if boundary_2(&psi) != s {
        return Err(Error::InternalConsistency("∂₂Ψ ≠ S after phase II".into()));
    }
    if psi.max_abs() > 1 {
        return Err(Error::InternalConsistency("Ψ has a weight outside {0, ±1}".into()));
    }
    if let Some((t, _)) = psi.iter().find(|(t, _)| !gstar.has_triangle(t)) {
        return Err(Error::InternalConsistency(format!("Ψ uses {t:?} outside K₃(G*)")));
    }
    let mo = Matching::from_indicator(&psi.positive())?;
    let mi = Matching::from_indicator(&psi.negative())?;
    check_hole(&s_graph, &mo, &mi)?;

    report.new_edges_1_boundedness = IntGraph::indicator(&fresh1).boundedness();
    report.new_edges_2_boundedness = IntGraph::indicator(&fresh2).boundedness();
    report.outer_boundedness = IntGraph::indicator(&mo.edge_union(n)).boundedness();
    Ok(HoleOutcome { mo, mi, report })
}

/// Checks that `(S, ∪Mi)` partitions `∪Mo`.
pub fn check_hole(s: &Graph, mo: &Matching, mi: &Matching) -> Result<()> {
    let n = s.n();
    let outer = mo.edge_union(n);
    let inner = mi.edge_union(n);
    let disjoint = s.edges().all(|(u, v)| !inner.has_edge(u, v));
    let covers = outer.edge_count() == s.edge_count() + inner.edge_count()
        && s.is_subgraph_of(&outer)
        && inner.is_subgraph_of(&outer);
    if disjoint && covers {
        Ok(())
    } else {
        Err(Error::InternalConsistency("(S, ∪Mi) does not partition ∪Mo".into()))
    }
}

/// Relaxation followed by elimination, retried on fresh streams.
pub fn hole(s: &Graph, gstar: &Graph, opts: &HoleOptions, seed: u64) -> Result<HoleOutcome> {
    let sv = IntGraph::indicator(s);
    let mut last = None;
    for attempt in 0..opts.max_retries.max(1) {
        let mut rng = rng::stream(seed, HOLE_STREAM, attempt as u64);
        let relax = integral_relaxation(&sv, &mut rng)?;
        match octahedral_eliminate_hole(&relax.phi, gstar, opts, &mut rng) {
            Ok(mut out) => {
                out.report.relax_plus_boundedness = relax.plus_boundedness;
                out.report.cone_boundedness = relax.cone_boundedness;
                out.report.walks = relax.walks;
                out.report.four_cycles = relax.four_cycles;
                out.report.chord_fallbacks = relax.chord_fallbacks;
                out.report.attempts = attempt + 1;
                if let Some(cap) = opts.cap {
                    if out.report.outer_boundedness >= cap {
                        last = Some(Error::abort(
                            Stage::Hole,
                            out.report.phase1_steps + out.report.phase2_steps,
                            format!("∪Mo is {:.4}-bounded, cap {cap}", out.report.outer_boundedness),
                        ));
                        continue;
                    }
                }
                return Ok(out);
            }
            Err(e) if e.is_stage_abort() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Debug dump of a triangle vector as `"a,b,c" → weight`.
pub fn triangle_vec_json(v: &TriangleVec) -> serde_json::Value {
    let map: serde_json::Map<String, serde_json::Value> = v
        .iter()
        .map(|(t, w)| (format!("{},{},{}", t[0], t[1], t[2]), w.into()))
        .collect();
    serde_json::Value::Object(map)
}
