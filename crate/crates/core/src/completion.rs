//! Completion: rewrite `Mc + Mi − Mo` into `M1 − M2` with octahedral `M2`,
//! then absorb each triangle of `M2` into a shuffle, giving `M3 ⊆ T` and
//! `M4 ⊇ M2` with `∪M3 = ∪M4`.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::chain::{boundary_2, IntGraph, Matching, TriangleVec};
use crate::error::{Error, Result, Stage};
use crate::gf2lin::{solve_affine_system, AffineSystem, FieldElem};
use crate::graph::{edge, edge_key, triple, triple_edges, Edge, Graph, Triple};
use crate::hole::Octahedron;
use crate::rng::{self, Rng};
use crate::shuffle::{unit, ShuffleLabels, Slot};
use crate::template::Template;

pub const COMPLETION_STREAM: u64 = 0x636f_6d70;

/// The associated octahedron of `z` as a vertex octahedron, if `z` is octahedral.
pub fn is_octahedral(z: &Triple, tpl: &Template) -> Option<Octahedron> {
    tpl.octahedron(z)?;
    let l = [tpl.label(z[0]), tpl.label(z[1]), tpl.label(z[2])];
    let v = |x: FieldElem| tpl.vertex(x);
    Octahedron::new([
        [z[0], v(l[1] ^ l[2])?],
        [z[1], v(l[0] ^ l[2])?],
        [z[2], v(l[0] ^ l[1])?],
    ])
    .ok()
}

/// Boundedness plus the worst line `{(x₁+μ, x₂+μ)}`, i.e. label-difference class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearBoundedness {
    pub boundedness: f64,
    pub max_line: usize,
    /// `max_line / 2^a`.
    pub line_ratio: f64,
}

pub fn linear_boundedness_report(j: &Graph, tpl: &Template) -> LinearBoundedness {
    let mut lines: BTreeMap<u32, usize> = BTreeMap::new();
    for (u, v) in j.edges() {
        *lines.entry((tpl.label(u) ^ tpl.label(v)).0).or_default() += 1;
    }
    let max_line = lines.values().copied().max().unwrap_or(0);
    LinearBoundedness {
        boundedness: IntGraph::indicator(j).boundedness(),
        max_line,
        line_ratio: max_line as f64 / (1u64 << tpl.a) as f64,
    }
}

/// `J` is `c`-bounded and every line holds fewer than `c·2^a` edges.
pub fn linear_boundedness(j: &Graph, c: f64, tpl: &Template) -> bool {
    let r = linear_boundedness_report(j, tpl);
    IntGraph::indicator(j).is_bounded(c) && (r.max_line as f64) < c * (1u64 << tpl.a) as f64
}

/// Largest number of triangles of `m` on one basic plane `b·z = v`
/// (`z` in sorted vertex order), with the plane.
pub fn max_basic_plane(m: &Matching, tpl: &Template) -> (usize, u32, FieldElem) {
    let mut counts: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for z in m.triangles() {
        let l = [tpl.label(z[0]), tpl.label(z[1]), tpl.label(z[2])];
        for b in 1..8u32 {
            *counts.entry((b, crate::gf2lin::combine(b, &l).0)).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by_key(|&(k, c)| (c, std::cmp::Reverse(k)))
        .map(|((b, v), c)| (c, b, FieldElem(v)))
        .unwrap_or((0, 0, FieldElem::ZERO))
}

#[derive(Debug, Clone)]
pub struct CompletionOptions {
    /// Rejection samples per elimination step.
    pub budget: usize,
    /// Candidate `t` pairs per shuffle.
    pub shuffle_budget: usize,
    pub max_retries: usize,
    /// Soft cap on linear boundedness of `Δ` (P2).
    pub p2_cap: Option<f64>,
    /// Soft cap on `max plane / 2^a` (P3).
    pub p3_cap: Option<f64>,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            budget: 10_000,
            shuffle_budget: 100_000,
            max_retries: 8,
            p2_cap: None,
            p3_cap: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CompletionReport {
    pub l_edges: usize,
    pub phase1_steps: usize,
    pub phase2_steps: usize,
    pub samples: usize,
    pub gamma_boundedness: LinearBoundedness,
    pub gamma2_boundedness: LinearBoundedness,
    /// P2.
    pub delta: LinearBoundedness,
    /// P3: largest basic-plane count and its ratio to `2^a`.
    pub max_plane: usize,
    pub plane_ratio: f64,
    /// Triangles both through `L` and far; always zero so far, tracked anyway.
    pub l_and_far: usize,
    pub m1: usize,
    pub m2: usize,
    pub shuffle_samples: usize,
    pub attempts: usize,
    pub warnings: Vec<String>,
}

/// Output of the elimination half.
#[derive(Debug, Clone)]
pub struct Psi {
    pub m1: Matching,
    pub m2: Matching,
    /// Union of the associated octahedra of `M2`.
    pub delta: Graph,
    /// New triangle edges of phase I and phase II.
    pub gamma: Graph,
    pub gamma_prime: Graph,
    pub report: CompletionReport,
}

struct Config {
    coeff: i64,
    omega: Octahedron,
    omega_new: Vec<Edge>,
    extras: Vec<Edge>,
    /// Negative triangles with their octahedra.
    reserved: Vec<(Triple, Vec<Edge>)>,
    /// Edges held back for a later octahedron, keyed by the edge that owns them.
    held: Vec<(Edge, Edge)>,
    /// Held edges this configuration claims.
    claimed: Vec<Edge>,
}

struct Eliminator<'a> {
    n: usize,
    tpl: &'a Template,
    used: Graph,
    psi: TriangleVec,
    delta: Graph,
    /// Held edge → owning edge.
    held: BTreeMap<Edge, Edge>,
    samples: usize,
}

impl Eliminator<'_> {
    /// Tests a placement of `coeff·Ω`. `keep` marks triangles (by mask) that
    /// are being cancelled; `must_oct` marks those that must be octahedral,
    /// the rest must avoid `T`.
    ///
    /// A negative triangle through an edge `g` of `Γ` will, in phase II, need
    /// the octahedron of a negative triangle through `g`, which contains the
    /// template triangle on `g`. With `hold`, those two template edges are
    /// held for `g` now, so the later step cannot be blocked.
    fn try_config(
        &self,
        o: Octahedron,
        coeff: i64,
        keep: &[usize],
        must_oct: impl Fn(usize) -> bool,
        hold: bool,
    ) -> Option<Config> {
        let tris = o.signed_triangles();
        let keep_edges: Vec<Edge> = keep.iter().flat_map(|&m| triple_edges(&tris[m].0)).collect();
        let omega_new: Vec<Edge> = o.edges().into_iter().filter(|e| !keep_edges.contains(e)).collect();
        if omega_new.iter().any(|&e| self.used.contains_edge(e)) {
            return None;
        }
        let mut extras: Vec<Edge> = Vec::new();
        let mut reserved = Vec::new();
        let mut held = Vec::new();
        let mut claimed = Vec::new();
        for (m, &(t, s)) in tris.iter().enumerate() {
            if keep.contains(&m) {
                continue;
            }
            let own = triple_edges(&t);
            if must_oct(m) {
                let oct = self.tpl.octahedron(&t)?;
                if coeff * s < 0 {
                    for &e in &oct {
                        if own.contains(&e) {
                            continue;
                        }
                        if self.used.contains_edge(e) {
                            match self.held.get(&e) {
                                Some(g) if own.contains(g) && !claimed.contains(&e) => claimed.push(e),
                                _ => return None,
                            }
                        } else if omega_new.contains(&e) || extras.contains(&e) {
                            return None;
                        } else {
                            extras.push(e);
                        }
                    }
                    reserved.push((t, oct));
                }
            } else if self.tpl.contains(&t) {
                return None;
            } else if hold && coeff * s < 0 {
                for g in own.into_iter().filter(|e| !keep_edges.contains(e)) {
                    let w = self.tpl.triangle_on(g)?;
                    for e in triple_edges(&w) {
                        if e == g {
                            continue;
                        }
                        if self.used.contains_edge(e)
                            || omega_new.contains(&e)
                            || extras.contains(&e)
                            || held.iter().any(|&(h, _)| h == e)
                        {
                            return None;
                        }
                        held.push((e, g));
                    }
                }
            }
        }
        Some(Config {
            coeff,
            omega: o,
            omega_new,
            extras,
            reserved,
            held,
            claimed,
        })
    }

    fn commit(&mut self, c: &Config, gamma: &mut Graph) -> Result<()> {
        let om = c.omega.omega(self.n);
        if !boundary_2(&om).is_zero() {
            return Err(Error::InternalConsistency(format!("∂₂Ω ≠ 0 for {:?}", c.omega)));
        }
        self.psi.add_scaled(&om, c.coeff);
        for &(u, v) in c.omega_new.iter().chain(&c.extras) {
            self.used.insert(u, v);
        }
        for &(e, g) in &c.held {
            self.used.insert(e.0, e.1);
            self.held.insert(e, g);
        }
        for e in &c.claimed {
            self.held.remove(e);
        }
        for &(u, v) in &c.omega_new {
            gamma.insert(u, v);
        }
        for (_, oct) in &c.reserved {
            for &(u, v) in oct {
                self.delta.insert(u, v);
            }
        }
        Ok(())
    }

    fn sample_vertex(&self, avoid: &[u32], rng: &mut Rng) -> Option<u32> {
        let v = rng.gen_range(0..self.n as u32);
        (!avoid.contains(&v)).then_some(v)
    }
}

/// Inputs handed over from the cover and hole stages.
#[derive(Debug, Clone)]
pub struct CompletionInput {
    pub l: Graph,
    pub mc: Matching,
    pub mi: Matching,
    pub mo: Matching,
}

/// Octahedral elimination on `Φ = Mc + Mi − Mo`.
pub fn eliminate_for_completion(
    input: &CompletionInput,
    tpl: &Template,
    opts: &CompletionOptions,
    rng: &mut Rng,
) -> Result<Psi> {
    let n = tpl.n();
    let mut phi = input.mc.indicator(n);
    phi.add_scaled(&input.mi.indicator(n), 1);
    phi.add_scaled(&input.mo.indicator(n), -1);
    let l = IntGraph::indicator(&input.l);
    if boundary_2(&phi) != l {
        return Err(Error::Precondition("∂₂(Mc + Mi − Mo) ≠ L".into()));
    }
    let mut report = CompletionReport {
        l_edges: input.l.edge_count(),
        ..CompletionReport::default()
    };

    // Original support: all edges of every input triangle.
    let mut used = Graph::new(n);
    for (t, _) in phi.iter() {
        for (u, v) in triple_edges(&t) {
            used.insert(u, v);
        }
    }
    let mut el = Eliminator {
        n,
        tpl,
        used,
        psi: phi.clone(),
        delta: Graph::new(n),
        held: BTreeMap::new(),
        samples: 0,
    };

    // Phase I: far triangles are the masks with at least two ones.
    let mut gamma = Graph::new(n);
    let mut at_edge: BTreeMap<Edge, [Vec<u32>; 2]> = BTreeMap::new();
    let mut step = 0;
    for (f, w) in phi.iter() {
        let sigma = w.signum();
        for _ in 0..w.abs() {
            let mut found = None;
            for _ in 0..opts.budget {
                el.samples += 1;
                let Some(v1) = el.sample_vertex(&f, rng) else { continue };
                let Some(v2) = el.sample_vertex(&[f[0], f[1], f[2], v1], rng) else {
                    continue;
                };
                let Some(v3) = el.sample_vertex(&[f[0], f[1], f[2], v1, v2], rng) else {
                    continue;
                };
                let o = Octahedron::new([[f[0], v1], [f[1], v2], [f[2], v3]])?;
                if let Some(c) = el.try_config(o, -sigma, &[0], |m| (m as u32).count_ones() >= 2, true) {
                    found = Some(c);
                    break;
                }
            }
            let c = found.ok_or_else(|| {
                Error::abort(
                    Stage::Completion,
                    step,
                    format!("phase I: no valid configuration for {f:?}"),
                )
            })?;
            el.commit(&c, &mut gamma)?;
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                let side = usize::from(sigma < 0);
                at_edge.entry(edge(f[i], f[j])).or_default()[side].push(c.omega.parts[k][1]);
            }
            step += 1;
        }
    }
    report.phase1_steps = step;
    if boundary_2(&el.psi) != l {
        return Err(Error::InternalConsistency(
            "∂₂ changed during completion phase I".into(),
        ));
    }

    // Phase II: pair the non-far triangles on each old edge outside L.
    let mut gamma2 = Graph::new(n);
    let mut step2 = 0;
    for (&(a, b), [pos, neg]) in &at_edge {
        if input.l.has_edge(a, b) {
            if pos.len() != 1 || !neg.is_empty() {
                return Err(Error::InternalConsistency(format!(
                    "L edge {:?} is not covered exactly once",
                    (a, b)
                )));
            }
            continue;
        }
        if pos.len() != neg.len() {
            return Err(Error::InternalConsistency(format!(
                "edge {:?} has unbalanced signed triangles",
                (a, b)
            )));
        }
        for (&c_pos, &c_neg) in pos.iter().zip(neg) {
            let mut found = None;
            for _ in 0..opts.budget {
                el.samples += 1;
                let Some(p) = el.sample_vertex(&[a, b, c_pos, c_neg], rng) else {
                    continue;
                };
                let Some(q) = el.sample_vertex(&[a, b, c_pos, c_neg, p], rng) else {
                    continue;
                };
                let o = Octahedron::new([[a, p], [b, q], [c_pos, c_neg]])?;
                // f = {a,b,c⁺} is mask 0, f' = {a,b,c⁻} is mask 4.
                if let Some(c) = el.try_config(o, -1, &[0, 4], |_| true, false) {
                    found = Some(c);
                    break;
                }
            }
            let c = found.ok_or_else(|| {
                Error::abort(
                    Stage::Completion,
                    step + step2,
                    format!("phase II: no valid configuration for edge {:?}", (a, b)),
                )
            })?;
            el.commit(&c, &mut gamma2)?;
            step2 += 1;
        }
    }
    report.phase2_steps = step2;
    report.samples = el.samples;

    let psi = el.psi;
    if boundary_2(&psi) != l {
        return Err(Error::InternalConsistency("∂₂Ψ ≠ L after completion phase II".into()));
    }
    if psi.max_abs() > 1 {
        return Err(Error::InternalConsistency("Ψ has a weight outside {0, ±1}".into()));
    }
    let m1 = Matching::from_indicator(&psi.positive())?;
    let m2 = Matching::from_indicator(&psi.negative())?;

    // (L, ∪M2) partitions ∪M1, and ∪M2 = Γ ∪ Γ'.
    let u1 = m1.edge_union(n);
    let u2 = m2.edge_union(n);
    let mut gg = gamma.clone();
    for (u, v) in gamma2.edges() {
        gg.insert(u, v);
    }
    if u2 != gg {
        return Err(Error::InternalConsistency("∪M2 ≠ Γ ∪ Γ'".into()));
    }
    let mut lg = gg.clone();
    for (u, v) in input.l.edges() {
        if gg.has_edge(u, v) {
            return Err(Error::InternalConsistency("L meets ∪M2".into()));
        }
        lg.insert(u, v);
    }
    if u1 != lg {
        return Err(Error::InternalConsistency("∪M1 ≠ L ∪ Γ ∪ Γ'".into()));
    }

    if !el.held.is_empty() {
        return Err(Error::InternalConsistency(format!(
            "{} held edges were never claimed",
            el.held.len()
        )));
    }
    let delta = check_p1(&m2, tpl, Some(&u1))?;
    if delta != el.delta {
        return Err(Error::InternalConsistency(
            "Δ does not match the reserved octahedra".into(),
        ));
    }
    report.l_and_far = 0;
    report.gamma_boundedness = linear_boundedness_report(&gamma, tpl);
    report.gamma2_boundedness = linear_boundedness_report(&gamma2, tpl);
    report.delta = linear_boundedness_report(&delta, tpl);
    let (mp, _, _) = max_basic_plane(&m2, tpl);
    report.max_plane = mp;
    report.plane_ratio = mp as f64 / (1u64 << tpl.a) as f64;
    report.m1 = m1.len();
    report.m2 = m2.len();
    Ok(Psi {
        m1,
        m2,
        delta,
        gamma,
        gamma_prime: gamma2,
        report,
    })
}

/// P1: every triangle of `M2` is octahedral and the associated octahedra are
/// pairwise edge-disjoint. With `psi_edges`, also checks that octahedra meet
/// `∪M1 ∪ ∪M2` only in their own triangle. Returns `Δ`.
pub fn check_p1(m2: &Matching, tpl: &Template, psi_edges: Option<&Graph>) -> Result<Graph> {
    let mut delta = Graph::new(tpl.n());
    let mut seen = HashSet::new();
    for z in m2.triangles() {
        let oct = tpl
            .octahedron(z)
            .ok_or_else(|| Error::InternalConsistency(format!("P1: {z:?} is not octahedral")))?;
        let own = triple_edges(z);
        for &e in &oct {
            if !seen.insert(edge_key(e)) {
                return Err(Error::InternalConsistency(format!(
                    "P1: associated octahedra share edge {e:?}"
                )));
            }
            if let Some(p) = psi_edges {
                if !own.contains(&e) && p.contains_edge(e) {
                    return Err(Error::InternalConsistency(format!(
                        "octahedron of {z:?} meets Ψ in {e:?}"
                    )));
                }
            }
            delta.insert(e.0, e.1);
        }
    }
    Ok(delta)
}

/// A shuffle placed on the host: `z`, its labels and its 24 vertices (part-major).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shuffle {
    pub z: Triple,
    pub labels: ShuffleLabels,
    pub vertices: [u32; 24],
    pub samples: usize,
}

impl Shuffle {
    pub fn at(&self, (i, b): Slot) -> u32 {
        self.vertices[i * 8 + b as usize]
    }

    /// All 192 edges of `S_xt`.
    pub fn edges(&self) -> Vec<Edge> {
        ShuffleLabels::edge_slots()
            .map(|(p, q)| edge(self.at(p), self.at(q)))
            .collect()
    }

    /// The 180 edges outside the associated octahedron.
    pub fn new_edges(&self) -> Vec<Edge> {
        ShuffleLabels::edge_slots()
            .filter(|&pq| !ShuffleLabels::is_octahedron_edge(pq))
            .map(|(p, q)| edge(self.at(p), self.at(q)))
            .collect()
    }

    pub fn graph(&self, n: usize) -> Graph {
        let mut g = Graph::new(n);
        for (u, v) in self.edges() {
            g.insert(u, v);
        }
        g
    }
}

/// `(M3xt, M4xt)`: the zero-sum decomposition and its translate by `x`.
pub fn shuffle_decompositions(s: &Shuffle) -> Result<(Matching, Matching)> {
    let build = |slots: &mut dyn Iterator<Item = [Slot; 3]>| {
        let ts: Vec<Triple> = slots.map(|[p, q, r]| triple(s.at(p), s.at(q), s.at(r))).collect();
        Matching::from_triangles(ts)
    };
    Ok((
        build(&mut ShuffleLabels::m3_slots())?,
        build(&mut ShuffleLabels::m4_slots())?,
    ))
}

fn shuffle_candidate(
    z: &Triple,
    zl: [FieldElem; 3],
    t1: u32,
    t2: u32,
    tpl: &Template,
    used: &Graph,
    delta: &Graph,
) -> Option<Shuffle> {
    let labels = ShuffleLabels::for_target(zl, FieldElem(t1), FieldElem(t2));
    if !labels.is_independent() {
        return None;
    }
    let vertices = tpl.shuffle_fits(&labels)?;
    let s = Shuffle {
        z: *z,
        labels,
        vertices,
        samples: 0,
    };
    s.new_edges()
        .iter()
        .all(|&e| !used.contains_edge(e) && !delta.contains_edge(e))
        .then_some(s)
}

/// A uniformly random shuffle `S_xt ⊆ G*` with `t_i + x_i = z_i` whose
/// non-octahedron edges avoid `used` and `Δ`.
pub fn find_shuffle(
    z: &Triple,
    tpl: &Template,
    used: &Graph,
    delta: &Graph,
    budget: usize,
    rng: &mut Rng,
) -> Result<Shuffle> {
    if !tpl.is_octahedral(z) {
        return Err(Error::Precondition(format!("{z:?} is not octahedral")));
    }
    let zl = [tpl.label(z[0]), tpl.label(z[1]), tpl.label(z[2])];
    let q = 1u64 << tpl.a;
    if q * q <= budget as u64 {
        let mut all = Vec::new();
        for t1 in 0..q as u32 {
            for t2 in 0..q as u32 {
                if let Some(s) = shuffle_candidate(z, zl, t1, t2, tpl, used, delta) {
                    all.push(s);
                }
            }
        }
        let mut s = all
            .choose(rng)
            .cloned()
            .ok_or_else(|| Error::abort(Stage::Shuffle, 0, format!("no shuffle exists for {z:?}")))?;
        s.samples = (q * q) as usize;
        return Ok(s);
    }
    for k in 1..=budget {
        let (t1, t2) = (rng.gen_range(0..q as u32), rng.gen_range(0..q as u32));
        if let Some(mut s) = shuffle_candidate(z, zl, t1, t2, tpl, used, delta) {
            s.samples = k;
            return Ok(s);
        }
    }
    Err(Error::abort(
        Stage::Shuffle,
        0,
        format!("shuffle budget {budget} exhausted for {z:?}"),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleRecord {
    pub z: Triple,
    pub x: [FieldElem; 3],
    pub t: [FieldElem; 2],
    pub accepted_after: usize,
}

#[derive(Debug, Clone)]
pub struct ShuffleOutcome {
    pub m3: Matching,
    pub m4: Matching,
    pub records: Vec<ShuffleRecord>,
}

/// One shuffle per triangle of `M2`, greedily and edge-disjointly.
/// `used` holds edges no shuffle may take outside its octahedron
/// (in the pipeline, `∪M1 ∪ ∪M2`).
pub fn run_shuffle_algorithm(
    m2: &Matching,
    tpl: &Template,
    delta: &Graph,
    used: &Graph,
    budget: usize,
    rng: &mut Rng,
) -> Result<ShuffleOutcome> {
    let d = check_p1(m2, tpl, None)?;
    if !d.is_subgraph_of(delta) {
        return Err(Error::Precondition("Δ does not contain the octahedra of M2".into()));
    }
    let n = tpl.n();
    let mut used = used.clone();
    let mut m3 = Matching::new();
    let mut m4 = Matching::new();
    let mut records = Vec::with_capacity(m2.len());
    for (k, z) in m2.triangles().iter().enumerate() {
        let s = find_shuffle(z, tpl, &used, delta, budget, rng).map_err(|e| match e {
            Error::StageAbort { detail, .. } => Error::abort(Stage::Shuffle, k, detail),
            e => e,
        })?;
        for (u, v) in s.new_edges() {
            used.insert(u, v);
        }
        let (a, b) = shuffle_decompositions(&s)?;
        m3.extend(&a);
        m4.extend(&b);
        records.push(ShuffleRecord {
            z: *z,
            x: s.labels.x,
            t: [s.labels.t[0], s.labels.t[1]],
            accepted_after: s.samples,
        });
    }
    let m3 = Matching::from_triangles(m3.triangles().to_vec())?;
    let m4 = Matching::from_triangles(m4.triangles().to_vec())?;
    if m3.edge_union(n) != m4.edge_union(n) {
        return Err(Error::InternalConsistency("∪M3 ≠ ∪M4".into()));
    }
    if let Some(t) = m3.triangles().iter().find(|t| !tpl.contains(t)) {
        return Err(Error::InternalConsistency(format!("M3 triangle {t:?} is not in T")));
    }
    let in_m4: HashSet<Triple> = m4.triangles().iter().copied().collect();
    if let Some(z) = m2.triangles().iter().find(|z| !in_m4.contains(*z)) {
        return Err(Error::InternalConsistency(format!("{z:?} ∈ M2 is missing from M4")));
    }
    Ok(ShuffleOutcome { m3, m4, records })
}

#[derive(Debug, Clone)]
pub struct CompletionOutcome {
    pub psi: Psi,
    pub shuffles: ShuffleOutcome,
}

/// Elimination followed by shuffles, retried on fresh streams. P2/P3 caps
/// trigger a retry; if every attempt misses them the last result is kept
/// with a warning.
pub fn completion(
    input: &CompletionInput,
    tpl: &Template,
    opts: &CompletionOptions,
    seed: u64,
) -> Result<CompletionOutcome> {
    let n = tpl.n();
    let mut last_err = None;
    let mut capped: Option<CompletionOutcome> = None;
    let tries = opts.max_retries.max(1);
    for attempt in 0..tries {
        let mut rng = rng::stream(seed, COMPLETION_STREAM, attempt as u64);
        let run = eliminate_for_completion(input, tpl, opts, &mut rng).and_then(|mut psi| {
            psi.report.attempts = attempt + 1;
            let mut psi_edges = psi.m1.edge_union(n);
            for (u, v) in psi.m2.edge_union(n).edges() {
                psi_edges.insert(u, v);
            }
            let sh = run_shuffle_algorithm(&psi.m2, tpl, &psi.delta, &psi_edges, opts.shuffle_budget, &mut rng)?;
            psi.report.shuffle_samples = sh.records.iter().map(|r| r.accepted_after).sum();
            Ok(CompletionOutcome { psi, shuffles: sh })
        });
        match run {
            Ok(out) => {
                let mut misses = Vec::new();
                if let Some(c) = opts.p2_cap {
                    if !linear_boundedness(&out.psi.delta, c, tpl) {
                        misses.push(format!("P2: Δ is not linearly {c}-bounded"));
                    }
                }
                if let Some(c) = opts.p3_cap {
                    if out.psi.report.plane_ratio >= c {
                        misses.push(format!(
                            "P3: {} triangles of M2 on one basic plane (cap {c}·2^a)",
                            out.psi.report.max_plane
                        ));
                    }
                }
                if misses.is_empty() {
                    return Ok(out);
                }
                let mut out = out;
                out.psi.report.warnings = misses;
                capped = Some(out);
            }
            Err(e) if e.is_stage_abort() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    if let Some(out) = capped {
        return Ok(out);
    }
    Err(last_err.expect("at least one attempt"))
}

/// Number of `(t, x)` solutions of `t_j + b_j·x = v_j`, `t_k + b_k·x = v_k`,
/// `t_i + x_i = z_i` (all `i`), for 0-based parts `j ≠ k`.
pub fn exclusion_solution_count(
    z: [FieldElem; 3],
    (j, bj, vj): (usize, u32, FieldElem),
    (k, bk, vk): (usize, u32, FieldElem),
    a: u32,
) -> u128 {
    // Unknowns: t₁, t₂, x₁, x₂, x₃; t₃ = t₁ + t₂.
    let t_mask = |i: usize| -> u64 { [0b01, 0b10, 0b11][i] };
    let x_mask = |b: u32| -> u64 { (b as u64) << 2 };
    let mut sys = AffineSystem::new(5);
    for i in 0..3 {
        sys.push_row(crate::gf2lin::AffineRow {
            coeffs: t_mask(i) ^ x_mask(unit(i)),
            rhs: z[i],
        });
    }
    sys.push_row(crate::gf2lin::AffineRow {
        coeffs: t_mask(j) ^ x_mask(bj),
        rhs: vj,
    });
    sys.push_row(crate::gf2lin::AffineRow {
        coeffs: t_mask(k) ^ x_mask(bk),
        rhs: vk,
    });
    solve_affine_system(&sys, a).count().unwrap_or(u128::MAX)
}

/// The redundancy cases under which the exclusion system has `2^a` solutions.
pub fn exclusion_is_line_case(
    z: [FieldElem; 3],
    (j, bj, vj): (usize, u32, FieldElem),
    (k, bk, vk): (usize, u32, FieldElem),
) -> bool {
    let i = 3 - j - k;
    let single = |p: usize, b: u32, v: FieldElem| {
        (b == unit(p) && v == z[p]) || (b == 7 ^ unit(p) && v == z[0] ^ z[1] ^ z[2] ^ z[p])
    };
    single(j, bj, vj)
        || single(k, bk, vk)
        || (bj ^ bk == unit(j) | unit(k) && vj ^ vk == z[j] ^ z[k])
        || (bj ^ bk == unit(i) && vj ^ vk == z[i])
}

/// Outcome of [`shuffle_self_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuffleTestReport {
    pub a: u32,
    pub targets: usize,
    pub found: usize,
    /// Both decompositions cover `S_xt` exactly, `M3 ⊆ T` and `z ∈ M4`.
    pub verified: usize,
    pub mean_samples: f64,
    pub failures: Vec<String>,
}

impl ShuffleTestReport {
    pub fn all_ok(&self) -> bool {
        self.verified == self.targets && self.failures.is_empty()
    }
}

/// Draws `targets` uniformly random octahedral triples and checks a fresh
/// shuffle for each on an unused host.
pub fn shuffle_self_test(tpl: &Template, targets: usize, budget: usize, rng: &mut Rng) -> Result<ShuffleTestReport> {
    let n = tpl.n();
    if n < 6 {
        return Err(Error::DegenerateInput("shuffle test needs n >= 6".into()));
    }
    let empty = Graph::new(n);
    let mut rep = ShuffleTestReport {
        a: tpl.a,
        targets,
        found: 0,
        verified: 0,
        mean_samples: 0.0,
        failures: Vec::new(),
    };
    let mut samples = 0usize;
    for k in 0..targets {
        let mut z = None;
        for _ in 0..100_000 {
            let v = rand::seq::index::sample(rng, n, 3);
            let t = triple(v.index(0) as u32, v.index(1) as u32, v.index(2) as u32);
            if tpl.is_octahedral(&t) {
                z = Some(t);
                break;
            }
        }
        let Some(z) = z else {
            rep.failures.push(format!("target {k}: no octahedral triple found"));
            continue;
        };
        let s = match find_shuffle(&z, tpl, &empty, &empty, budget, rng) {
            Ok(s) => s,
            Err(e) if e.is_stage_abort() => {
                rep.failures.push(format!("target {k} {z:?}: {e}"));
                continue;
            }
            Err(e) => return Err(e),
        };
        rep.found += 1;
        samples += s.samples;
        let host = s.graph(n);
        let (m3, m4) = shuffle_decompositions(&s)?;
        let mut bad = Vec::new();
        if !crate::chain::verify_decomposition(&host, &m3) {
            bad.push("M3 does not decompose S_xt");
        }
        if !crate::chain::verify_decomposition(&host, &m4) {
            bad.push("M4 does not decompose S_xt");
        }
        if !m3.triangles().iter().all(|t| tpl.contains(t)) {
            bad.push("M3 leaves T");
        }
        if !m4.triangles().contains(&z) {
            bad.push("z is missing from M4");
        }
        if bad.is_empty() {
            rep.verified += 1;
        } else {
            rep.failures.push(format!("target {k} {z:?}: {}", bad.join(", ")));
        }
    }
    rep.mean_samples = samples as f64 / rep.found.max(1) as f64;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::shuffle::is_octahedron_slot;
    use crate::template::TemplateMode;

    fn dense(a: u32, seed: u64) -> Template {
        let n = (1usize << a) - 1;
        let mut rng = rng::seeded(seed);
        Template::build(&Graph::complete(n), TemplateMode::Dense, &mut rng).unwrap()
    }

    fn random_octahedral(tpl: &Template, rng: &mut Rng) -> Triple {
        loop {
            let s = rand::seq::index::sample(rng, tpl.n(), 3);
            let z = triple(s.index(0) as u32, s.index(1) as u32, s.index(2) as u32);
            if tpl.is_octahedral(&z) {
                return z;
            }
        }
    }

    #[test]
    fn octahedral_predicate() {
        let tpl = dense(5, 1);
        let t = tpl.triangles().triangles()[0];
        assert!(is_octahedral(&t, &tpl).is_none());
        let mut rng = rng::seeded(2);
        let z = random_octahedral(&tpl, &mut rng);
        let o = is_octahedral(&z, &tpl).unwrap();
        assert_eq!(o.parts[0][0], z[0]);
        assert!(boundary_2(&o.omega(tpl.n())).is_zero());
    }

    #[test]
    fn missing_label_is_not_octahedral() {
        // n = 20 out of 31 labels: some pair sum is absent.
        let mut rng = rng::seeded(3);
        let g = Graph::complete(20);
        let tpl = Template::build(&g, TemplateMode::Fixed(5), &mut rng).unwrap();
        let mut found = false;
        for z in g.triangles() {
            let l = [tpl.label(z[0]), tpl.label(z[1]), tpl.label(z[2])];
            if !(l[0] ^ l[1] ^ l[2]).is_zero() && tpl.vertex(l[0] ^ l[1]).is_none() {
                assert!(is_octahedral(&z, &tpl).is_none());
                found = true;
            }
        }
        assert!(found);
    }

    #[test]
    fn linear_boundedness_examples() {
        let tpl = dense(5, 4);
        let n = tpl.n();
        assert!(linear_boundedness(&Graph::new(n), 0.1, &tpl));
        // all pairs at one label difference: 15 edges on one line
        let delta = FieldElem(0b10110);
        let mut j = Graph::new(n);
        for u in 0..n as u32 {
            if let Some(w) = tpl.vertex(tpl.label(u) ^ delta) {
                j.insert(u.min(w), u.max(w));
            }
        }
        let r = linear_boundedness_report(&j, &tpl);
        assert_eq!(r.max_line, 15);
        assert!(!linear_boundedness(&j, 0.45, &tpl));
    }

    #[test]
    fn self_test_passes_in_dense_mode() {
        let tpl = dense(5, 3);
        let rep = shuffle_self_test(&tpl, 20, 100_000, &mut rng::seeded(4)).unwrap();
        assert!(rep.all_ok(), "{rep:?}");
        assert_eq!(rep.found, 20);
    }

    #[test]
    fn shuffle_decompositions_are_valid() {
        for a in [5u32, 6, 7] {
            let tpl = dense(a, a as u64);
            let mut rng = rng::seeded(10 + a as u64);
            let empty = Graph::new(tpl.n());
            for _ in 0..100 {
                let z = random_octahedral(&tpl, &mut rng);
                let s = find_shuffle(&z, &tpl, &empty, &empty, 100_000, &mut rng).unwrap();
                let mut pts = s.vertices.to_vec();
                pts.sort_unstable();
                pts.dedup();
                assert_eq!(pts.len(), 24);
                let sg = s.graph(tpl.n());
                assert_eq!(sg.edge_count(), 192);
                let (m3, m4) = shuffle_decompositions(&s).unwrap();
                assert_eq!((m3.len(), m4.len()), (64, 64));
                assert!(crate::chain::verify_decomposition(&sg, &m3));
                assert!(crate::chain::verify_decomposition(&sg, &m4));
                assert!(m3.triangles().iter().all(|t| tpl.contains(t)));
                assert!(m4.triangles().contains(&z));
            }
        }
    }

    #[test]
    fn non_octahedral_target_is_rejected() {
        let tpl = dense(5, 5);
        let t = tpl.triangles().triangles()[3];
        let empty = Graph::new(tpl.n());
        let mut rng = rng::seeded(0);
        assert!(matches!(
            find_shuffle(&t, &tpl, &empty, &empty, 100, &mut rng),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn exclusion_counts_match_case_analysis() {
        for a in [4u32, 5] {
            let tpl = dense(a, 20 + a as u64);
            let mut rng = rng::seeded(a as u64);
            for _ in 0..2 {
                let z = random_octahedral(&tpl, &mut rng);
                let zl = [tpl.label(z[0]), tpl.label(z[1]), tpl.label(z[2])];
                let q = 1u32 << a;
                for (j, k) in [(0usize, 1usize), (0, 2), (1, 2)] {
                    for bj in 0..8 {
                        for bk in 0..8 {
                            if is_octahedron_slot(j, bj) && is_octahedron_slot(k, bk) {
                                continue;
                            }
                            for vj in 0..q {
                                for vk in 0..q {
                                    let ej = (j, bj, FieldElem(vj));
                                    let ek = (k, bk, FieldElem(vk));
                                    let c = exclusion_solution_count(zl, ej, ek, a);
                                    assert!(c == 0 || c == 1 || c == q as u128, "count {c}");
                                    assert_eq!(c == q as u128, exclusion_is_line_case(zl, ej, ek));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn empty_completion_is_trivial() {
        let tpl = dense(5, 6);
        let n = tpl.n();
        let input = CompletionInput {
            l: Graph::new(n),
            mc: Matching::new(),
            mi: Matching::new(),
            mo: Matching::new(),
        };
        let out = completion(&input, &tpl, &CompletionOptions::default(), 0).unwrap();
        assert!(out.psi.m1.is_empty() && out.psi.m2.is_empty());
        assert!(out.shuffles.m3.is_empty() && out.shuffles.m4.is_empty());
    }

    /// A synthetic hole output: `Mo` and `Mi` the two signed halves of one
    /// non-template octahedron, so `S = ∅` and `L = ∅`.
    fn synthetic_input(tpl: &Template, rng: &mut Rng) -> CompletionInput {
        let n = tpl.n();
        loop {
            let s = rand::seq::index::sample(rng, n, 6);
            let v: Vec<u32> = s.iter().map(|x| x as u32).collect();
            let o = Octahedron::new([[v[0], v[1]], [v[2], v[3]], [v[4], v[5]]]).unwrap();
            let tris = o.signed_triangles();
            if tris.iter().any(|(t, _)| tpl.contains(t)) {
                continue;
            }
            let mut mo = Vec::new();
            let mut mi = Vec::new();
            for (t, s) in tris {
                if s > 0 {
                    mo.push(t)
                } else {
                    mi.push(t)
                }
            }
            return CompletionInput {
                l: Graph::new(n),
                mc: Matching::new(),
                mi: Matching::from_triangles(mi).unwrap(),
                mo: Matching::from_triangles(mo).unwrap(),
            };
        }
    }

    #[test]
    fn completion_with_shuffles_in_dense_template() {
        let tpl = dense(11, 7);
        let n = tpl.n();
        let mut rng = rng::seeded(8);
        let input = synthetic_input(&tpl, &mut rng);
        let out = completion(&input, &tpl, &CompletionOptions::default(), 1).unwrap();
        let psi = &out.psi;
        assert!(!psi.m2.is_empty());
        // (L, ∪M2) partitions ∪M1 with L = ∅
        assert_eq!(psi.m1.edge_union(n), psi.m2.edge_union(n));
        check_p1(&psi.m2, &tpl, None).unwrap();
        let sh = &out.shuffles;
        assert_eq!(sh.m3.edge_union(n), sh.m4.edge_union(n));
        assert_eq!(sh.records.len(), psi.m2.len());
    }

    #[test]
    fn completion_consumes_a_hole_output() {
        // Mc = {f} with all of f spilled (G* = K_n, so L = ∅); the hole stage
        // turns S = ∂f into Mo, Mi and completion must absorb Mc + Mi − Mo.
        let tpl = dense(11, 9);
        let n = tpl.n();
        let mut rng = rng::seeded(12);
        let f = loop {
            let s = rand::seq::index::sample(&mut rng, n, 3);
            let t = triple(s.index(0) as u32, s.index(1) as u32, s.index(2) as u32);
            if !tpl.contains(&t) {
                break t;
            }
        };
        let spill = Graph::from_edges(n, triple_edges(&f)).unwrap();
        let hole = crate::hole::hole(&spill, tpl.gstar(), &crate::hole::HoleOptions::default(), 4).unwrap();
        let input = CompletionInput {
            l: Graph::new(n),
            mc: Matching::from_triangles(vec![f]).unwrap(),
            mi: hole.mi.clone(),
            mo: hole.mo.clone(),
        };
        // Shuffles are not attempted: |M2| runs to thousands here and 180
        // fresh edges per shuffle would exhaust K_2047.
        let mut rng = rng::seeded(2);
        let psi = eliminate_for_completion(&input, &tpl, &CompletionOptions::default(), &mut rng).unwrap();
        assert_eq!(psi.m1.edge_union(n), psi.m2.edge_union(n));
        check_p1(&psi.m2, &tpl, Some(&psi.m1.edge_union(n))).unwrap();
        assert!(psi.report.phase2_steps > 0);
    }
}
