//! The random algebraic template: a random injection `π: V → F_{2^a} ∖ {0}` and
//! the triangles of `G` whose labels sum to zero.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::Matching;
use crate::error::{Error, Result};
use crate::gf2lin::{rank, FieldElem};
use crate::graph::{edge, Edge, Graph, Triple};
use crate::shuffle::{octahedron_label_edges, ShuffleLabels};
use crate::typicality::{pair_typicality_deviation, TypicalityOptions, TypicalityReport};

const NONE: u32 = u32::MAX;
/// Inverse tables are dense arrays of size `2^a`.
pub const MAX_FIELD_BITS: u32 = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateMode {
    /// `2^{a−2} < n ≤ 2^{a−1}`.
    Paper,
    /// `n = 2^a − 1`, `π` a bijection onto the nonzero elements.
    Dense,
    Fixed(u32),
}

impl TemplateMode {
    /// The field exponent this mode forces for `n` vertices.
    pub fn field_bits(self, n: usize) -> Result<u32> {
        let a = match self {
            TemplateMode::Paper => {
                if n < 8 {
                    return Err(Error::Config(format!("paper mode needs n >= 8, got {n}")));
                }
                // smallest a with n ≤ 2^{a−1}
                (usize::BITS - (n - 1).leading_zeros()) + 1
            }
            TemplateMode::Dense => {
                let a = usize::BITS - n.leading_zeros();
                if n == 0 || n + 1 != 1usize << a {
                    return Err(Error::Config(format!("dense mode needs n = 2^a - 1, got {n}")));
                }
                a
            }
            TemplateMode::Fixed(a) => {
                if a >= usize::BITS || (1usize << a) <= n {
                    return Err(Error::Config(format!("fixed({a}) needs 2^a > n = {n}")));
                }
                a
            }
        };
        if a > MAX_FIELD_BITS {
            return Err(Error::Config(format!("field exponent {a} exceeds {MAX_FIELD_BITS}")));
        }
        Ok(a)
    }
}

#[derive(Debug, Clone)]
pub struct Template {
    pub a: u32,
    pub gamma: f64,
    pub mode: TemplateMode,
    pi: Vec<FieldElem>,
    inv: Vec<u32>,
    t: Matching,
    gstar: Graph,
    /// `d(G)` of the host graph at construction.
    pub host_density: f64,
}

/// Serialized template: `{a, gamma, pi, T}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateJson {
    pub a: u32,
    pub gamma: f64,
    pub pi: Vec<FieldElem>,
    #[serde(rename = "T")]
    pub t: Vec<Triple>,
}

impl Template {
    pub fn build<R: Rng + ?Sized>(g: &Graph, mode: TemplateMode, rng: &mut R) -> Result<Self> {
        let n = g.n();
        let a = mode.field_bits(n)?;
        let nonzero = (1usize << a) - 1;
        let pi: Vec<FieldElem> = sample(rng, nonzero, n)
            .iter()
            .map(|i| FieldElem(i as u32 + 1))
            .collect();
        Self::from_labels(g, mode, a, pi)
    }

    /// Builds the template for a given labelling.
    pub fn from_labels(g: &Graph, mode: TemplateMode, a: u32, pi: Vec<FieldElem>) -> Result<Self> {
        let n = g.n();
        if pi.len() != n {
            return Err(Error::Config(format!("labelling has {} entries for n = {n}", pi.len())));
        }
        if a > MAX_FIELD_BITS {
            return Err(Error::Config(format!("field exponent {a} exceeds {MAX_FIELD_BITS}")));
        }
        let mut inv = vec![NONE; 1 << a];
        for (v, &l) in pi.iter().enumerate() {
            if l.is_zero() || !l.fits(a) {
                return Err(Error::Config(format!(
                    "label {l} of vertex {v} is not a nonzero element of width {a}"
                )));
            }
            if inv[l.0 as usize] != NONE {
                return Err(Error::Config(format!("label {l} used twice")));
            }
            inv[l.0 as usize] = v as u32;
        }

        let mut t = Matching::new();
        let mut gstar = Graph::new(n);
        for (x, y) in g.edges() {
            let z = inv[(pi[x as usize] ^ pi[y as usize]).0 as usize];
            if z != NONE && z > y && g.has_edge(x, z) && g.has_edge(y, z) {
                t.push_unchecked([x, y, z]);
                gstar.insert(x, y);
                gstar.insert(x, z);
                gstar.insert(y, z);
            }
        }
        Ok(Template {
            a,
            gamma: n as f64 / (1u64 << a) as f64,
            mode,
            pi,
            inv,
            t,
            gstar,
            host_density: g.density_f64(),
        })
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    /// `T' ⊆ T` keeping the triangles accepted by `keep`, with `G* = ∪T'`.
    /// Membership and octahedra stay correct: an edge of `G*` still lies in
    /// exactly one zero-sum triangle, and that triangle is in `T'`.
    pub fn restrict(&self, mut keep: impl FnMut(&Triple) -> bool) -> Template {
        let mut t = Matching::new();
        let mut gstar = Graph::new(self.n());
        for tri in self.t.triangles() {
            if keep(tri) {
                t.push_unchecked(*tri);
                gstar.insert(tri[0], tri[1]);
                gstar.insert(tri[0], tri[2]);
                gstar.insert(tri[1], tri[2]);
            }
        }
        Template {
            t,
            gstar,
            ..self.clone()
        }
    }

    pub fn triangles(&self) -> &Matching {
        &self.t
    }

    pub fn gstar(&self) -> &Graph {
        &self.gstar
    }

    pub fn labels(&self) -> &[FieldElem] {
        &self.pi
    }

    #[inline]
    pub fn label(&self, v: u32) -> FieldElem {
        self.pi[v as usize]
    }

    /// `π⁻¹(l)`, if `l` is a used label.
    #[inline]
    pub fn vertex(&self, l: FieldElem) -> Option<u32> {
        match self.inv.get(l.0 as usize) {
            Some(&v) if v != NONE => Some(v),
            _ => None,
        }
    }

    #[inline]
    pub fn label_sum(&self, t: &Triple) -> FieldElem {
        self.label(t[0]) ^ self.label(t[1]) ^ self.label(t[2])
    }

    /// Membership in `T`. An edge of `G*` lies in exactly one template
    /// triangle, so a zero-sum triple through a `G*` edge is that triangle.
    #[inline]
    pub fn contains(&self, t: &Triple) -> bool {
        self.label_sum(t).is_zero() && self.gstar.has_edge(t[0], t[1])
    }

    /// The template triangle through an edge of `G*`.
    pub fn triangle_on(&self, e: Edge) -> Option<Triple> {
        if !self.gstar.contains_edge(e) {
            return None;
        }
        let z = self.vertex(self.label(e.0) ^ self.label(e.1))?;
        Some(crate::graph::triple(e.0, e.1, z))
    }

    /// Edges of the associated octahedron of `z`, if `z` is octahedral:
    /// nonzero label sum, all six labels in use and all twelve edges present.
    pub fn octahedron(&self, z: &Triple) -> Option<Vec<Edge>> {
        let zl = [self.label(z[0]), self.label(z[1]), self.label(z[2])];
        if (zl[0] ^ zl[1] ^ zl[2]).is_zero() {
            return None;
        }
        let mut out = Vec::with_capacity(12);
        for (u, v) in octahedron_label_edges(zl) {
            let (u, v) = (self.vertex(u)?, self.vertex(v)?);
            if !self.gstar.has_edge(u, v) {
                return None;
            }
            out.push(edge(u, v));
        }
        Some(out)
    }

    pub fn is_octahedral(&self, z: &Triple) -> bool {
        self.octahedron(z).is_some()
    }

    /// Vertices of a shuffle's 24 points, part-major, if every label is in use.
    pub fn shuffle_vertices(&self, s: &ShuffleLabels) -> Option<[u32; 24]> {
        let mut out = [0u32; 24];
        for (k, slot) in ShuffleLabels::slots().enumerate() {
            out[k] = self.vertex(s.point(slot))?;
        }
        Some(out)
    }

    /// `S_xt ⊆ G*` with all points present.
    pub fn shuffle_fits(&self, s: &ShuffleLabels) -> Option<[u32; 24]> {
        let vs = self.shuffle_vertices(s)?;
        let at = |(i, b): (usize, u32)| vs[i * 8 + b as usize];
        ShuffleLabels::edge_slots()
            .all(|(p, q)| self.gstar.has_edge(at(p), at(q)))
            .then_some(vs)
    }

    pub fn to_json(&self) -> TemplateJson {
        TemplateJson {
            a: self.a,
            gamma: self.gamma,
            pi: self.pi.clone(),
            t: self.t.triangles().to_vec(),
        }
    }

    /// Rebuilds from JSON, checking that `T` matches the labelling on `g`.
    pub fn from_json(g: &Graph, mode: TemplateMode, json: &TemplateJson) -> Result<Self> {
        let tpl = Self::from_labels(g, mode, json.a, json.pi.clone())?;
        if tpl.t.triangles() != json.t.as_slice() {
            return Err(Error::InternalConsistency(
                "serialized T does not match the labelling".into(),
            ));
        }
        Ok(tpl)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateStats {
    pub a: u32,
    pub gamma: f64,
    pub paper_mode: bool,
    pub d_g: f64,
    pub d_gstar: f64,
    /// `γ·d(G)³`.
    pub predicted: f64,
    pub relative_error: f64,
    pub triangles: usize,
    pub pair_typicality: Option<TypicalityReport>,
}

/// Compares `d(G*)` with `γ d(G)³` and, when `h > 0`, measures pair typicality.
pub fn template_stats<R: Rng + ?Sized>(
    g: &Graph,
    tpl: &Template,
    h: usize,
    opts: &TypicalityOptions,
    rng: &mut R,
) -> Result<TemplateStats> {
    let d_g = g.density_f64();
    let d_gstar = tpl.gstar.density_f64();
    let predicted = tpl.gamma * d_g.powi(3);
    let relative_error = if predicted > 0.0 {
        (d_gstar / predicted - 1.0).abs()
    } else if d_gstar == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let pair_typicality = if h > 0 && g.n() >= 2 {
        Some(pair_typicality_deviation(g, &tpl.gstar, h, opts, rng)?)
    } else {
        None
    };
    Ok(TemplateStats {
        a: tpl.a,
        gamma: tpl.gamma,
        paper_mode: tpl.mode == TemplateMode::Paper,
        d_g,
        d_gstar,
        predicted,
        relative_error,
        triangles: tpl.t.len(),
        pair_typicality,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCount {
    /// True when every candidate was examined.
    pub exact: bool,
    pub examined: u64,
    pub valid: u64,
    /// `2^{log2_total}` candidates in all.
    pub log2_total: u32,
    /// `valid` scaled up by the sampling fraction.
    pub estimate: f64,
    /// Density-based prediction for paper mode.
    pub prediction: f64,
}

fn finish_count(exact: bool, examined: u64, valid: u64, log2_total: u32, prediction: f64) -> EmbeddingCount {
    let estimate = if exact {
        valid as f64
    } else {
        valid as f64 / examined.max(1) as f64 * 2f64.powi(log2_total as i32)
    };
    EmbeddingCount {
        exact,
        examined,
        valid,
        log2_total,
        estimate,
        prediction,
    }
}

/// Counts `t = (t₁,t₂)` giving a shuffle `S_xt ⊆ G*` with `t_i + x_i = z_i`.
/// Exhaustive when `2^{2a} ≤ budget`, otherwise `budget` uniform samples.
pub fn count_shuffles<R: Rng + ?Sized>(tpl: &Template, z: &Triple, budget: u64, rng: &mut R) -> Result<EmbeddingCount> {
    if !tpl.is_octahedral(z) {
        return Err(Error::Precondition(format!("{z:?} is not octahedral")));
    }
    let zl = [tpl.label(z[0]), tpl.label(z[1]), tpl.label(z[2])];
    let a = tpl.a;
    let prediction = tpl.host_density.powi(180) * tpl.gamma.powi(18) * 2f64.powi(2 * a as i32);
    let ok = |t1: u32, t2: u32| {
        let s = ShuffleLabels::for_target(zl, FieldElem(t1), FieldElem(t2));
        s.is_independent() && tpl.shuffle_fits(&s).is_some()
    };
    let total_log2 = 2 * a;
    if total_log2 < 64 && (1u64 << total_log2) <= budget {
        let mut valid = 0;
        for t1 in 0..1u32 << a {
            for t2 in 0..1u32 << a {
                valid += ok(t1, t2) as u64;
            }
        }
        Ok(finish_count(true, 1 << total_log2, valid, total_log2, prediction))
    } else {
        let mut valid = 0;
        for _ in 0..budget {
            valid += ok(rng.gen_range(0..1u32 << a), rng.gen_range(0..1u32 << a)) as u64;
        }
        Ok(finish_count(false, budget, valid, total_log2, prediction))
    }
}

/// `L_v(y) = c + Σ_{i ∈ S} y_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearForm {
    pub constant: FieldElem,
    /// Bit `i` set iff `y_i` appears.
    pub support: u64,
}

impl LinearForm {
    pub fn eval(&self, y: &[FieldElem]) -> FieldElem {
        let mut v = self.constant;
        for (i, yi) in y.iter().enumerate() {
            if self.support >> i & 1 == 1 {
                v ^= *yi;
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct LinearExtension {
    pub h: Graph,
    pub forms: Vec<LinearForm>,
    pub unknowns: usize,
}

impl LinearExtension {
    /// Vertices with empty support.
    pub fn base(&self) -> Vec<u32> {
        (0..self.forms.len() as u32)
            .filter(|&v| self.forms[v as usize].support == 0)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.forms.len() != self.h.n() {
            return Err(Error::Precondition(
                "one linear form per vertex of H is required".into(),
            ));
        }
        if self.unknowns == 0 || self.unknowns > 64 {
            return Err(Error::Precondition("need between 1 and 64 unknowns".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.forms.iter().all(|f| seen.insert(*f)) {
            return Err(Error::Precondition("linear forms must be distinct".into()));
        }
        // column rank of the incidence matrix = rank of the row masks
        let rows: Vec<FieldElem> = self.forms.iter().map(|f| FieldElem(f.support as u32)).collect();
        let full = if self.unknowns <= 32 {
            rank(&rows) == self.unknowns
        } else {
            false
        };
        if !full {
            return Err(Error::Precondition(
                "incidence matrix is not of full column rank".into(),
            ));
        }
        Ok(())
    }
}

/// Counts `y` for which `v ↦ L_v(y)` embeds `H` into `G*`.
pub fn count_linear_extensions<R: Rng + ?Sized>(
    tpl: &Template,
    ext: &LinearExtension,
    budget: u64,
    rng: &mut R,
) -> Result<EmbeddingCount> {
    ext.validate()?;
    let a = tpl.a;
    let g = ext.unknowns;
    let base = ext.base();
    let in_base = |v: u32| base.contains(&v);
    let free_edges = ext.h.edges().filter(|&(u, v)| !(in_base(u) && in_base(v))).count();
    let prediction = tpl.host_density.powi(free_edges as i32)
        * tpl.gamma.powi((ext.forms.len() - base.len()) as i32)
        * 2f64.powi((g as u32 * a) as i32);

    let mut y = vec![FieldElem::ZERO; g];
    let mut image = vec![0u32; ext.forms.len()];
    let mut ok = |y: &[FieldElem]| -> bool {
        for (v, f) in ext.forms.iter().enumerate() {
            match tpl.vertex(f.eval(y)) {
                Some(w) => image[v] = w,
                None => return false,
            }
        }
        let mut sorted = image.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return false;
        }
        ext.h
            .edges()
            .all(|(u, v)| tpl.gstar.has_edge(image[u as usize], image[v as usize]))
    };

    let log2_total = g as u32 * a;
    if log2_total < 64 && (1u64 << log2_total) <= budget {
        let mut valid = 0;
        let mask = (1u64 << a) - 1;
        for code in 0..1u64 << log2_total {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = FieldElem((code >> (i as u32 * a) & mask) as u32);
            }
            valid += ok(&y) as u64;
        }
        Ok(finish_count(true, 1 << log2_total, valid, log2_total, prediction))
    } else {
        let mut valid = 0;
        for _ in 0..budget {
            for yi in y.iter_mut() {
                *yi = FieldElem(rng.gen_range(0..1u32 << a));
            }
            valid += ok(&y) as u64;
        }
        Ok(finish_count(false, budget, valid, log2_total, prediction))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::verify_decomposition;
    use crate::rng::seeded;

    #[test]
    fn mode_field_bits() {
        assert_eq!(TemplateMode::Paper.field_bits(100).unwrap(), 8);
        assert_eq!(TemplateMode::Paper.field_bits(128).unwrap(), 8);
        assert_eq!(TemplateMode::Paper.field_bits(129).unwrap(), 9);
        assert_eq!(TemplateMode::Paper.field_bits(512).unwrap(), 10);
        assert!(TemplateMode::Paper.field_bits(7).is_err());
        assert_eq!(TemplateMode::Dense.field_bits(7).unwrap(), 3);
        assert!(TemplateMode::Dense.field_bits(8).is_err());
        assert!(TemplateMode::Fixed(3).field_bits(8).is_err());
        assert_eq!(TemplateMode::Fixed(4).field_bits(8).unwrap(), 4);
    }

    #[test]
    fn paper_gamma_for_100() {
        let tpl = Template::build(&Graph::complete(100), TemplateMode::Paper, &mut seeded(0)).unwrap();
        assert_eq!(tpl.a, 8);
        assert_eq!(tpl.gamma, 0.390625);
    }

    #[test]
    fn dense_k7_is_the_fano_plane() {
        let g = Graph::complete(7);
        let tpl = Template::build(&g, TemplateMode::Dense, &mut seeded(4)).unwrap();
        assert_eq!(tpl.triangles().len(), 7);
        assert_eq!(tpl.gstar(), &g);
        assert!(verify_decomposition(&g, tpl.triangles()));
    }

    #[test]
    fn dense_templates_decompose_complete_graphs() {
        for a in 3..=8u32 {
            let n = (1usize << a) - 1;
            let g = Graph::complete(n);
            let tpl = Template::build(&g, TemplateMode::Dense, &mut seeded(a as u64)).unwrap();
            assert!(verify_decomposition(&g, tpl.triangles()), "a = {a}");
            let stats = template_stats(&g, &tpl, 0, &Default::default(), &mut seeded(0)).unwrap();
            assert_eq!(stats.d_gstar, 1.0);
            assert!((stats.predicted - (1.0 - 0.5f64.powi(a as i32))).abs() < 1e-12);
            assert!(!stats.paper_mode);
        }
    }

    #[test]
    fn template_invariants_on_random_graph() {
        let mut rng = seeded(9);
        let g = Graph::random(200, 0.5, &mut rng);
        let tpl = Template::build(&g, TemplateMode::Paper, &mut rng).unwrap();
        assert_eq!(tpl.gstar().edge_count(), 3 * tpl.triangles().len());
        assert!(tpl.gstar().is_subgraph_of(&g));
        // brute force over all triangles of G
        let brute: Vec<Triple> = g
            .triangles()
            .into_iter()
            .filter(|t| tpl.label_sum(t).is_zero())
            .collect();
        assert_eq!(tpl.triangles().triangles(), brute.as_slice());
        for t in tpl.triangles().triangles() {
            assert!(tpl.contains(t));
            assert_eq!(tpl.triangle_on((t[0], t[2])), Some(*t));
        }
        assert!(Matching::from_triangles(tpl.triangles().triangles().to_vec()).is_ok());
    }

    #[test]
    fn empty_graph_has_empty_template() {
        let g = Graph::new(20);
        let tpl = Template::build(&g, TemplateMode::Paper, &mut seeded(1)).unwrap();
        let s = template_stats(&g, &tpl, 0, &Default::default(), &mut seeded(1)).unwrap();
        assert_eq!(s.d_gstar, 0.0);
        assert_eq!(s.relative_error, 0.0);
    }

    #[test]
    fn json_round_trip() {
        let g = Graph::random(50, 0.6, &mut seeded(2));
        let tpl = Template::build(&g, TemplateMode::Paper, &mut seeded(3)).unwrap();
        let text = serde_json::to_string(&tpl.to_json()).unwrap();
        let back: TemplateJson = serde_json::from_str(&text).unwrap();
        let again = Template::from_json(&g, TemplateMode::Paper, &back).unwrap();
        assert_eq!(again.triangles(), tpl.triangles());
        assert!(text.contains("\"T\""));
    }

    #[test]
    fn zero_sum_target_is_rejected() {
        let g = Graph::complete(31);
        let tpl = Template::build(&g, TemplateMode::Dense, &mut seeded(0)).unwrap();
        let t = tpl.triangles().triangles()[0];
        assert!(matches!(
            count_shuffles(&tpl, &t, 1 << 20, &mut seeded(0)),
            Err(Error::Precondition(_))
        ));
    }

    fn brute_shuffle_count(tpl: &Template, z: &Triple) -> u64 {
        // independent re-derivation: explicit cosets and explicit rank
        let zl: Vec<u32> = z.iter().map(|&v| tpl.label(v).0).collect();
        let q = 1u32 << tpl.a;
        let mut count = 0;
        for t1 in 0..q {
            for t2 in 0..q {
                let t = [t1, t2, t1 ^ t2];
                let x = [zl[0] ^ t[0], zl[1] ^ t[1], zl[2] ^ t[2]];
                let gens = [x[0], x[1], x[2], t1, t2];
                let mut span = std::collections::HashSet::new();
                for m in 0..32u32 {
                    span.insert((0..5).filter(|i| m >> i & 1 == 1).fold(0, |acc, i| acc ^ gens[i]));
                }
                if span.len() != 32 {
                    continue;
                }
                let parts: Vec<Vec<Option<u32>>> = (0..3)
                    .map(|i| {
                        (0..8u32)
                            .map(|b| {
                                let l = t[i] ^ (0..3).filter(|j| b >> j & 1 == 1).fold(0, |acc, j| acc ^ x[j]);
                                tpl.vertex(FieldElem(l))
                            })
                            .collect()
                    })
                    .collect();
                let all = (0..3).all(|i| {
                    (i + 1..3).all(|j| {
                        parts[i].iter().all(|u| {
                            parts[j].iter().all(|v| match (u, v) {
                                (Some(u), Some(v)) => tpl.gstar().has_edge(*u, *v),
                                _ => false,
                            })
                        })
                    })
                });
                count += all as u64;
            }
        }
        count
    }

    #[test]
    fn shuffle_count_matches_brute_force() {
        // dense: every independent t works
        for a in [5u32, 6] {
            let n = (1usize << a) - 1;
            let tpl = Template::build(&Graph::complete(n), TemplateMode::Dense, &mut seeded(a as u64)).unwrap();
            let z = [0u32, 1, 2];
            if !tpl.is_octahedral(&z) {
                continue;
            }
            let c = count_shuffles(&tpl, &z, 1 << 20, &mut seeded(0)).unwrap();
            assert!(c.exact);
            assert_eq!(c.valid, brute_shuffle_count(&tpl, &z));
            let q = 1u64 << a;
            assert!(c.valid <= q * q && c.valid + 64 * q >= q * q, "a = {a}: {}", c.valid);
        }
        // sparser: a punctured dense host so some shuffles are missing
        let mut rng = seeded(11);
        let g = Graph::random(63, 0.97, &mut rng);
        let tpl = Template::build(&g, TemplateMode::Dense, &mut rng).unwrap();
        let z = (0..63u32)
            .flat_map(|x| (x + 1..63).flat_map(move |y| (y + 1..63).map(move |w| [x, y, w])))
            .find(|z| tpl.is_octahedral(z))
            .unwrap();
        let c = count_shuffles(&tpl, &z, 1 << 20, &mut seeded(0)).unwrap();
        assert_eq!(c.valid, brute_shuffle_count(&tpl, &z));
    }

    #[test]
    fn sampled_shuffle_count_is_close() {
        let tpl = Template::build(&Graph::complete(127), TemplateMode::Dense, &mut seeded(1)).unwrap();
        let z = [0u32, 1, 2];
        assert!(tpl.is_octahedral(&z) || tpl.label_sum(&z).is_zero());
        if tpl.is_octahedral(&z) {
            let exact = count_shuffles(&tpl, &z, 1 << 14, &mut seeded(2)).unwrap();
            let c = count_shuffles(&tpl, &z, 4000, &mut seeded(2)).unwrap();
            assert!(exact.exact && !c.exact);
            assert!(
                (c.estimate / exact.valid as f64 - 1.0).abs() < 0.05,
                "{c:?} vs {}",
                exact.valid
            );
        }
    }

    #[test]
    fn single_edge_extension_in_dense_mode() {
        let a = 5;
        let tpl = Template::build(&Graph::complete(31), TemplateMode::Dense, &mut seeded(0)).unwrap();
        let h = Graph::from_edges(2, [(0, 1)]).unwrap();
        let ext = LinearExtension {
            h,
            forms: vec![
                LinearForm {
                    constant: FieldElem(3),
                    support: 0,
                },
                LinearForm {
                    constant: FieldElem(5),
                    support: 1,
                },
            ],
            unknowns: 1,
        };
        let c = count_linear_extensions(&tpl, &ext, 1 << 20, &mut seeded(0)).unwrap();
        // y₁ must avoid L_v = 0 and L_v = L_u
        assert_eq!(c.valid, (1 << a) - 2);
        let empty = LinearExtension {
            h: Graph::new(2),
            ..ext.clone()
        };
        assert_eq!(
            count_linear_extensions(&tpl, &empty, 1 << 20, &mut seeded(0))
                .unwrap()
                .valid,
            (1 << a) - 2
        );
    }

    #[test]
    fn extension_preconditions() {
        let tpl = Template::build(&Graph::complete(31), TemplateMode::Dense, &mut seeded(0)).unwrap();
        let dup = LinearExtension {
            h: Graph::new(2),
            forms: vec![
                LinearForm {
                    constant: FieldElem(1),
                    support: 1
                };
                2
            ],
            unknowns: 1,
        };
        assert!(count_linear_extensions(&tpl, &dup, 100, &mut seeded(0)).is_err());
        let deficient = LinearExtension {
            h: Graph::new(2),
            forms: vec![
                LinearForm {
                    constant: FieldElem(1),
                    support: 1,
                },
                LinearForm {
                    constant: FieldElem(2),
                    support: 1,
                },
            ],
            unknowns: 2,
        };
        assert!(count_linear_extensions(&tpl, &deficient, 100, &mut seeded(0)).is_err());
    }

    #[test]
    fn triangle_extension_prediction_matches_in_dense_mode() {
        // H = triangle with forms y1, y2, y1+y2: every valid y gives a template triangle
        let tpl = Template::build(&Graph::complete(63), TemplateMode::Dense, &mut seeded(5)).unwrap();
        let ext = LinearExtension {
            h: Graph::complete(3),
            forms: vec![
                LinearForm {
                    constant: FieldElem(0),
                    support: 1,
                },
                LinearForm {
                    constant: FieldElem(0),
                    support: 2,
                },
                LinearForm {
                    constant: FieldElem(0),
                    support: 3,
                },
            ],
            unknowns: 2,
        };
        let c = count_linear_extensions(&tpl, &ext, 1 << 20, &mut seeded(0)).unwrap();
        // ordered pairs of distinct nonzero y1 ≠ y2
        assert_eq!(c.valid, 63 * 62);
        assert!((c.prediction - (63.0f64 / 64.0).powi(3) * 4096.0).abs() < 1e-9);
    }
}
