//! Random greedy processes: triangle removal (the nibble) with trajectory
//! recording, and the greedy cover of the leave.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::Matching;
use crate::error::{Error, Result, Stage};
use crate::graph::{edge_key, nth_set_bit, triple, Edge, Graph, Triple};
use crate::numeric::CompensatedSum;
use crate::rng::stream;

/// Stage tags for seed derivation.
pub(crate) const NIBBLE_STREAM: u64 = 0x6e69_6262;
pub(crate) const COVER_STREAM: u64 = 0x636f_7672;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop with exactly this many edges left.
    Edges(usize),
    Steps(usize),
    /// Stop once every remaining degree is below `c·n`.
    Bounded {
        c: f64,
    },
    /// Run until no triangle remains.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalOptions {
    pub stop: StopRule,
    /// Exact recount of `Q` (and of the sampling bound) every this many steps.
    pub recompute_every: usize,
    /// Fractions `p` of remaining edges at which snapshots are taken.
    pub checkpoints: Vec<f64>,
    /// Surviving edges whose `T_e` is sampled at each snapshot.
    pub tracked_edges: usize,
    /// Keep one record per step (the counting estimator only needs the sums).
    pub record_steps: bool,
}

impl Default for RemovalOptions {
    fn default() -> Self {
        RemovalOptions {
            stop: StopRule::Exhausted,
            recompute_every: 1024,
            checkpoints: vec![0.9, 0.7, 0.5, 0.3],
            tracked_edges: 64,
            record_steps: true,
        }
    }
}

impl RemovalOptions {
    pub fn with_stop(stop: StopRule) -> Self {
        RemovalOptions {
            stop,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub edges: usize,
    pub p: f64,
    /// Triangles of the current graph.
    pub q: u64,
    /// Triangles available when this step was taken, i.e. `Q` of the previous step.
    pub choices: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub target_p: f64,
    pub step: usize,
    pub p: f64,
    pub q: u64,
    pub te: Vec<(Edge, u64)>,
    pub degrees: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub initial_edges: usize,
    pub initial_degrees: Vec<usize>,
    pub records: Vec<StepRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub steps: usize,
    pub final_edges: usize,
    pub final_q: u64,
    /// `Σ ln choices(i)`, compensated.
    pub log_choice_sum: f64,
    /// Set when no triangle was left before the stop rule was met.
    pub exhausted_at: Option<usize>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["step", "edges", "p", "Q", "choices", "checkpoint"])?;
        let marks: std::collections::HashSet<usize> = self.checkpoints.iter().map(|c| c.step).collect();
        for r in &self.records {
            wr.write_record([
                r.step.to_string(),
                r.edges.to_string(),
                format!("{:.9}", r.p),
                r.q.to_string(),
                r.choices.to_string(),
                (marks.contains(&r.step) as u8).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RemovalOutcome {
    pub removed: Matching,
    pub leave: Graph,
    pub trajectory: Trajectory,
}

/// Mutable state of the removal process.
struct Process {
    g: Graph,
    edges: Vec<Edge>,
    pos: HashMap<u64, usize>,
    degrees: Vec<usize>,
    q: u64,
    bound: u64,
    buf: Vec<u64>,
}

impl Process {
    fn new(g: &Graph) -> Self {
        let edges: Vec<Edge> = g.edges().collect();
        let pos = edges.iter().enumerate().map(|(i, &e)| (edge_key(e), i)).collect();
        let mut p = Process {
            g: g.clone(),
            edges,
            pos,
            degrees: g.degrees(),
            q: 0,
            bound: 0,
            buf: vec![0; g.words()],
        };
        p.q = p.count_triangles();
        p.refresh_bound();
        p
    }

    fn codeg(&self, (u, v): Edge) -> u64 {
        self.g.codegree(u, v) as u64
    }

    fn count_triangles(&self) -> u64 {
        self.edges.iter().map(|&e| self.codeg(e)).sum::<u64>() / 3
    }

    /// `T_e ≤ min(deg) − 1 ≤ max deg`; degrees only fall, so a stale value stays valid.
    fn refresh_bound(&mut self) {
        self.bound = self.degrees.iter().copied().max().unwrap_or(0) as u64;
    }

    fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    fn remove(&mut self, e: Edge) {
        let i = self.pos.remove(&edge_key(e)).expect("edge present");
        self.edges.swap_remove(i);
        if i < self.edges.len() {
            self.pos.insert(edge_key(self.edges[i]), i);
        }
        self.g.remove_edge(e.0, e.1);
        self.degrees[e.0 as usize] -= 1;
        self.degrees[e.1 as usize] -= 1;
    }

    fn third_point<R: Rng + ?Sized>(&mut self, (u, v): Edge, t: u64, rng: &mut R) -> u32 {
        for (b, (x, y)) in self.buf.iter_mut().zip(self.g.row(u).iter().zip(self.g.row(v))) {
            *b = x & y;
        }
        nth_set_bit(&self.buf, rng.gen_range(0..t) as usize).expect("codegree count")
    }

    /// A uniformly random triangle: edge `e` with probability `∝ T_e`, then a
    /// uniform common neighbour. Rejection against `bound`, with an exact
    /// weighted fallback when rejection stalls.
    fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Triple> {
        if self.q == 0 {
            return None;
        }
        for _ in 0..4096 {
            let e = self.edges[rng.gen_range(0..self.edges.len())];
            let t = self.codeg(e);
            if t > 0 && rng.gen_range(0..self.bound) < t {
                let w = self.third_point(e, t, rng);
                return Some(triple(e.0, e.1, w));
            }
        }
        let weights: Vec<u64> = self.edges.iter().map(|&e| self.codeg(e)).collect();
        let total: u64 = weights.iter().sum();
        debug_assert_eq!(total, 3 * self.q);
        let mut r = rng.gen_range(0..total);
        for (i, &w) in weights.iter().enumerate() {
            if r < w {
                let e = self.edges[i];
                let z = self.third_point(e, w, rng);
                return Some(triple(e.0, e.1, z));
            }
            r -= w;
        }
        unreachable!("weighted sampling overran")
    }

    fn snapshot<R: Rng + ?Sized>(&self, target_p: f64, step: usize, p: f64, tracked: usize, rng: &mut R) -> Checkpoint {
        let k = tracked.min(self.edges.len());
        let mut te: Vec<(Edge, u64)> = rand::seq::index::sample(rng, self.edges.len(), k)
            .iter()
            .map(|i| (self.edges[i], self.codeg(self.edges[i])))
            .collect();
        te.sort_unstable();
        Checkpoint {
            target_p,
            step,
            p,
            q: self.q,
            te,
            degrees: self.degrees.clone(),
        }
    }
}

/// Repeatedly deletes the edges of a uniformly random triangle.
pub fn run_triangle_removal<R: Rng + ?Sized>(g: &Graph, opts: &RemovalOptions, rng: &mut R) -> Result<RemovalOutcome> {
    let m0 = g.edge_count();
    match opts.stop {
        StopRule::Edges(s) if s > m0 || (m0 - s) % 3 != 0 => {
            return Err(Error::Config(format!(
                "stop_edges = {s} must be at most |G| = {m0} and congruent to it mod 3"
            )));
        }
        StopRule::Bounded { c } if !(c >= 0.0) => {
            return Err(Error::Config("boundedness target must be nonnegative".into()));
        }
        _ => {}
    }
    if opts.recompute_every == 0 {
        return Err(Error::Config("recompute_every must be positive".into()));
    }

    let mut proc = Process::new(g);
    let n = g.n();
    let p_of = |m: usize| if m0 == 0 { 0.0 } else { m as f64 / m0 as f64 };
    let mut targets: Vec<f64> = opts.checkpoints.clone();
    targets.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut next_target = 0;

    let mut records = Vec::new();
    let mut checkpoints = vec![proc.snapshot(1.0, 0, p_of(m0), opts.tracked_edges, rng)];
    if opts.record_steps {
        records.push(StepRecord {
            step: 0,
            edges: m0,
            p: p_of(m0),
            q: proc.q,
            choices: 0,
        });
    }
    let mut removed = Matching::new();
    let mut log_sum = CompensatedSum::new();
    let mut step = 0;
    let mut exhausted_at = None;

    loop {
        let m = proc.edges.len();
        let done = match opts.stop {
            StopRule::Edges(s) => m == s,
            StopRule::Steps(s) => step == s,
            StopRule::Bounded { c } => (proc.max_degree() as f64) < c * n as f64,
            StopRule::Exhausted => proc.q == 0,
        };
        if done {
            break;
        }
        let choices = proc.q;
        let Some(t) = proc.sample(rng) else {
            exhausted_at = Some(step);
            break;
        };
        let [x, y, z] = t;
        // triangles through any of the three edges, the chosen one counted thrice
        let lost = proc.codeg((x, y)) + proc.codeg((x, z)) + proc.codeg((y, z)) - 2;
        for e in [(x, y), (x, z), (y, z)] {
            proc.remove(e);
        }
        proc.q -= lost;
        removed.push_unchecked(t);
        log_sum.add((choices as f64).ln());
        step += 1;

        if step % opts.recompute_every == 0 {
            let exact = proc.count_triangles();
            if exact != proc.q {
                return Err(Error::InternalConsistency(format!(
                    "tracked Q = {} but recount gives {exact} at step {step}",
                    proc.q
                )));
            }
            proc.refresh_bound();
        }
        let m = proc.edges.len();
        if opts.record_steps {
            records.push(StepRecord {
                step,
                edges: m,
                p: p_of(m),
                q: proc.q,
                choices,
            });
        }
        while next_target < targets.len() && p_of(m) <= targets[next_target] {
            checkpoints.push(proc.snapshot(targets[next_target], step, p_of(m), opts.tracked_edges, rng));
            next_target += 1;
        }
    }

    let trajectory = Trajectory {
        n,
        initial_edges: m0,
        initial_degrees: g.degrees(),
        records,
        checkpoints,
        steps: step,
        final_edges: proc.edges.len(),
        final_q: proc.q,
        log_choice_sum: log_sum.value(),
        exhausted_at,
    };
    Ok(RemovalOutcome {
        removed,
        leave: proc.g,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeEntry {
    pub target_p: f64,
    pub step: usize,
    pub p: f64,
    pub q_observed: u64,
    /// `|G| D p³ / 3`.
    pub q_predicted: f64,
    pub e_q: f64,
    pub q_ok: bool,
    pub q_relative: f64,
    /// `D p²`.
    pub te_predicted: f64,
    pub e_d: f64,
    pub te_max_abs_dev: f64,
    pub te_ok: bool,
    pub te_max_relative: f64,
    pub te_mean_relative: f64,
    pub e_v: f64,
    pub degree_max_abs_dev: f64,
    pub degree_ok: bool,
    pub degree_max_relative: f64,
    pub degree_mean_relative: f64,
}

impl EnvelopeEntry {
    pub fn ok(&self) -> bool {
        self.q_ok && self.te_ok && self.degree_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub b: f64,
    /// `D = d(G)² n`.
    pub d_param: f64,
    pub entries: Vec<EnvelopeEntry>,
    /// Checkpoints below `p = b^{1/4}`, outside the range where the envelopes apply.
    pub skipped: usize,
}

impl EnvelopeReport {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(EnvelopeEntry::ok)
    }
}

/// Evaluates the three trajectory envelopes at every checkpoint with `p ≥ b^{1/4}`.
pub fn check_trajectory(traj: &Trajectory, b: f64) -> EnvelopeReport {
    let n = traj.n as f64;
    let m0 = traj.initial_edges as f64;
    let d = if traj.n >= 2 { m0 / (n * (n - 1.0) / 2.0) } else { 0.0 };
    let dd = d * d * n;
    let mut entries = Vec::new();
    let mut skipped = 0;
    for cp in &traj.checkpoints {
        let p = cp.p;
        if p < b.powf(0.25) || p <= 0.0 {
            skipped += 1;
            continue;
        }
        let lp = 1.0 - 3.0 * p.ln();
        let e_q = 2.0 * lp * lp * b * m0 * dd;
        let e_d = 2.0 * lp * b.powf(2.0 / 3.0) * dd;
        let e_v = 2.0 * b.powf(1.0 / 3.0) * d * n;

        let q_pred = m0 * dd * p.powi(3) / 3.0;
        let q_obs = cp.q as f64;
        let te_pred = dd * p * p;
        let te_devs: Vec<f64> = cp.te.iter().map(|&(_, t)| (t as f64 - te_pred).abs()).collect();
        let te_max = te_devs.iter().copied().fold(0.0, f64::max);
        let te_mean = if te_devs.is_empty() {
            0.0
        } else {
            te_devs.iter().sum::<f64>() / te_devs.len() as f64
        };

        let mut deg_max: f64 = 0.0;
        let mut deg_max_rel: f64 = 0.0;
        let mut deg_rel_sum = 0.0;
        let mut deg_count = 0;
        for (v, &deg) in cp.degrees.iter().enumerate() {
            let pred = p * traj.initial_degrees[v] as f64;
            let dev = (deg as f64 - pred).abs();
            deg_max = deg_max.max(dev);
            if pred > 0.0 {
                deg_max_rel = deg_max_rel.max(dev / pred);
                deg_rel_sum += dev / pred;
                deg_count += 1;
            }
        }
        let rel = |x: f64, pred: f64| if pred > 0.0 { x / pred } else { 0.0 };
        entries.push(EnvelopeEntry {
            target_p: cp.target_p,
            step: cp.step,
            p,
            q_observed: cp.q,
            q_predicted: q_pred,
            e_q,
            q_ok: (q_obs - q_pred).abs() <= e_q,
            q_relative: rel((q_obs - q_pred).abs(), q_pred),
            te_predicted: te_pred,
            e_d,
            te_max_abs_dev: te_max,
            te_ok: te_max <= e_d,
            te_max_relative: rel(te_max, te_pred),
            te_mean_relative: rel(te_mean, te_pred),
            e_v,
            degree_max_abs_dev: deg_max,
            degree_ok: deg_max <= e_v,
            degree_max_relative: deg_max_rel,
            degree_mean_relative: if deg_count == 0 {
                0.0
            } else {
                deg_rel_sum / deg_count as f64
            },
        });
    }
    EnvelopeReport {
        b,
        d_param: dd,
        entries,
        skipped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NibbleOptions {
    /// Required boundedness of the leave.
    pub bound: f64,
    pub stop: StopRule,
    pub max_retries: usize,
    pub recompute_every: usize,
}

impl NibbleOptions {
    /// Leave bound `b^{1/4}`, stopping as soon as it holds.
    pub fn for_b(b: f64) -> Self {
        let c = b.powf(0.25);
        NibbleOptions {
            bound: c,
            stop: StopRule::Bounded { c },
            max_retries: 20,
            recompute_every: 1024,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NibbleOutcome {
    pub removed: Matching,
    pub leave: Graph,
    pub attempts: usize,
    /// Smallest `c` for which the leave is `c`-bounded (degree form).
    pub leave_boundedness: f64,
    pub steps: usize,
    pub log_choice_sum: f64,
    pub warnings: Vec<String>,
}

fn max_degree_ratio(g: &Graph) -> f64 {
    if g.n() == 0 {
        return 0.0;
    }
    g.degrees().into_iter().max().unwrap_or(0) as f64 / g.n() as f64
}

/// Triangle removal until the leave is bounded, with fresh derived seeds on failure.
pub fn nibble(g: &Graph, b: f64, seed: u64, max_retries: usize) -> Result<NibbleOutcome> {
    nibble_with(
        g,
        &NibbleOptions {
            max_retries,
            ..NibbleOptions::for_b(b)
        },
        b,
        seed,
    )
}

pub fn nibble_with(g: &Graph, opts: &NibbleOptions, b: f64, seed: u64) -> Result<NibbleOutcome> {
    let mut warnings = Vec::new();
    let d = g.density_f64();
    if g.edge_count() > 0 && d <= b {
        warnings.push(format!("density {d:.4} does not exceed b = {b}"));
    }
    let ropts = RemovalOptions {
        stop: opts.stop,
        recompute_every: opts.recompute_every,
        checkpoints: vec![],
        tracked_edges: 0,
        record_steps: false,
    };
    let mut best = f64::INFINITY;
    for attempt in 0..opts.max_retries.max(1) {
        let mut rng = stream(seed, NIBBLE_STREAM, attempt as u64);
        let out = run_triangle_removal(g, &ropts, &mut rng)?;
        let c = max_degree_ratio(&out.leave);
        if c < opts.bound || out.leave.edge_count() == 0 {
            return Ok(NibbleOutcome {
                removed: out.removed,
                leave: out.leave,
                attempts: attempt + 1,
                leave_boundedness: c,
                steps: out.trajectory.steps,
                log_choice_sum: out.trajectory.log_choice_sum,
                warnings,
            });
        }
        best = best.min(c);
    }
    Err(Error::abort(
        Stage::Nibble,
        0,
        format!(
            "leave not {}-bounded after {} attempts (best {best:.4})",
            opts.bound, opts.max_retries
        ),
    ))
}

#[derive(Debug, Clone)]
pub struct CoverOutcome {
    /// One triangle per leave edge, in leave order.
    pub mc: Matching,
    /// `G* ∩ ∪M^c`.
    pub spill: Graph,
    pub attempts: usize,
}

/// Covers each leave edge, in lexicographic order, by a uniformly random
/// triangle whose other two edges are unused edges of `G*`.
pub fn cover_leave(l: &Graph, gstar: &Graph, seed: u64, max_retries: usize) -> Result<CoverOutcome> {
    if l.n() != gstar.n() {
        return Err(Error::Precondition("leave and G* have different vertex counts".into()));
    }
    if l.edges().any(|(u, v)| gstar.has_edge(u, v)) {
        return Err(Error::Precondition("leave and G* share an edge".into()));
    }
    let leave: Vec<Edge> = l.edges().collect();
    let mut last_fail = 0;
    for attempt in 0..max_retries.max(1) {
        let mut rng = stream(seed, COVER_STREAM, attempt as u64);
        match cover_once(&leave, gstar, &mut rng) {
            Ok((mc, spill)) => {
                return Ok(CoverOutcome {
                    mc,
                    spill,
                    attempts: attempt + 1,
                })
            }
            Err(step) => last_fail = step,
        }
    }
    Err(Error::abort(
        Stage::Cover,
        last_fail,
        format!("no free G* triangle for leave edge {:?}", leave[last_fail]),
    ))
}

fn cover_once<R: Rng + ?Sized>(
    leave: &[Edge],
    gstar: &Graph,
    rng: &mut R,
) -> std::result::Result<(Matching, Graph), usize> {
    let mut avail = gstar.clone();
    let mut spill = Graph::new(gstar.n());
    let mut mc = Matching::new();
    let mut buf = vec![0u64; gstar.words()];
    for (i, &(u, v)) in leave.iter().enumerate() {
        for (b, (x, y)) in buf.iter_mut().zip(avail.row(u).iter().zip(avail.row(v))) {
            *b = x & y;
        }
        let k: usize = buf.iter().map(|w| w.count_ones() as usize).sum();
        if k == 0 {
            return Err(i);
        }
        let w = nth_set_bit(&buf, rng.gen_range(0..k)).expect("count");
        avail.remove_edge(u, w);
        avail.remove_edge(v, w);
        spill.insert(u, w);
        spill.insert(v, w);
        mc.push_unchecked(triple(u, v, w));
    }
    Ok((mc, spill))
}

/// `(L, S)` partitions `∪M^c`, each triangle has one leave edge and two spill edges.
pub fn check_cover(l: &Graph, gstar: &Graph, out: &CoverOutcome) -> bool {
    let union = out.mc.edge_union(l.n());
    let m = match Matching::from_triangles(out.mc.triangles().to_vec()) {
        Ok(m) => m,
        Err(_) => return false,
    };
    union.edge_count() == 3 * m.len()
        && m.len() == l.edge_count()
        && out.spill.is_subgraph_of(gstar)
        && union.edge_count() == l.edge_count() + out.spill.edge_count()
        && l.edges().all(|(u, v)| union.has_edge(u, v))
        && out.spill.edges().all(|(u, v)| union.has_edge(u, v))
        && m.triangles().iter().all(|t| {
            crate::graph::triple_edges(t)
                .iter()
                .filter(|e| l.contains_edge(**e))
                .count()
                == 1
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::verify_decomposition;
    use crate::rng::seeded;

    fn union_with_leave(out: &RemovalOutcome, g: &Graph) -> bool {
        let mut covered = out.removed.edge_union(g.n());
        for (u, v) in out.leave.edges() {
            if !covered.add_edge(u, v).unwrap() {
                return false;
            }
        }
        covered == *g && covered.edge_count() == out.leave.edge_count() + 3 * out.removed.len()
    }

    #[test]
    fn single_triangle() {
        let g = Graph::complete(3);
        let out = run_triangle_removal(&g, &RemovalOptions::with_stop(StopRule::Edges(0)), &mut seeded(0)).unwrap();
        assert_eq!(out.removed.triangles(), &[[0, 1, 2]]);
        assert_eq!(out.leave.edge_count(), 0);
        assert_eq!(out.trajectory.log_choice_sum, 0.0);
    }

    #[test]
    fn stop_edges_must_match_mod_three() {
        let g = Graph::complete(7);
        let err = run_triangle_removal(&g, &RemovalOptions::with_stop(StopRule::Edges(10)), &mut seeded(0));
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(run_triangle_removal(&g, &RemovalOptions::with_stop(StopRule::Edges(24)), &mut seeded(0)).is_err());
        assert!(run_triangle_removal(&g, &RemovalOptions::with_stop(StopRule::Edges(9)), &mut seeded(0)).is_ok());
    }

    #[test]
    fn initial_counts_on_complete_graph() {
        let n = 30u64;
        let g = Graph::complete(n as usize);
        let out = run_triangle_removal(&g, &RemovalOptions::with_stop(StopRule::Steps(5)), &mut seeded(1)).unwrap();
        let c3 = n * (n - 1) * (n - 2) / 6;
        let r = &out.trajectory.records;
        assert_eq!(r[0].q, c3);
        assert_eq!(r[1].choices, c3);
        assert_eq!(r.len(), 6);
    }

    #[test]
    fn removal_invariants() {
        for seed in 0..5 {
            let mut rng = seeded(seed);
            let g = Graph::random(60, 0.5, &mut rng);
            let opts = RemovalOptions {
                recompute_every: 7,
                ..RemovalOptions::with_stop(StopRule::Exhausted)
            };
            let out = run_triangle_removal(&g, &opts, &mut rng).unwrap();
            assert!(union_with_leave(&out, &g));
            assert!(Matching::from_triangles(out.removed.triangles().to_vec()).is_ok());
            assert!(out.leave.triangles().is_empty());
            let recs = &out.trajectory.records;
            for w in recs.windows(2) {
                assert_eq!(w[0].edges, w[1].edges + 3);
                assert!(w[1].q <= w[0].q);
                assert_eq!(w[1].choices, w[0].q);
            }
            assert_eq!(recs.last().unwrap().q, 0);
        }
    }

    #[test]
    fn tracked_q_matches_brute_force() {
        let mut rng = seeded(3);
        let g = Graph::random(40, 0.6, &mut rng);
        let m = g.edge_count();
        let stop = m - 3 * 40;
        let out = run_triangle_removal(&g, &RemovalOptions::with_stop(StopRule::Edges(stop)), &mut rng).unwrap();
        assert_eq!(out.trajectory.final_q, out.leave.triangles().len() as u64);
        assert_eq!(out.leave.edge_count(), stop);
    }

    #[test]
    fn log_choice_sum_is_reproducible() {
        let g = Graph::complete(50);
        let run =
            |s| run_triangle_removal(&g, &RemovalOptions::with_stop(StopRule::Steps(200)), &mut seeded(s)).unwrap();
        let (a, b) = (run(9), run(9));
        assert_eq!(
            a.trajectory.log_choice_sum.to_bits(),
            b.trajectory.log_choice_sum.to_bits()
        );
        assert_eq!(a.removed, b.removed);
        let direct: f64 = a.trajectory.records[1..].iter().map(|r| (r.choices as f64).ln()).sum();
        assert!((direct - a.trajectory.log_choice_sum).abs() < 1e-9);
    }

    #[test]
    fn first_choice_is_uniform() {
        // K_5 has 10 triangles; chi-square with 9 degrees of freedom
        let g = Graph::complete(5);
        let tris = g.triangles();
        let trials = 5000;
        let mut counts = vec![0usize; tris.len()];
        for s in 0..trials {
            let out = run_triangle_removal(&g, &RemovalOptions::with_stop(StopRule::Steps(1)), &mut seeded(s)).unwrap();
            let t = out.removed.triangles()[0];
            counts[tris.iter().position(|x| *x == t).unwrap()] += 1;
        }
        let e = trials as f64 / tris.len() as f64;
        let chi: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi < 27.88, "chi-square {chi}");
    }

    #[test]
    fn bounded_stop_on_k127() {
        let g = Graph::complete(127);
        let out = nibble(&g, 0.01, 5, 20).unwrap();
        assert!(out.leave_boundedness < 0.01f64.powf(0.25));
        // b^{1/4}·n ≈ 40.2, so a maximum degree of 40 is already bounded
        assert!(out.leave.degrees().into_iter().max().unwrap() <= 40);
        assert!(Matching::from_triangles(out.removed.triangles().to_vec()).is_ok());
    }

    #[test]
    fn nibble_on_empty_graph() {
        let out = nibble(&Graph::new(10), 0.01, 0, 3).unwrap();
        assert!(out.removed.is_empty());
        assert_eq!(out.leave.edge_count(), 0);
    }

    #[test]
    fn envelope_at_step_zero() {
        let g = Graph::complete(200);
        let out = run_triangle_removal(&g, &RemovalOptions::with_stop(StopRule::Steps(0)), &mut seeded(0)).unwrap();
        let rep = check_trajectory(&out.trajectory, 0.01);
        assert_eq!(rep.entries.len(), 1);
        let e = &rep.entries[0];
        assert_eq!(e.p, 1.0);
        assert!(e.ok());
        // d = 1, D = n: predicted |G| n / 3 against C(n,3)
        assert!((e.q_predicted - 19900.0 * 200.0 / 3.0).abs() < 1e-6);
        assert!(e.q_relative < 0.02);
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let g = Graph::complete(20);
        let out = run_triangle_removal(&g, &RemovalOptions::with_stop(StopRule::Steps(10)), &mut seeded(0)).unwrap();
        let mut buf = Vec::new();
        out.trajectory.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,edges,p,Q,choices,checkpoint\n"));
        assert_eq!(text.lines().count(), 12);
    }

    #[test]
    fn cover_examples() {
        let gstar = Graph::from_edges(4, [(0, 2), (1, 2)]).unwrap();
        let l = Graph::from_edges(4, [(0, 1)]).unwrap();
        let out = cover_leave(&l, &gstar, 0, 1).unwrap();
        assert_eq!(out.mc.triangles(), &[[0, 1, 2]]);
        assert_eq!(out.spill.edges().collect::<Vec<_>>(), vec![(0, 2), (1, 2)]);
        assert!(check_cover(&l, &gstar, &out));

        let empty = cover_leave(&Graph::new(4), &gstar, 0, 1).unwrap();
        assert!(empty.mc.is_empty() && empty.spill.edge_count() == 0);

        let bad = cover_leave(&Graph::from_edges(4, [(0, 3)]).unwrap(), &gstar, 0, 2);
        assert!(matches!(
            bad,
            Err(Error::StageAbort {
                stage: Stage::Cover,
                step: 0,
                ..
            })
        ));
        assert!(cover_leave(&gstar, &gstar, 0, 1).is_err());
    }

    #[test]
    fn cover_on_template_instance() {
        use crate::template::{Template, TemplateMode};
        for seed in 0..5 {
            let mut rng = seeded(seed);
            let g = Graph::complete(127);
            let tpl = Template::build(&g, TemplateMode::Paper, &mut rng).unwrap();
            let rest = g.difference(tpl.gstar());
            // a sparse leave: every 40th edge of G ∖ G*
            let l = Graph::from_edges(127, rest.edges().step_by(40)).unwrap();
            let out = cover_leave(&l, tpl.gstar(), seed, 20).unwrap();
            assert!(check_cover(&l, tpl.gstar(), &out));
        }
    }

    #[test]
    fn cover_choice_is_uniform() {
        // leave edge 0-1 with four common G* neighbours
        let gstar = Graph::from_edges(6, (2..6).flat_map(|w| [(0, w), (1, w)])).unwrap();
        let l = Graph::from_edges(6, [(0, 1)]).unwrap();
        let mut counts = [0usize; 4];
        let trials = 4000;
        for s in 0..trials {
            let out = cover_leave(&l, &gstar, s, 1).unwrap();
            counts[out.mc.triangles()[0][2] as usize - 2] += 1;
        }
        let e = trials as f64 / 4.0;
        let chi: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi < 16.27, "chi-square {chi}");
    }

    #[test]
    fn exhausted_removal_then_cover_gives_decomposition_in_dense_mode() {
        use crate::template::{Template, TemplateMode};
        let g = Graph::complete(31);
        let tpl = Template::build(&g, TemplateMode::Dense, &mut seeded(0)).unwrap();
        assert!(verify_decomposition(&g, tpl.triangles()));
        let rest = g.difference(tpl.gstar());
        assert_eq!(rest.edge_count(), 0);
    }
}
