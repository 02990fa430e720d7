//! End-to-end run: template, nibble, cover, hole, completion and assembly,
//! with the final matching verified against the input graph.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::chain::{boundary_2, verify_decomposition, IntGraph, Matching};
use crate::completion::{completion, CompletionInput, CompletionOptions, CompletionOutcome};
use crate::error::{Error, Result, Stage};
use crate::graph::{Graph, Triple};
use crate::greedy::{cover_leave, nibble_with, NibbleOptions, StopRule};
use crate::hole::{hole, HoleOptions};
use crate::rng;
use crate::template::{Template, TemplateMode};
use crate::typicality::{typicality_deviation, TypicalityOptions, TypicalityReport};

const TEMPLATE_STREAM: u64 = 0x746d_706c;
const PUNCTURE_STREAM: u64 = 0x7075_6e63;
const TYPICALITY_STREAM: u64 = 0x7479_7063;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Paper,
    /// `n = 2^a − 1`, `π` a bijection.
    Dense,
    /// Dense with an `ε`-fraction of `T` removed; needs `G` complete.
    Punctured(f64),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Paper => f.write_str("paper"),
            Mode::Dense => f.write_str("dense"),
            Mode::Punctured(e) => write!(f, "punctured:{e}"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Mode::Paper),
            "dense" => Ok(Mode::Dense),
            _ => {
                let eps = s
                    .strip_prefix("punctured:")
                    .and_then(|e| e.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown mode {s:?} (paper|dense|punctured:EPS)")))?;
                Ok(Mode::Punctured(eps))
            }
        }
    }
}

/// How far the nibble runs the greedy process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NibbleStop {
    /// Until no triangle of `G ∖ G*` remains; the leave is then checked for `c₁`-boundedness.
    Exhausted,
    /// As soon as the leave is `c₁`-bounded.
    Bounded,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantOverrides {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    pub c5: Option<f64>,
}

/// The cascade `c₁ … c₅`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl Constants {
    /// Each constant is derived from the previous one (overridden or not).
    pub fn derive(c: f64, d: f64, o: &ConstantOverrides) -> Self {
        let c1 = o.c1.unwrap_or_else(|| (50.0 * c).powf(0.25));
        let c2 = o.c2.unwrap_or(1e2 * c1 * d.powi(-6));
        let c3 = o.c3.unwrap_or(1e20 * c2 * d.powi(-50));
        let c4 = o.c4.unwrap_or(1e20 * c3 * d.powi(-100));
        let c5 = o.c5.unwrap_or(1e10 * c4 * d.powi(-180));
        Constants { c1, c2, c3, c4, c5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub c: f64,
    pub overrides: ConstantOverrides,
    pub mode: Mode,
    pub seed: u64,
    /// Fresh attempts per stage.
    pub max_retries: usize,
    /// Rejection samples per elimination step.
    pub budget: usize,
    /// Candidate `t` pairs per shuffle.
    pub shuffle_budget: usize,
    pub nibble_stop: NibbleStop,
    /// Size bound for the typicality check; 0 skips it.
    pub typicality_h: usize,
    /// In paper mode, a typicality deviation above `c` is an error rather than a warning.
    pub strict_typicality: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            c: 1e-4,
            overrides: ConstantOverrides::default(),
            mode: Mode::Dense,
            seed: 0,
            max_retries: 8,
            budget: 10_000,
            shuffle_budget: 100_000,
            nibble_stop: NibbleStop::Exhausted,
            typicality_h: 2,
            strict_typicality: false,
        }
    }
}

impl PipelineConfig {
    pub fn new(mode: Mode, seed: u64) -> Self {
        PipelineConfig {
            mode,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Abort,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub status: StageStatus,
    pub details: serde_json::Value,
}

/// Wall-clock time per stage; the only nondeterministic part of a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub step: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub status: RunStatus,
    pub mode: Mode,
    pub seed: u64,
    pub n: usize,
    pub constants: Constants,
    pub overrides: ConstantOverrides,
    pub stage_reports: Vec<StageReport>,
    pub failure: Option<Failure>,
    pub warnings: Vec<String>,
    pub timings: Vec<StageTiming>,
    pub decomposition: Option<Vec<Triple>>,
}

impl DecompositionResult {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    pub fn matching(&self) -> Option<Matching> {
        self.decomposition
            .as_ref()
            .map(|t| Matching::from_triangles(t.clone()).expect("verified"))
    }

    pub fn stage(&self, s: Stage) -> Option<&StageReport> {
        self.stage_reports.iter().find(|r| r.stage == s)
    }

    /// JSON with the timings emptied, identical across replays.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.timings.clear();
        serde_json::to_string(&c).expect("result serializes")
    }
}

/// Intermediate objects of a run, filled in as stages finish.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub template: Option<Template>,
    pub n_triangles: Option<Matching>,
    pub leave: Option<Graph>,
    pub mc: Option<Matching>,
    pub spill: Option<Graph>,
    pub mo: Option<Matching>,
    pub mi: Option<Matching>,
    pub completion: Option<CompletionOutcome>,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub result: DecompositionResult,
    pub artifacts: Artifacts,
}

/// `G = K_{2^a−1}` with a dense template from which `round(ε|T|)` uniformly
/// chosen triangles are removed.
pub fn make_punctured_instance<R: Rng + ?Sized>(a: u32, epsilon: f64, rng: &mut R) -> Result<(Graph, Template)> {
    if !(5..=16).contains(&a) {
        return Err(Error::Config(format!("punctured instances need 5 <= a <= 16, got {a}")));
    }
    let g = Graph::complete((1usize << a) - 1);
    let tpl = Template::build(&g, TemplateMode::Dense, rng)?;
    let tpl = puncture(&tpl, epsilon, rng)?;
    Ok((g, tpl))
}

fn puncture<R: Rng + ?Sized>(tpl: &Template, epsilon: f64, rng: &mut R) -> Result<Template> {
    if !(0.0..0.05).contains(&epsilon) {
        return Err(Error::Config(format!(
            "puncture fraction must lie in [0, 0.05), got {epsilon}"
        )));
    }
    let m = tpl.triangles().len();
    let k = (epsilon * m as f64).round() as usize;
    let drop: HashSet<Triple> = sample(rng, m, k)
        .iter()
        .map(|i| tpl.triangles().triangles()[i])
        .collect();
    Ok(tpl.restrict(|t| !drop.contains(t)))
}

/// `∪T + ∪N + ∪Mc − G = S` as integer edge vectors, with `S` tridivisible.
pub fn check_spill_divisibility(t: &Matching, n_tri: &Matching, mc: &Matching, g: &Graph, s: &Graph) -> Result<()> {
    let n = g.n();
    let mut sum = IntGraph::indicator(&t.edge_union(n));
    sum.add_scaled(&IntGraph::indicator(&n_tri.edge_union(n)), 1);
    sum.add_scaled(&boundary_2(&mc.indicator(n)), 1);
    sum.add_scaled(&IntGraph::indicator(g), -1);
    if sum != IntGraph::indicator(s) {
        return Err(Error::InternalConsistency(
            "∪T + ∪N + ∪Mc − G differs from the spill".into(),
        ));
    }
    if !s.is_tridivisible() {
        return Err(Error::InternalConsistency("spill is not tridivisible".into()));
    }
    Ok(())
}

/// Builds the template for `cfg.mode` and runs the pipeline.
pub fn decompose(g: &Graph, cfg: &PipelineConfig) -> Result<DecompositionResult> {
    Ok(decompose_full(g, cfg)?.result)
}

pub fn decompose_full(g: &Graph, cfg: &PipelineConfig) -> Result<Run> {
    check_tridivisible(g)?;
    let start = Instant::now();
    let mut trng = rng::stream(cfg.seed, TEMPLATE_STREAM, 0);
    let tpl = match cfg.mode {
        Mode::Paper => Template::build(g, TemplateMode::Paper, &mut trng)?,
        Mode::Dense => Template::build(g, TemplateMode::Dense, &mut trng)?,
        Mode::Punctured(eps) => {
            if g.edge_count() != g.n() * (g.n() - 1) / 2 {
                return Err(Error::Config("punctured mode needs a complete host".into()));
            }
            let tpl = Template::build(g, TemplateMode::Dense, &mut trng)?;
            puncture(&tpl, eps, &mut rng::stream(cfg.seed, PUNCTURE_STREAM, 0))?
        }
    };
    decompose_with_template_timed(g, tpl, cfg, start)
}

/// Runs the pipeline on a given template (e.g. from [`make_punctured_instance`]).
pub fn decompose_with_template(g: &Graph, tpl: Template, cfg: &PipelineConfig) -> Result<Run> {
    check_tridivisible(g)?;
    decompose_with_template_timed(g, tpl, cfg, Instant::now())
}

fn check_tridivisible(g: &Graph) -> Result<()> {
    if !g.is_tridivisible() {
        return Err(Error::NotTridivisible(format!(
            "n = {}, {} edges: need every degree even and 3 | e(G)",
            g.n(),
            g.edge_count()
        )));
    }
    Ok(())
}

fn ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

struct Runner<'a> {
    g: &'a Graph,
    cfg: &'a PipelineConfig,
    reports: Vec<StageReport>,
    timings: Vec<StageTiming>,
    warnings: Vec<String>,
    artifacts: Artifacts,
}

impl Runner<'_> {
    fn push(&mut self, stage: Stage, status: StageStatus, t: Instant, details: serde_json::Value) {
        self.reports.push(StageReport { stage, status, details });
        self.timings.push(StageTiming {
            stage,
            elapsed_ms: ms(t),
        });
    }
}

fn decompose_with_template_timed(g: &Graph, tpl: Template, cfg: &PipelineConfig, t0: Instant) -> Result<Run> {
    if tpl.n() != g.n() || !tpl.gstar().is_subgraph_of(g) {
        return Err(Error::Containment("template is not a subgraph of G".into()));
    }
    let n = g.n();
    let d = g.density_f64();
    let constants = Constants::derive(cfg.c, d, &cfg.overrides);
    let mut r = Runner {
        g,
        cfg,
        reports: Vec::new(),
        timings: Vec::new(),
        warnings: Vec::new(),
        artifacts: Artifacts::default(),
    };

    let outcome = stages(&mut r, &tpl, &constants, t0);
    r.artifacts.template = Some(tpl);
    let (status, failure, decomposition) = match outcome {
        Ok(m) => (RunStatus::Ok, None, Some(m.triangles().to_vec())),
        Err(Error::StageAbort { stage, step, detail }) => {
            r.push(
                stage,
                StageStatus::Abort,
                Instant::now(),
                json!({ "step": step, "detail": detail }),
            );
            (RunStatus::Abort, Some(Failure { stage, step, detail }), None)
        }
        Err(e) => return Err(e),
    };
    Ok(Run {
        result: DecompositionResult {
            status,
            mode: cfg.mode,
            seed: cfg.seed,
            n,
            constants,
            overrides: cfg.overrides,
            stage_reports: r.reports,
            failure,
            warnings: r.warnings,
            timings: r.timings,
            decomposition,
        },
        artifacts: r.artifacts,
    })
}

fn stages(r: &mut Runner<'_>, tpl: &Template, k: &Constants, t0: Instant) -> Result<Matching> {
    let (g, cfg) = (r.g, r.cfg);
    let n = g.n();
    let gstar = tpl.gstar();

    // template
    let typ = if cfg.typicality_h > 0 && n >= 2 && g.edge_count() > 0 {
        let opts = TypicalityOptions {
            samples: 2000,
            exhaustive_limit: 256,
        };
        let rep = typicality_deviation(
            g,
            cfg.typicality_h,
            &opts,
            &mut rng::stream(cfg.seed, TYPICALITY_STREAM, 0),
        )?;
        check_typicality(r, &rep)?;
        Some(rep)
    } else {
        None
    };
    r.push(
        Stage::Template,
        StageStatus::Ok,
        t0,
        json!({
            "a": tpl.a,
            "gamma": tpl.gamma,
            "triangles": tpl.triangles().len(),
            "gstar_edges": gstar.edge_count(),
            "d_g": g.density_f64(),
            "d_gstar": gstar.density_f64(),
            "typicality": typ,
        }),
    );

    // nibble
    let t = Instant::now();
    let rest = g.difference(gstar);
    let nopts = NibbleOptions {
        bound: k.c1,
        stop: match cfg.nibble_stop {
            NibbleStop::Exhausted => StopRule::Exhausted,
            NibbleStop::Bounded => StopRule::Bounded { c: k.c1 },
        },
        max_retries: cfg.max_retries,
        recompute_every: 1024,
    };
    let nib = nibble_with(&rest, &nopts, k.c1.powi(4), cfg.seed)?;
    let n_tri = nib.removed.clone();
    let leave = nib.leave.clone();
    r.warnings.extend(nib.warnings.iter().cloned());
    r.push(
        Stage::Nibble,
        StageStatus::Ok,
        t,
        json!({
            "input_edges": rest.edge_count(),
            "triangles": n_tri.len(),
            "leave_edges": leave.edge_count(),
            "leave_boundedness": nib.leave_boundedness,
            "c1": k.c1,
            "attempts": nib.attempts,
        }),
    );
    r.artifacts.n_triangles = Some(n_tri.clone());
    r.artifacts.leave = Some(leave.clone());

    if leave.edge_count() == 0 {
        for s in [Stage::Cover, Stage::Hole, Stage::Completion] {
            r.push(
                s,
                StageStatus::Skipped,
                Instant::now(),
                json!({ "reason": "empty leave" }),
            );
        }
        check_spill_divisibility(tpl.triangles(), &n_tri, &Matching::new(), g, &Graph::new(n))?;
        return assemble(
            r,
            tpl,
            &n_tri,
            &Matching::new(),
            &Matching::new(),
            &Matching::new(),
            &Matching::new(),
        );
    }

    // cover
    let t = Instant::now();
    let cov = cover_leave(&leave, gstar, cfg.seed, cfg.max_retries)?;
    let spill = cov.spill.clone();
    check_spill_divisibility(tpl.triangles(), &n_tri, &cov.mc, g, &spill)?;
    let spill_b = max_degree_ratio(&spill);
    if spill_b >= k.c2 {
        r.warnings
            .push(format!("spill is {spill_b:.4}-bounded, above c2 = {:.4}", k.c2));
    }
    r.push(
        Stage::Cover,
        StageStatus::Ok,
        t,
        json!({
            "triangles": cov.mc.len(),
            "spill_edges": spill.edge_count(),
            "spill_boundedness": spill_b,
            "c2": k.c2,
            "spill_divisibility": true,
            "attempts": cov.attempts,
        }),
    );
    r.artifacts.mc = Some(cov.mc.clone());
    r.artifacts.spill = Some(spill.clone());

    // hole
    let t = Instant::now();
    let hopts = HoleOptions {
        budget: cfg.budget,
        max_retries: cfg.max_retries,
        reserved: None,
        cap: Some(k.c3),
    };
    let h = hole(&spill, gstar, &hopts, cfg.seed)?;
    let mut sv = boundary_2(&h.mo.indicator(n));
    sv.add_scaled(&boundary_2(&h.mi.indicator(n)), -1);
    if sv != IntGraph::indicator(&spill) {
        return Err(Error::InternalConsistency(
            "∂₂(Mo − Mi) ≠ S at the hole boundary".into(),
        ));
    }
    r.push(
        Stage::Hole,
        StageStatus::Ok,
        t,
        json!({ "mo": h.mo.len(), "mi": h.mi.len(), "c3": k.c3, "report": h.report }),
    );
    r.artifacts.mo = Some(h.mo.clone());
    r.artifacts.mi = Some(h.mi.clone());

    // completion
    let t = Instant::now();
    let input = CompletionInput {
        l: leave.clone(),
        mc: cov.mc.clone(),
        mi: h.mi.clone(),
        mo: h.mo.clone(),
    };
    let mut lv = boundary_2(&input.mc.indicator(n));
    lv.add_scaled(&boundary_2(&input.mi.indicator(n)), 1);
    lv.add_scaled(&boundary_2(&input.mo.indicator(n)), -1);
    if lv != IntGraph::indicator(&leave) {
        return Err(Error::InternalConsistency(
            "∂₂(Mc + Mi − Mo) ≠ L at the completion boundary".into(),
        ));
    }
    let copts = CompletionOptions {
        budget: cfg.budget,
        shuffle_budget: cfg.shuffle_budget,
        max_retries: cfg.max_retries,
        p2_cap: Some(k.c4),
        p3_cap: Some(k.c4),
    };
    let c = completion(&input, tpl, &copts, cfg.seed)?;
    let mut lv = boundary_2(&c.psi.m1.indicator(n));
    lv.add_scaled(&boundary_2(&c.psi.m2.indicator(n)), -1);
    if lv != IntGraph::indicator(&leave) {
        return Err(Error::InternalConsistency("∂₂(M1 − M2) ≠ L after completion".into()));
    }
    r.warnings.extend(c.psi.report.warnings.iter().cloned());
    r.push(
        Stage::Completion,
        StageStatus::Ok,
        t,
        json!({
            "m1": c.psi.m1.len(),
            "m2": c.psi.m2.len(),
            "m3": c.shuffles.m3.len(),
            "m4": c.shuffles.m4.len(),
            "c4": k.c4,
            "report": c.psi.report,
            "shuffles": c.shuffles.records.len(),
        }),
    );
    let out = assemble(r, tpl, &n_tri, &c.psi.m1, &c.psi.m2, &c.shuffles.m3, &c.shuffles.m4);
    r.artifacts.completion = Some(c);
    out
}

fn check_typicality(r: &mut Runner<'_>, rep: &TypicalityReport) -> Result<()> {
    if rep.c <= r.cfg.c {
        return Ok(());
    }
    let msg = format!(
        "G is not ({}, {})-typical: observed deviation {:.4}{}",
        r.cfg.c,
        rep.h,
        rep.c,
        if rep.sampled { " (sampled)" } else { "" }
    );
    if r.cfg.mode == Mode::Paper && r.cfg.strict_typicality {
        return Err(Error::Precondition(msg));
    }
    r.warnings.push(msg);
    Ok(())
}

fn max_degree_ratio(g: &Graph) -> f64 {
    g.degrees().into_iter().max().unwrap_or(0) as f64 / g.n().max(1) as f64
}

/// `M = N ∪ M1 ∪ (M4 ∖ M2) ∪ (T ∖ M3)`, verified against `G`.
fn assemble(
    r: &mut Runner<'_>,
    tpl: &Template,
    n_tri: &Matching,
    m1: &Matching,
    m2: &Matching,
    m3: &Matching,
    m4: &Matching,
) -> Result<Matching> {
    let t = Instant::now();
    let m2s: HashSet<&Triple> = m2.triangles().iter().collect();
    let m3s: HashSet<&Triple> = m3.triangles().iter().collect();
    let mut all: Vec<Triple> = n_tri.triangles().to_vec();
    all.extend_from_slice(m1.triangles());
    all.extend(m4.triangles().iter().filter(|z| !m2s.contains(z)));
    all.extend(tpl.triangles().triangles().iter().filter(|z| !m3s.contains(z)));
    all.sort_unstable();
    let m = Matching::from_triangles(all).map_err(|e| Error::InternalConsistency(format!("assembly: {e}")))?;
    if !verify_decomposition(r.g, &m) {
        return Err(Error::InternalConsistency(
            "assembled M is not a triangle decomposition of G".into(),
        ));
    }
    r.push(
        Stage::Assembly,
        StageStatus::Ok,
        t,
        json!({ "triangles": m.len(), "verified": true }),
    );
    Ok(m)
}
