//! Steiner triple system counting: exact enumeration for small `n`, the
//! random-greedy lower-bound estimator for larger `n`, and the design
//! divisibility and counting formulas.

use std::io::Write;

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::greedy::{run_triangle_removal, RemovalOptions, StopRule};
use crate::numeric::{ln_factorial, CompensatedSum};
use crate::rng;

const COUNT_STREAM: u64 = 0x636e_7473;

/// Largest `n` counted without opting in.
pub const SMALL_STS_LIMIT: usize = 9;
/// Largest `n` the bitmask search supports (`C(15, 2) ≤ 128`).
pub const MAX_STS_N: usize = 15;

/// Number of Steiner triple systems on the labelled set `{0, …, n−1}`.
pub fn brute_force_count_sts(n: usize) -> Result<BigUint> {
    count_sts(n, false)
}

/// As [`brute_force_count_sts`]; `allow_large` unlocks `9 < n ≤ 15`.
///
/// The blocks through vertex 0 form a perfect matching of the other `n − 1`
/// points, and relabelling fixing 0 moves any such matching to any other, so
/// the count is `(n−2)!! ·` (systems containing one fixed star).
pub fn count_sts(n: usize, allow_large: bool) -> Result<BigUint> {
    if n % 6 != 1 && n % 6 != 3 {
        return Ok(BigUint::zero());
    }
    if n > MAX_STS_N || (n > SMALL_STS_LIMIT && !allow_large) {
        return Err(Error::Config(format!(
            "exact STS count for n = {n} needs opt-in (n ≤ {MAX_STS_N}); runtime grows steeply"
        )));
    }
    if n <= 3 {
        return Ok(BigUint::one());
    }
    let b = Board::new(n);
    let mut covered = 0u128;
    for k in 0..(n - 1) / 2 {
        let (x, y) = (2 * k + 1, 2 * k + 2);
        covered |= b.bit(0, x) | b.bit(0, y) | b.bit(x, y);
    }
    let fixed = b.count_parallel(covered);
    Ok(double_factorial_odd(n - 2) * BigUint::from(fixed))
}

/// `m!! = m(m−2)⋯1` for odd `m`: perfect matchings on `m + 1` points.
fn double_factorial_odd(m: usize) -> BigUint {
    (1..=m).step_by(2).map(BigUint::from).product()
}

struct Board {
    n: usize,
    idx: [[u8; MAX_STS_N]; MAX_STS_N],
    ends: Vec<(usize, usize)>,
    full: u128,
}

impl Board {
    fn new(n: usize) -> Self {
        let mut idx = [[0u8; MAX_STS_N]; MAX_STS_N];
        let mut ends = Vec::new();
        // lexicographic edge order, so the lowest clear bit is the least uncovered edge
        for u in 0..n {
            for v in u + 1..n {
                idx[u][v] = ends.len() as u8;
                idx[v][u] = ends.len() as u8;
                ends.push((u, v));
            }
        }
        let full = if ends.len() == 128 {
            u128::MAX
        } else {
            (1u128 << ends.len()) - 1
        };
        Board { n, idx, ends, full }
    }

    #[inline]
    fn bit(&self, u: usize, v: usize) -> u128 {
        1u128 << self.idx[u][v]
    }

    /// Triangles on the least uncovered edge, as masks.
    fn branches(&self, covered: u128) -> Vec<u128> {
        let (u, v) = self.ends[(!covered & self.full).trailing_zeros() as usize];
        (0..self.n)
            .filter(|&w| w != u && w != v)
            .map(|w| (self.bit(u, w), self.bit(v, w)))
            .filter(|&(a, b)| covered & (a | b) == 0)
            .map(|(a, b)| a | b | self.bit(u, v))
            .collect()
    }

    fn count(&self, covered: u128) -> u64 {
        if covered == self.full {
            return 1;
        }
        self.branches(covered)
            .into_iter()
            .map(|t| self.count(covered | t))
            .sum()
    }

    fn count_parallel(&self, covered: u128) -> u64 {
        if covered == self.full {
            return 1;
        }
        // two levels of fan-out keeps every core busy at n = 13
        self.branches(covered)
            .into_par_iter()
            .flat_map_iter(|t| self.branches(covered | t).into_iter().map(move |s| covered | t | s))
            .map(|c| self.count(c))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEstimate {
    pub trial: usize,
    pub steps: usize,
    pub l1: f64,
    pub l2: f64,
    pub sum_log_p: f64,
    /// `p(m)` at the stop.
    pub p_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountEstimate {
    pub n: usize,
    pub stop_exponent: f64,
    pub trials: usize,
    pub discarded: usize,
    /// Means over kept trials.
    pub l1: f64,
    pub l2: f64,
    pub log_sts_lower: f64,
    pub sum_log_p: f64,
    /// The truncated sums plus `(n²/6)∫₀^{p(m)}` of the continuum integrand,
    /// i.e. the process extended past the stop by its deterministic trajectory.
    pub sum_log_p_corrected: f64,
    pub log_sts_lower_corrected: f64,
    /// `(n²/6)(ln n − 2)`.
    pub wilson_prediction: f64,
    /// Coefficient of variation of `L1` across trials.
    pub l1_cv: f64,
    pub per_trial: Vec<TrialEstimate>,
    pub warnings: Vec<String>,
}

impl CountEstimate {
    /// CSV rows `n, trial, L1, L2, lower_bound, wilson_prediction`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "trial", "L1", "L2", "lower_bound", "wilson_prediction"])?;
        for t in &self.per_trial {
            wr.write_record([
                self.n.to_string(),
                t.trial.to_string(),
                t.l1.to_string(),
                t.l2.to_string(),
                (t.l1 - t.l2).to_string(),
                self.wilson_prediction.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Runs the triangle removal process on `K_n` down to about `n^stop_exponent`
/// edges, `trials` times in parallel. Trial `k` uses the stream derived from
/// `(seed, k)`, so results do not depend on scheduling.
pub fn estimate_log_sts(n: usize, stop_exponent: f64, trials: usize, seed: u64) -> Result<CountEstimate> {
    if n % 6 != 1 && n % 6 != 3 {
        return Err(Error::Config(format!("n = {n} is not 1 or 3 mod 6")));
    }
    if !(stop_exponent > 1.5 && stop_exponent < 2.0) {
        return Err(Error::Config(format!("stop exponent {stop_exponent} outside (1.5, 2)")));
    }
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let g = Graph::complete(n);
    let m0 = g.edge_count();
    let target = (n as f64).powf(stop_exponent);
    let steps = ((m0 as f64 - target).max(0.0) / 3.0).floor() as usize;
    let nn = (n * n) as f64;
    let p = |i: usize| 1.0 - 6.0 * i as f64 / nn;
    let opts = RemovalOptions {
        stop: StopRule::Steps(steps),
        recompute_every: 1024,
        checkpoints: vec![],
        tracked_edges: 0,
        record_steps: false,
    };

    let runs: Vec<Result<Option<TrialEstimate>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::stream(seed, COUNT_STREAM, trial as u64);
            let out = run_triangle_removal(&g, &opts, &mut r)?;
            if out.trajectory.exhausted_at.is_some() {
                return Ok(None);
            }
            let sum_log_p: CompensatedSum = (1..=steps).map(|i| p(i).ln()).collect();
            let l2: CompensatedSum = (1..=steps).map(|i| (p(i) * nn / 6.0).ln()).collect();
            Ok(Some(TrialEstimate {
                trial,
                steps,
                l1: out.trajectory.log_choice_sum,
                l2: l2.value(),
                sum_log_p: sum_log_p.value(),
                p_end: p(steps),
            }))
        })
        .collect();

    let mut per_trial = Vec::with_capacity(trials);
    let mut warnings = Vec::new();
    for (k, r) in runs.into_iter().enumerate() {
        match r? {
            Some(t) => per_trial.push(t),
            None => warnings.push(format!("trial {k} ran out of triangles before the stop; discarded")),
        }
    }
    if per_trial.is_empty() {
        return Err(Error::DegenerateInput("every trial was discarded".into()));
    }
    let kept = per_trial.len() as f64;
    let mean = |f: fn(&TrialEstimate) -> f64| per_trial.iter().map(f).sum::<f64>() / kept;
    let l1 = mean(|t| t.l1);
    let l2 = mean(|t| t.l2);
    let sum_log_p = mean(|t| t.sum_log_p);
    let var = per_trial.iter().map(|t| (t.l1 - l1).powi(2)).sum::<f64>() / kept;
    let pe = p(steps);
    let scale = nn / 6.0;
    // ∫₀^q ln p dp = q ln q − q
    let tail_log_p = if pe > 0.0 { pe * pe.ln() - pe } else { 0.0 };
    let ln_n = (n as f64).ln();
    Ok(CountEstimate {
        n,
        stop_exponent,
        trials,
        discarded: trials - per_trial.len(),
        l1,
        l2,
        log_sts_lower: l1 - l2,
        sum_log_p,
        sum_log_p_corrected: sum_log_p + scale * tail_log_p,
        log_sts_lower_corrected: l1 - l2 + scale * (pe * ln_n + 2.0 * tail_log_p),
        wilson_prediction: scale * (ln_n - 2.0),
        l1_cv: if l1 != 0.0 { var.sqrt() / l1.abs() } else { 0.0 },
        per_trial,
        warnings,
    })
}

fn check_design_params(q: u64, r: u64, lambda: u64) -> Result<()> {
    if !(q > r && r >= 1 && lambda >= 1) {
        return Err(Error::Config(format!(
            "design parameters need q > r ≥ 1 and λ ≥ 1, got q = {q}, r = {r}, λ = {lambda}"
        )));
    }
    Ok(())
}

/// `C(q−i, r−i) | λ·C(n−i, r−i)` for every `0 ≤ i < r`.
pub fn design_divisibility(n: u64, q: u64, r: u64, lambda: u64) -> Result<bool> {
    check_design_params(q, r, lambda)?;
    Ok((0..r).all(|i| {
        let d: BigUint = binomial(BigUint::from(q - i), BigUint::from(r - i));
        let m = BigUint::from(lambda) * binom_or_zero(n, i, r);
        (m % d).is_zero()
    }))
}

fn binom_or_zero(n: u64, i: u64, r: u64) -> BigUint {
    if n < r {
        return BigUint::zero();
    }
    binomial(BigUint::from(n - i), BigUint::from(r - i))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilsonLog {
    /// `ln(λ!^{−C(n,r)} ((λ/e)^{Q−1} N)^{λ C(n,r)/Q})`.
    pub value: f64,
    /// `q = r`: `Q = N = 1`, so the formula carries no information.
    pub degenerate: bool,
    pub note: String,
}

/// Leading term of the log design count, with `Q = C(q, r)` and
/// `N = C(n−r, q−r)`; the `o(N)` correction is omitted.
pub fn wilson_design_log_formula(n: u64, q: u64, r: u64, lambda: u64) -> Result<WilsonLog> {
    let note = "o(N) term omitted".to_string();
    if q == r && r >= 1 && lambda >= 1 {
        let cnr = binom_or_zero(n, 0, r).to_f64().unwrap_or(f64::INFINITY);
        return Ok(WilsonLog {
            value: -cnr * ln_factorial(lambda),
            degenerate: true,
            note,
        });
    }
    if !design_divisibility(n, q, r, lambda)? {
        return Err(Error::Precondition(format!(
            "({n}, {q}, {r}, {lambda}) fails the divisibility conditions"
        )));
    }
    if n < q {
        return Err(Error::Precondition(format!("n = {n} is below the block size {q}")));
    }
    let big_q = binomial(BigUint::from(q), BigUint::from(r)).to_f64().unwrap();
    let big_n = binomial(BigUint::from(n - r), BigUint::from(q - r))
        .to_f64()
        .unwrap_or(f64::INFINITY);
    let cnr = binom_or_zero(n, 0, r).to_f64().unwrap_or(f64::INFINITY);
    let l = lambda as f64;
    let value = -cnr * ln_factorial(lambda) + l * cnr / big_q * ((big_q - 1.0) * (l.ln() - 1.0) + big_n.ln());
    Ok(WilsonLog {
        value,
        degenerate: false,
        note,
    })
}

/// `∫₀¹ t^{A−1} ln(C t^B) dt = ln C / A − B / A²`.
pub fn entropy_integral(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a > 0.0 && b >= 0.0 && c > 0.0) || !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return Err(Error::Config(format!(
            "entropy integral needs A > 0, B ≥ 0, C > 0; got ({a}, {b}, {c})"
        )));
    }
    Ok(c.ln() / a - b / (a * a))
}
