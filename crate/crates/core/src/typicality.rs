//! Typicality checks: common neighbourhoods against their density predictions.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypicalityOptions {
    /// Random sets drawn for the sizes that are not enumerated.
    pub samples: usize,
    /// Sizes 1 and 2 are enumerated exhaustively while `n` is at most this.
    pub exhaustive_limit: usize,
}

impl Default for TypicalityOptions {
    fn default() -> Self {
        TypicalityOptions {
            samples: 10_000,
            exhaustive_limit: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalityReport {
    pub h: usize,
    /// Smallest `c` with `obs = (1 ± |S|c)·pred` for every checked set.
    pub c: f64,
    /// Largest raw `|obs/pred − 1|`.
    pub worst_relative: f64,
    /// `|S|` and `|S*|` of the set attaining `c`.
    pub worst_size: (usize, usize),
    pub mean_abs_relative: f64,
    pub rms_relative: f64,
    pub sets_checked: usize,
    /// True when some sizes were sampled; `c` is then a lower bound.
    pub sampled: bool,
    /// A prediction was zero (zero density), so some sets could not be scored.
    pub degenerate_density: bool,
}

struct Acc {
    h: usize,
    c: f64,
    worst_relative: f64,
    worst_size: (usize, usize),
    sum_abs: f64,
    sum_sq: f64,
    count: usize,
    sampled: bool,
    degenerate: bool,
}

impl Acc {
    fn new(h: usize) -> Self {
        Acc {
            h,
            c: 0.0,
            worst_relative: 0.0,
            worst_size: (0, 0),
            sum_abs: 0.0,
            sum_sq: 0.0,
            count: 0,
            sampled: false,
            degenerate: false,
        }
    }

    fn record(&mut self, obs: usize, pred: f64, size: usize, star: usize) {
        if pred <= 0.0 {
            self.degenerate = true;
            return;
        }
        let rel = (obs as f64 / pred - 1.0).abs();
        let c = rel / size as f64;
        if c > self.c {
            self.c = c;
            self.worst_size = (size, star);
        }
        self.worst_relative = self.worst_relative.max(rel);
        self.sum_abs += rel;
        self.sum_sq += rel * rel;
        self.count += 1;
    }

    fn finish(self) -> TypicalityReport {
        let k = self.count.max(1) as f64;
        TypicalityReport {
            h: self.h,
            c: self.c,
            worst_relative: self.worst_relative,
            worst_size: self.worst_size,
            mean_abs_relative: self.sum_abs / k,
            rms_relative: (self.sum_sq / k).sqrt(),
            sets_checked: self.count,
            sampled: self.sampled,
            degenerate_density: self.degenerate,
        }
    }
}

/// `|∩_{x ∈ S*} G*(x) ∩ ∩_{x ∈ S ∖ S*} G(x)|`; `star_mask` selects `S*` inside `set`.
fn common(g: &Graph, gstar: &Graph, set: &[u32], star_mask: u32, buf: &mut [u64]) -> usize {
    buf.fill(u64::MAX);
    for (i, &x) in set.iter().enumerate() {
        let row = if star_mask >> i & 1 == 1 {
            gstar.row(x)
        } else {
            g.row(x)
        };
        for (b, r) in buf.iter_mut().zip(row) {
            *b &= r;
        }
    }
    buf.iter().map(|w| w.count_ones() as usize).sum()
}

fn check_inputs(g: &Graph, h: usize) -> Result<()> {
    if h == 0 {
        return Err(Error::Config("typicality order h must be at least 1".into()));
    }
    if g.n() < 2 {
        return Err(Error::DegenerateInput("typicality needs n >= 2".into()));
    }
    Ok(())
}

/// Worst deviation of `|∩_{x∈S} G(x)|` from `d(G)^{|S|} n` over `|S| ≤ h`.
pub fn typicality_deviation<R: Rng + ?Sized>(
    g: &Graph,
    h: usize,
    opts: &TypicalityOptions,
    rng: &mut R,
) -> Result<TypicalityReport> {
    check_inputs(g, h)?;
    let n = g.n();
    let d = g.density_f64();
    let mut acc = Acc::new(h);
    let exhaustive = n <= opts.exhaustive_limit;
    let mut buf = vec![0u64; g.words()];

    for s in 1..=h.min(2) {
        let pred = d.powi(s as i32) * n as f64;
        if exhaustive {
            for x in 0..n as u32 {
                if s == 1 {
                    acc.record(g.degree(x), pred, 1, 0);
                } else {
                    for y in x + 1..n as u32 {
                        acc.record(g.codegree(x, y), pred, 2, 0);
                    }
                }
            }
        }
    }
    let first_sampled = if exhaustive { 3 } else { 1 };
    if h >= first_sampled {
        acc.sampled = true;
        let sizes = h - first_sampled + 1;
        for k in 0..opts.samples {
            let s = (first_sampled + k % sizes).min(n);
            let set: Vec<u32> = sample(rng, n, s).iter().map(|v| v as u32).collect();
            let obs = common(g, g, &set, 0, &mut buf);
            acc.record(obs, d.powi(s as i32) * n as f64, s, 0);
        }
    }
    Ok(acc.finish())
}

/// Worst deviation over nested `S* ⊆ S`, `|S| ≤ h`, of the mixed common
/// neighbourhood from `d(G*)^{|S*|} d(G)^{|S|−|S*|} n`.
///
/// Exhaustive over all pairs `S* ⊆ S` for `h ≤ 2` and `n` within the limit;
/// otherwise `S` is sampled uniformly by size and `S*` uniformly among its subsets.
pub fn pair_typicality_deviation<R: Rng + ?Sized>(
    g: &Graph,
    gstar: &Graph,
    h: usize,
    opts: &TypicalityOptions,
    rng: &mut R,
) -> Result<TypicalityReport> {
    check_inputs(g, h)?;
    if !gstar.is_subgraph_of(g) {
        return Err(Error::Containment("G* is not a subgraph of G".into()));
    }
    if h > 31 {
        return Err(Error::Config("h above 31 is not supported".into()));
    }
    let n = g.n();
    let d = g.density_f64();
    let ds = gstar.density_f64();
    let pred = |s: usize, star: usize| ds.powi(star as i32) * d.powi((s - star) as i32) * n as f64;
    let mut acc = Acc::new(h);
    let mut buf = vec![0u64; g.words()];

    if h <= 2 && n <= opts.exhaustive_limit {
        for x in 0..n as u32 {
            for mask in 0..2u32 {
                let obs = common(g, gstar, &[x], mask, &mut buf);
                acc.record(obs, pred(1, mask as usize), 1, mask as usize);
            }
            if h == 2 {
                for y in x + 1..n as u32 {
                    for mask in 0..4u32 {
                        let obs = common(g, gstar, &[x, y], mask, &mut buf);
                        acc.record(obs, pred(2, mask.count_ones() as usize), 2, mask.count_ones() as usize);
                    }
                }
            }
        }
    } else {
        acc.sampled = true;
        for k in 0..opts.samples {
            let s = (1 + k % h).min(n);
            let set: Vec<u32> = sample(rng, n, s).iter().map(|v| v as u32).collect();
            let mask = rng.gen_range(0..1u32 << s);
            let star = mask.count_ones() as usize;
            let obs = common(g, gstar, &set, mask, &mut buf);
            acc.record(obs, pred(s, star), s, star);
        }
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn complete_graph_deviation_is_within_two_over_n() {
        for n in [5usize, 17, 64, 100] {
            let r = typicality_deviation(&Graph::complete(n), 2, &Default::default(), &mut rng(0)).unwrap();
            // degrees n−1 and codegrees n−2 against n: c = 1/n exactly
            assert!((r.c - 1.0 / n as f64).abs() < 1e-12, "n = {n}: {}", r.c);
            assert!(r.c <= 2.0 / n as f64);
            assert!(!r.sampled);
        }
    }

    #[test]
    fn isolated_vertex_has_deviation_one() {
        let mut g = Graph::complete(8);
        for v in 1..8 {
            g.remove_edge(0, v);
        }
        let r = typicality_deviation(&g, 1, &Default::default(), &mut rng(0)).unwrap();
        assert!((r.c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_with_equal_graphs_matches_plain() {
        let mut r0 = rng(5);
        let g = Graph::random(60, 0.5, &mut r0);
        let plain = typicality_deviation(&g, 2, &Default::default(), &mut rng(1)).unwrap();
        let pair = pair_typicality_deviation(&g, &g, 2, &Default::default(), &mut rng(1)).unwrap();
        assert!((plain.c - pair.c).abs() < 1e-12);
        assert!((plain.worst_relative - pair.worst_relative).abs() < 1e-12);
    }

    #[test]
    fn empty_gstar_is_flagged() {
        let g = Graph::complete(10);
        let r = pair_typicality_deviation(&g, &Graph::new(10), 2, &Default::default(), &mut rng(0)).unwrap();
        assert!(r.degenerate_density);
    }

    #[test]
    fn containment_is_checked() {
        let g = Graph::complete(10);
        let err = pair_typicality_deviation(&Graph::new(10), &g, 2, &Default::default(), &mut rng(0));
        assert!(matches!(err, Err(Error::Containment(_))));
    }

    #[test]
    fn random_graph_is_typical_for_most_seeds() {
        let mut good = 0;
        for seed in 0..10 {
            let g = Graph::random(512, 0.5, &mut rng(seed));
            let r = typicality_deviation(&g, 2, &Default::default(), &mut rng(seed + 100)).unwrap();
            // the worst set sits several standard deviations out, so the
            // tight bound holds for the typical (rms) deviation only
            assert!(r.c < 0.25, "seed {seed}: c = {}", r.c);
            if r.rms_relative < 0.1 {
                good += 1;
            }
        }
        assert!(good >= 9, "only {good}/10 seeds typical");
    }

    #[test]
    fn sampled_sizes_are_marked() {
        let g = Graph::complete(30);
        let r = typicality_deviation(
            &g,
            4,
            &TypicalityOptions {
                samples: 200,
                ..Default::default()
            },
            &mut rng(2),
        )
        .unwrap();
        assert!(r.sampled);
        // |S| = 4 on K_30: (26/30 − 1)/4
        assert!((r.c - 1.0 / 30.0).abs() < 1e-12);
    }
}
