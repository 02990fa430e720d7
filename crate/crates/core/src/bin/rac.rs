use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use rac_core::completion::shuffle_self_test;
use rac_core::counting::{count_sts, design_divisibility, estimate_log_sts, wilson_design_log_formula};
use rac_core::greedy::{check_trajectory, run_triangle_removal, RemovalOptions, StopRule};
use rac_core::pipeline::{decompose, Mode, PipelineConfig};
use rac_core::rng::{seeded, stream};
use rac_core::template::{template_stats, Template, TemplateMode};
use rac_core::typicality::{typicality_deviation, TypicalityOptions};
use rac_core::{Error, Graph, Result};

/// Triangle decompositions by randomised algebraic construction, and
/// Steiner triple system counting.
#[derive(Parser)]
#[command(name = "rac", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tridivisibility, density and typicality of a graph.
    Check {
        #[command(flatten)]
        graph: GraphArgs,
        /// Largest common-neighbourhood size checked.
        #[arg(long, default_value_t = 2)]
        h: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Build a template and compare it with its density prediction.
    Template {
        #[command(flatten)]
        graph: GraphArgs,
        /// paper or dense.
        #[arg(long, default_value = "paper")]
        mode: Mode,
        /// Pair-typicality size bound (0 skips the check).
        #[arg(long, default_value_t = 2)]
        h: usize,
        /// Random sets drawn for sampled sizes.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the triangle removal process and check its trajectory.
    Removal {
        #[command(flatten)]
        graph: GraphArgs,
        /// Stop once about n^E edges remain (default: run until no triangle is left).
        #[arg(long = "stop-exp")]
        stop_exp: Option<f64>,
        /// Envelope parameter b.
        #[arg(long, default_value_t = 0.001)]
        b: f64,
        /// Per-step trajectory CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Decompose a graph into triangles through the full pipeline.
    Decompose {
        #[command(flatten)]
        graph: GraphArgs,
        /// Use K_{2^a - 1}.
        #[arg(long, conflicts_with_all = ["graph", "n"])]
        a: Option<u32>,
        /// paper | dense | punctured:EPS
        #[arg(long, default_value = "dense")]
        mode: Mode,
        /// Fresh attempts per stage.
        #[arg(long, default_value_t = 8)]
        retries: usize,
        /// Rejection samples per elimination step.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// Typicality constant c; c1..c5 are derived from it.
        #[arg(long, default_value_t = 1e-4)]
        c: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Exact number of Steiner triple systems on n labelled points.
    CountSts {
        #[arg(long)]
        n: usize,
        /// Allow 9 < n <= 15.
        #[arg(long)]
        allow_large: bool,
        /// Write {n, count} here; the count alone goes to stdout.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Random-greedy lower bound on log STS(n).
    EstimateSts {
        #[arg(long)]
        n: usize,
        #[arg(long = "stop-exp", default_value_t = 1.6)]
        stop_exp: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Per-trial CSV: n, trial, L1, L2, lower_bound, wilson_prediction.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Divisibility conditions and leading count term for (n, q, r, lambda) designs.
    DesignCheck {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        q: u64,
        #[arg(long)]
        r: u64,
        #[arg(long, default_value_t = 1)]
        lambda: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Find and verify shuffles for random octahedral triples in a dense template.
    ShuffleTest {
        #[arg(long, default_value_t = 6)]
        a: u32,
        /// Number of random targets.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Candidate t pairs per shuffle.
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file: a header line `n m`, then one `u v` per line.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Vertex count of a generated graph (complete unless --p is given).
    #[arg(long, conflicts_with = "graph")]
    n: Option<usize>,
    /// Edge probability for G(n, p).
    #[arg(long, requires = "n")]
    p: Option<f64>,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the result here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

impl GraphArgs {
    fn load(&self, seed: u64) -> Result<Graph> {
        match (&self.graph, self.n) {
            (Some(p), _) => Graph::load(p),
            (None, Some(n)) => Ok(match self.p {
                Some(p) => Graph::random(n, p, &mut seeded(seed)),
                None => Graph::complete(n),
            }),
            (None, None) => Err(Error::Config("give --graph PATH or --n N".into())),
        }
    }
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, value)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Exit code 2 marks a stage abort with its report already written.
struct Aborted;

fn run(cmd: Cmd) -> Result<std::result::Result<(), Aborted>> {
    match cmd {
        Cmd::Check { graph, h, out } => {
            let g = graph.load(out.seed)?;
            let typ = if g.n() >= 2 && g.edge_count() > 0 && h > 0 {
                Some(typicality_deviation(
                    &g,
                    h,
                    &TypicalityOptions::default(),
                    &mut stream(out.seed, 1, 0),
                )?)
            } else {
                None
            };
            emit(
                &json!({
                    "seed": out.seed,
                    "n": g.n(),
                    "edges": g.edge_count(),
                    "tridivisible": g.is_tridivisible(),
                    "density": g.density_f64(),
                    "typicality_deviation": typ,
                }),
                out.json.as_deref(),
            )?;
        }
        Cmd::Template {
            graph,
            mode,
            h,
            samples,
            out,
        } => {
            let g = graph.load(out.seed)?;
            let tm = match mode {
                Mode::Paper => TemplateMode::Paper,
                Mode::Dense => TemplateMode::Dense,
                Mode::Punctured(_) => return Err(Error::Config("template takes paper or dense".into())),
            };
            let mut rng = stream(out.seed, 2, 0);
            let tpl = Template::build(&g, tm, &mut rng)?;
            let opts = TypicalityOptions {
                samples,
                ..Default::default()
            };
            let stats = template_stats(&g, &tpl, h, &opts, &mut rng)?;
            emit(
                &json!({ "seed": out.seed, "mode": mode, "stats": stats }),
                out.json.as_deref(),
            )?;
        }
        Cmd::Removal {
            graph,
            stop_exp,
            b,
            csv,
            out,
        } => {
            let g = graph.load(out.seed)?;
            let stop = match stop_exp {
                Some(e) => {
                    let target = (g.n() as f64).powf(e);
                    StopRule::Steps(((g.edge_count() as f64 - target).max(0.0) / 3.0).floor() as usize)
                }
                None => StopRule::Exhausted,
            };
            let outc = run_triangle_removal(&g, &RemovalOptions::with_stop(stop), &mut stream(out.seed, 3, 0))?;
            let t = &outc.trajectory;
            if let Some(p) = csv {
                t.write_csv(File::create(p)?)?;
            }
            emit(
                &json!({
                    "seed": out.seed,
                    "n": t.n,
                    "initial_edges": t.initial_edges,
                    "steps": t.steps,
                    "final_edges": t.final_edges,
                    "exhausted_at": t.exhausted_at,
                    "log_choice_sum": t.log_choice_sum,
                    "envelope": check_trajectory(t, b),
                }),
                out.json.as_deref(),
            )?;
        }
        Cmd::Decompose {
            graph,
            a,
            mode,
            retries,
            budget,
            c,
            out,
        } => {
            let g = match a {
                Some(a) if (2..=16).contains(&a) => Graph::complete((1usize << a) - 1),
                Some(a) => return Err(Error::Config(format!("--a must lie in 2..=16, got {a}"))),
                None => graph.load(out.seed)?,
            };
            let cfg = PipelineConfig {
                c,
                max_retries: retries,
                budget,
                ..PipelineConfig::new(mode, out.seed)
            };
            let res = decompose(&g, &cfg)?;
            emit(&res, out.json.as_deref())?;
            if !res.is_ok() {
                return Ok(Err(Aborted));
            }
        }
        Cmd::CountSts { n, allow_large, json } => {
            let count = count_sts(n, allow_large)?;
            println!("{count}");
            if let Some(p) = json {
                emit(&json!({ "n": n, "count": count.to_string() }), Some(&p))?;
            }
        }
        Cmd::EstimateSts {
            n,
            stop_exp,
            trials,
            csv,
            out,
        } => {
            let est = estimate_log_sts(n, stop_exp, trials, out.seed)?;
            if let Some(p) = csv {
                est.write_csv(File::create(p)?)?;
            }
            emit(&json!({ "seed": out.seed, "estimate": est }), out.json.as_deref())?;
        }
        Cmd::DesignCheck { n, q, r, lambda, json } => {
            let divisible = design_divisibility(n, q, r, lambda)?;
            let wilson = if divisible && n >= q {
                Some(wilson_design_log_formula(n, q, r, lambda)?)
            } else {
                None
            };
            emit(
                &json!({
                    "n": n, "q": q, "r": r, "lambda": lambda,
                    "divisible": divisible,
                    "wilson_log": wilson,
                }),
                json.as_deref(),
            )?;
        }
        Cmd::ShuffleTest { a, trials, budget, out } => {
            if !(3..=16).contains(&a) {
                return Err(Error::Config(format!("--a must lie in 3..=16, got {a}")));
            }
            let g = Graph::complete((1usize << a) - 1);
            let mut rng = stream(out.seed, 4, 0);
            let tpl = Template::build(&g, TemplateMode::Dense, &mut rng)?;
            let rep = shuffle_self_test(&tpl, trials, budget, &mut rng)?;
            emit(&json!({ "seed": out.seed, "report": rep }), out.json.as_deref())?;
            if !rep.all_ok() {
                return Ok(Err(Aborted));
            }
        }
    }
    Ok(Ok(()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.cmd) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Aborted)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_stage_abort() { 2 } else { 1 })
        }
    }
}
