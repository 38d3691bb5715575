use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anneal_forge_core::chimera::{dw2x_topology, HardwareGraph};
use anneal_forge_core::decode::decode_and_refine;
use anneal_forge_core::embedding::{
    embedding_metrics, embedding_pool, interaction_graph, pool_to_json, select_by_criterion, select_empirically,
    Criterion, EmbedderConfig, Embedding, EmpiricalSelection,
};
use anneal_forge_core::graph::{
    build_conflict_graph, degree_distribution, generate_random_instance, percolation_threshold, ConflictRules,
    DegreeHistogram, LabelledGraph,
};
use anneal_forge_core::io::{read_sample_set, sample_set_sidecar, sample_set_to_csv};
use anneal_forge_core::params::{set_parameters, EmbeddedIsing, ParamMethod};
use anneal_forge_core::pipeline::{run_bench, write_report, BenchConfig, Selection};
use anneal_forge_core::qubo::{build_cokplex_polynomial, qubo_to_ising, quadratize, IsingProblem, PenaltyRule};
use anneal_forge_core::sampler::{sa_sample, SampleSet};
use anneal_forge_core::stats::{bootstrap_tts, posterior, r99, PosteriorSummary, Stage};
use anneal_forge_core::DecodedSet;
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "anneal-forge", version, about = "Co-k-plex benchmarking on a Chimera annealer model")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Bench configuration JSON; its knobs also drive the single stages.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Topology JSON; the built-in masked C(12,12,4) chip otherwise.
    #[arg(long, global = true)]
    topology: Option<PathBuf>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long = "tau-us", global = true)]
    tau_us: Option<f64>,
    #[arg(long, global = true)]
    criterion: Option<Selection>,
    #[arg(long = "param-method", global = true)]
    param_method: Option<ParamMethod>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Random conflict graph with `size` vertices and density drawn from [d_lo, d_hi].
    Gen {
        #[arg(long)]
        size: usize,
        #[arg(long = "d-lo")]
        d_lo: f64,
        #[arg(long = "d-hi")]
        d_hi: f64,
    },
    /// Conflict graph of two labelled graphs.
    Conflict { g1: PathBuf, g2: PathBuf },
    /// Co-k-plex QUBO and Ising problems of a graph.
    Qubo { graph: PathBuf },
    /// Embedding pool of an Ising problem and the selected member.
    Embed { ising: PathBuf },
    /// Physical problem of an Ising problem under an embedding.
    Params { ising: PathBuf, embedding: PathBuf },
    /// Samples an Ising or embedded Ising problem.
    Solve {
        problem: PathBuf,
        #[arg(long)]
        reads: Option<usize>,
    },
    /// Majority vote and greedy refinement of physical samples.
    Decode {
        embedded: PathBuf,
        samples: PathBuf,
        ising: PathBuf,
    },
    /// Posterior and R99 of decoded calls, or TTS bootstrap of posteriors.
    Stats {
        inputs: Vec<PathBuf>,
        /// Ground energy; required unless `--tts` is given.
        #[arg(long, allow_negative_numbers = true)]
        ground: Option<f64>,
        /// Treat the inputs as posterior files and bootstrap TTS.
        #[arg(long)]
        tts: bool,
        #[arg(long, default_value_t = 50.0)]
        q: f64,
        #[arg(long, value_enum, default_value = "refined")]
        stage: StageArg,
    },
    /// Percolation threshold of a graph or degree histogram.
    Percolate { input: PathBuf },
    /// Full benchmark grid.
    Bench,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StageArg {
    Mv,
    Refined,
}

struct Failure {
    stage: &'static str,
    err: anyhow::Error,
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, Failure>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, Failure> {
        self.map_err(|err| Failure { stage, err })
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let record = json!({"error": {"stage": f.stage, "message": format!("{:#}", f.err)}});
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn config(c: &Common) -> Result<BenchConfig> {
    let mut cfg: BenchConfig = match &c.config {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => BenchConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(k) = c.k {
        cfg.k = k;
    }
    if let Some(t) = c.tau_us {
        cfg.tau_us = t;
    }
    if let Some(x) = c.criterion {
        cfg.criterion = x;
    }
    if let Some(m) = c.param_method {
        cfg.param_method = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn topology(c: &Common) -> Result<HardwareGraph> {
    match &c.topology {
        Some(p) => Ok(HardwareGraph::from_json(&read(p)?)?),
        None => Ok(dw2x_topology()),
    }
}

fn run(cli: Cli) -> Outcome {
    let c = &cli.common;
    let cfg = config(c).stage("config")?;
    let out = &c.out;
    match cli.cmd {
        Cmd::Gen { size, d_lo, d_hi } => {
            let (g, info) = generate_random_instance(size, (d_lo, d_hi), cfg.seed).map_err(anyhow::Error::from).stage("gen")?;
            write(out, "graph.json", &g.to_json()).stage("gen")?;
            let meta = json!({"size": size, "d_lo": d_lo, "d_hi": d_hi, "seed": cfg.seed,
                "target_density": info.target_density, "realized_density": info.realized_density});
            write(out, "instance.json", &pretty(&meta)).stage("gen")
        }
        Cmd::Conflict { g1, g2 } => {
            let load = |p: &Path| -> Result<LabelledGraph> { Ok(LabelledGraph::from_json(&read(p)?)?) };
            let (a, b) = (load(&g1).stage("conflict")?, load(&g2).stage("conflict")?);
            let g = build_conflict_graph(&a, &b, &ConflictRules::default());
            write(out, "conflict.json", &g.to_json()).stage("conflict")
        }
        Cmd::Qubo { graph } => {
            let g = read(&graph).and_then(|t| Ok(LabelledGraph::from_json(&t)?)).stage("qubo")?;
            let poly = build_cokplex_polynomial(&g, cfg.k, &PenaltyRule::default()).map_err(anyhow::Error::from).stage("qubo")?;
            let q = quadratize(&poly);
            write(out, "qubo.json", &q.to_json()).stage("qubo")?;
            write(out, "ising.json", &qubo_to_ising(&q).to_json()).stage("qubo")
        }
        Cmd::Embed { ising } => embed(c, &cfg, &ising).stage("embed"),
        Cmd::Params { ising, embedding } => {
            let hw = topology(c).stage("params")?;
            let logical = load_ising(&ising).stage("params")?;
            let emb = read(&embedding).and_then(|t| Ok(Embedding::from_json(&t)?)).stage("params")?;
            let settings = anneal_forge_core::params::ParamSettings {
                inner: anneal_forge_core::sampler::SaParams {
                    reads: 1,
                    ..cfg.sampler()
                },
                ..cfg.params
            };
            let ei = set_parameters(cfg.param_method, &logical, &emb, &hw, &settings, cfg.seed)
                .map_err(anyhow::Error::from)
                .stage("params")?;
            write(out, "embedded.json", &ei.to_json()).stage("params")
        }
        Cmd::Solve { problem, reads } => solve(&cfg, &problem, reads, out).stage("solve"),
        Cmd::Decode { embedded, samples, ising } => decode(&cfg, &embedded, &samples, &ising, out).stage("decode"),
        Cmd::Stats { inputs, ground, tts, q, stage } => stats(&cfg, &inputs, ground, tts, q, stage, out).stage("stats"),
        Cmd::Percolate { input } => {
            let p_c = percolate(&input).stage("percolate")?;
            let record = json!({"p_c": p_c});
            println!("{record}");
            write(out, "percolation.json", &pretty(&record)).stage("percolate")
        }
        Cmd::Bench => {
            let hw = topology(c).stage("bench")?;
            let report = run_bench(&cfg, &hw).map_err(anyhow::Error::from).stage("bench")?;
            write_report(out, &cfg, &report).map_err(anyhow::Error::from).stage("bench")?;
            if !report.failures.is_empty() {
                log::warn!("{} stage failures recorded in failures.csv", report.failures.len());
            }
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn load_ising(path: &Path) -> Result<IsingProblem<String>> {
    Ok(IsingProblem::from_json(&read(path)?)?)
}

fn embed(c: &Common, cfg: &BenchConfig, ising: &Path) -> Result<()> {
    let hw = topology(c)?;
    let logical = load_ising(ising)?;
    let ig = interaction_graph(&logical);
    let ecfg = EmbedderConfig {
        trials: cfg.trials,
        ..cfg.embedder
    };
    let pool = embedding_pool(&ig, &hw, cfg.pool_size, cfg.pool_attempts, &ecfg, cfg.seed);
    write(&c.out, "pool.json", &pool_to_json(&pool))?;
    if pool.is_empty() {
        bail!("no embedding found");
    }
    let winner = match cfg.criterion {
        Selection::Pq => select_by_criterion(&pool, Criterion::Pq)?,
        Selection::Lch => select_by_criterion(&pool, Criterion::LCh)?,
        Selection::Std => select_by_criterion(&pool, Criterion::Std)?,
        Selection::Empirical => {
            let sel = EmpiricalSelection {
                stage1_reads: cfg.selection_stage1_reads,
                stage2_reads: cfg.selection_stage2_reads,
                finalists: cfg.finalists,
                sampler: cfg.sampler(),
                method: cfg.param_method,
                ..EmpiricalSelection::default()
            };
            let report = select_empirically(&pool, &logical, &hw, &sel, cfg.seed)?;
            let scores = json!({"winner": report.winner, "stage1": report.stage1, "stage2": report.stage2,
                "target": report.target, "target_source": report.target_source});
            write(&c.out, "selection.json", &pretty(&scores))?;
            report.winner
        }
    };
    let metrics: Vec<_> = pool.iter().map(embedding_metrics).collect::<Result<_, _>>()?;
    write(&c.out, "embedding.json", &pool[winner].to_json())?;
    let report = json!({"criterion": cfg.criterion.name(), "winner": winner, "metrics": metrics});
    write(&c.out, "embed_report.json", &pretty(&report))
}

fn solve(cfg: &BenchConfig, problem: &Path, reads: Option<usize>, out: &Path) -> Result<()> {
    let text = read(problem)?;
    let mut params = cfg.sampler();
    if let Some(r) = reads {
        params.reads = r;
    }
    let (csv, sidecar) = match EmbeddedIsing::from_json(&text) {
        Ok(ei) => {
            let set = sa_sample(&ei.physical, &params, cfg.seed);
            (sample_set_to_csv(&set, Some(&ei.chain_positions())), sample_set_sidecar(&set))
        }
        Err(_) => {
            let p = IsingProblem::<String>::from_json(&text)?;
            let set = sa_sample(&p, &params, cfg.seed);
            (sample_set_to_csv(&set, None), sample_set_sidecar(&set))
        }
    };
    write(out, "samples.csv", &csv)?;
    write(out, "samples.json", &sidecar)
}

fn sidecar_of(samples: &Path) -> PathBuf {
    samples.with_extension("json")
}

fn decode(cfg: &BenchConfig, embedded: &Path, samples: &Path, ising: &Path, out: &Path) -> Result<()> {
    let ei = EmbeddedIsing::from_json(&read(embedded)?)?;
    let set: SampleSet = read_sample_set(&read(samples)?, &read(&sidecar_of(samples))?)?;
    let logical = load_ising(ising)?;
    let d = decode_and_refine(&set, &ei.embedding, &logical, &ei.fixed, cfg.seed)?;
    write(out, "decoded.csv", &d.to_csv())?;
    let summary = json!({"reads": d.len(), "p_bq": d.p_bq, "p_any_broken": d.p_any_broken, "vars": d.vars});
    write(out, "decoded.json", &pretty(&summary))
}

/// Energies of one column of a decoded CSV.
fn decoded_energies(path: &Path, stage: Stage) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let col = match stage {
        Stage::Mv => 1,
        Stage::Refined => 2,
    };
    r.records()
        .map(|rec| {
            let rec = rec?;
            rec.get(col)
                .ok_or_else(|| anyhow!("{}: short row", path.display()))?
                .parse::<f64>()
                .with_context(|| format!("{}: bad energy", path.display()))
        })
        .collect()
}

fn stats(cfg: &BenchConfig, inputs: &[PathBuf], ground: Option<f64>, tts: bool, q: f64, stage: StageArg, out: &Path) -> Result<()> {
    if inputs.is_empty() {
        bail!("no input files");
    }
    if tts {
        let posts: Vec<PosteriorSummary> = inputs
            .iter()
            .map(|p| Ok(serde_json::from_str(&read(p)?)?))
            .collect::<Result<_>>()?;
        let dist = bootstrap_tts(&posts, q, cfg.bootstrap, cfg.tau_us, cfg.seed)?;
        return write(out, &format!("tts_q{q}.json"), &dist.to_json());
    }
    let ground = ground.ok_or_else(|| anyhow!("--ground is required without --tts"))?;
    let stage = match stage {
        StageArg::Mv => Stage::Mv,
        StageArg::Refined => Stage::Refined,
    };
    let calls: Vec<Vec<f64>> = inputs.iter().map(|p| decoded_energies(p, stage)).collect::<Result<_>>()?;
    let n = calls[0].len();
    if calls.iter().any(|c| c.len() != n) {
        bail!("calls hold different numbers of reads");
    }
    let sets: Vec<DecodedSet> = calls
        .into_iter()
        .map(|e| DecodedSet {
            mv_energies: e.clone(),
            refined_energies: e,
            ..DecodedSet::default()
        })
        .collect();
    let y = anneal_forge_core::stats::success_probability(&sets, ground, 1e-9, stage);
    let post = posterior(&y, n as u64)?;
    write(out, "posterior.json", &serde_json::to_string_pretty(&post)?)?;
    let summary = json!({"successes": y, "theta_mean": post.mean(), "r99": r99(post.mean())});
    write(out, "stats.json", &pretty(&summary))
}

fn percolate(input: &Path) -> Result<f64> {
    let v: serde_json::Value = serde_json::from_str(&read(input)?)?;
    let hist = if let Some(d) = v.get("degrees") {
        let counts: std::collections::BTreeMap<String, usize> = serde_json::from_value(d.clone())?;
        let parsed = counts
            .into_iter()
            .map(|(k, c)| Ok((k.parse::<usize>().with_context(|| format!("degree {k:?}"))?, c)))
            .collect::<Result<Vec<_>>>()?;
        DegreeHistogram::from_counts(parsed)
    } else {
        degree_distribution(&LabelledGraph::from_json(&v.to_string())?)
    };
    Ok(percolation_threshold(&hist)?)
}
