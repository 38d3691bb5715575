//! The benchmark grid: every `(size, density range, instance)` unit runs the
//! whole chain from a random conflict graph to decoded, scored samples.
//! Results come back as plain rows so callers can write them or inspect them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chimera::HardwareGraph;
use crate::decode::{decode_and_refine, DecodedSet};
use crate::embedding::{
    embedding_metrics, embedding_pool, interaction_graph, select_by_criterion, select_empirically, Criterion,
    EmbedderConfig, EmpiricalSelection,
};
use crate::graph::{degree_distribution, generate_random_instance, percolation_threshold};
use crate::params::{set_parameters_empirical, set_parameters_theoretical, EmbeddedIsing, ParamMethod, ParamSettings};
use crate::qubo::{build_cokplex_polynomial, qubo_to_ising, quadratize, IsingProblem, PenaltyRule};
use crate::sampler::{brute_force_cokplex, sa_sample, SaParams};
use crate::seed;
use crate::stats::{bootstrap_tts, median, posterior, r99, residual_energy, success_probability, Stage};

const INSTANCE_TAG: u64 = 0x494e_5354;
const EMBED_STAGE: u64 = 1;
const SELECT_STAGE: u64 = 2;
const RUN_STAGE: u64 = 3;
const EMPIRICAL_STAGE: u64 = 4;
const TTS_TAG: u64 = 0x5454_5300;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// How the embedding used downstream is picked from the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Pq,
    Lch,
    Std,
    Empirical,
}

impl Selection {
    pub const ALL: [Selection; 4] = [Selection::Pq, Selection::Lch, Selection::Std, Selection::Empirical];

    pub fn name(self) -> &'static str {
        match self {
            Selection::Pq => "pq",
            Selection::Lch => "lch",
            Selection::Std => "std",
            Selection::Empirical => "empirical",
        }
    }

    fn criterion(self) -> Option<Criterion> {
        match self {
            Selection::Pq => Some(Criterion::Pq),
            Selection::Lch => Some(Criterion::LCh),
            Selection::Std => Some(Criterion::Std),
            Selection::Empirical => None,
        }
    }
}

impl std::str::FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Selection::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown criterion {s:?}; expected pq, lch, std or empirical"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub densities: Vec<(f64, f64)>,
    pub instances: usize,
    /// Sampler calls `C` and anneals per call `N`.
    pub calls: usize,
    pub anneals: usize,
    pub tau_us: f64,
    pub trials: usize,
    pub pool_size: usize,
    /// Embedder calls allowed while filling the pool.
    pub pool_attempts: usize,
    pub seed: u64,
    pub k: usize,
    pub criterion: Selection,
    pub param_method: ParamMethod,
    pub sweeps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub bootstrap: usize,
    pub percentiles: Vec<f64>,
    pub selection_stage1_reads: usize,
    pub selection_stage2_reads: usize,
    pub finalists: usize,
    /// Largest instance handed to the exact co-k-plex solver.
    pub exact_cap: usize,
    pub params: ParamSettings,
    pub embedder: EmbedderConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: (0..=8).map(|k| 18 + 4 * k).collect(),
            densities: vec![(65.0, 75.0), (75.0, 85.0), (85.0, 95.0)],
            instances: 10,
            calls: 5,
            anneals: 10_000,
            tau_us: 5.0,
            trials: 100,
            pool_size: 50,
            pool_attempts: 100,
            seed: 0,
            k: 1,
            criterion: Selection::Pq,
            param_method: ParamMethod::Theoretical,
            sweeps: 1000,
            beta_min: 0.1,
            beta_max: 10.0,
            bootstrap: 1000,
            percentiles: vec![25.0, 50.0, 75.0],
            selection_stage1_reads: 1000,
            selection_stage2_reads: 1000,
            finalists: 5,
            exact_cap: 64,
            params: ParamSettings::default(),
            embedder: EmbedderConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        let counts = [
            ("instances", self.instances),
            ("calls", self.calls),
            ("anneals", self.anneals),
            ("trials", self.trials),
            ("pool_size", self.pool_size),
            ("pool_attempts", self.pool_attempts),
            ("k", self.k),
            ("sweeps", self.sweeps),
            ("bootstrap", self.bootstrap),
            ("selection_stage1_reads", self.selection_stage1_reads),
            ("selection_stage2_reads", self.selection_stage2_reads),
            ("finalists", self.finalists),
        ];
        if let Some((name, _)) = counts.iter().find(|c| c.1 == 0) {
            return bad(&format!("{name} must be positive"));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("sizes must be a non-empty list of positive integers");
        }
        if self.densities.is_empty() {
            return bad("densities must not be empty");
        }
        for &(lo, hi) in &self.densities {
            if !(0.0 <= lo && lo <= hi && hi <= 100.0) {
                return bad(&format!("density range [{lo}, {hi}] is not inside [0, 100]"));
            }
        }
        if !(self.tau_us > 0.0 && self.tau_us.is_finite()) {
            return bad("tau_us must be positive");
        }
        if self.percentiles.iter().any(|&q| !(q > 0.0 && q < 100.0)) {
            return bad("percentiles must lie strictly between 0 and 100");
        }
        if !(0.0 < self.beta_min && self.beta_min <= self.beta_max) {
            return bad("need 0 < beta_min <= beta_max");
        }
        Ok(())
    }

    pub fn sampler(&self) -> SaParams {
        SaParams {
            reads: self.anneals,
            sweeps: self.sweeps,
            beta_min: self.beta_min,
            beta_max: self.beta_max,
        }
    }

    fn settings(&self) -> ParamSettings {
        let mut s = self.params;
        s.inner = SaParams {
            reads: 1,
            ..self.sampler()
        };
        s
    }

    pub fn units(&self) -> Vec<Unit> {
        let mut units = Vec::new();
        for &size in &self.sizes {
            for &(d_lo, d_hi) in &self.densities {
                for instance in 0..self.instances {
                    units.push(Unit {
                        size,
                        d_lo,
                        d_hi,
                        instance,
                        seed: unit_seed(self.seed, size, (d_lo, d_hi), instance),
                    });
                }
            }
        }
        units
    }
}

/// Depends only on the unit's own coordinates, so a cell draws the same
/// instances whatever else is in the grid.
fn unit_seed(master: u64, size: usize, (lo, hi): (f64, f64), instance: usize) -> u64 {
    let cell = seed::derive2(seed::derive(master, size as u64), lo.to_bits(), hi.to_bits());
    seed::derive2(cell, INSTANCE_TAG, instance as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Unit {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub instance: usize,
    pub seed: u64,
}

impl Unit {
    fn cell(&self) -> (usize, u64, u64) {
        (self.size, self.d_lo.to_bits(), self.d_hi.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRow {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub instance: usize,
    pub seed: u64,
    pub edges: usize,
    pub target_density: f64,
    pub density: f64,
    pub optimum_weight: f64,
    pub ground_energy: f64,
    pub logical_vars: usize,
    pub couplings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbedRow {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub instance: usize,
    pub embedded: bool,
    pub pool_size: usize,
    pub best_qubits: Option<usize>,
    pub best_longest_chain: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionRow {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub instance: usize,
    pub criterion: &'static str,
    pub pool_index: usize,
    pub total_qubits: usize,
    pub longest_chain: usize,
    pub chain_std: f64,
    pub success_probability: f64,
    pub r99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamRow {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub instance: usize,
    pub method: &'static str,
    pub status: &'static str,
    pub alpha: Option<f64>,
    /// Physical intra-chain coupler value of multi-qubit chains.
    pub chain_strength: Option<f64>,
    pub fixed_vars: usize,
    pub success_probability: f64,
    pub mean_biggest_cluster: Option<f64>,
    pub max_biggest_cluster: Option<usize>,
    pub residual_energy: Option<f64>,
    pub residual_absolute: Option<bool>,
    /// Theoretical minus empirical scaling factor.
    pub alpha_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercolationRow {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub instance: usize,
    pub p_bq: f64,
    pub p_any_broken: f64,
    pub p_c: Option<f64>,
    pub mean_degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R99Row {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub instance: usize,
    pub theta_mv: f64,
    pub r99_mv: f64,
    pub theta_greedy: f64,
    pub r99_greedy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TtsRow {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub q: f64,
    pub instances: usize,
    pub mean_us: f64,
    pub std_us: f64,
    pub median_us: f64,
    pub clamped_draws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRow {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub instance: usize,
    pub stage: &'static str,
    pub message: String,
}

/// Wall-clock seconds per unit; kept apart from the CSV tables, which are
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub instance: usize,
    pub embed_s: f64,
    pub theoretical_setup_s: Option<f64>,
    pub empirical_setup_s: Option<f64>,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnitReport {
    pub instance: Option<InstanceRow>,
    pub embed: Option<EmbedRow>,
    pub criteria: Vec<CriterionRow>,
    pub params: Vec<ParamRow>,
    pub percolation: Option<PercolationRow>,
    pub r99: Option<R99Row>,
    pub failures: Vec<FailureRow>,
    pub timing: Option<TimingRow>,
    /// Posterior of the selected embedding under the configured setter, for
    /// the TTS bootstrap.
    pub posterior: Option<crate::stats::PosteriorSummary>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub instances: Vec<InstanceRow>,
    pub embeddability: Vec<EmbedRow>,
    pub criteria: Vec<CriterionRow>,
    pub params: Vec<ParamRow>,
    pub percolation: Vec<PercolationRow>,
    pub r99: Vec<R99Row>,
    pub tts: Vec<TtsRow>,
    pub tts_reports: Vec<((usize, f64, f64), crate::stats::TtsDistribution)>,
    pub failures: Vec<FailureRow>,
    pub timings: Vec<TimingRow>,
}

/// Scores of one parameterized embedding over `C` sampler calls.
struct Scored {
    ei: EmbeddedIsing,
    decoded: Vec<DecodedSet>,
}

fn tally(calls: &[DecodedSet], ground: f64, stage: Stage, n: usize) -> (f64, f64) {
    let y = success_probability(calls, ground, 1e-9, stage);
    let total: u64 = y.iter().sum();
    let reads = (n * calls.len()).max(1) as f64;
    let post = posterior(&y, n as u64).expect("counts bounded by reads");
    (total as f64 / reads, post.mean())
}

fn sample_calls(
    ei: &EmbeddedIsing,
    logical: &IsingProblem<String>,
    cfg: &BenchConfig,
    run_seed: u64,
) -> Result<Vec<DecodedSet>, String> {
    (0..cfg.calls)
        .map(|c| {
            let s = seed::derive(run_seed, c as u64);
            let samples = sa_sample(&ei.physical, &cfg.sampler(), seed::derive(s, 0));
            decode_and_refine(&samples, &ei.embedding, logical, &ei.fixed, seed::derive(s, 1)).map_err(|e| e.to_string())
        })
        .collect()
}

struct Ctx<'a> {
    cfg: &'a BenchConfig,
    hw: &'a HardwareGraph,
    unit: Unit,
    report: UnitReport,
}

impl Ctx<'_> {
    fn fail(&mut self, stage: &'static str, message: impl ToString) {
        self.report.failures.push(FailureRow {
            size: self.unit.size,
            d_lo: self.unit.d_lo,
            d_hi: self.unit.d_hi,
            instance: self.unit.instance,
            stage,
            message: message.to_string(),
        });
    }
}

/// Runs one grid unit. Stage failures are recorded and end the unit early;
/// rows produced before the failure are kept.
pub fn run_unit(cfg: &BenchConfig, hw: &HardwareGraph, unit: Unit) -> UnitReport {
    let start = Instant::now();
    let mut ctx = Ctx {
        cfg,
        hw,
        unit,
        report: UnitReport::default(),
    };
    let timing = run_stages(&mut ctx);
    let mut report = ctx.report;
    if let Some(mut t) = timing {
        t.total_s = start.elapsed().as_secs_f64();
        report.timing = Some(t);
    }
    report
}

fn run_stages(ctx: &mut Ctx) -> Option<TimingRow> {
    let (cfg, hw, u) = (ctx.cfg, ctx.hw, ctx.unit);
    let (g, info) = match generate_random_instance(u.size, (u.d_lo, u.d_hi), u.seed) {
        Ok(x) => x,
        Err(e) => {
            ctx.fail("generate", e);
            return None;
        }
    };
    let formulated = build_cokplex_polynomial(&g, cfg.k, &PenaltyRule::default()).map(|p| qubo_to_ising(&quadratize(&p)));
    let logical = match formulated {
        Ok(p) => p,
        Err(e) => {
            ctx.fail("formulate", e);
            return None;
        }
    };
    let optimum = match brute_force_cokplex(&g, cfg.k, cfg.exact_cap) {
        Ok(o) => o,
        Err(e) => {
            ctx.fail("exact", e);
            return None;
        }
    };
    let ground = -optimum.weight;
    ctx.report.instance = Some(InstanceRow {
        size: u.size,
        d_lo: u.d_lo,
        d_hi: u.d_hi,
        instance: u.instance,
        seed: u.seed,
        edges: g.edge_count(),
        target_density: info.target_density,
        density: info.realized_density,
        optimum_weight: optimum.weight,
        ground_energy: ground,
        logical_vars: logical.num_variables(),
        couplings: logical.num_couplings(),
    });

    let t_embed = Instant::now();
    let ig = interaction_graph(&logical);
    let embed_cfg = EmbedderConfig {
        trials: cfg.trials,
        ..cfg.embedder
    };
    let pool = embedding_pool(&ig, hw, cfg.pool_size, cfg.pool_attempts, &embed_cfg, seed::derive(u.seed, EMBED_STAGE));
    let embed_s = t_embed.elapsed().as_secs_f64();
    let metrics: Vec<_> = pool.iter().map(|e| embedding_metrics(e).expect("pool members are valid")).collect();
    let best = (!pool.is_empty()).then(|| select_by_criterion(&pool, Criterion::Pq).expect("non-empty pool"));
    ctx.report.embed = Some(EmbedRow {
        size: u.size,
        d_lo: u.d_lo,
        d_hi: u.d_hi,
        instance: u.instance,
        embedded: best.is_some(),
        pool_size: pool.len(),
        best_qubits: best.map(|b| metrics[b].total_qubits),
        best_longest_chain: best.map(|b| metrics[b].longest_chain),
    });
    let mut timing = TimingRow {
        size: u.size,
        d_lo: u.d_lo,
        d_hi: u.d_hi,
        instance: u.instance,
        embed_s,
        theoretical_setup_s: None,
        empirical_setup_s: None,
        total_s: 0.0,
    };
    if pool.is_empty() {
        ctx.fail("embed", "no embedding found");
        return Some(timing);
    }

    let settings = cfg.settings();
    let mut chosen: BTreeMap<&'static str, usize> = BTreeMap::new();
    for sel in Selection::ALL {
        let pick = match sel.criterion() {
            Some(c) => Ok(select_by_criterion(&pool, c).expect("non-empty pool")),
            None => {
                let sel_cfg = EmpiricalSelection {
                    stage1_reads: cfg.selection_stage1_reads,
                    stage2_reads: cfg.selection_stage2_reads,
                    finalists: cfg.finalists,
                    sampler: cfg.sampler(),
                    method: cfg.param_method,
                    settings,
                    ground: Some(ground),
                    ..EmpiricalSelection::default()
                };
                select_empirically(&pool, &logical, hw, &sel_cfg, seed::derive(u.seed, SELECT_STAGE))
                    .map(|r| r.winner)
                    .map_err(|e| e.to_string())
            }
        };
        match pick {
            Ok(i) => {
                chosen.insert(sel.name(), i);
            }
            Err(e) => ctx.fail("select", format!("{}: {e}", sel.name())),
        }
    }

    // One scored run per distinct pool member under each setter, seeded by
    // the pool index so shared picks give identical rows.
    let mut theoretical: BTreeMap<usize, Scored> = BTreeMap::new();
    for &i in chosen.values() {
        if theoretical.contains_key(&i) {
            continue;
        }
        let t = Instant::now();
        let ei = match set_parameters_theoretical(&logical, &pool[i], hw, &settings.ranges, settings.eps) {
            Ok(ei) => ei,
            Err(e) => {
                ctx.fail("params", format!("theoretical on pool member {i}: {e}"));
                continue;
            }
        };
        let setup = t.elapsed().as_secs_f64();
        match sample_calls(&ei, &logical, cfg, seed::derive2(u.seed, RUN_STAGE, i as u64)) {
            Ok(decoded) => {
                theoretical.insert(i, Scored { ei, decoded });
                if Some(&i) == chosen.get(cfg.criterion.name()) {
                    timing.theoretical_setup_s = Some(setup);
                }
            }
            Err(e) => ctx.fail("decode", e),
        }
    }
    for sel in Selection::ALL {
        let Some(&i) = chosen.get(sel.name()) else { continue };
        let Some(s) = theoretical.get(&i) else { continue };
        let (p, theta) = tally(&s.decoded, ground, Stage::Refined, cfg.anneals);
        ctx.report.criteria.push(CriterionRow {
            size: u.size,
            d_lo: u.d_lo,
            d_hi: u.d_hi,
            instance: u.instance,
            criterion: sel.name(),
            pool_index: i,
            total_qubits: metrics[i].total_qubits,
            longest_chain: metrics[i].longest_chain,
            chain_std: metrics[i].chain_std,
            success_probability: p,
            r99: r99(theta),
        });
    }

    let Some(&main) = chosen.get(cfg.criterion.name()) else {
        return Some(timing);
    };
    let t = Instant::now();
    let empirical = set_parameters_empirical(
        &logical,
        &pool[main],
        hw,
        &settings.ranges,
        &settings.empirical,
        &settings.inner,
        seed::derive(u.seed, EMPIRICAL_STAGE),
    );
    timing.empirical_setup_s = Some(t.elapsed().as_secs_f64());
    let empirical = match empirical {
        Ok((ei, _)) => match sample_calls(&ei, &logical, cfg, seed::derive2(u.seed, RUN_STAGE, main as u64)) {
            Ok(decoded) => Some(Scored { ei, decoded }),
            Err(e) => {
                ctx.fail("decode", e);
                None
            }
        },
        Err(e) => {
            ctx.fail("params", format!("empirical: {e}"));
            None
        }
    };
    let alpha_difference = match (theoretical.get(&main), &empirical) {
        (Some(t), Some(e)) => Some(t.ei.alpha - e.ei.alpha),
        _ => None,
    };
    for (method, scored) in [(ParamMethod::Theoretical, theoretical.get(&main)), (ParamMethod::Empirical, empirical.as_ref())] {
        let row = match scored {
            Some(s) => param_row(&u, method, s, ground, cfg.anneals, alpha_difference),
            None => ParamRow {
                size: u.size,
                d_lo: u.d_lo,
                d_hi: u.d_hi,
                instance: u.instance,
                method: method.name(),
                status: "failed",
                alpha: None,
                chain_strength: None,
                fixed_vars: 0,
                success_probability: 0.0,
                mean_biggest_cluster: None,
                max_biggest_cluster: None,
                residual_energy: None,
                residual_absolute: None,
                alpha_difference,
            },
        };
        ctx.report.params.push(row);
    }

    let configured = match cfg.param_method {
        ParamMethod::Theoretical => theoretical.get(&main),
        ParamMethod::Empirical => empirical.as_ref(),
    };
    let Some(s) = configured else {
        return Some(timing);
    };
    let reads: usize = s.decoded.iter().map(DecodedSet::len).sum::<usize>().max(1);
    let weighted = |f: fn(&DecodedSet) -> f64| s.decoded.iter().map(|d| f(d) * d.len() as f64).sum::<f64>() / reads as f64;
    let hist = degree_distribution(&ig);
    ctx.report.percolation = Some(PercolationRow {
        size: u.size,
        d_lo: u.d_lo,
        d_hi: u.d_hi,
        instance: u.instance,
        p_bq: weighted(|d| d.p_bq),
        p_any_broken: weighted(|d| d.p_any_broken),
        p_c: percolation_threshold(&hist).ok(),
        mean_degree: hist.mean_degree(),
    });
    let (_, theta_mv) = tally(&s.decoded, ground, Stage::Mv, cfg.anneals);
    let (_, theta_greedy) = tally(&s.decoded, ground, Stage::Refined, cfg.anneals);
    ctx.report.r99 = Some(R99Row {
        size: u.size,
        d_lo: u.d_lo,
        d_hi: u.d_hi,
        instance: u.instance,
        theta_mv,
        r99_mv: r99(theta_mv),
        theta_greedy,
        r99_greedy: r99(theta_greedy),
    });
    let y = success_probability(&s.decoded, ground, 1e-9, Stage::Refined);
    ctx.report.posterior = Some(posterior(&y, cfg.anneals as u64).expect("counts bounded by reads"));
    Some(timing)
}

fn param_row(u: &Unit, method: ParamMethod, s: &Scored, ground: f64, n: usize, alpha_difference: Option<f64>) -> ParamRow {
    let (p, _) = tally(&s.decoded, ground, Stage::Refined, n);
    let clusters: Vec<usize> = s.decoded.iter().flat_map(|d| d.biggest_cluster.iter().copied()).collect();
    let best_mv = s
        .decoded
        .iter()
        .flat_map(|d| d.mv_energies.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let residual = best_mv.is_finite().then(|| residual_energy(best_mv, ground));
    let multi = crate::params::multi_qubit_chains(&s.ei);
    ParamRow {
        size: u.size,
        d_lo: u.d_lo,
        d_hi: u.d_hi,
        instance: u.instance,
        method: method.name(),
        status: "ok",
        alpha: Some(s.ei.alpha),
        chain_strength: multi.iter().filter_map(|v| s.ei.chain_strengths.get(v)).copied().reduce(f64::min),
        fixed_vars: s.ei.fixed.len(),
        success_probability: p,
        mean_biggest_cluster: (!clusters.is_empty()).then(|| clusters.iter().sum::<usize>() as f64 / clusters.len() as f64),
        max_biggest_cluster: clusters.iter().copied().max(),
        residual_energy: residual.map(|r| r.value),
        residual_absolute: residual.map(|r| r.absolute),
        alpha_difference,
    }
}

/// Runs every unit of the grid (in parallel, collected in grid order) and
/// the per-cell TTS bootstrap.
pub fn run_bench(cfg: &BenchConfig, hw: &HardwareGraph) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    let units = cfg.units();
    let reports: Vec<UnitReport> = units.par_iter().map(|&u| run_unit(cfg, hw, u)).collect();
    let mut out = BenchReport::default();
    let mut cells: Vec<((usize, u64, u64), Unit, Vec<crate::stats::PosteriorSummary>)> = Vec::new();
    for (u, r) in units.iter().zip(reports) {
        out.instances.extend(r.instance);
        out.embeddability.extend(r.embed);
        out.criteria.extend(r.criteria);
        out.params.extend(r.params);
        out.percolation.extend(r.percolation);
        out.r99.extend(r.r99);
        out.failures.extend(r.failures);
        out.timings.extend(r.timing);
        match cells.last_mut() {
            Some(c) if c.0 == u.cell() => c.2.extend(r.posterior),
            _ => cells.push((u.cell(), *u, r.posterior.into_iter().collect())),
        }
    }
    for (ci, (_, u, posts)) in cells.iter().enumerate() {
        if posts.is_empty() {
            continue;
        }
        for (qi, &q) in cfg.percentiles.iter().enumerate() {
            let tts_seed = seed::derive2(cfg.seed, TTS_TAG + qi as u64, ci as u64);
            let dist = bootstrap_tts(posts, q, cfg.bootstrap, cfg.tau_us, tts_seed).expect("validated inputs");
            out.tts.push(TtsRow {
                size: u.size,
                d_lo: u.d_lo,
                d_hi: u.d_hi,
                q,
                instances: posts.len(),
                mean_us: dist.mean_us,
                std_us: dist.std_us,
                median_us: median(&dist.values_us).expect("B >= 1"),
                clamped_draws: dist.clamped_draws,
            });
            out.tts_reports.push(((u.size, u.d_lo, u.d_hi), dist));
        }
    }
    Ok(out)
}

/// Per-cell embeddability rate and mean qubit count of the best embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbedSummaryRow {
    pub size: usize,
    pub d_lo: f64,
    pub d_hi: f64,
    pub instances: usize,
    pub embedded: usize,
    pub rate: f64,
    pub mean_qubits: Option<f64>,
}

pub fn embeddability_summary(rows: &[EmbedRow]) -> Vec<EmbedSummaryRow> {
    let mut out: Vec<EmbedSummaryRow> = Vec::new();
    let mut qubits: Vec<Vec<usize>> = Vec::new();
    for r in rows {
        let same = out.last().is_some_and(|s| s.size == r.size && s.d_lo == r.d_lo && s.d_hi == r.d_hi);
        if !same {
            out.push(EmbedSummaryRow {
                size: r.size,
                d_lo: r.d_lo,
                d_hi: r.d_hi,
                instances: 0,
                embedded: 0,
                rate: 0.0,
                mean_qubits: None,
            });
            qubits.push(Vec::new());
        }
        let s = out.last_mut().expect("pushed above");
        s.instances += 1;
        s.embedded += usize::from(r.embedded);
        qubits.last_mut().expect("pushed above").extend(r.best_qubits);
    }
    for (s, q) in out.iter_mut().zip(&qubits) {
        s.rate = s.embedded as f64 / s.instances as f64;
        s.mean_qubits = (!q.is_empty()).then(|| q.iter().sum::<usize>() as f64 / q.len() as f64);
    }
    out
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const OUTPUT_FILES: [&str; 9] = [
    "instances.csv",
    "embeddability.csv",
    "embeddability_summary.csv",
    "criteria.csv",
    "params_compare.csv",
    "percolation.csv",
    "r99.csv",
    "tts.csv",
    "failures.csv",
];

/// Writes every table of `report` under `dir`, plus `config.json`,
/// `timings.json` and one TTS report per cell and percentile in `tts/`.
pub fn write_report(dir: &Path, cfg: &BenchConfig, report: &BenchReport) -> Result<(), BenchError> {
    fs::create_dir_all(dir.join("tts"))?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg).expect("serializable"))?;
    write_csv(
        &dir.join("instances.csv"),
        &report.instances,
        &["size", "d_lo", "d_hi", "instance", "seed", "edges", "target_density", "density", "optimum_weight", "ground_energy", "logical_vars", "couplings"],
    )?;
    write_csv(
        &dir.join("embeddability.csv"),
        &report.embeddability,
        &["size", "d_lo", "d_hi", "instance", "embedded", "pool_size", "best_qubits", "best_longest_chain"],
    )?;
    write_csv(
        &dir.join("embeddability_summary.csv"),
        &embeddability_summary(&report.embeddability),
        &["size", "d_lo", "d_hi", "instances", "embedded", "rate", "mean_qubits"],
    )?;
    write_csv(
        &dir.join("criteria.csv"),
        &report.criteria,
        &["size", "d_lo", "d_hi", "instance", "criterion", "pool_index", "total_qubits", "longest_chain", "chain_std", "success_probability", "r99"],
    )?;
    write_csv(
        &dir.join("params_compare.csv"),
        &report.params,
        &[
            "size", "d_lo", "d_hi", "instance", "method", "status", "alpha", "chain_strength", "fixed_vars",
            "success_probability", "mean_biggest_cluster", "max_biggest_cluster", "residual_energy", "residual_absolute",
            "alpha_difference",
        ],
    )?;
    write_csv(
        &dir.join("percolation.csv"),
        &report.percolation,
        &["size", "d_lo", "d_hi", "instance", "p_bq", "p_any_broken", "p_c", "mean_degree"],
    )?;
    write_csv(
        &dir.join("r99.csv"),
        &report.r99,
        &["size", "d_lo", "d_hi", "instance", "theta_mv", "r99_mv", "theta_greedy", "r99_greedy"],
    )?;
    write_csv(
        &dir.join("tts.csv"),
        &report.tts,
        &["size", "d_lo", "d_hi", "q", "instances", "mean_us", "std_us", "median_us", "clamped_draws"],
    )?;
    write_csv(
        &dir.join("failures.csv"),
        &report.failures,
        &["size", "d_lo", "d_hi", "instance", "stage", "message"],
    )?;
    for ((size, lo, hi), dist) in &report.tts_reports {
        fs::write(dir.join("tts").join(format!("tts_{size}_{lo}_{hi}_q{}.json", dist.q)), dist.to_json())?;
    }
    fs::write(
        dir.join("timings.json"),
        serde_json::to_string_pretty(&report.timings).expect("serializable"),
    )?;
    Ok(())
}
