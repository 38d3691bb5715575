use serde::{Deserialize, Serialize};

use super::{Embedding, EmbeddingError};
use crate::chimera::HardwareGraph;
use crate::decode::{decode_and_refine, DecodedSet};
use crate::params::{set_parameters, ParamMethod, ParamSettings};
use crate::qubo::IsingProblem;
use crate::sampler::{sa_sample, SaParams};
use crate::seed;
use crate::stats::Stage;

const STAGE1_TAG: u64 = 1;
const STAGE2_TAG: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSelection {
    pub stage1_reads: usize,
    pub stage2_reads: usize,
    pub finalists: usize,
    pub sampler: SaParams,
    pub method: ParamMethod,
    pub settings: ParamSettings,
    /// Known logical ground energy; otherwise the best energy seen is used.
    pub ground: Option<f64>,
    pub stage: Stage,
    pub tol: f64,
}

impl Default for EmpiricalSelection {
    fn default() -> Self {
        Self {
            stage1_reads: 1000,
            stage2_reads: 1000,
            finalists: 5,
            sampler: SaParams::default(),
            method: ParamMethod::Theoretical,
            settings: ParamSettings::default(),
            ground: None,
            stage: Stage::Mv,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    Known,
    BestFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub winner: usize,
    /// Stage-1 success probability per pool member; `None` if it failed.
    pub stage1: Vec<Option<f64>>,
    /// `(pool index, stage-2 success probability)` of every finalist.
    pub stage2: Vec<(usize, f64)>,
    pub target: f64,
    pub target_source: TargetSource,
    pub failures: Vec<(usize, String)>,
}

fn energies(d: &DecodedSet, stage: Stage) -> &[f64] {
    match stage {
        Stage::Mv => &d.mv_energies,
        Stage::Refined => &d.refined_energies,
    }
}

fn run(
    logical: &IsingProblem<String>,
    emb: &Embedding,
    hw: &HardwareGraph,
    cfg: &EmpiricalSelection,
    reads: usize,
    unit_seed: u64,
) -> Result<Vec<f64>, String> {
    let ei = set_parameters(cfg.method, logical, emb, hw, &cfg.settings, seed::derive(unit_seed, 0))
        .map_err(|e| e.to_string())?;
    let samples = sa_sample(&ei.physical, &cfg.sampler.with_reads(reads), seed::derive(unit_seed, 1));
    let decoded = decode_and_refine(&samples, &ei.embedding, logical, &ei.fixed, seed::derive(unit_seed, 2))
        .map_err(|e| e.to_string())?;
    Ok(energies(&decoded, cfg.stage).to_vec())
}

fn rate(energies: &[f64], target: f64, tol: f64) -> f64 {
    if energies.is_empty() {
        return 0.0;
    }
    energies.iter().filter(|&&e| e <= target + tol).count() as f64 / energies.len() as f64
}

/// Two-stage tournament: every embedding is scored with `stage1_reads`
/// anneals, the best `finalists` are rescored with `stage2_reads` fresh
/// anneals and the highest stage-2 success probability wins (earliest pool
/// index on ties).
pub fn select_empirically(
    pool: &[Embedding],
    logical: &IsingProblem<String>,
    hw: &HardwareGraph,
    cfg: &EmpiricalSelection,
    seed: u64,
) -> Result<SelectionReport, EmbeddingError> {
    if pool.is_empty() {
        return Err(EmbeddingError::EmptyPool);
    }
    let mut failures = Vec::new();
    let stage1: Vec<Option<Vec<f64>>> = pool
        .iter()
        .enumerate()
        .map(|(i, e)| match run(logical, e, hw, cfg, cfg.stage1_reads, seed::derive2(seed, STAGE1_TAG, i as u64)) {
            Ok(es) => Some(es),
            Err(msg) => {
                failures.push((i, msg));
                None
            }
        })
        .collect();
    let best_seen = |runs: &mut dyn Iterator<Item = &Vec<f64>>| runs.flatten().copied().fold(f64::INFINITY, f64::min);
    let (mut target, target_source) = match cfg.ground {
        Some(g) => (g, TargetSource::Known),
        None => (best_seen(&mut stage1.iter().flatten()), TargetSource::BestFound),
    };
    if !target.is_finite() && stage1.iter().all(Option::is_none) {
        return Err(EmbeddingError::NothingScored);
    }

    let scores1: Vec<Option<f64>> = stage1
        .iter()
        .map(|r| r.as_ref().map(|es| rate(es, target, cfg.tol)))
        .collect();
    let mut ranked: Vec<usize> = (0..pool.len()).filter(|&i| scores1[i].is_some()).collect();
    ranked.sort_by(|&a, &b| scores1[b].unwrap().total_cmp(&scores1[a].unwrap()).then(a.cmp(&b)));
    ranked.truncate(cfg.finalists.max(1));
    ranked.sort_unstable();

    let mut stage2_runs = Vec::new();
    for &i in &ranked {
        match run(logical, &pool[i], hw, cfg, cfg.stage2_reads, seed::derive2(seed, STAGE2_TAG, i as u64)) {
            Ok(es) => stage2_runs.push((i, es)),
            Err(msg) => failures.push((i, msg)),
        }
    }
    if target_source == TargetSource::BestFound {
        target = target.min(best_seen(&mut stage2_runs.iter().map(|(_, es)| es)));
    }
    let stage1 = stage1
        .iter()
        .map(|r| r.as_ref().map(|es| rate(es, target, cfg.tol)))
        .collect();
    let stage2: Vec<(usize, f64)> = stage2_runs.iter().map(|(i, es)| (*i, rate(es, target, cfg.tol))).collect();
    let winner = stage2
        .iter()
        .fold(None::<(usize, f64)>, |best, &(i, p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((i, p)),
        })
        .map(|(i, _)| i)
        .ok_or(EmbeddingError::NothingScored)?;
    Ok(SelectionReport {
        winner,
        stage1,
        stage2,
        target,
        target_source,
        failures,
    })
}
