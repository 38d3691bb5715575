//! Classical solvers: simulated annealing as the annealer stand-in, exact
//! enumeration oracles, and greedy single-flip descent.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::LabelledGraph;
use crate::qubo::{qubo_to_ising, CompiledIsing, FormulationError, IsingProblem, QuboProblem, Var};
use crate::{seed, Qubit, Spin};

pub const DEFAULT_ENUMERATION_CAP: usize = 26;
pub const DEFAULT_COKPLEX_CAP: usize = 24;
/// Ground states beyond this many are counted but not materialised.
pub const GROUND_STATE_LIMIT: usize = 1 << 16;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("exhaustive search over {size} variables exceeds the cap of {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error(transparent)]
    Formulation(#[from] FormulationError),
}

/// Simulated-annealing schedule: `sweeps` Metropolis sweeps over a geometric
/// inverse-temperature ladder from `beta_min` to `beta_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub reads: usize,
    pub sweeps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            reads: 1000,
            sweeps: 1000,
            beta_min: 0.1,
            beta_max: 10.0,
        }
    }
}

impl SaParams {
    pub fn with_reads(self, reads: usize) -> Self {
        Self { reads, ..self }
    }

    pub fn betas(&self) -> Vec<f64> {
        if self.sweeps == 1 {
            return vec![self.beta_max];
        }
        let ratio = (self.beta_max / self.beta_min).powf(1.0 / (self.sweeps - 1) as f64);
        (0..self.sweeps).map(|i| self.beta_min * ratio.powi(i as i32)).collect()
    }
}

/// One row per read; `spins[r][i]` is the value of `vars[i]` in read `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<V: Var = Qubit> {
    pub vars: Vec<V>,
    pub spins: Vec<Vec<Spin>>,
    pub energies: Vec<f64>,
    pub params: SaParams,
    pub seed: u64,
    /// Host seconds per read. Informational only.
    pub wall_time_per_read: f64,
}

impl<V: Var> SampleSet<V> {
    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn index_of(&self, v: &V) -> Option<usize> {
        self.vars.binary_search(v).ok()
    }

    pub fn assignment(&self, read: usize) -> BTreeMap<V, Spin> {
        self.vars.iter().cloned().zip(self.spins[read].iter().copied()).collect()
    }

    pub fn min_energy(&self) -> Option<f64> {
        self.energies.iter().copied().reduce(f64::min)
    }
}

/// A physical-problem sampler, pluggable into the empirical parameter setter.
pub trait Sampler: Sync {
    fn sample(&self, p: &IsingProblem<Qubit>, seed: u64) -> SampleSet<Qubit>;
}

impl Sampler for SaParams {
    fn sample(&self, p: &IsingProblem<Qubit>, seed: u64) -> SampleSet<Qubit> {
        sa_sample(p, self, seed)
    }
}

fn anneal<V: Var>(c: &CompiledIsing<V>, betas: &[f64], read_seed: u64) -> Vec<Spin> {
    let mut rng = seed::rng(read_seed);
    let mut s: Vec<Spin> = (0..c.len()).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
    for &beta in betas {
        for i in 0..s.len() {
            let delta = c.flip_delta(i, &s);
            if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                s[i] = -s[i];
            }
        }
    }
    s
}

/// Independent annealing reads. Read `r` uses a sub-seed of `(seed, r)`, so
/// the result does not depend on the worker count.
pub fn sa_sample<V: Var>(p: &IsingProblem<V>, params: &SaParams, seed: u64) -> SampleSet<V> {
    let c = p.compile();
    let betas = params.betas();
    let start = Instant::now();
    let spins: Vec<Vec<Spin>> = (0..params.reads)
        .into_par_iter()
        .map(|r| anneal(&c, &betas, seed::derive(seed, r as u64)))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let energies = spins.iter().map(|s| c.energy(s)).collect();
    SampleSet {
        vars: c.vars().to_vec(),
        spins,
        energies,
        params: *params,
        seed,
        wall_time_per_read: if params.reads > 0 { elapsed / params.reads as f64 } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStates<V: Var> {
    pub vars: Vec<V>,
    pub energy: f64,
    /// Total number of ground states.
    pub count: u64,
    /// The ground states in enumeration order, at most [`GROUND_STATE_LIMIT`].
    pub states: Vec<Vec<Spin>>,
}

impl<V: Var> GroundStates<V> {
    pub fn assignments(&self) -> impl Iterator<Item = BTreeMap<V, Spin>> + '_ {
        self.states
            .iter()
            .map(|s| self.vars.iter().cloned().zip(s.iter().copied()).collect())
    }
}

/// Splits the interaction graph into an enumerated cover and an independent
/// remainder, taking max-degree vertices into the cover first.
fn split_cover<V: Var>(c: &CompiledIsing<V>) -> (Vec<usize>, Vec<usize>) {
    let n = c.len();
    let mut deg: Vec<usize> = (0..n).map(|i| c.neighbors(i).count()).collect();
    let mut in_cover = vec![false; n];
    loop {
        let Some((best, _)) = deg
            .iter()
            .enumerate()
            .filter(|&(i, &d)| !in_cover[i] && d > 0)
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        else {
            break;
        };
        in_cover[best] = true;
        for (j, _) in c.neighbors(best) {
            deg[j] = deg[j].saturating_sub(1);
        }
        deg[best] = 0;
    }
    let cover = (0..n).filter(|&i| in_cover[i]).collect();
    let rest = (0..n).filter(|&i| !in_cover[i]).collect();
    (cover, rest)
}

/// Exact minimum and argmin set.
///
/// Spins outside a vertex cover of the interaction graph are independent
/// given the cover, so only the cover is Gray-code enumerated and each
/// remaining spin is set to the sign opposite its local field (both values on
/// a zero field). `cap` bounds the enumerated cover size.
pub fn brute_force_ground<V: Var>(p: &IsingProblem<V>, cap: usize) -> Result<GroundStates<V>, SamplerError> {
    let c = p.compile();
    let n = c.len();
    let (cover, rest) = split_cover(&c);
    if cover.len() > cap || cover.len() >= 64 {
        return Err(SamplerError::CapExceeded { size: cover.len(), cap });
    }
    let scale = 1.0 + c.fields().iter().map(|h| h.abs()).sum::<f64>()
        + (0..n).flat_map(|i| c.neighbors(i).map(|(_, w)| w.abs())).sum::<f64>();
    let tol = 1e-9 * scale;

    let mut in_cover = vec![false; n];
    cover.iter().for_each(|&i| in_cover[i] = true);
    let mut s: Vec<Spin> = vec![1; n];
    // Local field of every spin induced by the cover only.
    let mut field: Vec<f64> = c.fields().to_vec();
    for &i in &cover {
        for (j, w) in c.neighbors(i) {
            field[j] += w;
        }
    }
    let mut cover_energy = c.offset();
    for &i in &cover {
        cover_energy += c.field(i);
        for (j, w) in c.neighbors(i) {
            if in_cover[j] && j > i {
                cover_energy += w;
            }
        }
    }
    let rest_min = |field: &[f64]| rest.iter().map(|&r| -field[r].abs()).sum::<f64>();

    let mut best = f64::INFINITY;
    let mut count: u64 = 0;
    let mut states: Vec<Vec<Spin>> = Vec::new();
    let mut record = |s: &mut Vec<Spin>, field: &[f64], energy: f64, best: &mut f64, count: &mut u64| {
        if energy < *best - tol {
            *best = energy;
            *count = 0;
            states.clear();
        }
        if energy > *best + tol {
            return;
        }
        let ties: Vec<usize> = rest.iter().copied().filter(|&r| field[r].abs() <= tol).collect();
        for &r in &rest {
            s[r] = if field[r] > 0.0 { -1 } else { 1 };
        }
        *count = count.saturating_add(1u64 << ties.len().min(63));
        for m in 0..1u64 << ties.len().min(63) {
            if states.len() >= GROUND_STATE_LIMIT {
                break;
            }
            for (b, &r) in ties.iter().enumerate() {
                s[r] = if m >> b & 1 == 1 { -1 } else { 1 };
            }
            states.push(s.clone());
        }
    };

    record(&mut s, &field, cover_energy + rest_min(&field), &mut best, &mut count);
    for step in 1u64..(1u64 << cover.len()) {
        let i = cover[step.trailing_zeros() as usize];
        let old = f64::from(s[i]);
        // Cover-internal energy change: -2 s_i (h_i + sum over cover neighbours).
        let mut internal = c.field(i);
        for (j, w) in c.neighbors(i) {
            if in_cover[j] {
                internal += w * f64::from(s[j]);
            }
        }
        cover_energy -= 2.0 * old * internal;
        s[i] = -s[i];
        for (j, w) in c.neighbors(i) {
            field[j] -= 2.0 * old * w;
        }
        record(&mut s, &field, cover_energy + rest_min(&field), &mut best, &mut count);
    }

    // Re-evaluate exactly to shed accumulated rounding.
    let exact: Vec<f64> = states.iter().map(|st| c.energy(st)).collect();
    let energy = exact.iter().copied().fold(f64::INFINITY, f64::min);
    let energy = if n == 0 { c.offset() } else { energy };
    Ok(GroundStates {
        vars: c.vars().to_vec(),
        energy,
        count,
        states,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboGround {
    pub energy: f64,
    pub states: Vec<BTreeMap<String, u8>>,
}

/// Exact QUBO minimum via the Ising oracle.
pub fn brute_force_qubo(q: &QuboProblem<String>, cap: usize) -> Result<QuboGround, SamplerError> {
    let ground = brute_force_ground(&qubo_to_ising(q), cap)?;
    let states = ground
        .assignments()
        .map(|a| a.into_iter().map(|(v, s)| (v, u8::from(s == -1))).collect())
        .collect();
    Ok(QuboGround {
        energy: ground.energy,
        states,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CokplexOptimum {
    pub weight: f64,
    pub sets: Vec<BTreeSet<String>>,
}

/// True iff every member of `set` has at most `k - 1` neighbours in `set`.
pub fn is_cokplex(g: &LabelledGraph, set: &BTreeSet<usize>, k: usize) -> bool {
    set.iter()
        .all(|&v| g.neighbors(v).iter().filter(|u| set.contains(u)).count() < k)
}

struct CokplexSearch<'g> {
    g: &'g LabelledGraph,
    k: usize,
    suffix_weight: Vec<f64>,
    inside: Vec<usize>,
    chosen: Vec<bool>,
    best: f64,
    sets: Vec<Vec<usize>>,
    tol: f64,
}

impl CokplexSearch<'_> {
    fn go(&mut self, i: usize, weight: f64) {
        let n = self.g.vertex_count();
        if weight + self.suffix_weight[i] < self.best - self.tol {
            return;
        }
        if i == n {
            if weight > self.best + self.tol {
                self.best = weight;
                self.sets.clear();
            }
            self.sets.push((0..n).filter(|&v| self.chosen[v]).collect());
            return;
        }
        let nb = self.g.neighbors(i);
        let fits = self.inside[i] < self.k && nb.iter().all(|&u| !self.chosen[u] || self.inside[u] + 1 < self.k);
        if fits {
            self.chosen[i] = true;
            nb.iter().for_each(|&u| self.inside[u] += 1);
            self.go(i + 1, weight + self.g.vertex(i).weight);
            nb.iter().for_each(|&u| self.inside[u] -= 1);
            self.chosen[i] = false;
        }
        self.go(i + 1, weight);
    }
}

/// Maximum weighted co-k-plex by backtracking over feasible vertex sets.
pub fn brute_force_cokplex(g: &LabelledGraph, k: usize, cap: usize) -> Result<CokplexOptimum, SamplerError> {
    if k == 0 {
        return Err(FormulationError::InvalidK.into());
    }
    let n = g.vertex_count();
    if n > cap {
        return Err(SamplerError::CapExceeded { size: n, cap });
    }
    let mut suffix_weight = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix_weight[i] = suffix_weight[i + 1] + g.vertex(i).weight;
    }
    let mut search = CokplexSearch {
        g,
        k,
        tol: 1e-9 * (1.0 + suffix_weight[0]),
        suffix_weight,
        inside: vec![0; n],
        chosen: vec![false; n],
        best: f64::NEG_INFINITY,
        sets: Vec::new(),
    };
    search.go(0, 0.0);
    let best = search.best.max(0.0);
    let sets = search
        .sets
        .into_iter()
        .map(|s| s.into_iter().map(|v| g.vertex(v).id.clone()).collect())
        .collect();
    Ok(CokplexOptimum { weight: best, sets })
}

/// Steepest single-flip descent in place. Among equally good flips the lowest
/// variable index wins.
pub fn greedy_descent_compiled<V: Var>(c: &CompiledIsing<V>, s: &mut [Spin]) {
    loop {
        let mut best = (-1e-12, None);
        for i in 0..s.len() {
            let d = c.flip_delta(i, s);
            if d < best.0 {
                best = (d, Some(i));
            }
        }
        match best.1 {
            Some(i) => s[i] = -s[i],
            None => return,
        }
    }
}

pub fn greedy_descent<V: Var>(p: &IsingProblem<V>, state: &BTreeMap<V, Spin>) -> Result<BTreeMap<V, Spin>, SamplerError> {
    let c = p.compile();
    let mut s = c.from_assignment(state)?;
    greedy_descent_compiled(&c, &mut s);
    Ok(c.to_assignment(&s))
}
