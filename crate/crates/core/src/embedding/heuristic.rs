use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{validate_embedding, Embedding};
use crate::chimera::HardwareGraph;
use crate::graph::LabelledGraph;
use crate::{seed, Qubit};

const POOL_TAG: u64 = 0x504f_4f4c;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub trials: usize,
    /// Rip-up and reroute passes allowed while chains still overlap.
    pub repair_rounds: usize,
    /// A trial is abandoned after this many passes without a new lowest overlap.
    pub patience: usize,
    /// Overlap-free passes that try to shorten chains once valid.
    pub tighten_rounds: usize,
    /// Initial overlap penalty and its per-pass growth.
    pub penalty: f64,
    pub penalty_growth: f64,
    /// Congestion cost added to a qubit after every pass it is overused.
    pub history: f64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            repair_rounds: 48,
            patience: 8,
            tighten_rounds: 4,
            penalty: 1.0,
            penalty_growth: 1.2,
            history: 2.0,
        }
    }
}

/// Best embedding over the trials, or `None` when every trial failed.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedOutcome {
    pub embedding: Option<Embedding>,
    pub successful_trials: usize,
    pub trials: usize,
}

impl EmbedOutcome {
    pub fn success(&self) -> bool {
        self.embedding.is_some()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, Qubit);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Router<'a> {
    hw: &'a HardwareGraph,
    logical: &'a LabelledGraph,
    chains: Vec<Vec<Qubit>>,
    usage: Vec<u32>,
    hist: Vec<f64>,
    usable: Vec<Qubit>,
    // Dijkstra scratch, one row per placed neighbour.
    dist: Vec<Vec<f64>>,
    parent: Vec<Vec<Qubit>>,
    owned_by: Vec<u32>,
    heap: BinaryHeap<Entry>,
}

const NONE: Qubit = Qubit::MAX;

impl<'a> Router<'a> {
    fn new(hw: &'a HardwareGraph, logical: &'a LabelledGraph) -> Self {
        Self {
            hw,
            logical,
            chains: vec![Vec::new(); logical.vertex_count()],
            usage: vec![0; hw.num_qubits()],
            hist: vec![0.0; hw.num_qubits()],
            usable: hw.usable_qubits().collect(),
            dist: Vec::new(),
            parent: Vec::new(),
            owned_by: vec![u32::MAX; hw.num_qubits()],
            heap: BinaryHeap::new(),
        }
    }

    fn weight(&self, q: Qubit, penalty: Option<f64>) -> f64 {
        match (self.usage[q], penalty) {
            (0, None) => 1.0,
            (0, Some(_)) => 1.0 + self.hist[q],
            (_, None) => f64::INFINITY,
            (u, Some(lambda)) => (1.0 + self.hist[q]) * (1.0 + lambda * f64::from(u * u)),
        }
    }

    fn rip_up(&mut self, x: usize) -> Vec<Qubit> {
        let old = std::mem::take(&mut self.chains[x]);
        for &q in &old {
            self.usage[q] -= 1;
        }
        old
    }

    fn place(&mut self, x: usize, chain: Vec<Qubit>) {
        for &q in &chain {
            self.usage[q] += 1;
        }
        self.chains[x] = chain;
    }

    fn overlap(&self) -> usize {
        self.usage.iter().map(|&u| u.saturating_sub(1) as usize).sum()
    }

    /// Shortest paths into every qubit from the boundary of chain `y`.
    fn dijkstra(&mut self, row: usize, y: usize, penalty: Option<f64>) {
        let nq = self.hw.num_qubits();
        if self.dist.len() <= row {
            self.dist.push(vec![f64::INFINITY; nq]);
            self.parent.push(vec![NONE; nq]);
        }
        let mut dist = std::mem::take(&mut self.dist[row]);
        let mut parent = std::mem::take(&mut self.parent[row]);
        dist.fill(f64::INFINITY);
        parent.fill(NONE);
        for &q in &self.chains[y] {
            self.owned_by[q] = y as u32;
        }
        self.heap.clear();
        for &c in &self.chains[y] {
            for &n in self.hw.neighbors(c) {
                if self.owned_by[n] == y as u32 {
                    continue;
                }
                let w = self.weight(n, penalty);
                if w < dist[n] {
                    dist[n] = w;
                    self.heap.push(Entry(w, n));
                }
            }
        }
        while let Some(Entry(d, q)) = self.heap.pop() {
            if d > dist[q] {
                continue;
            }
            for &n in self.hw.neighbors(q) {
                if self.owned_by[n] == y as u32 {
                    continue;
                }
                let nd = d + self.weight(n, penalty);
                if nd < dist[n] {
                    dist[n] = nd;
                    parent[n] = q;
                    self.heap.push(Entry(nd, n));
                }
            }
        }
        for &q in &self.chains[y] {
            self.owned_by[q] = u32::MAX;
        }
        self.dist[row] = dist;
        self.parent[row] = parent;
    }

    /// Builds a chain for `x` that touches every placed neighbour chain.
    /// `penalty = None` forbids qubits used by other chains.
    fn route(&mut self, x: usize, penalty: Option<f64>, rng: &mut ChaCha8Rng) -> Option<Vec<Qubit>> {
        let placed: Vec<usize> = self
            .logical
            .neighbors(x)
            .iter()
            .copied()
            .filter(|&y| !self.chains[y].is_empty())
            .collect();
        if placed.is_empty() {
            let central = |q: Qubit| {
                let c = self.hw.coord(q);
                let (m, n) = (self.hw.rows(), self.hw.cols());
                4 * c.row + 4 >= m && 4 * c.row < 3 * m && 4 * c.col + 4 >= n && 4 * c.col < 3 * n
            };
            let mut free: Vec<Qubit> = self.usable.iter().copied().filter(|&q| self.usage[q] == 0 && central(q)).collect();
            if free.is_empty() {
                free = self.usable.iter().copied().filter(|&q| self.usage[q] == 0).collect();
            }
            let pick = if free.is_empty() {
                penalty?;
                self.usable[rng.random_range(0..self.usable.len())]
            } else {
                free[rng.random_range(0..free.len())]
            };
            return Some(vec![pick]);
        }
        for (row, &y) in placed.iter().enumerate() {
            self.dijkstra(row, y, penalty);
        }
        let k = placed.len() as f64;
        let mut best = f64::INFINITY;
        let mut roots: Vec<Qubit> = Vec::new();
        for &q in &self.usable {
            let mut total = 0.0;
            for row in 0..placed.len() {
                total += self.dist[row][q];
            }
            if !total.is_finite() {
                continue;
            }
            let cost = total - (k - 1.0) * self.weight(q, penalty);
            if cost < best - 1e-9 {
                best = cost;
                roots.clear();
            }
            if cost <= best + 1e-9 {
                roots.push(q);
            }
        }
        if roots.is_empty() {
            return None;
        }
        let root = roots[rng.random_range(0..roots.len())];
        let mut chain = vec![root];
        for row in 0..placed.len() {
            let mut q = self.parent[row][root];
            while q != NONE {
                chain.push(q);
                q = self.parent[row][q];
            }
        }
        chain.sort_unstable();
        chain.dedup();
        self.prune(&mut chain, &placed);
        Some(chain)
    }

    /// Drops leaf qubits whose removal keeps contact with every placed
    /// neighbour chain.
    fn prune(&mut self, chain: &mut Vec<Qubit>, placed: &[usize]) {
        for (i, &y) in placed.iter().enumerate() {
            for &q in &self.chains[y] {
                self.owned_by[q] = i as u32;
            }
        }
        let touches = |r: &Self, q: Qubit| -> Vec<u32> {
            let mut t: Vec<u32> = r.hw.neighbors(q).iter().map(|&n| r.owned_by[n]).filter(|&o| o != u32::MAX).collect();
            t.sort_unstable();
            t.dedup();
            t
        };
        let mut contacts = vec![0usize; placed.len()];
        for &q in chain.iter() {
            for t in touches(self, q) {
                contacts[t as usize] += 1;
            }
        }
        let mut changed = true;
        while changed && chain.len() > 1 {
            changed = false;
            let mut i = 0;
            while i < chain.len() && chain.len() > 1 {
                let q = chain[i];
                let inner = self.hw.neighbors(q).iter().filter(|n| chain.binary_search(n).is_ok()).count();
                let t = touches(self, q);
                if inner <= 1 && t.iter().all(|&y| contacts[y as usize] > 1) {
                    for y in t {
                        contacts[y as usize] -= 1;
                    }
                    chain.remove(i);
                    changed = true;
                } else {
                    i += 1;
                }
            }
        }
        for &y in placed {
            for &q in &self.chains[y] {
                self.owned_by[q] = u32::MAX;
            }
        }
    }

    /// Breadth-first over the logical graph from random roots, neighbours
    /// visited in random order.
    fn placement_order(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = self.logical.vertex_count();
        let mut starts: Vec<usize> = (0..n).collect();
        starts.shuffle(rng);
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for s in starts {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut head = order.len();
            order.push(s);
            while head < order.len() {
                let mut next: Vec<usize> = self.logical.neighbors(order[head]).iter().copied().filter(|&y| !seen[y]).collect();
                next.shuffle(rng);
                for y in next {
                    seen[y] = true;
                    order.push(y);
                }
                head += 1;
            }
        }
        order
    }

    fn run(mut self, cfg: &EmbedderConfig, rng: &mut ChaCha8Rng) -> Option<Embedding> {
        let n = self.logical.vertex_count();
        if n == 0 {
            return Some(Embedding::new());
        }
        if self.usable.is_empty() {
            return None;
        }
        let mut order = self.placement_order(rng);
        for &x in &order {
            let chain = self.route(x, Some(cfg.penalty), rng)?;
            self.place(x, chain);
        }
        let mut lambda = cfg.penalty;
        let mut round = 0;
        let (mut best, mut since) = (usize::MAX, 0);
        while self.overlap() > 0 {
            if self.overlap() < best {
                (best, since) = (self.overlap(), 0);
            } else {
                since += 1;
                if since > cfg.patience {
                    return None;
                }
            }
            if round == cfg.repair_rounds {
                return None;
            }
            round += 1;
            lambda *= cfg.penalty_growth;
            for q in 0..self.usage.len() {
                if self.usage[q] > 1 {
                    self.hist[q] += cfg.history;
                    for &n in self.hw.neighbors(q) {
                        self.hist[n] += 0.5 * cfg.history;
                    }
                }
            }
            order.shuffle(rng);
            for &x in &order {
                self.rip_up(x);
                let chain = self.route(x, Some(lambda), rng)?;
                self.place(x, chain);
            }
        }
        for _ in 0..cfg.tighten_rounds {
            order.shuffle(rng);
            for &x in &order {
                let old = self.rip_up(x);
                match self.route(x, None, rng) {
                    Some(chain) if chain.len() <= old.len() => self.place(x, chain),
                    _ => self.place(x, old),
                }
            }
        }
        let mut emb = Embedding::new();
        for (x, chain) in self.chains.into_iter().enumerate() {
            emb.insert(self.logical.vertex(x).id.clone(), chain);
        }
        Some(emb)
    }
}

fn one_trial(logical: &LabelledGraph, hw: &HardwareGraph, cfg: &EmbedderConfig, trial_seed: u64) -> Option<Embedding> {
    let mut rng = seed::rng(trial_seed);
    let emb = Router::new(hw, logical).run(cfg, &mut rng)?;
    // Returned embeddings are always checked against the invariants.
    validate_embedding(&emb, logical, hw).is_empty().then_some(emb)
}

pub fn find_embedding(logical: &LabelledGraph, hw: &HardwareGraph, trials: usize, seed: u64) -> EmbedOutcome {
    find_embedding_with(
        logical,
        hw,
        &EmbedderConfig {
            trials,
            ..EmbedderConfig::default()
        },
        seed,
    )
}

/// Runs `cfg.trials` independent trials (trial `t` seeded from `(seed, t)`)
/// and keeps the valid embedding with the fewest qubits, earliest trial first.
pub fn find_embedding_with(logical: &LabelledGraph, hw: &HardwareGraph, cfg: &EmbedderConfig, seed: u64) -> EmbedOutcome {
    let trials = cfg.trials.max(1);
    let mut best: Option<Embedding> = None;
    let mut successes = 0;
    for t in 0..trials {
        if let Some(e) = one_trial(logical, hw, cfg, seed::derive(seed, t as u64)) {
            successes += 1;
            if best.as_ref().is_none_or(|b| e.total_qubits() < b.total_qubits()) {
                best = Some(e);
            }
        }
    }
    EmbedOutcome {
        embedding: best,
        successful_trials: successes,
        trials,
    }
}

/// Up to `size` distinct embeddings, each the result of one
/// [`find_embedding_with`] call, giving up after `max_attempts` calls.
pub fn embedding_pool(
    logical: &LabelledGraph,
    hw: &HardwareGraph,
    size: usize,
    max_attempts: usize,
    cfg: &EmbedderConfig,
    seed: u64,
) -> Vec<Embedding> {
    let mut pool = Vec::new();
    let mut seen = HashSet::new();
    for a in 0..max_attempts {
        if pool.len() == size {
            break;
        }
        let out = find_embedding_with(logical, hw, cfg, seed::derive2(seed, POOL_TAG, a as u64));
        if let Some(e) = out.embedding {
            if seen.insert(e.clone()) {
                pool.push(e);
            }
        }
    }
    pool
}
