//! Minor embeddings of logical graphs into a [`HardwareGraph`]: the
//! chain-growth embedder, validation, chain metrics and the selection
//! strategies.

mod heuristic;
mod select;

pub use heuristic::{embedding_pool, find_embedding, find_embedding_with, EmbedOutcome, EmbedderConfig};
pub use select::{select_empirically, EmpiricalSelection, SelectionReport, TargetSource};

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chimera::HardwareGraph;
use crate::graph::LabelledGraph;
use crate::qubo::IsingProblem;
use crate::Qubit;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding pool is empty")]
    EmptyPool,
    #[error("embedding has no chains")]
    NoChains,
    #[error("invalid embedding: {0}")]
    Invalid(String),
    #[error("malformed embedding file: {0}")]
    Syntax(String),
    #[error("every embedding in the pool failed to score")]
    NothingScored,
}

/// Logical variable to physical chain. Chains are stored sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Embedding {
    pub chains: BTreeMap<String, Vec<Qubit>>,
}

impl Embedding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, var: impl Into<String>, mut chain: Vec<Qubit>) {
        chain.sort_unstable();
        chain.dedup();
        self.chains.insert(var.into(), chain);
    }

    pub fn chain(&self, var: &str) -> Option<&[Qubit]> {
        self.chains.get(var).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn total_qubits(&self) -> usize {
        self.chains.values().map(Vec::len).sum()
    }

    /// Qubit to owning variable. With overlapping chains the last owner wins.
    pub fn owners(&self) -> HashMap<Qubit, &str> {
        self.chains
            .iter()
            .flat_map(|(v, c)| c.iter().map(move |&q| (q, v.as_str())))
            .collect()
    }

    /// Copy holding only the chains of `vars`.
    pub fn restricted<'a>(&self, vars: impl IntoIterator<Item = &'a String>) -> Embedding {
        let chains = vars
            .into_iter()
            .filter_map(|v| self.chains.get(v).map(|c| (v.clone(), c.clone())))
            .collect();
        Embedding { chains }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("embedding serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EmbeddingError> {
        let mut e: Embedding = serde_json::from_str(text).map_err(|e| EmbeddingError::Syntax(e.to_string()))?;
        e.chains.values_mut().for_each(|c| {
            c.sort_unstable();
            c.dedup();
        });
        Ok(e)
    }
}

pub fn pool_to_json(pool: &[Embedding]) -> String {
    serde_json::to_string(pool).expect("pool serializes")
}

pub fn pool_from_json(text: &str) -> Result<Vec<Embedding>, EmbeddingError> {
    serde_json::from_str(text).map_err(|e| EmbeddingError::Syntax(e.to_string()))
}

/// The interaction graph of an Ising problem: one vertex per variable, one
/// edge per non-zero coupler.
pub fn interaction_graph(p: &IsingProblem<String>) -> LabelledGraph {
    let mut g = LabelledGraph::new();
    for v in p.variables() {
        g.add_vertex(v.clone(), "", 1.0).expect("variables are unique");
    }
    for (u, v, _) in p.couplings() {
        g.add_edge(u, v, "").expect("couplers are simple");
    }
    g
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    MissingChain(String),
    UnknownVariable(String),
    EmptyChain(String),
    Overlap { qubit: Qubit, first: String, second: String },
    DisabledQubit { var: String, qubit: Qubit },
    DisconnectedChain(String),
    UncoveredEdge(String, String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingChain(v) => write!(f, "missing chain for {v}"),
            Violation::UnknownVariable(v) => write!(f, "chain for unknown variable {v}"),
            Violation::EmptyChain(v) => write!(f, "empty chain for {v}"),
            Violation::Overlap { qubit, first, second } => write!(f, "overlap: qubit {qubit} in {first} and {second}"),
            Violation::DisabledQubit { var, qubit } => write!(f, "disabled qubit {qubit} in chain {var}"),
            Violation::DisconnectedChain(v) => write!(f, "disconnected chain {v}"),
            Violation::UncoveredEdge(u, v) => write!(f, "no usable coupler between chains {u} and {v}"),
        }
    }
}

fn chain_is_connected(chain: &[Qubit], hw: &HardwareGraph) -> bool {
    let Some(&start) = chain.first() else {
        return false;
    };
    let members: BTreeSet<Qubit> = chain.iter().copied().collect();
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(q) = queue.pop_front() {
        for &n in hw.neighbors(q) {
            if members.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == members.len()
}

/// Lists every violated embedding invariant; an empty list means valid.
/// Connectivity and coverage only count usable couplers.
pub fn validate_embedding(emb: &Embedding, logical: &LabelledGraph, hw: &HardwareGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for v in logical.vertices() {
        if !emb.chains.contains_key(&v.id) {
            out.push(Violation::MissingChain(v.id.clone()));
        }
    }
    let mut owner: HashMap<Qubit, &str> = HashMap::new();
    for (var, chain) in &emb.chains {
        if logical.index_of(var).is_none() {
            out.push(Violation::UnknownVariable(var.clone()));
        }
        if chain.is_empty() {
            out.push(Violation::EmptyChain(var.clone()));
            continue;
        }
        for &q in chain {
            if !hw.is_usable(q) {
                out.push(Violation::DisabledQubit { var: var.clone(), qubit: q });
            }
            if let Some(prev) = owner.insert(q, var) {
                out.push(Violation::Overlap {
                    qubit: q,
                    first: prev.to_string(),
                    second: var.clone(),
                });
            }
        }
        if !chain_is_connected(chain, hw) {
            out.push(Violation::DisconnectedChain(var.clone()));
        }
    }
    for e in logical.edges() {
        let (u, v) = (&logical.vertex(e.u).id, &logical.vertex(e.v).id);
        let (Some(cu), Some(cv)) = (emb.chain(u), emb.chain(v)) else {
            continue;
        };
        let covered = cu
            .iter()
            .any(|&a| hw.neighbors(a).iter().any(|b| cv.binary_search(b).is_ok()));
        if !covered {
            out.push(Violation::UncoveredEdge(u.clone(), v.clone()));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMetrics {
    pub total_qubits: usize,
    pub longest_chain: usize,
    /// Population standard deviation of the chain sizes.
    pub chain_std: f64,
}

pub fn embedding_metrics(emb: &Embedding) -> Result<EmbeddingMetrics, EmbeddingError> {
    if emb.is_empty() {
        return Err(EmbeddingError::NoChains);
    }
    let mut seen = BTreeSet::new();
    for (var, chain) in &emb.chains {
        if chain.is_empty() {
            return Err(EmbeddingError::Invalid(format!("empty chain for {var}")));
        }
        if let Some(&q) = chain.iter().find(|&&q| !seen.insert(q)) {
            return Err(EmbeddingError::Invalid(format!("qubit {q} shared by several chains")));
        }
    }
    let sizes: Vec<f64> = emb.chains.values().map(|c| c.len() as f64).collect();
    let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
    let var = sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / sizes.len() as f64;
    Ok(EmbeddingMetrics {
        total_qubits: emb.total_qubits(),
        longest_chain: emb.chains.values().map(Vec::len).max().unwrap_or(0),
        chain_std: var.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Fewest physical qubits.
    #[serde(rename = "pq")]
    Pq,
    /// Shortest longest chain.
    #[serde(rename = "lch")]
    LCh,
    /// Smallest chain-size standard deviation.
    #[serde(rename = "std")]
    Std,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Pq, Criterion::LCh, Criterion::Std];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Pq => "pq",
            Criterion::LCh => "lch",
            Criterion::Std => "std",
        }
    }

    pub fn score(self, m: &EmbeddingMetrics) -> f64 {
        match self {
            Criterion::Pq => m.total_qubits as f64,
            Criterion::LCh => m.longest_chain as f64,
            Criterion::Std => m.chain_std,
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pq" => Ok(Criterion::Pq),
            "lch" => Ok(Criterion::LCh),
            "std" => Ok(Criterion::Std),
            other => Err(format!("unknown criterion {other:?}")),
        }
    }
}

/// Index of the pool member minimising `criterion`; the first one wins ties.
pub fn select_by_criterion(pool: &[Embedding], criterion: Criterion) -> Result<usize, EmbeddingError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in pool.iter().enumerate() {
        let s = criterion.score(&embedding_metrics(e)?);
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(EmbeddingError::EmptyPool)
}
