//! Parameter setting: turn a logical Ising problem and an embedding into a
//! physical Ising problem within the hardware ranges.
//!
//! Two setters are provided. [`set_parameters_theoretical`] preprocesses the
//! problem, distributes fields so that chains are ground-state preserving and
//! pins every chain coupler to `-J_max`. [`set_parameters_empirical`] splits
//! fields evenly and strengthens a uniform chain coupler until an inner
//! sampler stops producing broken chains.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::chimera::HardwareGraph;
use crate::decode::broken_qubits_indexed;
use crate::embedding::Embedding;
use crate::qubo::{FormulationError, IsingProblem};
use crate::sampler::{SaParams, SampleSet, Sampler};
use crate::{seed, Qubit, Spin};

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("embedding has no chain for logical variable {0}")]
    MissingChain(String),
    #[error("no usable coupler between the chains of {0} and {1}")]
    NoCoupler(String, String),
    #[error("empirical F search diverged after {rounds} rounds (F = {f})")]
    Diverged { rounds: usize, f: f64 },
    #[error("malformed parameter file: {0}")]
    Syntax(String),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareRanges {
    pub h_max: f64,
    pub j_max: f64,
    /// Auto-scale bound for `|h|` and `|J|` in the theoretical setter.
    pub target: f64,
}

impl Default for HardwareRanges {
    fn default() -> Self {
        Self {
            h_max: 2.0,
            j_max: 1.0,
            target: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamMethod {
    Theoretical,
    Empirical,
}

impl ParamMethod {
    pub fn name(self) -> &'static str {
        match self {
            ParamMethod::Theoretical => "theoretical",
            ParamMethod::Empirical => "empirical",
        }
    }
}

impl std::str::FromStr for ParamMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theoretical" => Ok(ParamMethod::Theoretical),
            "empirical" => Ok(ParamMethod::Empirical),
            other => Err(format!("unknown parameter method {other:?}")),
        }
    }
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn ratio(bound: f64, m: f64) -> f64 {
    if m > 0.0 {
        bound / m
    } else {
        f64::INFINITY
    }
}

/// Largest `alpha` keeping the scaled values in range. The theoretical rule
/// bounds `|h|, |J|` by `target` and `|F|` by `J_max`; the empirical rule
/// bounds `|h|` by `h_max` and `|J|, |F|` jointly by `J_max`. All-zero input
/// gives 1.
pub fn compute_scaling_factor(h: &[f64], j: &[f64], f: &[f64], ranges: &HardwareRanges, method: ParamMethod) -> f64 {
    let alpha = match method {
        ParamMethod::Theoretical => ratio(ranges.target, max_abs(h))
            .min(ratio(ranges.target, max_abs(j)))
            .min(ratio(ranges.j_max, max_abs(f))),
        ParamMethod::Empirical => {
            ratio(ranges.h_max, max_abs(h)).min(ratio(ranges.j_max, max_abs(j).max(max_abs(f))))
        }
    };
    if alpha.is_finite() {
        alpha
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub reduced: IsingProblem<String>,
    pub fixed: BTreeMap<String, Spin>,
    /// `C_i = sum_j |J_ij| - |h_i|` of the surviving variables.
    pub c: BTreeMap<String, f64>,
}

fn c_value(h: f64, nbrs: &BTreeMap<String, f64>) -> f64 {
    nbrs.values().map(|j| j.abs()).sum::<f64>() - h.abs()
}

/// Repeatedly fixes every variable whose field outweighs all its couplers
/// (`C_i < 0`) to `-sign(h_i)`, folding it into its neighbours' fields and
/// the offset.
pub fn preprocess_fix_qubits(logical: &IsingProblem<String>) -> Preprocessed {
    let mut h: BTreeMap<String, f64> = logical.variables().map(|v| (v.clone(), logical.field(v))).collect();
    let mut adj: BTreeMap<String, BTreeMap<String, f64>> = h.keys().map(|v| (v.clone(), BTreeMap::new())).collect();
    for (u, v, j) in logical.couplings() {
        adj.get_mut(u).expect("registered").insert(v.clone(), j);
        adj.get_mut(v).expect("registered").insert(u.clone(), j);
    }
    let mut offset = logical.offset();
    let mut fixed = BTreeMap::new();
    loop {
        let doomed: Vec<String> = h
            .iter()
            .filter(|(v, &hv)| c_value(hv, &adj[*v]) < 0.0)
            .map(|(v, _)| v.clone())
            .collect();
        if doomed.is_empty() {
            break;
        }
        // Simultaneous removal of adjacent doomed variables would ignore their
        // mutual coupler, so fix them one at a time against current fields.
        for v in doomed {
            let Some(&hv) = h.get(&v) else { continue };
            if c_value(hv, &adj[&v]) >= 0.0 {
                continue;
            }
            let s = -sign(hv);
            offset += hv * s;
            for (u, j) in adj.remove(&v).expect("registered") {
                *h.get_mut(&u).expect("registered") += j * s;
                adj.get_mut(&u).expect("registered").remove(&v);
            }
            h.remove(&v);
            fixed.insert(v, s as Spin);
        }
    }
    let mut reduced = IsingProblem::new();
    reduced.add_offset(offset);
    for (v, &hv) in &h {
        reduced.add_variable(v.clone());
        reduced.add_field(v.clone(), hv);
    }
    for (u, nbrs) in &adj {
        for (v, &j) in nbrs {
            if u < v {
                reduced.add_coupling(u.clone(), v.clone(), j);
            }
        }
    }
    let c = h.iter().map(|(v, &hv)| (v.clone(), c_value(hv, &adj[v]))).collect();
    Preprocessed { reduced, fixed, c }
}

/// A physical problem with the bookkeeping needed to decode it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedIsing {
    pub physical: IsingProblem<Qubit>,
    /// Chains of the variables that reach the hardware.
    pub embedding: Embedding,
    /// Physical value on every intra-chain coupler, per chain.
    pub chain_strengths: BTreeMap<String, f64>,
    pub alpha: f64,
    pub fixed: BTreeMap<String, Spin>,
    pub method: ParamMethod,
}

impl EmbeddedIsing {
    pub fn to_json_value(&self) -> Value {
        let mut v = self.physical.to_json_value();
        let obj = v.as_object_mut().expect("ising json is an object");
        obj.insert("alpha".into(), json!(self.alpha));
        obj.insert("chain_strengths".into(), json!(self.chain_strengths));
        obj.insert("fixed".into(), json!(self.fixed));
        obj.insert("method".into(), json!(self.method));
        obj.insert("chains".into(), json!(self.embedding.chains));
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, ParamError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ParamError::Syntax(e.to_string()))?;
        let physical = IsingProblem::from_json_value(&v)?;
        let field = |k: &str| v.get(k).cloned().ok_or_else(|| ParamError::Syntax(format!("missing {k:?}")));
        let parse = |k: &str| -> Result<Value, ParamError> { field(k) };
        let syntax = |e: serde_json::Error| ParamError::Syntax(e.to_string());
        Ok(Self {
            physical,
            embedding: Embedding {
                chains: serde_json::from_value(parse("chains")?).map_err(syntax)?,
            },
            chain_strengths: serde_json::from_value(parse("chain_strengths")?).map_err(syntax)?,
            alpha: serde_json::from_value(parse("alpha")?).map_err(syntax)?,
            fixed: serde_json::from_value(parse("fixed")?).map_err(syntax)?,
            method: serde_json::from_value(parse("method")?).map_err(syntax)?,
        })
    }

    /// Position of every chain qubit within `physical`'s sorted variables.
    pub fn chain_positions(&self) -> Vec<(String, Vec<usize>)> {
        let vars: Vec<Qubit> = self.physical.variables().copied().collect();
        self.embedding
            .chains
            .iter()
            .map(|(v, c)| {
                let pos = c.iter().map(|q| vars.binary_search(q).expect("chain qubit in problem")).collect();
                (v.clone(), pos)
            })
            .collect()
    }
}

/// Physical layout shared by both setters: usable inter-chain couplers per
/// logical edge and intra-chain couplers per chain.
struct Layout {
    inter: BTreeMap<(String, String), Vec<(Qubit, Qubit)>>,
    intra: BTreeMap<String, Vec<(Qubit, Qubit)>>,
}

fn layout(reduced: &IsingProblem<String>, emb: &Embedding, hw: &HardwareGraph) -> Result<Layout, ParamError> {
    let mut owner: HashMap<Qubit, &str> = HashMap::new();
    for v in reduced.variables() {
        let chain = emb.chain(v).ok_or_else(|| ParamError::MissingChain(v.clone()))?;
        for &q in chain {
            owner.insert(q, v);
        }
    }
    let mut intra = BTreeMap::new();
    for v in reduced.variables() {
        let chain = emb.chain(v).expect("checked above");
        let mut couplers = Vec::new();
        for &q in chain {
            for &n in hw.neighbors(q) {
                if n > q && owner.get(&n) == Some(&v.as_str()) {
                    couplers.push((q, n));
                }
            }
        }
        intra.insert(v.clone(), couplers);
    }
    let mut inter = BTreeMap::new();
    for (u, v, _) in reduced.couplings() {
        let mut couplers = Vec::new();
        for &a in emb.chain(u).expect("checked above") {
            for &b in hw.neighbors(a) {
                if owner.get(&b) == Some(&v.as_str()) {
                    couplers.push((a.min(b), a.max(b)));
                }
            }
        }
        if couplers.is_empty() {
            return Err(ParamError::NoCoupler(u.clone(), v.clone()));
        }
        couplers.sort_unstable();
        inter.insert((u.clone(), v.clone()), couplers);
    }
    Ok(Layout { inter, intra })
}

/// Even split of every logical coupler over its physical couplers.
fn split_couplers(reduced: &IsingProblem<String>, lay: &Layout) -> BTreeMap<(Qubit, Qubit), f64> {
    let mut out = BTreeMap::new();
    for (u, v, j) in reduced.couplings() {
        let cs = &lay.inter[&(u.clone(), v.clone())];
        for &c in cs {
            *out.entry(c).or_insert(0.0) += j / cs.len() as f64;
        }
    }
    out
}

fn assemble(
    emb: &Embedding,
    reduced: &IsingProblem<String>,
    h: &BTreeMap<Qubit, f64>,
    j: &BTreeMap<(Qubit, Qubit), f64>,
    lay: &Layout,
    chain_value: &BTreeMap<String, f64>,
) -> IsingProblem<Qubit> {
    let mut p = IsingProblem::new();
    for v in reduced.variables() {
        for &q in emb.chain(v).expect("layout checked") {
            p.add_variable(q);
        }
    }
    for (&q, &x) in h {
        p.add_field(q, x);
    }
    for (&(a, b), &x) in j {
        p.add_coupling(a, b, x);
    }
    for (v, couplers) in &lay.intra {
        for &(a, b) in couplers {
            p.add_coupling(a, b, chain_value[v]);
        }
    }
    p
}

/// The ground-state preserving setter.
///
/// After preprocessing, each logical `J_ij` is split evenly over the usable
/// couplers between the two chains. Chain qubit `l` of variable `i` gets
/// `h_l = sign(h_i) (sum_{k in pnb(l)} |J_lk| - C_i / n_i)` where `pnb(l)` are
/// its neighbours in other chains, and the provisional chain strength is
/// `F_i = -((n_i - 1) / n_i) C_i - eps`. Fields and couplers are scaled into
/// the target range (with `|alpha F_i| <= J_max`) and every intra-chain
/// coupler is then pinned to `-J_max`.
pub fn set_parameters_theoretical(
    logical: &IsingProblem<String>,
    emb: &Embedding,
    hw: &HardwareGraph,
    ranges: &HardwareRanges,
    eps: f64,
) -> Result<EmbeddedIsing, ParamError> {
    let pre = preprocess_fix_qubits(logical);
    let reduced = &pre.reduced;
    let lay = layout(reduced, emb, hw)?;
    let j = split_couplers(reduced, &lay);

    let mut pnb_sum: HashMap<Qubit, f64> = HashMap::new();
    for (&(a, b), &x) in &j {
        *pnb_sum.entry(a).or_insert(0.0) += x.abs();
        *pnb_sum.entry(b).or_insert(0.0) += x.abs();
    }
    let mut h = BTreeMap::new();
    let mut provisional = Vec::new();
    for v in reduced.variables() {
        let chain = emb.chain(v).expect("layout checked");
        let n = chain.len() as f64;
        let c = pre.c[v];
        let s = sign(reduced.field(v));
        for &q in chain {
            h.insert(q, s * (pnb_sum.get(&q).copied().unwrap_or(0.0) - c / n));
        }
        if chain.len() > 1 {
            provisional.push(-((n - 1.0) / n) * c - eps);
        }
    }
    let hv: Vec<f64> = h.values().copied().collect();
    let jv: Vec<f64> = j.values().copied().collect();
    let alpha = compute_scaling_factor(&hv, &jv, &provisional, ranges, ParamMethod::Theoretical);
    h.values_mut().for_each(|x| *x *= alpha);
    let j: BTreeMap<_, _> = j.into_iter().map(|(k, x)| (k, x * alpha)).collect();
    let chain_value: BTreeMap<String, f64> = reduced.variables().map(|v| (v.clone(), -ranges.j_max)).collect();
    let physical = assemble(emb, reduced, &h, &j, &lay, &chain_value);
    Ok(EmbeddedIsing {
        physical,
        embedding: emb.restricted(reduced.variables()),
        chain_strengths: chain_value,
        alpha,
        fixed: pre.fixed,
        method: ParamMethod::Theoretical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConfig {
    /// Decrement applied to `F` after a round with broken chains.
    pub eps_step: f64,
    /// Inner-solver calls per round.
    pub iters: usize,
    pub max_rounds: usize,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        Self {
            eps_step: 0.5,
            iters: 5,
            max_rounds: 10,
        }
    }
}

/// Outcome of the chain-strength search.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTrace {
    /// Unscaled `F` tried in each round.
    pub f_values: Vec<f64>,
    pub final_f: f64,
}

/// The iterative setter.
///
/// Fields and couplers are split evenly over chains and inter-chain
/// couplers. Starting from `F = -1`, each round scales `(h, J, F)` jointly
/// into range, runs the inner sampler `iters` times and stops as soon as one
/// run returns no broken chain; otherwise `F` decreases by `eps_step`.
pub fn set_parameters_empirical(
    logical: &IsingProblem<String>,
    emb: &Embedding,
    hw: &HardwareGraph,
    ranges: &HardwareRanges,
    cfg: &EmpiricalConfig,
    inner: &dyn Sampler,
    seed: u64,
) -> Result<(EmbeddedIsing, EmpiricalTrace), ParamError> {
    let lay = layout(logical, emb, hw)?;
    let j = split_couplers(logical, &lay);
    let mut h = BTreeMap::new();
    for v in logical.variables() {
        let chain = emb.chain(v).expect("layout checked");
        for &q in chain {
            h.insert(q, logical.field(v) / chain.len() as f64);
        }
    }
    let hv: Vec<f64> = h.values().copied().collect();
    let jv: Vec<f64> = j.values().copied().collect();
    let embedding = emb.restricted(logical.variables());
    let mut f = -1.0;
    let mut tried = Vec::new();
    for round in 0..cfg.max_rounds {
        tried.push(f);
        let alpha = compute_scaling_factor(&hv, &jv, &[f], ranges, ParamMethod::Empirical);
        let hs: BTreeMap<_, _> = h.iter().map(|(&k, &x)| (k, x * alpha)).collect();
        let js: BTreeMap<_, _> = j.iter().map(|(&k, &x)| (k, x * alpha)).collect();
        let chain_value: BTreeMap<String, f64> = logical.variables().map(|v| (v.clone(), alpha * f)).collect();
        let physical = assemble(emb, logical, &hs, &js, &lay, &chain_value);
        let candidate = EmbeddedIsing {
            physical,
            embedding: embedding.clone(),
            chain_strengths: chain_value,
            alpha,
            fixed: BTreeMap::new(),
            method: ParamMethod::Empirical,
        };
        let positions = candidate.chain_positions();
        let intact = (0..cfg.iters).any(|it| {
            let set: SampleSet = inner.sample(&candidate.physical, seed::derive2(seed, round as u64, it as u64));
            set.spins.iter().any(|s| broken_qubits_indexed(s, &positions).next().is_none())
        });
        if intact {
            return Ok((
                candidate,
                EmpiricalTrace {
                    f_values: tried,
                    final_f: f,
                },
            ));
        }
        f -= cfg.eps_step;
    }
    Err(ParamError::Diverged {
        rounds: cfg.max_rounds,
        f: *tried.last().unwrap_or(&f),
    })
}

/// Everything either setter needs besides the problem and embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSettings {
    pub ranges: HardwareRanges,
    /// Margin in the provisional chain strength of the theoretical setter.
    pub eps: f64,
    pub empirical: EmpiricalConfig,
    /// Inner solver of the empirical setter; one read per call.
    pub inner: SaParams,
}

impl Default for ParamSettings {
    fn default() -> Self {
        Self {
            ranges: HardwareRanges::default(),
            eps: 0.1,
            empirical: EmpiricalConfig::default(),
            inner: SaParams {
                reads: 1,
                ..SaParams::default()
            },
        }
    }
}

pub fn set_parameters(
    method: ParamMethod,
    logical: &IsingProblem<String>,
    emb: &Embedding,
    hw: &HardwareGraph,
    settings: &ParamSettings,
    seed: u64,
) -> Result<EmbeddedIsing, ParamError> {
    match method {
        ParamMethod::Theoretical => set_parameters_theoretical(logical, emb, hw, &settings.ranges, settings.eps),
        ParamMethod::Empirical => set_parameters_empirical(
            logical,
            emb,
            hw,
            &settings.ranges,
            &settings.empirical,
            &settings.inner,
            seed,
        )
        .map(|(ei, _)| ei),
    }
}

/// Sum of physical fields per chain and of physical couplers per logical edge.
pub fn distributed_sums(ei: &EmbeddedIsing) -> (BTreeMap<String, f64>, BTreeMap<(String, String), f64>) {
    let owner = ei.embedding.owners();
    let mut fields = BTreeMap::new();
    for (v, chain) in &ei.embedding.chains {
        fields.insert(v.clone(), chain.iter().map(|q| ei.physical.field(q)).sum());
    }
    let mut couplers = BTreeMap::new();
    for (a, b, x) in ei.physical.couplings() {
        let (Some(&u), Some(&v)) = (owner.get(a), owner.get(b)) else {
            continue;
        };
        if u != v {
            let key = if u < v { (u.to_string(), v.to_string()) } else { (v.to_string(), u.to_string()) };
            *couplers.entry(key).or_insert(0.0) += x;
        }
    }
    (fields, couplers)
}

/// Variables of `ei` whose chain has at least two qubits.
pub fn multi_qubit_chains(ei: &EmbeddedIsing) -> BTreeSet<String> {
    ei.embedding
        .chains
        .iter()
        .filter(|(_, c)| c.len() > 1)
        .map(|(v, _)| v.clone())
        .collect()
}
