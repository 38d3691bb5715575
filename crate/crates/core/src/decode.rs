//! From physical reads back to logical assignments.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::embedding::{interaction_graph, Embedding};
use crate::graph::{component_indices, LabelledGraph};
use crate::qubo::IsingProblem;
use crate::sampler::{greedy_descent_compiled, SampleSet};
use crate::{seed, Qubit, Spin};

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("sample has no value for qubit {0}")]
    MissingQubit(Qubit),
    #[error("logical variable {0} has neither a chain nor a fixed value")]
    Unassigned(String),
}

fn chain_vote(values: impl Iterator<Item = Spin>, rng: &mut impl Rng) -> Spin {
    let total: i32 = values.map(i32::from).sum();
    match total.signum() {
        1 => 1,
        -1 => -1,
        _ => {
            if rng.random_bool(0.5) {
                1
            } else {
                -1
            }
        }
    }
}

/// Majority spin of every chain. Ties are settled by a coin drawn from
/// `seed`, one toss per tied chain in variable order.
pub fn majority_vote(
    sample: &BTreeMap<Qubit, Spin>,
    emb: &Embedding,
    seed: u64,
) -> Result<BTreeMap<String, Spin>, DecodeError> {
    let mut rng = seed::rng(seed);
    let mut out = BTreeMap::new();
    for (v, chain) in &emb.chains {
        let values: Vec<Spin> = chain
            .iter()
            .map(|q| sample.get(q).copied().ok_or(DecodeError::MissingQubit(*q)))
            .collect::<Result<_, _>>()?;
        out.insert(v.clone(), chain_vote(values.into_iter(), &mut rng));
    }
    Ok(out)
}

/// Variables whose chain spins disagree.
pub fn broken_qubits(sample: &BTreeMap<Qubit, Spin>, emb: &Embedding) -> BTreeSet<String> {
    emb.chains
        .iter()
        .filter(|(_, chain)| {
            let mut it = chain.iter().filter_map(|q| sample.get(q));
            match it.next() {
                Some(first) => it.any(|s| s != first),
                None => false,
            }
        })
        .map(|(v, _)| v.clone())
        .collect()
}

/// [`broken_qubits`] over a read given as a spin row and chain positions in
/// that row.
pub fn broken_qubits_indexed<'a>(
    spins: &'a [Spin],
    positions: &'a [(String, Vec<usize>)],
) -> impl Iterator<Item = &'a str> + 'a {
    positions
        .iter()
        .filter(move |(_, pos)| pos.iter().any(|&p| spins[p] != spins[pos[0]]))
        .map(|(v, _)| v.as_str())
}

/// Size of the largest connected set of broken variables in `logical`.
pub fn biggest_broken_cluster(broken: &BTreeSet<String>, logical: &LabelledGraph) -> usize {
    let members: BTreeSet<usize> = broken.iter().filter_map(|v| logical.index_of(v)).collect();
    component_indices(logical, &members)
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0)
}

fn positions(samples: &SampleSet, emb: &Embedding) -> Result<Vec<(String, Vec<usize>)>, DecodeError> {
    emb.chains
        .iter()
        .map(|(v, chain)| {
            let pos = chain
                .iter()
                .map(|q| samples.index_of(q).ok_or(DecodeError::MissingQubit(*q)))
                .collect::<Result<_, _>>()?;
            Ok((v.clone(), pos))
        })
        .collect()
}

/// Mean over reads and chains of the broken-chain indicator.
pub fn estimate_p_bq(samples: &SampleSet, emb: &Embedding) -> Result<f64, DecodeError> {
    let pos = positions(samples, emb)?;
    if samples.is_empty() || pos.is_empty() {
        return Ok(0.0);
    }
    let broken: usize = samples.spins.iter().map(|s| broken_qubits_indexed(s, &pos).count()).sum();
    Ok(broken as f64 / (samples.len() * pos.len()) as f64)
}

/// Fraction of reads with at least one broken chain.
pub fn fraction_reads_broken(samples: &SampleSet, emb: &Embedding) -> Result<f64, DecodeError> {
    let pos = positions(samples, emb)?;
    if samples.is_empty() {
        return Ok(0.0);
    }
    let hit = samples
        .spins
        .iter()
        .filter(|s| broken_qubits_indexed(s, &pos).next().is_some())
        .count();
    Ok(hit as f64 / samples.len() as f64)
}

/// Logical reads decoded by majority vote and refined by greedy descent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodedSet {
    pub vars: Vec<String>,
    pub mv: Vec<Vec<Spin>>,
    pub refined: Vec<Vec<Spin>>,
    pub mv_energies: Vec<f64>,
    pub refined_energies: Vec<f64>,
    pub broken: Vec<BTreeSet<String>>,
    pub biggest_cluster: Vec<usize>,
    /// Per-chain-per-read broken fraction.
    pub p_bq: f64,
    /// Fraction of reads with any broken chain.
    pub p_any_broken: f64,
}

impl DecodedSet {
    pub fn len(&self) -> usize {
        self.mv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mv.is_empty()
    }

    /// Rows `read_index, mv_energy, refined_energy, num_broken, biggest_broken_cluster`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["read_index", "mv_energy", "refined_energy", "num_broken", "biggest_broken_cluster"])
            .expect("in-memory write");
        for r in 0..self.len() {
            w.write_record([
                r.to_string(),
                self.mv_energies[r].to_string(),
                self.refined_energies[r].to_string(),
                self.broken[r].len().to_string(),
                self.biggest_cluster[r].to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Decodes every read: majority vote per chain, fixed values merged in, then
/// greedy descent on the full logical problem. Read `r` tosses its tie coins
/// from a sub-seed of `(seed, r)`.
pub fn decode_and_refine(
    samples: &SampleSet,
    emb: &Embedding,
    logical: &IsingProblem<String>,
    fixed: &BTreeMap<String, Spin>,
    seed: u64,
) -> Result<DecodedSet, DecodeError> {
    let c = logical.compile();
    let graph = interaction_graph(logical);
    let pos = positions(samples, emb)?;
    let mut chain_of: Vec<Option<usize>> = vec![None; c.len()];
    let mut fixed_of: Vec<Option<Spin>> = vec![None; c.len()];
    for (i, v) in c.vars().iter().enumerate() {
        chain_of[i] = pos.iter().position(|(w, _)| w == v);
        fixed_of[i] = fixed.get(v).copied();
        if chain_of[i].is_none() && fixed_of[i].is_none() {
            return Err(DecodeError::Unassigned(v.clone()));
        }
    }
    let rows: Vec<_> = (0..samples.len())
        .into_par_iter()
        .map(|r| {
            let spins = &samples.spins[r];
            let mut rng = seed::sub_rng(seed, r as u64);
            let votes: Vec<Spin> = pos
                .iter()
                .map(|(_, p)| chain_vote(p.iter().map(|&i| spins[i]), &mut rng))
                .collect();
            let mv: Vec<Spin> = (0..c.len())
                .map(|i| match (chain_of[i], fixed_of[i]) {
                    (Some(k), _) => votes[k],
                    (None, Some(s)) => s,
                    (None, None) => unreachable!("checked above"),
                })
                .collect();
            let mut refined = mv.clone();
            greedy_descent_compiled(&c, &mut refined);
            let broken: BTreeSet<String> = broken_qubits_indexed(spins, &pos).map(str::to_string).collect();
            let cluster = biggest_broken_cluster(&broken, &graph);
            (c.energy(&mv), c.energy(&refined), mv, refined, broken, cluster)
        })
        .collect();

    let mut out = DecodedSet {
        vars: c.vars().to_vec(),
        ..DecodedSet::default()
    };
    let mut broken_total = 0;
    let mut any = 0;
    for (e_mv, e_ref, mv, refined, broken, cluster) in rows {
        broken_total += broken.len();
        any += usize::from(!broken.is_empty());
        out.mv_energies.push(e_mv);
        out.refined_energies.push(e_ref);
        out.mv.push(mv);
        out.refined.push(refined);
        out.broken.push(broken);
        out.biggest_cluster.push(cluster);
    }
    if !out.is_empty() {
        out.p_any_broken = any as f64 / out.len() as f64;
        if !pos.is_empty() {
            out.p_bq = broken_total as f64 / (out.len() * pos.len()) as f64;
        }
    }
    Ok(out)
}
