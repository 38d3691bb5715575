//! Sample-set files: a CSV body with one row per read plus a JSON sidecar
//! echoing the sampler configuration.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decode::broken_qubits_indexed;
use crate::qubo::Var;
use crate::sampler::{SaParams, SampleSet};
use crate::Spin;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("bad variable id {0:?}")]
    Var(String),
}

/// Bit `i` of the bitmap is set when spin `i` is `+1`; bits fill bytes from
/// the least significant end.
pub fn encode_spins(spins: &[Spin]) -> String {
    let mut bytes = vec![0u8; spins.len().div_ceil(8)];
    for (i, &s) in spins.iter().enumerate() {
        if s == 1 {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    STANDARD.encode(bytes)
}

pub fn decode_spins(text: &str, n: usize) -> Result<Vec<Spin>, String> {
    let bytes = STANDARD.decode(text).map_err(|e| e.to_string())?;
    if bytes.len() != n.div_ceil(8) {
        return Err(format!("bitmap holds {} bytes, expected {}", bytes.len(), n.div_ceil(8)));
    }
    Ok((0..n)
        .map(|i| if bytes[i / 8] >> (i % 8) & 1 == 1 { 1 } else { -1 })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub sampler: String,
    pub vars: Vec<String>,
    pub reads: usize,
    pub params: SaParams,
    pub seed: u64,
    pub wall_time_per_read_s: f64,
}

/// Rows `read_index, energy, broken_chains, spins`. `broken_chains` is empty
/// when no chain positions are given.
pub fn sample_set_to_csv<V: Var>(set: &SampleSet<V>, chains: Option<&[(String, Vec<usize>)]>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["read_index", "energy", "broken_chains", "spins"])
        .expect("in-memory write");
    for (r, spins) in set.spins.iter().enumerate() {
        let broken = chains
            .map(|c| broken_qubits_indexed(spins, c).count().to_string())
            .unwrap_or_default();
        w.write_record([r.to_string(), set.energies[r].to_string(), broken, encode_spins(spins)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn sample_set_sidecar<V: Var>(set: &SampleSet<V>) -> String {
    serde_json::to_string_pretty(&SampleSidecar {
        sampler: "simulated_annealing".into(),
        vars: set.vars.iter().map(ToString::to_string).collect(),
        reads: set.len(),
        params: set.params,
        seed: set.seed,
        wall_time_per_read_s: set.wall_time_per_read,
    })
    .expect("serializable")
}

pub fn read_sample_set<V: Var>(csv_text: &str, sidecar: &str) -> Result<SampleSet<V>, IoError> {
    let meta: SampleSidecar = serde_json::from_str(sidecar)?;
    let vars: Vec<V> = meta
        .vars
        .iter()
        .map(|s| s.parse().map_err(|_| IoError::Var(s.clone())))
        .collect::<Result<_, _>>()?;
    let mut spins = Vec::new();
    let mut energies = Vec::new();
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |msg: String| IoError::Row { row, msg };
        let energy: f64 = rec.get(1).unwrap_or("").parse().map_err(|e| bad(format!("energy: {e}")))?;
        let s = decode_spins(rec.get(3).unwrap_or(""), vars.len()).map_err(bad)?;
        energies.push(energy);
        spins.push(s);
    }
    Ok(SampleSet {
        vars,
        spins,
        energies,
        params: meta.params,
        seed: meta.seed,
        wall_time_per_read: meta.wall_time_per_read_s,
    })
}
