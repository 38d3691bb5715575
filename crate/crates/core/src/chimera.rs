//! Chimera hardware graphs with defect masks.
//!
//! Qubit `q = ((r * N + c) * 2 + shore) * L + k` sits in cell `(r, c)`, on
//! shore 0 (vertical) or 1 (horizontal), at position `k` within the shore.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Qubit;

const DW2X_MASK: &str = include_str!("../data/dw2x_mask.json");

#[derive(Debug, Error, PartialEq)]
pub enum ChimeraError {
    #[error("chimera dimensions must be positive, got ({m}, {n}, {l})")]
    InvalidShape { m: usize, n: usize, l: usize },
    #[error("qubit {0} is not part of the lattice")]
    IllegalQubit(Qubit),
    #[error("({0}, {1}) is not a chimera coupler")]
    IllegalCoupler(Qubit, Qubit),
    #[error("cannot disable {requested} of {available} qubits")]
    MaskTooLarge { requested: usize, available: usize },
    #[error("malformed topology file: {0}")]
    Syntax(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
    pub shore: usize,
    pub k: usize,
}

#[derive(Serialize, Deserialize)]
struct TopologyFile {
    m: usize,
    n: usize,
    l: usize,
    #[serde(default)]
    disabled_qubits: Vec<Qubit>,
    #[serde(default)]
    disabled_couplers: Vec<[Qubit; 2]>,
}

/// A Chimera lattice `C(M, N, L)` with disabled qubits and couplers.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareGraph {
    m: usize,
    n: usize,
    l: usize,
    disabled_qubits: BTreeSet<Qubit>,
    disabled_couplers: BTreeSet<(Qubit, Qubit)>,
    usable: Vec<bool>,
    adjacency: Vec<Vec<Qubit>>,
}

impl HardwareGraph {
    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn shore(&self) -> usize {
        self.l
    }

    pub fn num_qubits(&self) -> usize {
        self.m * self.n * 2 * self.l
    }

    pub fn qubit(&self, c: Coord) -> Qubit {
        ((c.row * self.n + c.col) * 2 + c.shore) * self.l + c.k
    }

    pub fn coord(&self, q: Qubit) -> Coord {
        let k = q % self.l;
        let shore = (q / self.l) % 2;
        let cell = q / (2 * self.l);
        Coord {
            row: cell / self.n,
            col: cell % self.n,
            shore,
            k,
        }
    }

    /// True iff `(u, v)` is an edge of the defect-free lattice.
    pub fn is_legal_edge(&self, u: Qubit, v: Qubit) -> bool {
        let nq = self.num_qubits();
        if u >= nq || v >= nq || u == v {
            return false;
        }
        let (a, b) = (self.coord(u), self.coord(v));
        if (a.row, a.col) == (b.row, b.col) {
            return a.shore != b.shore;
        }
        if a.shore != b.shore || a.k != b.k {
            return false;
        }
        match a.shore {
            0 => a.col == b.col && a.row.abs_diff(b.row) == 1,
            _ => a.row == b.row && a.col.abs_diff(b.col) == 1,
        }
    }

    /// Every coupler of the defect-free lattice as `(u, v)` with `u < v`.
    pub fn legal_edges(&self) -> Vec<(Qubit, Qubit)> {
        let mut out = Vec::new();
        for row in 0..self.m {
            for col in 0..self.n {
                for i in 0..self.l {
                    for j in 0..self.l {
                        let u = self.qubit(Coord { row, col, shore: 0, k: i });
                        let v = self.qubit(Coord { row, col, shore: 1, k: j });
                        out.push((u, v));
                    }
                    let here_v = self.qubit(Coord { row, col, shore: 0, k: i });
                    if row + 1 < self.m {
                        out.push((here_v, self.qubit(Coord { row: row + 1, col, shore: 0, k: i })));
                    }
                    let here_h = self.qubit(Coord { row, col, shore: 1, k: i });
                    if col + 1 < self.n {
                        out.push((here_h, self.qubit(Coord { row, col: col + 1, shore: 1, k: i })));
                    }
                }
            }
        }
        out.iter_mut().for_each(|e| *e = (e.0.min(e.1), e.0.max(e.1)));
        out.sort_unstable();
        out
    }

    pub fn is_usable(&self, q: Qubit) -> bool {
        self.usable.get(q).copied().unwrap_or(false)
    }

    pub fn usable_qubits(&self) -> impl Iterator<Item = Qubit> + '_ {
        (0..self.num_qubits()).filter(|&q| self.usable[q])
    }

    pub fn usable_qubit_count(&self) -> usize {
        self.usable.iter().filter(|&&u| u).count()
    }

    /// Usable neighbours of `q`, sorted; empty for disabled qubits.
    pub fn neighbors(&self, q: Qubit) -> &[Qubit] {
        &self.adjacency[q]
    }

    pub fn has_coupler(&self, u: Qubit, v: Qubit) -> bool {
        u < self.adjacency.len() && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn usable_couplers(&self) -> impl Iterator<Item = (Qubit, Qubit)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn usable_coupler_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn disabled_qubits(&self) -> &BTreeSet<Qubit> {
        &self.disabled_qubits
    }

    pub fn disabled_couplers(&self) -> &BTreeSet<(Qubit, Qubit)> {
        &self.disabled_couplers
    }

    fn rebuild(&mut self) {
        let nq = self.num_qubits();
        self.usable = (0..nq).map(|q| !self.disabled_qubits.contains(&q)).collect();
        self.adjacency = vec![Vec::new(); nq];
        for (u, v) in self.legal_edges() {
            if self.usable[u] && self.usable[v] && !self.disabled_couplers.contains(&(u, v)) {
                self.adjacency[u].push(v);
                self.adjacency[v].push(u);
            }
        }
        self.adjacency.iter_mut().for_each(|a| a.sort_unstable());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TopologyFile {
            m: self.m,
            n: self.n,
            l: self.l,
            disabled_qubits: self.disabled_qubits.iter().copied().collect(),
            disabled_couplers: self.disabled_couplers.iter().map(|&(u, v)| [u, v]).collect(),
        })
        .expect("topology serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ChimeraError> {
        let f: TopologyFile = serde_json::from_str(text).map_err(|e| ChimeraError::Syntax(e.to_string()))?;
        let hw = build_chimera(f.m, f.n, f.l)?;
        apply_defects(
            &hw,
            f.disabled_qubits,
            f.disabled_couplers.into_iter().map(|[u, v]| (u, v)),
        )
    }
}

pub fn build_chimera(m: usize, n: usize, l: usize) -> Result<HardwareGraph, ChimeraError> {
    if m == 0 || n == 0 || l == 0 {
        return Err(ChimeraError::InvalidShape { m, n, l });
    }
    let mut hw = HardwareGraph {
        m,
        n,
        l,
        disabled_qubits: BTreeSet::new(),
        disabled_couplers: BTreeSet::new(),
        usable: Vec::new(),
        adjacency: Vec::new(),
    };
    hw.rebuild();
    Ok(hw)
}

/// Returns a copy of `hw` with extra qubits and couplers disabled.
pub fn apply_defects(
    hw: &HardwareGraph,
    qubits: impl IntoIterator<Item = Qubit>,
    couplers: impl IntoIterator<Item = (Qubit, Qubit)>,
) -> Result<HardwareGraph, ChimeraError> {
    let mut out = hw.clone();
    for q in qubits {
        if q >= hw.num_qubits() {
            return Err(ChimeraError::IllegalQubit(q));
        }
        out.disabled_qubits.insert(q);
    }
    for (u, v) in couplers {
        if !hw.is_legal_edge(u, v) {
            return Err(ChimeraError::IllegalCoupler(u, v));
        }
        out.disabled_couplers.insert((u.min(v), u.max(v)));
    }
    out.rebuild();
    Ok(out)
}

/// Disables `count` distinct, currently usable qubits chosen uniformly.
pub fn random_defect_mask(hw: &HardwareGraph, count: usize, seed: u64) -> Result<HardwareGraph, ChimeraError> {
    let pool: Vec<Qubit> = hw.usable_qubits().collect();
    if count > pool.len() {
        return Err(ChimeraError::MaskTooLarge {
            requested: count,
            available: pool.len(),
        });
    }
    let mut rng = crate::seed::rng(seed);
    let picked = sample(&mut rng, pool.len(), count).into_iter().map(|i| pool[i]);
    apply_defects(hw, picked, [])
}

/// A `C(12, 12, 4)` chip with the bundled 55-qubit defect mask (1097 usable).
pub fn dw2x_topology() -> HardwareGraph {
    HardwareGraph::from_json(DW2X_MASK).expect("bundled mask is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coupler_formula(m: usize, n: usize, l: usize) -> usize {
        m * n * l * l + l * (n * (m - 1) + m * (n - 1))
    }

    #[test]
    fn lattice_sizes() {
        let one = build_chimera(1, 1, 4).unwrap();
        assert_eq!((one.num_qubits(), one.usable_coupler_count()), (8, 16));
        let two = build_chimera(2, 1, 4).unwrap();
        assert_eq!((two.num_qubits(), two.usable_coupler_count()), (16, 36));
        assert_eq!(two.legal_edges().len(), coupler_formula(2, 1, 4));
        assert_eq!(build_chimera(12, 12, 4).unwrap().num_qubits(), 1152);
        assert!(build_chimera(0, 1, 4).is_err());
    }

    #[test]
    fn defects() {
        let hw = build_chimera(1, 1, 4).unwrap();
        assert_eq!(apply_defects(&hw, [], []).unwrap(), hw);
        let d = apply_defects(&hw, [3], []).unwrap();
        assert_eq!((d.usable_qubit_count(), d.usable_coupler_count()), (7, 12));
        assert!(d.neighbors(3).is_empty());
        assert!(!d.has_coupler(3, 4));
        let c = apply_defects(&hw, [], [(4, 0)]).unwrap();
        assert_eq!(c.usable_coupler_count(), 15);
        assert!(!c.has_coupler(0, 4) && c.has_coupler(0, 5));
        assert_eq!(apply_defects(&hw, [8], []), Err(ChimeraError::IllegalQubit(8)));
        assert_eq!(apply_defects(&hw, [], [(0, 1)]), Err(ChimeraError::IllegalCoupler(0, 1)));

        let big = build_chimera(12, 12, 4).unwrap();
        let masked = random_defect_mask(&big, 55, 3).unwrap();
        assert_eq!(masked.usable_qubit_count(), 1097);
        assert_eq!(dw2x_topology().usable_qubit_count(), 1097);
    }

    #[test]
    fn topology_json_round_trip() {
        let hw = apply_defects(&build_chimera(2, 3, 4).unwrap(), [5, 17], [(0, 4)]).unwrap();
        let back = HardwareGraph::from_json(&hw.to_json()).unwrap();
        assert_eq!(back, hw);
    }

    #[test]
    fn interior_degree_bound() {
        let hw = build_chimera(4, 4, 4).unwrap();
        let max = (0..hw.num_qubits()).map(|q| hw.neighbors(q).len()).max().unwrap();
        assert_eq!(max, 6);
    }

    proptest! {
        #[test]
        fn edge_checker_matches_construction(m in 1usize..4, n in 1usize..4, l in 1usize..5) {
            let hw = build_chimera(m, n, l).unwrap();
            let edges: BTreeSet<(Qubit, Qubit)> = hw.legal_edges().into_iter().collect();
            prop_assert_eq!(edges.len(), coupler_formula(m, n, l));
            let nq = hw.num_qubits();
            for u in 0..nq {
                for v in 0..nq {
                    let expected = edges.contains(&(u.min(v), u.max(v))) && u != v;
                    prop_assert_eq!(hw.is_legal_edge(u, v), expected);
                    prop_assert_eq!(hw.has_coupler(u, v), expected);
                    prop_assert_eq!(hw.has_coupler(u, v), hw.has_coupler(v, u));
                }
                prop_assert_eq!(hw.qubit(hw.coord(u)), u);
            }
        }
    }
}
