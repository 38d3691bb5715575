//! Labelled graphs, conflict-graph construction, random `(V, d)` instances
//! and percolation thresholds from degree distributions.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("malformed graph file: {0}")]
    Syntax(String),
    #[error("{location}: duplicate vertex id {id:?}")]
    DuplicateVertex { location: String, id: String },
    #[error("{location}: dangling endpoint {id:?}")]
    DanglingEndpoint { location: String, id: String },
    #[error("{location}: vertex weight {weight} must be finite and non-negative")]
    InvalidWeight { location: String, weight: f64 },
    #[error("{location}: self-loop on {id:?}")]
    SelfLoop { location: String, id: String },
    #[error("{location}: duplicate edge {u:?}-{v:?}")]
    DuplicateEdge { location: String, u: String, v: String },
    #[error("unknown vertex id {0:?}")]
    UnknownVertex(String),
    #[error("invalid density range [{lo}, {hi}]")]
    InvalidDensityRange { lo: f64, hi: f64 },
    #[error("vertex count must be at least 1")]
    EmptyInstance,
    #[error("no giant component possible: every vertex has degree at most 1")]
    NoGiantComponent,
    #[error("degree histogram is empty")]
    EmptyHistogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    pub label: String,
    pub weight: f64,
    /// Source vertex pair `(u in G1, a in G2)` for conflict-graph vertices.
    pub provenance: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub label: String,
}

/// Undirected simple graph with vertex labels, vertex weights and edge labels.
///
/// Vertices are addressed either by their string id or by their insertion
/// index. Adjacency lists are kept sorted by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelledGraph {
    vertices: Vec<Vertex>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
    edge_index: HashMap<(usize, usize), usize>,
}

/// A conflict graph is a labelled graph whose vertices are candidate pairings
/// (carrying provenance) and whose edges mark incompatible pairings.
pub type ConflictGraph = LabelledGraph;

fn ordered(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl LabelledGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(
        &mut self,
        id: impl Into<String>,
        label: impl Into<String>,
        weight: f64,
    ) -> Result<usize, GraphError> {
        self.push_vertex(
            Vertex {
                id: id.into(),
                label: label.into(),
                weight,
                provenance: None,
            },
            None,
        )
    }

    fn push_vertex(&mut self, vertex: Vertex, location: Option<String>) -> Result<usize, GraphError> {
        let location = location.unwrap_or_else(|| format!("vertex {:?}", vertex.id));
        if !(vertex.weight.is_finite() && vertex.weight >= 0.0) {
            return Err(GraphError::InvalidWeight {
                location,
                weight: vertex.weight,
            });
        }
        if self.index.contains_key(&vertex.id) {
            return Err(GraphError::DuplicateVertex {
                location,
                id: vertex.id,
            });
        }
        let idx = self.vertices.len();
        self.index.insert(vertex.id.clone(), idx);
        self.vertices.push(vertex);
        self.adjacency.push(Vec::new());
        Ok(idx)
    }

    pub fn add_edge(&mut self, u: &str, v: &str, label: impl Into<String>) -> Result<(), GraphError> {
        let location = format!("edge {u:?}-{v:?}");
        self.add_edge_at(u, v, label.into(), location)
    }

    fn add_edge_at(&mut self, u: &str, v: &str, label: String, location: String) -> Result<(), GraphError> {
        let ui = *self.index.get(u).ok_or_else(|| GraphError::DanglingEndpoint {
            location: location.clone(),
            id: u.to_string(),
        })?;
        let vi = *self.index.get(v).ok_or_else(|| GraphError::DanglingEndpoint {
            location: location.clone(),
            id: v.to_string(),
        })?;
        if ui == vi {
            return Err(GraphError::SelfLoop {
                location,
                id: u.to_string(),
            });
        }
        self.insert_edge(ui, vi, label).map_err(|_| GraphError::DuplicateEdge {
            location,
            u: u.to_string(),
            v: v.to_string(),
        })
    }

    /// Inserts an edge between two vertex indices. Returns `Err(())` on a
    /// duplicate; callers map that to a located error.
    fn insert_edge(&mut self, u: usize, v: usize, label: String) -> Result<(), ()> {
        let key = ordered(u, v);
        if self.edge_index.contains_key(&key) {
            return Err(());
        }
        self.edge_index.insert(key, self.edges.len());
        self.edges.push(Edge {
            u: key.0,
            v: key.1,
            label,
        });
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.adjacency[a];
            let pos = list.partition_point(|&x| x < b);
            list.insert(pos, b);
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, idx: usize) -> &Vertex {
        &self.vertices[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, idx: usize) -> &[usize] {
        &self.adjacency[idx]
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.adjacency[idx].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_index.contains_key(&ordered(u, v))
    }

    pub fn edge_label(&self, u: usize, v: usize) -> Option<&str> {
        self.edge_index
            .get(&ordered(u, v))
            .map(|&e| self.edges[e].label.as_str())
    }

    /// Edge density as a percentage of `C(n, 2)`; 0 for graphs with fewer
    /// than two vertices.
    pub fn density_percent(&self) -> f64 {
        let n = self.vertices.len();
        if n < 2 {
            return 0.0;
        }
        let pairs = (n * (n - 1) / 2) as f64;
        100.0 * self.edges.len() as f64 / pairs
    }

    /// Parses the labelled-graph JSON format.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        parse_labelled_graph(text)
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexRecord {
                    id: v.id.clone(),
                    label: v.label.clone(),
                    weight: v.weight,
                    provenance: v.provenance.as_ref().map(|(a, b)| [a.clone(), b.clone()]),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    u: self.vertices[e.u].id.clone(),
                    v: self.vertices[e.v].id.clone(),
                    label: e.label.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph serialization cannot fail")
    }
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
struct VertexRecord {
    id: String,
    #[serde(default)]
    label: String,
    #[serde(default = "default_weight")]
    weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<[String; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    u: String,
    v: String,
    #[serde(default)]
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    #[serde(default)]
    vertices: Vec<VertexRecord>,
    #[serde(default)]
    edges: Vec<EdgeRecord>,
}

/// Parses and validates a labelled graph from its JSON representation.
pub fn parse_labelled_graph(text: &str) -> Result<LabelledGraph, GraphError> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Syntax(e.to_string()))?;
    let mut g = LabelledGraph::new();
    for (i, rec) in file.vertices.into_iter().enumerate() {
        let vertex = Vertex {
            id: rec.id,
            label: rec.label,
            weight: rec.weight,
            provenance: rec.provenance.map(|[a, b]| (a, b)),
        };
        g.push_vertex(vertex, Some(format!("vertices[{i}]")))?;
    }
    for (i, rec) in file.edges.into_iter().enumerate() {
        g.add_edge_at(&rec.u, &rec.v, rec.label, format!("edges[{i}]"))?;
    }
    Ok(g)
}

/// Which user-defined requirements add conflict edges on top of the bijection
/// constraint (which is always enforced).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictRules {
    /// Conflict when exactly one of `(u,v) in E1`, `(a,b) in E2` holds.
    pub edge_consistency: bool,
    /// Conflict when both edges exist but carry different labels.
    pub label_mismatch: bool,
    /// Weight assigned to every matched pair.
    pub vertex_weight: f64,
}

impl Default for ConflictRules {
    fn default() -> Self {
        Self {
            edge_consistency: true,
            label_mismatch: true,
            vertex_weight: 1.0,
        }
    }
}

/// Builds the conflict graph of two labelled graphs.
///
/// Vertices are all label-compatible pairs `(u, a)`; ids are `"u|a"`.
pub fn build_conflict_graph(g1: &LabelledGraph, g2: &LabelledGraph, rules: &ConflictRules) -> ConflictGraph {
    let mut pairs = Vec::new();
    for (ui, u) in g1.vertices.iter().enumerate() {
        for (ai, a) in g2.vertices.iter().enumerate() {
            if u.label == a.label {
                pairs.push((ui, ai));
            }
        }
    }
    let mut gc = LabelledGraph::new();
    for &(ui, ai) in &pairs {
        let (u, a) = (&g1.vertices[ui], &g2.vertices[ai]);
        gc.push_vertex(
            Vertex {
                id: format!("{}|{}", u.id, a.id),
                label: u.label.clone(),
                weight: rules.vertex_weight,
                provenance: Some((u.id.clone(), a.id.clone())),
            },
            None,
        )
        .expect("pair ids are unique and weights validated by the caller");
    }
    for x in 0..pairs.len() {
        for y in (x + 1)..pairs.len() {
            let (u, a) = pairs[x];
            let (v, b) = pairs[y];
            let conflict = if u == v || a == b {
                true
            } else {
                let e1 = g1.has_edge(u, v);
                let e2 = g2.has_edge(a, b);
                (rules.edge_consistency && (e1 != e2))
                    || (rules.label_mismatch && e1 && e2 && g1.edge_label(u, v) != g2.edge_label(a, b))
            };
            if conflict {
                gc.insert_edge(x, y, String::new()).expect("pairs visited once");
            }
        }
    }
    gc
}

/// Parameters realised by [`generate_random_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceInfo {
    pub target_density: f64,
    pub realized_density: f64,
}

/// Generates a random unit-weight conflict graph parametrised by vertex count
/// and a density range in percent.
///
/// A target density is drawn uniformly from the range, then distinct edges are
/// added uniformly at random until the realised density first reaches it.
pub fn generate_random_instance(
    n: usize,
    d_range: (f64, f64),
    seed: u64,
) -> Result<(ConflictGraph, InstanceInfo), GraphError> {
    let (lo, hi) = d_range;
    if n == 0 {
        return Err(GraphError::EmptyInstance);
    }
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 100.0) {
        return Err(GraphError::InvalidDensityRange { lo, hi });
    }
    let mut rng = seed::rng(seed);
    let target = if lo == hi { lo } else { rng.random_range(lo..=hi) };
    let width = (n - 1).to_string().len();
    let mut g = LabelledGraph::new();
    for i in 0..n {
        g.add_vertex(format!("v{i:0width$}"), "", 1.0)
            .expect("generated ids are unique");
    }
    if n == 1 {
        if hi > 0.0 {
            warn!("single-vertex instance has undefined density; treating it as 0");
        }
        return Ok((
            g,
            InstanceInfo {
                target_density: 0.0,
                realized_density: 0.0,
            },
        ));
    }
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect();
    pairs.shuffle(&mut rng);
    let total = pairs.len() as f64;
    for (count, (u, v)) in pairs.into_iter().enumerate() {
        if 100.0 * count as f64 / total >= target {
            break;
        }
        g.insert_edge(u, v, String::new()).expect("pairs are distinct");
    }
    let realized = g.density_percent();
    Ok((
        g,
        InstanceInfo {
            target_density: target,
            realized_density: realized,
        },
    ))
}

/// Vertex-degree counts of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeHistogram {
    counts: BTreeMap<usize, usize>,
}

impl DegreeHistogram {
    pub fn from_counts(counts: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut map = BTreeMap::new();
        for (k, c) in counts {
            if c > 0 {
                *map.entry(k).or_insert(0) += c;
            }
        }
        Self { counts: map }
    }

    pub fn counts(&self) -> &BTreeMap<usize, usize> {
        &self.counts
    }

    pub fn count(&self, degree: usize) -> usize {
        self.counts.get(&degree).copied().unwrap_or(0)
    }

    pub fn vertex_count(&self) -> usize {
        self.counts.values().sum()
    }

    /// `G0'(1)`: the mean degree `z`.
    pub fn mean_degree(&self) -> f64 {
        let n = self.vertex_count() as f64;
        self.counts.iter().map(|(&k, &c)| (k * c) as f64).sum::<f64>() / n
    }
}

pub fn degree_distribution(g: &LabelledGraph) -> DegreeHistogram {
    DegreeHistogram::from_counts((0..g.vertex_count()).map(|v| (g.degree(v), 1)))
}

/// Percolation threshold `p_c = G0'(1) / G0''(1)` of the random graph with the
/// given degree distribution.
pub fn percolation_threshold(hist: &DegreeHistogram) -> Result<f64, GraphError> {
    let n = hist.vertex_count();
    if n == 0 {
        return Err(GraphError::EmptyHistogram);
    }
    let (mut first, mut second) = (0u128, 0u128);
    for (&k, &c) in &hist.counts {
        let (k, c) = (k as u128, c as u128);
        first += k * c;
        second += k * k.saturating_sub(1) * c;
    }
    if second == 0 {
        return Err(GraphError::NoGiantComponent);
    }
    // The 1/|V| normalisations of p_k cancel.
    Ok(first as f64 / second as f64)
}

/// Partitions `subset` into the connected components of its induced subgraph.
///
/// Components are listed in order of their smallest vertex index.
pub fn connected_components<'a, I>(g: &LabelledGraph, subset: I) -> Result<Vec<BTreeSet<String>>, GraphError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut members = BTreeSet::new();
    for id in subset {
        let idx = g.index_of(id).ok_or_else(|| GraphError::UnknownVertex(id.to_string()))?;
        members.insert(idx);
    }
    Ok(component_indices(g, &members)
        .into_iter()
        .map(|c| c.into_iter().map(|i| g.vertices[i].id.clone()).collect())
        .collect())
}

/// Index-level variant of [`connected_components`].
pub fn component_indices(g: &LabelledGraph, members: &BTreeSet<usize>) -> Vec<Vec<usize>> {
    let mut seen = BTreeSet::new();
    let mut components = Vec::new();
    for &start in members {
        if !seen.insert(start) {
            continue;
        }
        let mut component = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in g.neighbors(v) {
                if members.contains(&w) && seen.insert(w) {
                    component.push(w);
                    queue.push_back(w);
                }
            }
        }
        component.sort_unstable();
        components.push(component);
    }
    components
}
