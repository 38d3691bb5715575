use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use serde::Deserialize;
use serde_json::Value;

use super::FormulationError;
use crate::Spin;

/// Variable identifier usable in QUBO and Ising problems. Logical problems
/// use string ids, physical problems use qubit indices.
pub trait Var: Clone + Ord + Hash + Debug + Display + FromStr + Send + Sync + 'static {}

impl Var for String {}
impl Var for usize {}

fn key<V: Var>(u: V, v: V) -> (V, V) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Linear + pairwise terms with a tracked variable set. Zero coefficients are
/// never stored, but the variables they touched stay registered.
#[derive(Debug, Clone, PartialEq)]
struct QuadraticForm<V: Var> {
    vars: BTreeSet<V>,
    linear: BTreeMap<V, f64>,
    quadratic: BTreeMap<(V, V), f64>,
    offset: f64,
}

impl<V: Var> Default for QuadraticForm<V> {
    fn default() -> Self {
        Self {
            vars: BTreeSet::new(),
            linear: BTreeMap::new(),
            quadratic: BTreeMap::new(),
            offset: 0.0,
        }
    }
}

impl<V: Var> QuadraticForm<V> {
    fn add_linear(&mut self, v: V, x: f64) {
        self.vars.insert(v.clone());
        let entry = self.linear.entry(v.clone()).or_insert(0.0);
        *entry += x;
        if *entry == 0.0 {
            self.linear.remove(&v);
        }
    }

    fn add_quadratic(&mut self, u: V, v: V, x: f64) {
        debug_assert!(u != v);
        self.vars.insert(u.clone());
        self.vars.insert(v.clone());
        let k = key(u, v);
        let entry = self.quadratic.entry(k.clone()).or_insert(0.0);
        *entry += x;
        if *entry == 0.0 {
            self.quadratic.remove(&k);
        }
    }

    fn to_json(&self) -> Value {
        let linear: serde_json::Map<String, Value> = self
            .vars
            .iter()
            .map(|v| (v.to_string(), Value::from(self.linear.get(v).copied().unwrap_or(0.0))))
            .collect();
        let quadratic: Vec<Value> = self
            .quadratic
            .iter()
            .map(|((u, v), x)| serde_json::json!([u.to_string(), v.to_string(), x]))
            .collect();
        serde_json::json!({
            "linear": linear,
            "quadratic": quadratic,
            "offset": self.offset,
        })
    }

    fn from_json(value: &Value, same_var: impl Fn(&mut Self, V, f64)) -> Result<Self, FormulationError> {
        #[derive(Deserialize)]
        struct File {
            #[serde(default)]
            linear: BTreeMap<String, f64>,
            #[serde(default)]
            quadratic: Vec<(String, String, f64)>,
            #[serde(default)]
            offset: f64,
        }
        let file: File = File::deserialize(value).map_err(|e| FormulationError::Syntax(e.to_string()))?;
        let parse = |s: &str| {
            s.parse::<V>()
                .map_err(|_| FormulationError::Syntax(format!("bad variable id {s:?}")))
        };
        let mut form = Self {
            offset: file.offset,
            ..Self::default()
        };
        for (v, x) in file.linear {
            form.add_linear(parse(&v)?, x);
        }
        for (u, v, x) in file.quadratic {
            let (u, v) = (parse(&u)?, parse(&v)?);
            if u == v {
                same_var(&mut form, u, x);
            } else {
                form.add_quadratic(u, v, x);
            }
        }
        Ok(form)
    }
}

/// Minimisation problem over binary variables `z in {0,1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem<V: Var = String> {
    form: QuadraticForm<V>,
}

impl<V: Var> Default for QuboProblem<V> {
    fn default() -> Self {
        Self {
            form: QuadraticForm::default(),
        }
    }
}

impl<V: Var> QuboProblem<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, v: V) {
        self.form.vars.insert(v);
    }

    pub fn add_linear(&mut self, v: V, x: f64) {
        self.form.add_linear(v, x);
    }

    /// Adds `x * z_u * z_v`; `z_u * z_u = z_u` folds into the linear term.
    pub fn add_quadratic(&mut self, u: V, v: V, x: f64) {
        if u == v {
            self.form.add_linear(u, x);
        } else {
            self.form.add_quadratic(u, v, x);
        }
    }

    pub fn add_offset(&mut self, x: f64) {
        self.form.offset += x;
    }

    pub fn offset(&self) -> f64 {
        self.form.offset
    }

    pub fn variables(&self) -> impl Iterator<Item = &V> {
        self.form.vars.iter()
    }

    pub fn num_variables(&self) -> usize {
        self.form.vars.len()
    }

    pub fn contains(&self, v: &V) -> bool {
        self.form.vars.contains(v)
    }

    pub fn linear(&self, v: &V) -> f64 {
        self.form.linear.get(v).copied().unwrap_or(0.0)
    }

    pub fn quadratic(&self, u: &V, v: &V) -> f64 {
        self.form
            .quadratic
            .get(&key(u.clone(), v.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn linear_terms(&self) -> impl Iterator<Item = (&V, f64)> {
        self.form.linear.iter().map(|(v, &x)| (v, x))
    }

    pub fn quadratic_terms(&self) -> impl Iterator<Item = (&V, &V, f64)> {
        self.form.quadratic.iter().map(|((u, v), &x)| (u, v, x))
    }

    pub fn energy(&self, z: &BTreeMap<V, u8>) -> Result<f64, FormulationError> {
        let get = |v: &V| {
            z.get(v)
                .copied()
                .ok_or_else(|| FormulationError::MissingVariable(v.to_string()))
        };
        for v in &self.form.vars {
            get(v)?;
        }
        let mut e = self.form.offset;
        for (v, &x) in &self.form.linear {
            e += x * f64::from(get(v)?);
        }
        for ((u, v), &x) in &self.form.quadratic {
            e += x * f64::from(get(u)? * get(v)?);
        }
        Ok(e)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.form.to_json()).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, FormulationError> {
        let value: Value = serde_json::from_str(text).map_err(|e| FormulationError::Syntax(e.to_string()))?;
        let form = QuadraticForm::from_json(&value, |f, v, x| f.add_linear(v, x))?;
        Ok(Self { form })
    }
}

/// Minimisation of `sum h_i s_i + sum J_ij s_i s_j + offset` over `s_i = +-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem<V: Var = String> {
    form: QuadraticForm<V>,
}

impl<V: Var> Default for IsingProblem<V> {
    fn default() -> Self {
        Self {
            form: QuadraticForm::default(),
        }
    }
}

impl<V: Var> IsingProblem<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, v: V) {
        self.form.vars.insert(v);
    }

    pub fn add_field(&mut self, v: V, x: f64) {
        self.form.add_linear(v, x);
    }

    /// Adds `x * s_u * s_v`; `s_u * s_u = 1` folds into the offset.
    pub fn add_coupling(&mut self, u: V, v: V, x: f64) {
        if u == v {
            self.form.vars.insert(u);
            self.form.offset += x;
        } else {
            self.form.add_quadratic(u, v, x);
        }
    }

    pub fn add_offset(&mut self, x: f64) {
        self.form.offset += x;
    }

    pub fn offset(&self) -> f64 {
        self.form.offset
    }

    pub fn variables(&self) -> impl Iterator<Item = &V> {
        self.form.vars.iter()
    }

    pub fn num_variables(&self) -> usize {
        self.form.vars.len()
    }

    pub fn contains(&self, v: &V) -> bool {
        self.form.vars.contains(v)
    }

    pub fn field(&self, v: &V) -> f64 {
        self.form.linear.get(v).copied().unwrap_or(0.0)
    }

    pub fn coupling(&self, u: &V, v: &V) -> f64 {
        self.form
            .quadratic
            .get(&key(u.clone(), v.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    /// Non-zero fields in variable order.
    pub fn fields(&self) -> impl Iterator<Item = (&V, f64)> {
        self.form.linear.iter().map(|(v, &x)| (v, x))
    }

    /// Non-zero couplers with `u < v`, in key order.
    pub fn couplings(&self) -> impl Iterator<Item = (&V, &V, f64)> {
        self.form.quadratic.iter().map(|((u, v), &x)| (u, v, x))
    }

    pub fn num_couplings(&self) -> usize {
        self.form.quadratic.len()
    }

    /// Neighbour lists of the interaction graph.
    pub fn adjacency(&self) -> BTreeMap<V, Vec<(V, f64)>> {
        let mut adj: BTreeMap<V, Vec<(V, f64)>> = self.form.vars.iter().map(|v| (v.clone(), Vec::new())).collect();
        for ((u, v), &x) in &self.form.quadratic {
            adj.get_mut(u).expect("registered").push((v.clone(), x));
            adj.get_mut(v).expect("registered").push((u.clone(), x));
        }
        adj
    }

    pub fn energy(&self, spins: &BTreeMap<V, Spin>) -> Result<f64, FormulationError> {
        let get = |v: &V| {
            spins
                .get(v)
                .map(|&s| f64::from(s))
                .ok_or_else(|| FormulationError::MissingVariable(v.to_string()))
        };
        for v in &self.form.vars {
            get(v)?;
        }
        let mut e = self.form.offset;
        for (v, &x) in &self.form.linear {
            e += x * get(v)?;
        }
        for ((u, v), &x) in &self.form.quadratic {
            e += x * get(u)? * get(v)?;
        }
        Ok(e)
    }

    /// Dense, index-addressed copy for the samplers.
    pub fn compile(&self) -> CompiledIsing<V> {
        CompiledIsing::new(self)
    }

    pub fn to_json_value(&self) -> Value {
        self.form.to_json()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("serializable")
    }

    pub fn from_json_value(value: &Value) -> Result<Self, FormulationError> {
        let form = QuadraticForm::from_json(value, |f, v, x| {
            f.vars.insert(v);
            f.offset += x;
        })?;
        Ok(Self { form })
    }

    pub fn from_json(text: &str) -> Result<Self, FormulationError> {
        let value: Value = serde_json::from_str(text).map_err(|e| FormulationError::Syntax(e.to_string()))?;
        Self::from_json_value(&value)
    }
}

/// Converts a QUBO into an Ising problem with `s = 1 - 2z`; energies agree on
/// every assignment.
pub fn qubo_to_ising<V: Var>(q: &QuboProblem<V>) -> IsingProblem<V> {
    let mut p = IsingProblem::new();
    p.add_offset(q.offset());
    for v in q.variables() {
        p.add_variable(v.clone());
    }
    // a z = a/2 - (a/2) s
    for (v, a) in q.linear_terms() {
        p.add_offset(a / 2.0);
        p.add_field(v.clone(), -a / 2.0);
    }
    // b z_u z_v = (b/4)(1 - s_u - s_v + s_u s_v)
    for (u, v, b) in q.quadratic_terms() {
        let c = b / 4.0;
        p.add_offset(c);
        p.add_field(u.clone(), -c);
        p.add_field(v.clone(), -c);
        p.add_coupling(u.clone(), v.clone(), c);
    }
    p
}

/// Applies the gauge `g`: `h'_i = g_i h_i`, `J'_ij = g_i g_j J_ij`.
pub fn gauge_transform<V: Var>(p: &IsingProblem<V>, g: &BTreeMap<V, Spin>) -> Result<IsingProblem<V>, FormulationError> {
    let get = |v: &V| {
        g.get(v)
            .map(|&s| f64::from(s))
            .ok_or_else(|| FormulationError::MissingVariable(v.to_string()))
    };
    let mut out = IsingProblem::new();
    out.add_offset(p.offset());
    for v in p.variables() {
        get(v)?;
        out.add_variable(v.clone());
    }
    for (v, h) in p.fields() {
        out.add_field(v.clone(), get(v)? * h);
    }
    for (u, v, j) in p.couplings() {
        out.add_coupling(u.clone(), v.clone(), get(u)? * get(v)? * j);
    }
    Ok(out)
}

/// Index-addressed Ising problem with CSR adjacency. Variable order is the
/// sorted order of the source problem.
#[derive(Debug, Clone)]
pub struct CompiledIsing<V: Var = String> {
    vars: Vec<V>,
    index: HashMap<V, usize>,
    h: Vec<f64>,
    starts: Vec<usize>,
    nbrs: Vec<u32>,
    weights: Vec<f64>,
    offset: f64,
}

impl<V: Var> CompiledIsing<V> {
    fn new(p: &IsingProblem<V>) -> Self {
        let vars: Vec<V> = p.variables().cloned().collect();
        let index: HashMap<V, usize> = vars.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let h = vars.iter().map(|v| p.field(v)).collect();
        let mut lists: Vec<Vec<(u32, f64)>> = vec![Vec::new(); vars.len()];
        for (u, v, j) in p.couplings() {
            let (a, b) = (index[u], index[v]);
            lists[a].push((b as u32, j));
            lists[b].push((a as u32, j));
        }
        let mut starts = Vec::with_capacity(vars.len() + 1);
        let mut nbrs = Vec::new();
        let mut weights = Vec::new();
        starts.push(0);
        for mut list in lists {
            list.sort_by_key(|&(n, _)| n);
            for (n, w) in list {
                nbrs.push(n);
                weights.push(w);
            }
            starts.push(nbrs.len());
        }
        Self {
            vars,
            index,
            h,
            starts,
            nbrs,
            weights,
            offset: p.offset(),
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[V] {
        &self.vars
    }

    pub fn index_of(&self, v: &V) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn field(&self, i: usize) -> f64 {
        self.h[i]
    }

    pub fn fields(&self) -> &[f64] {
        &self.h
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.starts[i]..self.starts[i + 1];
        self.nbrs[r.clone()]
            .iter()
            .zip(&self.weights[r])
            .map(|(&n, &w)| (n as usize, w))
    }

    /// `h_i + sum_j J_ij s_j`.
    #[inline]
    pub fn local_field(&self, i: usize, spins: &[Spin]) -> f64 {
        let r = self.starts[i]..self.starts[i + 1];
        let mut f = self.h[i];
        for (&n, &w) in self.nbrs[r.clone()].iter().zip(&self.weights[r]) {
            f += w * f64::from(spins[n as usize]);
        }
        f
    }

    /// Energy change from flipping spin `i`.
    #[inline]
    pub fn flip_delta(&self, i: usize, spins: &[Spin]) -> f64 {
        -2.0 * f64::from(spins[i]) * self.local_field(i, spins)
    }

    pub fn energy(&self, spins: &[Spin]) -> f64 {
        let mut e = self.offset;
        for i in 0..self.vars.len() {
            let si = f64::from(spins[i]);
            e += self.h[i] * si;
            for (j, w) in self.neighbors(i) {
                if j > i {
                    e += w * si * f64::from(spins[j]);
                }
            }
        }
        e
    }

    pub fn to_assignment(&self, spins: &[Spin]) -> BTreeMap<V, Spin> {
        self.vars.iter().cloned().zip(spins.iter().copied()).collect()
    }

    pub fn from_assignment(&self, assignment: &BTreeMap<V, Spin>) -> Result<Vec<Spin>, FormulationError> {
        self.vars
            .iter()
            .map(|v| {
                assignment
                    .get(v)
                    .copied()
                    .ok_or_else(|| FormulationError::MissingVariable(v.to_string()))
            })
            .collect()
    }
}
