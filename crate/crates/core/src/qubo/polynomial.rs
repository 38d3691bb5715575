use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{FormulationError, QuboProblem};
use crate::graph::LabelledGraph;

pub const DEFAULT_STAR_BUDGET: usize = 5_000_000;

const AUX_PREFIX: &str = "_aux";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Max,
    Min,
}

/// Multilinear polynomial over binary variables with an optimisation sense.
///
/// Terms are keyed by their sorted, duplicate-free variable set; the empty
/// monomial lives in `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoBooleanPolynomial {
    sense: Sense,
    vars: BTreeSet<String>,
    terms: BTreeMap<Vec<String>, f64>,
    offset: f64,
}

impl PseudoBooleanPolynomial {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            vars: BTreeSet::new(),
            terms: BTreeMap::new(),
            offset: 0.0,
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn add_offset(&mut self, x: f64) {
        self.offset += x;
    }

    pub fn add_variable(&mut self, v: impl Into<String>) {
        self.vars.insert(v.into());
    }

    /// Adds `coeff * prod(vars)`. Repeated variables collapse (`x^2 = x`).
    pub fn add_term<I, S>(&mut self, vars: I, coeff: f64)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut monomial: Vec<String> = vars.into_iter().map(Into::into).collect();
        monomial.sort();
        monomial.dedup();
        self.vars.extend(monomial.iter().cloned());
        if monomial.is_empty() {
            self.offset += coeff;
            return;
        }
        merge(&mut self.terms, monomial, coeff);
    }

    pub fn variables(&self) -> impl Iterator<Item = &String> {
        self.vars.iter()
    }

    pub fn num_variables(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[String], f64)> {
        self.terms.iter().map(|(m, &c)| (m.as_slice(), c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, vars: &[&str]) -> f64 {
        let mut key: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        key.sort();
        key.dedup();
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    /// Largest term cardinality (0 for a constant polynomial).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: &BTreeMap<String, u8>) -> Result<f64, FormulationError> {
        let mut total = self.offset;
        for v in &self.vars {
            if !x.contains_key(v) {
                return Err(FormulationError::MissingVariable(v.clone()));
            }
        }
        for (m, c) in &self.terms {
            if m.iter().all(|v| x[v] == 1) {
                total += c;
            }
        }
        Ok(total)
    }
}

fn merge(terms: &mut BTreeMap<Vec<String>, f64>, monomial: Vec<String>, coeff: f64) {
    let entry = terms.entry(monomial.clone()).or_insert(0.0);
    *entry += coeff;
    if *entry == 0.0 {
        terms.remove(&monomial);
    }
}

/// A star `S^k`: one center adjacent to `k` leaves.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Star {
    pub center: String,
    pub leaves: Vec<String>,
}

impl Star {
    pub fn vertices(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.center).chain(self.leaves.iter())
    }
}

/// Which `(k+1)`-subsets carry a penalty term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StarScope {
    /// Subsets whose induced subgraph is exactly `S^k` (leaves pairwise
    /// non-adjacent).
    Induced,
    /// Subsets containing a vertex adjacent to all other `k` members, i.e. a
    /// member whose degree inside the subset exceeds `k - 1`.
    Spanning,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRule {
    /// Margin added to the smallest weight in a star.
    pub delta: f64,
    pub scope: StarScope,
    pub star_budget: usize,
}

impl Default for PenaltyRule {
    fn default() -> Self {
        Self {
            delta: 1.0,
            scope: StarScope::Spanning,
            star_budget: DEFAULT_STAR_BUDGET,
        }
    }
}

struct StarSearch<'g> {
    g: &'g LabelledGraph,
    /// Rank of every vertex in id order, used to pick canonical centers.
    rank: Vec<usize>,
    k: usize,
    budget: usize,
    examined: usize,
    induced: bool,
    out: Vec<Star>,
}

impl<'g> StarSearch<'g> {
    fn new(g: &'g LabelledGraph, k: usize, budget: usize, induced: bool) -> Self {
        let mut order: Vec<usize> = (0..g.vertex_count()).collect();
        order.sort_by(|&a, &b| g.vertex(a).id.cmp(&g.vertex(b).id));
        let mut rank = vec![0; order.len()];
        for (r, &v) in order.iter().enumerate() {
            rank[v] = r;
        }
        Self {
            g,
            rank,
            k,
            budget,
            examined: 0,
            induced,
            out: Vec::new(),
        }
    }

    fn run(mut self) -> Result<Vec<Star>, FormulationError> {
        let mut centers: Vec<usize> = (0..self.g.vertex_count()).collect();
        centers.sort_by_key(|&v| self.rank[v]);
        for c in centers {
            let nbrs = self.g.neighbors(c).to_vec();
            if nbrs.len() < self.k {
                continue;
            }
            let mut chosen = Vec::with_capacity(self.k);
            self.extend(c, &nbrs, 0, &mut chosen)?;
        }
        self.out.sort();
        Ok(self.out)
    }

    fn extend(&mut self, c: usize, nbrs: &[usize], from: usize, chosen: &mut Vec<usize>) -> Result<(), FormulationError> {
        if chosen.len() == self.k {
            self.accept(c, chosen);
            return Ok(());
        }
        let need = self.k - chosen.len();
        for i in from..=(nbrs.len() - need) {
            self.examined += 1;
            if self.examined > self.budget {
                return Err(FormulationError::StarBudgetExceeded { budget: self.budget });
            }
            let leaf = nbrs[i];
            if self.induced && chosen.iter().any(|&l| self.g.has_edge(l, leaf)) {
                continue;
            }
            chosen.push(leaf);
            self.extend(c, nbrs, i + 1, chosen)?;
            chosen.pop();
        }
        Ok(())
    }

    fn accept(&mut self, c: usize, leaves: &[usize]) {
        // Report each vertex set once, under its smallest-id valid center. In
        // induced stars with k >= 2 the center is unique anyway.
        let canonical = leaves.iter().all(|&l| {
            self.rank[l] > self.rank[c] || leaves.iter().any(|&m| m != l && !self.g.has_edge(l, m))
        });
        if !canonical {
            return;
        }
        let mut leaf_ids: Vec<String> = leaves.iter().map(|&l| self.g.vertex(l).id.clone()).collect();
        leaf_ids.sort();
        self.out.push(Star {
            center: self.g.vertex(c).id.clone(),
            leaves: leaf_ids,
        });
    }
}

/// All `(k+1)`-subsets whose induced subgraph is the star `S^k`.
///
/// For `k = 1` this is the edge list, each edge reported once with the
/// smaller id as center.
pub fn enumerate_induced_stars(g: &LabelledGraph, k: usize, budget: usize) -> Result<Vec<Star>, FormulationError> {
    if k == 0 {
        return Err(FormulationError::InvalidK);
    }
    StarSearch::new(g, k, budget, true).run()
}

/// All `(k+1)`-subsets containing some vertex adjacent to the other `k`.
pub fn enumerate_spanning_stars(g: &LabelledGraph, k: usize, budget: usize) -> Result<Vec<Star>, FormulationError> {
    if k == 0 {
        return Err(FormulationError::InvalidK);
    }
    StarSearch::new(g, k, budget, false).run()
}

/// Maximum weighted co-k-plex objective: `sum w_v x_v - sum_stars a * prod x`,
/// with `a` the smallest weight in the star plus `rule.delta`.
pub fn build_cokplex_polynomial(
    g: &LabelledGraph,
    k: usize,
    rule: &PenaltyRule,
) -> Result<PseudoBooleanPolynomial, FormulationError> {
    let stars = match rule.scope {
        StarScope::Induced => enumerate_induced_stars(g, k, rule.star_budget)?,
        StarScope::Spanning => enumerate_spanning_stars(g, k, rule.star_budget)?,
    };
    let mut poly = PseudoBooleanPolynomial::new(Sense::Max);
    for v in g.vertices() {
        poly.add_variable(v.id.clone());
        poly.add_term([v.id.clone()], v.weight);
    }
    for star in &stars {
        let min_w = star
            .vertices()
            .map(|id| g.vertex(g.index_of(id).expect("star vertices exist")).weight)
            .fold(f64::INFINITY, f64::min);
        poly.add_term(star.vertices().cloned(), -(min_w + rule.delta));
    }
    Ok(poly)
}

fn fresh_aux(vars: &BTreeSet<String>, next: &mut usize) -> String {
    loop {
        let name = format!("{AUX_PREFIX}{next}");
        *next += 1;
        if !vars.contains(&name) {
            return name;
        }
    }
}

/// Reduces a polynomial of any degree to a minimisation QUBO.
///
/// Max-sense input is negated. Each round substitutes the pair occurring in
/// the most degree >= 3 terms by a fresh auxiliary `y` and adds the penalty
/// `M (x_u x_v - 2 x_u y - 2 x_v y + 3 y)` with `M = 1 + sum |c|` over the
/// terms that contain the pair. Minimising over the auxiliaries recovers the
/// original objective exactly.
pub fn quadratize(poly: &PseudoBooleanPolynomial) -> QuboProblem<String> {
    let sign = match poly.sense {
        Sense::Max => -1.0,
        Sense::Min => 1.0,
    };
    let mut vars = poly.vars.clone();
    let mut terms: BTreeMap<Vec<String>, f64> = poly.terms.iter().map(|(m, &c)| (m.clone(), sign * c)).collect();
    let mut next_aux = 0;

    loop {
        let mut pair_count: BTreeMap<(&String, &String), usize> = BTreeMap::new();
        for m in terms.keys().filter(|m| m.len() >= 3) {
            for i in 0..m.len() {
                for j in (i + 1)..m.len() {
                    *pair_count.entry((&m[i], &m[j])).or_insert(0) += 1;
                }
            }
        }
        // Highest count wins; BTreeMap order breaks ties lexicographically.
        let Some(((u, v), _)) = pair_count
            .into_iter()
            .fold(None::<((&String, &String), usize)>, |best, (pair, n)| match best {
                Some((_, bn)) if bn >= n => best,
                _ => Some((pair, n)),
            })
        else {
            break;
        };
        let (u, v) = (u.clone(), v.clone());
        let weight = 1.0
            + terms
                .iter()
                .filter(|(m, _)| m.contains(&u) && m.contains(&v))
                .map(|(_, c)| c.abs())
                .sum::<f64>();
        let y = fresh_aux(&vars, &mut next_aux);
        vars.insert(y.clone());

        let affected: Vec<Vec<String>> = terms
            .keys()
            .filter(|m| m.len() >= 3 && m.contains(&u) && m.contains(&v))
            .cloned()
            .collect();
        for m in affected {
            let c = terms.remove(&m).expect("present");
            let mut reduced: Vec<String> = m.into_iter().filter(|x| *x != u && *x != v).collect();
            reduced.push(y.clone());
            reduced.sort();
            merge(&mut terms, reduced, c);
        }
        merge(&mut terms, sorted_pair(&u, &v), weight);
        merge(&mut terms, sorted_pair(&u, &y), -2.0 * weight);
        merge(&mut terms, sorted_pair(&v, &y), -2.0 * weight);
        merge(&mut terms, vec![y.clone()], 3.0 * weight);
    }

    let mut q = QuboProblem::new();
    q.add_offset(sign * poly.offset);
    for v in &vars {
        q.add_variable(v.clone());
    }
    for (m, c) in terms {
        match m.as_slice() {
            [a] => q.add_linear(a.clone(), c),
            [a, b] => q.add_quadratic(a.clone(), b.clone(), c),
            _ => unreachable!("all higher-order terms were substituted"),
        }
    }
    q
}

fn sorted_pair(a: &str, b: &str) -> Vec<String> {
    let mut p = vec![a.to_string(), b.to_string()];
    p.sort();
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::brute_force_qubo;
    use proptest::prelude::*;
    use rand::Rng;

    fn graph(ids: &[&str], edges: &[(&str, &str)]) -> LabelledGraph {
        let mut g = LabelledGraph::new();
        for id in ids {
            g.add_vertex(*id, "", 1.0).unwrap();
        }
        for (u, v) in edges {
            g.add_edge(u, v, "").unwrap();
        }
        g
    }

    fn k3() -> LabelledGraph {
        graph(&["x1", "x2", "x3"], &[("x1", "x2"), ("x1", "x3"), ("x2", "x3")])
    }

    fn path() -> LabelledGraph {
        graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")])
    }

    #[test]
    fn induced_star_examples() {
        let stars = enumerate_induced_stars(&k3(), 1, 100).unwrap();
        assert_eq!(stars.len(), 3);
        assert!(stars.iter().all(|s| s.center < s.leaves[0]));
        let stars = enumerate_induced_stars(&path(), 2, 100).unwrap();
        assert_eq!(
            stars,
            vec![Star {
                center: "b".into(),
                leaves: vec!["a".into(), "c".into()]
            }]
        );
        assert!(enumerate_induced_stars(&k3(), 2, 100).unwrap().is_empty());
        assert_eq!(enumerate_spanning_stars(&k3(), 2, 100).unwrap().len(), 1);
        assert_eq!(
            enumerate_induced_stars(&k3(), 1, 1),
            Err(FormulationError::StarBudgetExceeded { budget: 1 })
        );
        assert_eq!(enumerate_induced_stars(&k3(), 0, 10), Err(FormulationError::InvalidK));
    }

    #[test]
    fn cokplex_polynomial_examples() {
        let p = build_cokplex_polynomial(&k3(), 1, &PenaltyRule::default()).unwrap();
        assert_eq!(p.sense(), Sense::Max);
        for v in ["x1", "x2", "x3"] {
            assert_eq!(p.coefficient(&[v]), 1.0);
        }
        for (a, b) in [("x1", "x2"), ("x1", "x3"), ("x2", "x3")] {
            assert_eq!(p.coefficient(&[a, b]), -2.0);
        }
        assert_eq!(p.num_terms(), 6);

        let empty = graph(&["x1", "x2", "x3"], &[]);
        for k in 1..4 {
            let p = build_cokplex_polynomial(&empty, k, &PenaltyRule::default()).unwrap();
            assert_eq!(p.num_terms(), 3);
            assert_eq!(p.degree(), 1);
        }

        let p = build_cokplex_polynomial(&path(), 2, &PenaltyRule::default()).unwrap();
        assert_eq!(p.coefficient(&["a", "b", "c"]), -2.0);
        assert_eq!(p.num_terms(), 4);
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn quadratic_polynomial_passes_through() {
        let p = build_cokplex_polynomial(&k3(), 1, &PenaltyRule::default()).unwrap();
        let q = quadratize(&p);
        assert_eq!(q.num_variables(), 3);
        assert_eq!(q.linear(&"x1".to_string()), -1.0);
        assert_eq!(q.quadratic(&"x1".to_string(), &"x2".to_string()), 2.0);

        let zero = PseudoBooleanPolynomial::new(Sense::Min);
        let q = quadratize(&zero);
        assert_eq!((q.num_variables(), q.offset()), (0, 0.0));
    }

    fn brute_poly(p: &PseudoBooleanPolynomial) -> f64 {
        let vars: Vec<String> = p.variables().cloned().collect();
        let mut best = f64::INFINITY;
        for m in 0..1usize << vars.len() {
            let x: BTreeMap<String, u8> = vars.iter().enumerate().map(|(i, v)| (v.clone(), (m >> i & 1) as u8)).collect();
            let e = p.evaluate(&x).unwrap();
            best = best.min(if p.sense() == Sense::Max { -e } else { e });
        }
        best
    }

    fn brute_qubo_all(q: &QuboProblem<String>) -> (f64, Vec<BTreeMap<String, u8>>) {
        let vars: Vec<String> = q.variables().cloned().collect();
        let mut best = f64::INFINITY;
        let mut arg = Vec::new();
        for m in 0..1usize << vars.len() {
            let z: BTreeMap<String, u8> = vars.iter().enumerate().map(|(i, v)| (v.clone(), (m >> i & 1) as u8)).collect();
            let e = q.energy(&z).unwrap();
            if e < best - 1e-9 {
                best = e;
                arg.clear();
            }
            if (e - best).abs() <= 1e-9 {
                arg.push(z);
            }
        }
        (best, arg)
    }

    #[test]
    fn cubic_term_quadratization() {
        let mut p = PseudoBooleanPolynomial::new(Sense::Min);
        p.add_term(["x1", "x2", "x3"], -2.0);
        let q = quadratize(&p);
        assert!(q.num_variables() >= 3);
        let (min, arg) = brute_qubo_all(&q);
        assert_eq!(min, -2.0);
        assert_eq!(brute_poly(&p), -2.0);
        for z in arg {
            assert_eq!((z["x1"], z["x2"], z["x3"]), (1, 1, 1));
        }
    }

    fn random_poly(seed: u64, n: usize, max_deg: usize) -> PseudoBooleanPolynomial {
        let mut rng = crate::seed::rng(seed);
        let sense = if rng.random_bool(0.5) { Sense::Max } else { Sense::Min };
        let mut p = PseudoBooleanPolynomial::new(sense);
        p.add_offset(rng.random_range(-1.0..1.0));
        for i in 0..n {
            p.add_variable(format!("x{i}"));
        }
        for _ in 0..rng.random_range(1..8) {
            let d = rng.random_range(1..=max_deg);
            let vars: Vec<String> = (0..d).map(|_| format!("x{}", rng.random_range(0..n))).collect();
            let c = (rng.random_range(-6i32..=6)) as f64 / 2.0;
            p.add_term(vars, c);
        }
        p
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn quadratize_preserves_optimum(seed in any::<u64>(), n in 2usize..7, d in 2usize..5) {
            let p = random_poly(seed, n, d);
            let q = quadratize(&p);
            prop_assume!(q.num_variables() <= 16);
            let target = brute_poly(&p);
            let (min, arg) = brute_qubo_all(&q);
            prop_assert!((min - target).abs() < 1e-9, "{} vs {}", min, target);
            // Every QUBO optimum restricted to the originals optimises the polynomial.
            for z in arg {
                let x: BTreeMap<String, u8> = p.variables().map(|v| (v.clone(), z[v])).collect();
                let e = p.evaluate(&x).unwrap();
                let e = if p.sense() == Sense::Max { -e } else { e };
                prop_assert!((e - target).abs() < 1e-9);
            }
            // The conditional-independence brute force agrees with full enumeration.
            let fast = brute_force_qubo(&q, 24).unwrap();
            prop_assert!((fast.energy - min).abs() < 1e-9);
        }
    }
}
