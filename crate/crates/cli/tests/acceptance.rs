//! Acceptance suite: one PASS/FAIL line per criterion and a closing summary.
//! The target reports verdicts and does not abort the test run; set
//! `ACCEPTANCE_STRICT=1` to exit non-zero on any FAIL.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use anneal_forge_core::chimera::{build_chimera, dw2x_topology, HardwareGraph};
use anneal_forge_core::decode::majority_vote;
use anneal_forge_core::embedding::{
    embedding_pool, find_embedding, interaction_graph, select_by_criterion, validate_embedding, Criterion,
    EmbedderConfig, Embedding,
};
use anneal_forge_core::graph::{generate_random_instance, percolation_threshold, DegreeHistogram, LabelledGraph};
use anneal_forge_core::params::{distributed_sums, preprocess_fix_qubits, set_parameters_theoretical, HardwareRanges};
use anneal_forge_core::pipeline::{run_bench, BenchConfig, OUTPUT_FILES};
use anneal_forge_core::qubo::{build_cokplex_polynomial, qubo_to_ising, quadratize, IsingProblem, PenaltyRule, QuboProblem};
use anneal_forge_core::sampler::{brute_force_ground, brute_force_qubo, greedy_descent};
use anneal_forge_core::seed;
use anneal_forge_core::stats::{bootstrap_tts, median, posterior, r99, PosteriorSummary};
use anneal_forge_core::Spin;
use rand::seq::SliceRandom;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// ---------------------------------------------------------------- oracles

/// Heaviest co-k-plex by plain subset enumeration.
fn oracle_cokplex(g: &LabelledGraph, k: usize) -> f64 {
    let n = g.vertex_count();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let inside = |v: usize| mask >> v & 1 == 1;
        let ok = (0..n).filter(|&v| inside(v)).all(|v| g.neighbors(v).iter().filter(|&&u| inside(u)).count() < k);
        if ok {
            let w: f64 = (0..n).filter(|&v| inside(v)).map(|v| g.vertex(v).weight).sum();
            best = best.max(w);
        }
    }
    best
}

fn ising_energy(p: &IsingProblem<String>, s: &BTreeMap<String, Spin>) -> f64 {
    let mut e = p.offset();
    for (v, h) in p.fields() {
        e += h * f64::from(s[v]);
    }
    for (u, v, j) in p.couplings() {
        e += j * f64::from(s[u] * s[v]);
    }
    e
}

fn qubo_energy(q: &QuboProblem<String>, z: &BTreeMap<String, u8>) -> f64 {
    let mut e = q.offset();
    for (v, a) in q.linear_terms() {
        e += a * f64::from(z[v]);
    }
    for (u, v, b) in q.quadratic_terms() {
        e += b * f64::from(z[u] * z[v]);
    }
    e
}

fn all_spin_states(vars: &[String]) -> impl Iterator<Item = BTreeMap<String, Spin>> + '_ {
    (0u64..(1 << vars.len())).map(move |m| {
        vars.iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), if m >> i & 1 == 1 { 1 } else { -1 }))
            .collect()
    })
}

/// Ground energy and every ground state by plain enumeration.
fn oracle_ground(p: &IsingProblem<String>) -> (f64, Vec<BTreeMap<String, Spin>>) {
    let vars: Vec<String> = p.variables().cloned().collect();
    let mut best = f64::INFINITY;
    let mut states = Vec::new();
    for s in all_spin_states(&vars) {
        let e = ising_energy(p, &s);
        if e < best - 1e-12 {
            best = e;
            states.clear();
        }
        if (e - best).abs() <= 1e-12 {
            states.push(s);
        }
    }
    (best, states)
}

/// Multiple of 1/8 in `[-lim, lim]`, so sums stay exact.
fn dyadic(rng: &mut impl Rng, lim: f64) -> f64 {
    let steps = (lim * 8.0) as i64;
    rng.random_range(-steps..=steps) as f64 / 8.0
}

fn random_ising(rng: &mut impl Rng, n: usize, density: f64, hlim: f64) -> IsingProblem<String> {
    let mut p = IsingProblem::new();
    for i in 0..n {
        p.add_field(format!("x{i:02}"), dyadic(rng, hlim));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(density) {
                let mut x = dyadic(rng, 1.0);
                if x == 0.0 {
                    x = 0.5;
                }
                p.add_coupling(format!("x{i:02}"), format!("x{j:02}"), x);
            }
        }
    }
    p
}

fn weighted_instance(rng: &mut impl Rng, n: usize, seed: u64) -> LabelledGraph {
    let lo = rng.random_range(10.0..70.0);
    let (g, _) = generate_random_instance(n, (lo, lo + 20.0), seed).unwrap();
    let mut w = LabelledGraph::new();
    for v in g.vertices() {
        w.add_vertex(v.id.clone(), "", rng.random_range(1..=8) as f64 / 4.0).unwrap();
    }
    for e in g.edges() {
        w.add_edge(&g.vertex(e.u).id, &g.vertex(e.v).id, "").unwrap();
    }
    w
}

/// Independent validity check: usable, disjoint, connected chains with a
/// coupler behind every logical edge.
fn oracle_valid(emb: &Embedding, g: &LabelledGraph, hw: &HardwareGraph) -> bool {
    let mut owner = BTreeMap::new();
    for (v, chain) in &emb.chains {
        if chain.is_empty() || chain.iter().any(|&q| !hw.is_usable(q)) {
            return false;
        }
        for &q in chain {
            if owner.insert(q, v.clone()).is_some() {
                return false;
            }
        }
        let set: BTreeSet<usize> = chain.iter().copied().collect();
        let mut seen = BTreeSet::from([chain[0]]);
        let mut queue = VecDeque::from([chain[0]]);
        while let Some(q) = queue.pop_front() {
            for &r in &set {
                if hw.has_coupler(q, r) && seen.insert(r) {
                    queue.push_back(r);
                }
            }
        }
        if seen.len() != set.len() {
            return false;
        }
    }
    if g.vertices().iter().any(|v| !emb.chains.contains_key(&v.id)) {
        return false;
    }
    g.edges().iter().all(|e| {
        let a = &emb.chains[&g.vertex(e.u).id];
        let b = &emb.chains[&g.vertex(e.v).id];
        a.iter().any(|&p| b.iter().any(|&q| hw.has_coupler(p, q)))
    })
}

// ---------------------------------------------------------------- criteria

fn c1() -> Verdict {
    let hist = DegreeHistogram::from_counts([(11, 8), (12, 8), (13, 2)]);
    let t = Instant::now();
    let p_c = percolation_threshold(&hist).unwrap();
    let el = t.elapsed();
    verdict(
        (p_c - 0.0934).abs() <= 5e-4 && el < Duration::from_millis(1),
        format!("p_c = {p_c:.6} (0.0934 +- 5e-4) in {} us", el.as_micros()),
    )
}

fn c2() -> Verdict {
    let t = Instant::now();
    let mut rng = seed::rng(2);
    let mut bad = Vec::new();
    let mut aux_max = 0;
    for i in 0..100u64 {
        let n = rng.random_range(3..=12);
        let k = 1 + (i % 2) as usize;
        let g = weighted_instance(&mut rng, n, seed::derive(2, i));
        let q = quadratize(&build_cokplex_polynomial(&g, k, &PenaltyRule::default()).unwrap());
        aux_max = aux_max.max(q.num_variables() - n);
        let want = oracle_cokplex(&g, k);
        let got = brute_force_qubo(&q, 40).unwrap();
        let feasible = got.states.iter().all(|z| {
            let set: BTreeSet<usize> = (0..n).filter(|&v| z[&g.vertex(v).id] == 1).collect();
            let w: f64 = set.iter().map(|&v| g.vertex(v).weight).sum();
            set.iter().all(|&v| g.neighbors(v).iter().filter(|u| set.contains(u)).count() < k) && w == want
        });
        if got.energy != -want || !feasible || got.states.is_empty() {
            bad.push(i);
        }
    }
    let el = t.elapsed();
    verdict(
        bad.is_empty() && el < Duration::from_secs(120),
        format!("100 graphs, k in {{1,2}}, up to {aux_max} auxiliaries, mismatches {bad:?}, {}", secs(el)),
    )
}

fn c3() -> Verdict {
    let mut rng = seed::rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let mut q = QuboProblem::new();
        let vars: Vec<String> = (0..n).map(|i| format!("z{i}")).collect();
        for v in &vars {
            q.add_linear(v.clone(), rng.random_range(-5.0..5.0));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(0.5) {
                    q.add_quadratic(vars[i].clone(), vars[j].clone(), rng.random_range(-5.0..5.0));
                }
            }
        }
        q.add_offset(rng.random_range(-3.0..3.0));
        let p = qubo_to_ising(&q);
        for m in 0u32..(1 << n) {
            let z: BTreeMap<String, u8> = vars.iter().enumerate().map(|(i, v)| (v.clone(), (m >> i & 1) as u8)).collect();
            let s: BTreeMap<String, Spin> = z.iter().map(|(v, &b)| (v.clone(), 1 - 2 * b as Spin)).collect();
            let eq = qubo_energy(&q, &z);
            worst = worst.max((eq - ising_energy(&p, &s)).abs());
            worst = worst.max((q.energy(&z).unwrap() - p.energy(&s).unwrap()).abs());
        }
    }
    verdict(worst <= 1e-12, format!("100 problems, worst |E_qubo - E_ising| = {worst:.2e} (<= 1e-12)"))
}

struct Parameterized {
    logical: IsingProblem<String>,
    ei: anneal_forge_core::EmbeddedIsing,
}

/// Instances for criteria 4 and 5: half random Ising problems, half
/// co-k-plex formulations, with at most 10 variables after preprocessing.
fn c4_instances() -> (Vec<Parameterized>, usize) {
    let hw = build_chimera(2, 2, 4).unwrap();
    let mut rng = seed::rng(4);
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut i = 0u64;
    while out.len() < 50 {
        i += 1;
        let logical = if i % 2 == 0 {
            let (n, d) = (rng.random_range(3..=10), rng.random_range(0.2..0.6));
            random_ising(&mut rng, n, d, 1.5)
        } else {
            let n = rng.random_range(4..=10);
            let g = weighted_instance(&mut rng, n, seed::derive(4, i));
            qubo_to_ising(&quadratize(&build_cokplex_polynomial(&g, 1, &PenaltyRule::default()).unwrap()))
        };
        let reduced = preprocess_fix_qubits(&logical).reduced;
        if reduced.num_variables() == 0 || reduced.num_variables() > 10 {
            skipped += 1;
            continue;
        }
        let Some(emb) = find_embedding(&interaction_graph(&reduced), &hw, 10, i).embedding else {
            skipped += 1;
            continue;
        };
        let ei = set_parameters_theoretical(&logical, &emb, &hw, &HardwareRanges::default(), 0.1).unwrap();
        out.push(Parameterized { logical, ei });
    }
    (out, skipped)
}

fn c4(instances: &[Parameterized], skipped: usize, start: Instant) -> Verdict {
    let mut bad = Vec::new();
    let mut max_qubits = 0;
    for (n, inst) in instances.iter().enumerate() {
        let (ground, _) = oracle_ground(&inst.logical);
        max_qubits = max_qubits.max(inst.ei.physical.num_variables());
        let phys = brute_force_ground(&inst.ei.physical, 26).unwrap();
        let hit = phys.assignments().any(|s| {
            let mut decoded = inst.ei.fixed.clone();
            for (v, chain) in &inst.ei.embedding.chains {
                let first = s[&chain[0]];
                if chain.iter().any(|q| s[q] != first) {
                    return false;
                }
                decoded.insert(v.clone(), first);
            }
            inst.logical.variables().all(|v| decoded.contains_key(v)) && ising_energy(&inst.logical, &decoded) == ground
        });
        if !hit {
            bad.push(n);
        }
    }
    let el = start.elapsed();
    verdict(
        bad.is_empty() && el < Duration::from_secs(600),
        format!(
            "50 instances (up to {max_qubits} qubits, {skipped} redrawn), failures {bad:?}, {}",
            secs(el)
        ),
    )
}

fn c5(instances: &[Parameterized]) -> Verdict {
    let mut worst = 0.0f64;
    for inst in instances {
        let reduced = preprocess_fix_qubits(&inst.logical).reduced;
        let (h, j) = distributed_sums(&inst.ei);
        let a = inst.ei.alpha;
        for (v, hv) in h {
            worst = worst.max((hv - a * reduced.field(&v)).abs());
        }
        for (u, v, x) in reduced.couplings() {
            let got = j.get(&(u.clone(), v.clone())).copied().unwrap_or(0.0);
            worst = worst.max((got - a * x).abs());
        }
    }
    verdict(worst <= 1e-9, format!("worst deviation {worst:.2e} (<= 1e-9)"))
}

fn c6() -> Verdict {
    let mut rng = seed::rng(6);
    let mut bad = 0;
    let mut fixed_total = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let d = rng.random_range(0.1..0.7);
        let p = random_ising(&mut rng, n, d, 3.0);
        let fixed = preprocess_fix_qubits(&p).fixed;
        fixed_total += fixed.len();
        let (_, states) = oracle_ground(&p);
        if !states.iter().any(|s| fixed.iter().all(|(v, x)| s[v] == *x)) {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("100 problems, {fixed_total} variables fixed, {bad} unsound"))
}

fn c7() -> Verdict {
    let a = r99(0.99);
    let b = r99(0.9);
    let c = r99(0.5);
    let db = (b - 2.0).abs();
    verdict(
        a == 1.0 && db <= 2.0 * f64::EPSILON && (c - 6.6439).abs() <= 1e-3,
        format!("r99(0.99) = {a}, r99(0.9) = {b} (|d| = {db:.1e} <= 2 eps), r99(0.5) = {c:.4}"),
    )
}

fn c8() -> Verdict {
    let point: Vec<PosteriorSummary> = (0..20).map(|_| posterior(&[50_000_000; 20], 100_000_000).unwrap()).collect();
    let d = bootstrap_tts(&point, 50.0, 1000, 5.0, 8).unwrap();
    let worst = d.values_us.iter().map(|v| (v / 33.22 - 1.0).abs()).fold(0.0, f64::max);

    let mut rng = seed::rng(8);
    let spread: Vec<PosteriorSummary> = (0..30)
        .map(|_| posterior(&[rng.random_range(0..200), rng.random_range(0..200)], 200).unwrap())
        .collect();
    let base = bootstrap_tts(&spread, 50.0, 500, 5.0, 9).unwrap();
    let mut shuffled = spread.clone();
    shuffled.shuffle(&mut rng);
    let perm = bootstrap_tts(&shuffled, 50.0, 500, 5.0, 9).unwrap();
    let doubled = bootstrap_tts(&spread, 50.0, 500, 10.0, 9).unwrap();
    let linear = base.values_us.iter().zip(&doubled.values_us).all(|(a, b)| 2.0 * a == *b);
    verdict(
        worst <= 0.02 && perm.values_us == base.values_us && linear,
        format!(
            "max rel. deviation from 33.22 us {:.3}%, permutation invariant {}, tau-linear {linear}",
            100.0 * worst,
            perm.values_us == base.values_us
        ),
    )
}

fn c9() -> Verdict {
    let mut rng = seed::rng(9);
    let mut raised = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=12);
        let d = rng.random_range(0.1..0.9);
        let p = random_ising(&mut rng, n, d, 2.0);
        let start: BTreeMap<String, Spin> = p.variables().map(|v| (v.clone(), if rng.random_bool(0.5) { 1 } else { -1 })).collect();
        let end = greedy_descent(&p, &start).unwrap();
        if ising_energy(&p, &end) > ising_energy(&p, &start) + 1e-12 {
            raised += 1;
        }
    }

    let mut not_identity = 0;
    for t in 0..1000u64 {
        let mut emb = Embedding::new();
        let mut sample = BTreeMap::new();
        let mut logical = BTreeMap::new();
        let mut next = 0;
        for v in 0..rng.random_range(1..8) {
            let len = rng.random_range(1..=5);
            let s: Spin = if rng.random_bool(0.5) { 1 } else { -1 };
            let chain: Vec<usize> = (next..next + len).collect();
            next += len;
            for &q in &chain {
                sample.insert(q, s);
            }
            emb.insert(format!("v{v}"), chain);
            logical.insert(format!("v{v}"), s);
        }
        if majority_vote(&sample, &emb, t).unwrap() != logical {
            not_identity += 1;
        }
    }

    let mut tie = Embedding::new();
    tie.insert("a", vec![0, 1]);
    let split = BTreeMap::from([(0usize, 1 as Spin), (1, -1)]);
    let ups = (0..10_000u64).filter(|&s| majority_vote(&split, &tie, s).unwrap()["a"] == 1).count();
    let frac = ups as f64 / 10_000.0;
    verdict(
        raised == 0 && not_identity == 0 && (frac - 0.5).abs() <= 0.02,
        format!("greedy raised energy {raised}/10000, MV identity failures {not_identity}/1000, tie +1 fraction {frac:.4}"),
    )
}

fn c10() -> Verdict {
    let t = Instant::now();
    let hw = dw2x_topology();
    let mut rng = seed::rng(10);
    let (mut found, mut invalid) = (0, 0);
    for i in 0..50u64 {
        let n = rng.random_range(6..=20);
        let lo = rng.random_range(30.0..80.0);
        let (g, _) = generate_random_instance(n, (lo, lo + 15.0), seed::derive(10, i)).unwrap();
        if let Some(e) = find_embedding(&g, &hw, 2, i).embedding {
            found += 1;
            if !validate_embedding(&e, &g, &hw).is_empty() || !oracle_valid(&e, &g, &hw) {
                invalid += 1;
            }
        }
    }

    let mut pools: Vec<Vec<Embedding>> = Vec::new();
    let cfg = EmbedderConfig {
        trials: 1,
        ..EmbedderConfig::default()
    };
    for i in 0..6u64 {
        let (g, _) = generate_random_instance(10 + 2 * i as usize, (50.0, 70.0), seed::derive(11, i)).unwrap();
        let pool = embedding_pool(&g, &hw, 4, 12, &cfg, i);
        if !pool.is_empty() {
            pools.push(pool);
        }
    }
    for _ in 0..50 {
        let pool: Vec<Embedding> = (0..rng.random_range(1..6))
            .map(|_| {
                let mut e = Embedding::new();
                let mut next = 0;
                for v in 0..rng.random_range(1..6) {
                    let len = rng.random_range(1..=4);
                    e.insert(format!("v{v}"), (next..next + len).collect());
                    next += len;
                }
                e
            })
            .collect();
        pools.push(pool);
    }
    let mut wrong = 0;
    for pool in &pools {
        let lens: Vec<Vec<f64>> = pool.iter().map(|e| e.chains.values().map(|c| c.len() as f64).collect()).collect();
        let total: Vec<f64> = lens.iter().map(|l| l.iter().sum()).collect();
        let longest: Vec<f64> = lens.iter().map(|l| l.iter().copied().fold(0.0, f64::max)).collect();
        let std: Vec<f64> = lens
            .iter()
            .map(|l| {
                let m = l.iter().sum::<f64>() / l.len() as f64;
                (l.iter().map(|x| (x - m).powi(2)).sum::<f64>() / l.len() as f64).sqrt()
            })
            .collect();
        let argmin = |xs: &[f64]| (0..xs.len()).fold(0, |b, i| if xs[i] < xs[b] { i } else { b });
        for (c, xs) in [(Criterion::Pq, &total), (Criterion::LCh, &longest), (Criterion::Std, &std)] {
            if select_by_criterion(pool, c).unwrap() != argmin(xs) {
                wrong += 1;
            }
        }
    }
    verdict(
        invalid == 0 && found > 0 && wrong == 0,
        format!(
            "{found}/50 instances embedded, {invalid} invalid; {} pools, {wrong} wrong selections, {}",
            pools.len(),
            secs(t.elapsed())
        ),
    )
}

pub fn desk_bench() -> BenchConfig {
    BenchConfig {
        sizes: vec![18, 26],
        densities: vec![(75.0, 85.0)],
        instances: 20,
        calls: 5,
        anneals: 100,
        trials: 3,
        pool_size: 4,
        pool_attempts: 8,
        sweeps: 300,
        bootstrap: 200,
        selection_stage1_reads: 50,
        selection_stage2_reads: 100,
        finalists: 3,
        seed: 7,
        ..BenchConfig::default()
    }
}

fn c11() -> Verdict {
    let t = Instant::now();
    let cfg = desk_bench();
    let report = run_bench(&cfg, &dw2x_topology()).unwrap();
    let el = t.elapsed();
    let mut lines = Vec::new();
    let mut a_ok = true;
    for &size in &cfg.sizes {
        let probs = |m: &str| -> Vec<f64> {
            report
                .params
                .iter()
                .filter(|r| r.size == size && r.method == m)
                .map(|r| r.success_probability)
                .collect()
        };
        let (th, em) = (probs("theoretical"), probs("empirical"));
        let (mt, me) = (median(&th).unwrap_or(f64::NAN), median(&em).unwrap_or(f64::NAN));
        a_ok &= th.len() >= 20 && mt >= me;
        lines.push(format!("|V|={size}: n={} median p theo {mt:.3} emp {me:.3}", th.len()));
    }
    let timed: Vec<_> = report
        .timings
        .iter()
        .filter_map(|t| Some((t.theoretical_setup_s?, t.empirical_setup_s?)))
        .collect();
    let b_ok = !timed.is_empty() && timed.iter().all(|(a, b)| a < b);
    let slower = timed.iter().filter(|(a, b)| a >= b).count();
    let mv: Vec<f64> = report.r99.iter().map(|r| r.r99_mv).collect();
    let gr: Vec<f64> = report.r99.iter().map(|r| r.r99_greedy).collect();
    let (mmv, mgr) = (median(&mv).unwrap_or(f64::NAN), median(&gr).unwrap_or(f64::NAN));
    let c_ok = !mv.is_empty() && mgr <= mmv;
    verdict(
        a_ok && b_ok && c_ok && el < Duration::from_secs(1800),
        format!(
            "(a) {} -> {}; (b) theoretical faster on {}/{} -> {}; (c) median R99 greedy {mgr:.3} vs MV {mmv:.3} -> {}; {} failures; {}",
            lines.join(", "),
            a_ok,
            timed.len() - slower,
            timed.len(),
            b_ok,
            c_ok,
            report.failures.len(),
            secs(el)
        ),
    )
}

fn c12() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BenchConfig {
        sizes: vec![18],
        instances: 3,
        ..desk_bench()
    };
    let cfg_path = dir.path().join("bench.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_anneal-forge"))
            .args(["bench", "--seed", "12", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        (status.success(), out)
    };
    let ((ok_a, a), (ok_b, b)) = (run("a"), run("b"));
    let differing: Vec<&str> = OUTPUT_FILES
        .iter()
        .copied()
        .filter(|f| fs::read(a.join(f)).ok() != fs::read(b.join(f)).ok() || !a.join(f).exists())
        .collect();
    verdict(
        ok_a && ok_b && differing.is_empty(),
        format!("two cmd_bench runs, {} CSV files compared, differing {differing:?}", OUTPUT_FILES.len()),
    )
}

fn main() {
    let mut results: Vec<(u32, Verdict)> = Vec::new();
    let mut report = |n: u32, v: Verdict| {
        println!("criterion {n:>2} {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, v));
    };
    report(1, c1());
    report(2, c2());
    report(3, c3());
    let t4 = Instant::now();
    let (instances, skipped) = c4_instances();
    report(4, c4(&instances, skipped, t4));
    report(5, c5(&instances));
    report(6, c6());
    report(7, c7());
    report(8, c8());
    report(9, c9());
    report(10, c10());
    report(11, c11());
    report(12, c12());
    let failed: Vec<u32> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
