use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anneal_forge_core::chimera::build_chimera;

fn forge(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anneal-forge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn data(name: &str) -> String {
    format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn percolate_appendix_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let o = forge(&["percolate", &data("appendix_degrees.json")], dir.path());
    ok(&o);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let p_c = v["p_c"].as_f64().unwrap();
    assert!((p_c - 0.0934).abs() <= 5e-4, "{p_c}");
    assert!(dir.path().join("percolation.json").exists());
}

#[test]
fn solve_empty_problem() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.json");
    fs::write(&p, r#"{"linear":{},"quadratic":[],"offset":0}"#).unwrap();
    let o = forge(&["solve", p.to_str().unwrap(), "--reads", "3"], dir.path());
    ok(&o);
    let csv = fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("read_index,energy,broken_chains,spins"));
    assert!(lines.all(|l| l.ends_with(",0,,")));
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("samples.json")).unwrap()).unwrap();
    assert_eq!(side["vars"].as_array().unwrap().len(), 0);
}

#[test]
fn stage_failure_exits_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = forge(&["qubo", "/nonexistent/graph.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["error"]["stage"], "qubo");
}

#[test]
fn stages_chain_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let topo = d.join("topo.json");
    fs::write(&topo, build_chimera(3, 3, 4).unwrap().to_json()).unwrap();
    let cfg = d.join("cfg.json");
    fs::write(&cfg, r#"{"anneals":30,"sweeps":100,"trials":3,"pool_size":2,"pool_attempts":4}"#).unwrap();
    let p = |name: &str| d.join(name).to_str().unwrap().to_string();
    let common = ["--config", &p("cfg.json"), "--topology", &p("topo.json"), "--seed", "5"];
    let step = |args: &[&str]| {
        let mut all: Vec<&str> = args.to_vec();
        all.extend(common);
        ok(&forge(&all, d));
    };
    step(&["gen", "--size", "7", "--d-lo", "40", "--d-hi", "60"]);
    step(&["qubo", &p("graph.json")]);
    step(&["embed", &p("ising.json")]);
    step(&["params", &p("ising.json"), &p("embedding.json")]);
    step(&["solve", &p("embedded.json")]);
    step(&["decode", &p("embedded.json"), &p("samples.csv"), &p("ising.json")]);
    let decoded = fs::read_to_string(d.join("decoded.csv")).unwrap();
    assert!(decoded.starts_with("read_index,mv_energy,refined_energy,num_broken,biggest_broken_cluster\n"));
    assert_eq!(decoded.lines().count(), 31);
    let best = decoded
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    step(&["stats", &p("decoded.csv"), "--ground", &best.to_string()]);
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("stats.json")).unwrap()).unwrap();
    assert!(stats["successes"][0].as_u64().unwrap() >= 1);
    step(&["stats", "--tts", &p("posterior.json"), "--q", "50"]);
    assert!(d.join("tts_q50.json").exists());
}

#[test]
fn bench_smoke_is_complete_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    fs::write(
        &cfg,
        r#"{"sizes":[18],"densities":[[75,85]],"instances":2,"anneals":100,"sweeps":200,"trials":3,
            "pool_size":2,"pool_attempts":4,"bootstrap":50,"selection_stage1_reads":20,"selection_stage2_reads":20}"#,
    )
    .unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        ok(&forge(&["bench", "--config", cfg.to_str().unwrap(), "--seed", "3"], &out));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let expect = [
        ("instances.csv", 2),
        ("embeddability.csv", 2),
        ("embeddability_summary.csv", 1),
        ("criteria.csv", 8),
        ("params_compare.csv", 4),
        ("percolation.csv", 2),
        ("r99.csv", 2),
        ("tts.csv", 3),
        ("failures.csv", 0),
    ];
    for (name, rows) in expect {
        let text = fs::read_to_string(a.join(name)).unwrap();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let width = r.headers().unwrap().len();
        let records: Vec<_> = r.records().map(Result::unwrap).collect();
        assert_eq!(records.len(), rows, "{name}");
        assert!(records.iter().all(|rec| rec.len() == width), "{name}");
        assert_eq!(text, fs::read_to_string(b.join(name)).unwrap(), "{name} differs between runs");
    }
    let timings: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("timings.json")).unwrap()).unwrap();
    assert_eq!(timings.as_array().unwrap().len(), 2);
    let tts: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("tts/tts_18_75_85_q50.json")).unwrap()).unwrap();
    assert_eq!(tts["B"], 50);
    assert_eq!(tts["values_us"].as_array().unwrap().len(), 50);
}
