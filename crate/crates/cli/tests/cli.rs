//! End-to-end runs of the `a2a` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn a2a(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_a2a"))
        .args(args)
        .env_remove("A2A_SEED")
        .env_remove("A2A_WORKERS")
        .env_remove("A2A_SOLVER")
        .env_remove("A2A_CONFIG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = a2a(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_writes_graph_and_manifest() {
    let dir = scratch("gen");
    let g = dir.join("torus.json");
    ok(&["gen", "--topo", "torus", "--dims", "3,3,3", "--out", s(&g)]);
    let graph = json(&g);
    assert_eq!(graph["n"], 27);
    let manifest = json(&dir.join("torus.json.manifest.json"));
    assert_eq!(manifest["command"], "gen");
    let digest = format!("{:x}", Sha256::digest(std::fs::read(&g).unwrap()));
    assert_eq!(manifest["outputs"][0]["sha256"], digest.as_str());
}

#[test]
fn seeded_generation_is_reproducible() {
    let run = |seed: &str| ok(&["--seed", seed, "gen", "--topo", "random", "--n", "16", "--d", "3"]).stdout;
    assert_eq!(run("7"), run("7"));
    let env = Command::new(env!("CARGO_BIN_EXE_a2a"))
        .args(["gen", "--topo", "random", "--n", "16", "--d", "3"])
        .env("A2A_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(env.stdout, run("7"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(a2a(&["nonsense"]).status.code(), Some(2));
    assert_eq!(a2a(&["bound"]).status.code(), Some(2));
    assert_eq!(a2a(&["solve", "--algo", "link", "--graph", "/nonexistent/graph.json"]).status.code(), Some(1));
}

#[test]
fn bound_reports_tree_bound() {
    let out = ok(&["bound", "--n", "13", "--d", "3"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    // Full 3-ary tree of 13 nodes: 3 at distance 1, 9 at distance 2.
    let want = (3.0 + 18.0) / 3.0;
    assert!((v["time_lb"].as_f64().unwrap() - want).abs() < 1e-12, "{v}");
}

#[test]
fn ring_pipeline_matches_fluid_optimum() {
    // Bidirectional 4-ring: distance sum 16 over 8 unit links, and splitting
    // antipodal pairs evenly attains the bound, so the optimal time is 2.
    let dir = scratch("pipeline");
    let g = dir.join("ring.json");
    ok(&["gen", "--topo", "torus", "--dims", "4", "--out", s(&g)]);

    let sol = dir.join("link.json");
    ok(&["solve", "--algo", "link", "--graph", s(&g), "--out", s(&sol)]);
    assert!((json(&sol)["f"].as_f64().unwrap() - 0.5).abs() < 1e-9);

    let routes = dir.join("routes.json");
    ok(&["routes", "--algo", "extract", "--graph", s(&g), "--sol", s(&sol), "--out", s(&routes)]);
    let sched = dir.join("path.xml");
    ok(&["compile", "--mode", "path", "--graph", s(&g), "--sol", s(&routes), "--out", s(&sched)]);
    assert!(dir.join("path.xml.manifest.json").exists());
    let table = dir.join("path.xml.routes.json");
    let out = ok(&["eval", "--graph", s(&g), "--schedule", s(&sched), "--routes", s(&table)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["time"].as_f64().unwrap() - 2.0).abs() < 1e-9, "{v}");

    let ts = dir.join("ts.json");
    ok(&["solve", "--algo", "ts", "--graph", s(&g), "--lmax", "2", "--out", s(&ts)]);
    let total_u = json(&ts)["total_u"].as_f64().unwrap();
    let xml = dir.join("ts.xml");
    ok(&["compile", "--mode", "ts", "--graph", s(&g), "--sol", s(&ts), "--out", s(&xml)]);
    let out = ok(&["eval", "--graph", s(&g), "--schedule", s(&xml), "--m", "1048576"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let q = v["chunks"].as_f64().unwrap();
    assert_eq!(v["shards"], 12);
    let t = v["time"].as_f64().unwrap() / 1048576.0;
    assert!(t <= total_u * (1.0 + 2.0 / q) + 1e-9 && t >= total_u - 1e-9, "T={t} sumU={total_u}");

    let layers = dir.join("layers.json");
    ok(&["layers", "--graph", s(&g), "--routes", s(&routes), "--out", s(&layers)]);
    assert_eq!(json(&layers)["acyclic"], true);
}
