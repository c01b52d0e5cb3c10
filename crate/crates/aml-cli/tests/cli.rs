use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aml::embed::hamiltonian::{is_hamiltonian_cycle, Graph};

fn aml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aml")).args(args).output().expect("spawn aml")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../aml/tests/data").join(name).display().to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn train_vertical_bar(out: &Path, seed: &str) -> Output {
    aml(&[
        "train", "--task", "vertical-bar", "--n", "4", "--negatives", "500", "--seed", seed,
        "--max-batches", "15", "--schedule", "fixed:300", "--out", &s(out),
    ])
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (p, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let o = train_vertical_bar(p, seed);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["checkpoint.json", "progress.csv", "model.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("checkpoint.json")).unwrap(), fs::read(c.join("checkpoint.json")).unwrap());
    let csv = fs::read_to_string(a.join("progress.csv")).unwrap();
    assert!(csv.starts_with("batch,master_size,union_size,training_error"));
    assert!(csv.lines().count() >= 2);
}

#[test]
fn trained_model_evaluates_and_inspects() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&train_vertical_bar(&run, "1")), 0);
    let metrics = dir.path().join("m.csv");
    let o = aml(&[
        "eval", "--model", &s(&run.join("model.json")), "--task", "vertical-bar", "--n", "4", "--negatives", "500",
        "--data-seed", "3", "--metrics", &s(&metrics),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let acc: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("accuracy: "))
        .expect("accuracy line")
        .trim()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(fs::read_to_string(&metrics).unwrap().starts_with("metric,key,value"));

    let o = aml(&["inspect", "--model", &s(&run.join("checkpoint.json")), "--which", "master"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("size histogram:") && out.contains("label p:"));
}

#[test]
fn universe_mismatch_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&train_vertical_bar(&run, "2")), 0);
    let o = aml(&["eval", "--model", &s(&run.join("model.json")), "--task", "vertical-bar", "--n", "5", "--negatives", "10"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("constants"));
}

#[test]
fn inconsistent_axioms_exit_2_and_name_the_duple() {
    let dir = tempfile::tempdir().unwrap();
    let ax = dir.path().join("bad.ax");
    fs::write(&ax, "a b <= c\nc <= a\na !<= c\n").unwrap();
    let o = aml(&["train", "--task", "axioms", "--axioms", &s(&ax), "--out", &s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("a !<= c"), "{}", stderr(&o));
}

#[test]
fn consistent_axioms_train() {
    let dir = tempfile::tempdir().unwrap();
    let ax = dir.path().join("ok.ax");
    fs::write(&ax, "a b <= c\nc !<= a\nb !<= a\n").unwrap();
    let out = dir.path().join("o");
    let o = aml(&["train", "--task", "axioms", "--axioms", &s(&ax), "--out", &s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("checkpoint.json").exists() && out.join("progress.csv").exists());
}

#[test]
fn missing_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = s(&dir.path().join("nope"));
    let o = aml(&["train", "--task", "axioms", "--axioms", &missing, "--out", &s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nope"));
    assert_eq!(code(&aml(&["inspect", "--model", &missing])), 1);
    assert_eq!(code(&aml(&["train", "--task", "mnist", "--out", &s(&dir.path().join("m"))])), 1);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "gamma=fast\n").unwrap();
    let o = aml(&["train", "--task", "vertical-bar", "--config", &s(&cfg), "--out", &s(&dir.path().join("c"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn inspect_handles_empty_and_corrupt_models() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    fs::write(&empty, r#"{"constants":["p","a","b"],"atoms":[],"stats":[]}"#).unwrap();
    let o = aml(&["inspect", "--model", &s(&empty)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("atoms: 0"));
    assert!(stdout(&o).contains("label p: 0 atoms"));
    let corrupt = dir.path().join("corrupt.json");
    fs::write(&corrupt, "{\"constants\": [").unwrap();
    let o = aml(&["inspect", "--model", &s(&corrupt)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("corrupt.json"));
}

/// The printed cycle is checked against the graph file independently.
#[test]
fn triangle_cycle_is_found() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("tri.txt");
    fs::write(&g, "3 3\n1 2\n2 3\n3 1\n").unwrap();
    let o = aml(&["hamiltonian", "--graph", &s(&g), "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("cycle found at attempt")).expect("cycle line");
    let attempt: usize = line["cycle found at attempt ".len()..].split(':').next().unwrap().parse().unwrap();
    assert!(attempt <= 3);
    let order: Vec<usize> = line.split(':').nth(1).unwrap().split('-').map(|x| x.trim().parse::<usize>().unwrap() - 1).collect();
    assert_eq!(order.first(), order.last());
    let graph = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
    assert!(is_hamiltonian_cycle(&graph, &order[..order.len() - 1]));
}

#[test]
fn exhausted_budget_exits_3() {
    let o = aml(&["hamiltonian", "--nodes", "10", "--edges", "20", "--seed", "0", "--max-attempts", "3"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("3 attempts"));
}

#[test]
fn generated_graph_round_trips_through_hamiltonian() {
    let dir = tempfile::tempdir().unwrap();
    let g: PathBuf = dir.path().join("g.txt");
    let o = aml(&["generate", "graph", "--nodes", "5", "--edges", "6", "--seed", "4", "--out", &s(&g)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = aml(&["hamiltonian", "--graph", &s(&g), "--max-attempts", "2"]);
    assert!(matches!(code(&o), 0 | 3), "{}", stderr(&o));
    assert!(stdout(&o).contains("graph: 5 nodes, 6 edges"));
}

#[test]
fn mnist_limit_train_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mnist");
    let (ti, tl) = (data("train-images-idx3-ubyte"), data("train-labels-idx1-ubyte"));
    let o = aml(&[
        "train", "--task", "mnist", "--train-idx", &ti, "--train-labels", &tl, "--limit", "60", "--max-batches", "3",
        "--seed", "0", "--out", &s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let model = s(&out.join("model.json"));
    let (ei, el) = (data("test-images-idx3-ubyte"), data("test-labels-idx1-ubyte"));
    let o = aml(&[
        "eval", "--model", &model, "--task", "mnist", "--train-idx", &ti, "--train-labels", &tl, "--test-idx", &ei, "--test-labels", &el, "--limit", "50", "--head",
        "--head-atoms", "200", "--epochs", "20",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("accuracy"));
}
