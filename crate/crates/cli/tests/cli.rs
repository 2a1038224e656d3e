use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "sbm.n=40",
    "sbm.d_feat=6",
    "sbm.p_in=0.3",
    "augment.iterations=3",
    "augment.k=4",
    "model.hidden=8,4",
    "model.proj_hidden=8",
    "train.epochs=3",
    "train.lr=1e-2",
    "eval.seeds=3",
    "workers=1",
];

fn run(args: &[&str], sets: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_laplacegnn"));
    cmd.args(args);
    for s in sets {
        cmd.arg("--set").arg(s);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn with(extra: &[&'static str]) -> Vec<&'static str> {
    SMALL.iter().chain(extra).copied().collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = run(&["augment", "--out", s(dir.path())], &[&format!("data.dir={}", s(&missing))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("data.dir"));

    let out = run(&["augment", "--out", s(dir.path())], &["train.bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.bogus"));

    let out = run(&["augment", "--out", s(dir.path())], &["augment.budget_ratio=-1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["eval", "--checkpoint", s(&missing)], SMALL);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["frobnicate"], &[]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["train", "--out", s(dir.path())], &with(&["model.encoder=gin"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn defaults_are_listed() {
    let text = ok(&run(&["config"], &[]));
    for line in [
        "augment.budget_ratio = 0.5",
        "augment.k = 100",
        "train.epochs = 5000",
        "train.eps = 0.008",
        "train.ema_decay = 0.998",
    ] {
        assert!(text.contains(line), "missing `{line}`");
    }
}

#[test]
fn augment_is_deterministic_and_feeds_train() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&run(&["augment", "--out", s(&a)], SMALL));
    ok(&run(&["augment", "--out", s(&b)], SMALL));
    let pa = std::fs::read(a.join("plan-0000.txt")).unwrap();
    assert_eq!(pa, std::fs::read(b.join("plan-0000.txt")).unwrap());
    assert_eq!(std::fs::read_to_string(a.join("augment.jsonl")).unwrap().lines().count(), 1);

    let inline = dir.path().join("inline");
    let stored = dir.path().join("stored");
    ok(&run(&["train", "--out", s(&inline)], SMALL));
    ok(&run(&["train", "--out", s(&stored), "--plans", s(&a)], SMALL));
    assert_eq!(
        std::fs::read(inline.join("metrics.jsonl")).unwrap(),
        std::fs::read(stored.join("metrics.jsonl")).unwrap()
    );
}

fn losses(path: &Path) -> Vec<(u64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (v["epoch"].as_u64().unwrap(), v["loss"].as_f64().unwrap())
        })
        .collect()
}

#[test]
fn train_resume_continues_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full");
    let part = dir.path().join("part");
    ok(&run(&["train", "--out", s(&full)], &with(&["train.epochs=5", "train.checkpoint_every=2"])));
    assert!(full.join("ckpt-000002.bin").is_file() && full.join("ckpt-000004.bin").is_file());

    ok(&run(&["train", "--out", s(&part)], &with(&["train.epochs=3"])));
    ok(&run(
        &["train", "--out", s(&part), "--resume", s(&part.join("checkpoint.bin"))],
        &with(&["train.epochs=5"]),
    ));
    let (f, p) = (losses(&full.join("metrics.jsonl")), losses(&part.join("metrics.jsonl")));
    assert_eq!(p.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    assert_eq!(f, p);
    assert_eq!(
        std::fs::read(full.join("checkpoint.bin")).unwrap(),
        std::fs::read(part.join("checkpoint.bin")).unwrap()
    );
}

#[test]
fn eval_reports_attack_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    ok(&run(&["train", "--out", s(&run_dir)], SMALL));
    let ckpt = run_dir.join("checkpoint.bin");
    let out_dir = dir.path().join("eval");
    let text = ok(&run(
        &["eval", "--checkpoint", s(&ckpt), "--out", s(&out_dir)],
        &with(&["eval.attack=random", "eval.sigmas=0,0.2"]),
    ));
    assert!(text.contains("clean"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("eval.json")).unwrap()).unwrap();
    assert_eq!(v["clean"]["values"].as_array().unwrap().len(), 3);
    let rows = v["attacks"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["result"], v["clean"]);
    assert_eq!(std::fs::read_to_string(out_dir.join("eval.txt")).unwrap(), text);
    assert_eq!(std::fs::read_to_string(out_dir.join("eval.jsonl")).unwrap().lines().count(), 2);
}

#[test]
fn graph_classification_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let sets = [
        "data.synthetic=graphs",
        "graphs.count=12",
        "graphs.n_min=6",
        "graphs.n_max=9",
        "graphs.d_feat=3",
        "model.encoder=gin",
        "model.hidden=6,6",
        "model.proj_hidden=6",
        "augment.iterations=2",
        "augment.k=2",
        "train.epochs=2",
        "eval.kfold=3",
        "eval.repeats=2",
    ];
    let run_dir = dir.path().join("run");
    ok(&run(&["train", "--out", s(&run_dir)], &sets));
    let text = ok(&run(&["eval", "--checkpoint", s(&run_dir.join("checkpoint.bin"))], &sets));
    assert!(text.contains("3-fold x2"), "{text}");
}

#[test]
fn bench_empty_and_small() {
    let out = ok(&run(&["bench", "--ns", "0", "--fixed-n", "0"], &[]));
    assert_eq!(out.trim(), "empty report");
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("bench.json");
    let out = ok(&run(
        &["bench", "--ns", "40,80", "--fixed-k", "2", "--ks", "2,4", "--fixed-n", "60", "--reps", "1", "--json", s(&json)],
        &[],
    ));
    assert!(out.contains("eigensolve vs n"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["by_n"].as_array().unwrap().len(), 2);
    assert_eq!(v["by_k"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\ntrain.epochs = 7\naugment.k = 9\n").unwrap();
    let text = ok(&run(&["--config", s(&cfg), "config"], &["augment.k=11"]));
    assert!(text.contains("train.epochs = 7"));
    assert!(text.contains("augment.k = 11"));
    std::fs::write(&cfg, "train.epochs 7\n").unwrap();
    assert_eq!(run(&["--config", s(&cfg), "config"], &[]).status.code(), Some(2));
}
