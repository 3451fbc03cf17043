use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_goalplot");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn eventify_matches_golden_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("events.txt");
    let res = run(&[
        "eventify",
        "--clauses",
        p(&data("clauses.txt")),
        "--lexicon",
        p(&data("lexicon.tsv")),
        "--out",
        p(&out),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let got = std::fs::read_to_string(&out).unwrap();
    let want = std::fs::read_to_string(data("clauses.golden.txt")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn eventify_reports_missing_lexicon() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = dir.path().join("events.txt");
    let res = run(&[
        "eventify",
        "--clauses",
        p(&data("clauses.txt")),
        "--lexicon",
        p(&missing),
        "--out",
        p(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains(p(&missing)), "{}", stderr(&res));
    assert!(!out.exists());
}

#[test]
fn eventify_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "\n").unwrap();
    let out = dir.path().join("events.txt");
    let res = run(&[
        "eventify",
        "--clauses",
        p(&empty),
        "--lexicon",
        p(&data("lexicon.tsv")),
        "--out",
        p(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("no stories"), "{}", stderr(&res));
    assert!(!out.exists());
}

fn rewards(goal: &str, k: &str, out: &Path, clusters: &Path) -> Output {
    run(&[
        "rewards",
        "--corpus",
        p(&data("micro_corpus.txt")),
        "--goal",
        goal,
        "--k",
        k,
        "--test-fraction",
        "0",
        "--out",
        p(out),
        "--clusters",
        p(clusters),
    ])
}

#[test]
fn rewards_writes_table_and_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let (out, clusters) = (dir.path().join("r.json"), dir.path().join("c.json"));
    let res = rewards("admire-31.2", "2", &out, &clusters);
    assert!(res.status.success(), "{}", stderr(&res));
    let table = goalplot::reward::RewardTable::load(&out).unwrap();
    assert_eq!(table.reward("admire-31.2"), 1.0);
    let index = goalplot::clusters::ClusterIndex::load(&clusters).unwrap();
    assert_eq!(index.cluster_of("admire-31.2"), Some(1));
}

#[test]
fn rewards_without_goal_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let (out, clusters) = (dir.path().join("r.json"), dir.path().join("c.json"));
    let res = rewards("absent-1.0", "2", &out, &clusters);
    assert_eq!(res.status.code(), Some(3));
    assert!(stderr(&res).contains("absent-1.0"));
    assert!(!out.exists() && !clusters.exists());
}

#[test]
fn too_many_clusters_exits_three_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let (out, clusters) = (dir.path().join("r.json"), dir.path().join("c.json"));
    let res = rewards("admire-31.2", "40", &out, &clusters);
    assert_eq!(res.status.code(), Some(3));
    assert!(stderr(&res).contains("try k <="), "{}", stderr(&res));
    assert!(!out.exists());
}

#[test]
fn failed_command_removes_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let clusters = dir.path().join("missing-dir").join("c.json");
    let res = rewards("admire-31.2", "2", &out, &clusters);
    assert!(!res.status.success());
    assert!(!out.exists(), "rewards file left behind after failure");
}

fn synthetic(dir: &Path) -> PathBuf {
    let corpus = dir.join("synthetic.txt");
    let res = run(&[
        "make-synthetic",
        "--stories",
        "60",
        "--seed",
        "3",
        "--out",
        p(&corpus),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    corpus
}

fn epoch_lines(out: &Output) -> usize {
    stderr(out)
        .lines()
        .filter(|l| l.starts_with("epoch"))
        .count()
}

#[test]
fn command_line_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "epochs = 3\nhidden_dim = 8\nembed_dim = 4\n").unwrap();

    let base = [
        "pretrain",
        "--config",
        p(&config),
        "--corpus",
        p(&corpus),
        "--out",
        p(&ckpt),
    ];
    let from_file = run(&base);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    assert_eq!(epoch_lines(&from_file), 3);

    let mut args = base.to_vec();
    args.extend(["--epochs", "1"]);
    let overridden = run(&args);
    assert!(overridden.status.success());
    assert_eq!(epoch_lines(&overridden), 1);

    std::fs::write(&config, "epochs = 3\nbogus = 1\n").unwrap();
    let bad = run(&base);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("bogus"));
}

#[test]
fn generated_stories_respect_the_length_cap() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synthetic(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    let res = run(&[
        "pretrain",
        "--corpus",
        p(&corpus),
        "--epochs",
        "2",
        "--hidden-dim",
        "8",
        "--embed-dim",
        "4",
        "--out",
        p(&ckpt),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));

    let seeds = dir.path().join("seeds.txt");
    let text = std::fs::read_to_string(&corpus).unwrap();
    let firsts: Vec<&str> = text
        .split("\n\n")
        .filter_map(|s| s.lines().next())
        .take(30)
        .collect();
    std::fs::write(&seeds, firsts.join("\n") + "\n").unwrap();

    let out = dir.path().join("gen.txt");
    let res = run(&[
        "generate",
        "--checkpoint",
        p(&ckpt),
        "--seeds",
        p(&seeds),
        "--goal",
        "admire-31.2",
        "--decoding",
        "sample",
        "--max-length",
        "15",
        "--out",
        p(&out),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let generated = goalplot::event::parse_corpus(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(generated.len(), 30);
    assert!(generated.stories.iter().all(|s| s.len() <= 15));
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("gen.txt.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta.as_array().unwrap().len(), 30);
}
