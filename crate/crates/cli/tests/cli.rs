use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"{
  "seed": 7,
  "datagen": {
    "feature_dim": 16,
    "lexicon_size": 6,
    "word_length": {"min": 2, "max": 4},
    "od_writers": 4,
    "meta_writers": 4,
    "samples": {"train": 40, "id_test": 12, "od_test": 12, "meta_od": 40}
  },
  "estimator": {
    "input_dim": 16,
    "hidden": [16, 16],
    "train": {"iterations": 200, "lr": 0.001, "lr_schedule": [{"iteration": 140, "divisor": 10.0}]}
  },
  "ti_meta": {"hidden": [8, 8], "train": {"iterations": 100, "lr_schedule": []}},
  "td_meta": {"hidden": [8, 8], "train": {"iterations": 100, "lr_schedule": []}},
  "evaluation": {"test_dropout_passes": 4, "histogram_bins": 10}
}"#;

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("run.json"), TINY).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_wordspot"))
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    fn gen(&self) {
        self.ok(&["gen", "--config", "run.json", "--out", "corpus.jsonl"]);
    }

    fn train(&self, out: &str, seed: &str) {
        self.ok(&[
            "train",
            "--config",
            "run.json",
            "--seed",
            seed,
            "--corpus",
            "corpus.jsonl",
            "--out",
            out,
        ]);
    }
}

fn code(out: &Output) -> Option<i32> {
    out.status.code()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn gen_writes_corpus_and_resolved_config() {
    let w = Work::new();
    w.gen();
    let corpus = fs::read(w.path("corpus.jsonl")).unwrap();
    let config = fs::read_to_string(w.path("corpus.config.json")).unwrap();
    assert!(config.contains("\"seed\": 7"));
    assert_eq!(corpus.iter().filter(|&&b| b == b'\n').count(), 1 + 40 + 12 + 12 + 40);

    let again = w.run(&["gen", "--config", "run.json", "--out", "corpus.jsonl"]);
    assert_eq!(code(&again), Some(2), "{}", stderr(&again));
    w.ok(&["gen", "--config", "run.json", "--out", "corpus.jsonl", "--force"]);
    assert_eq!(fs::read(w.path("corpus.jsonl")).unwrap(), corpus);

    w.ok(&["gen", "--config", "run.json", "--seed", "8", "--out", "other.jsonl"]);
    assert_ne!(fs::read(w.path("other.jsonl")).unwrap(), corpus);
}

#[test]
fn config_errors_exit_with_2() {
    let w = Work::new();
    let missing = w.run(&["gen", "--config", "nope.json"]);
    assert_eq!(code(&missing), Some(2));
    assert!(stderr(&missing).contains("nope.json"));

    fs::write(w.path("bad.json"), r#"{"seeed": 1}"#).unwrap();
    assert_eq!(code(&w.run(&["gen", "--config", "bad.json"])), Some(2));
    assert_eq!(code(&w.run(&["frobnicate"])), Some(2));
}

#[test]
fn train_with_zero_iterations_saves_initialized_model() {
    let w = Work::new();
    w.gen();
    w.ok(&[
        "train",
        "--config",
        "run.json",
        "--corpus",
        "corpus.jsonl",
        "--iterations",
        "0",
        "--out",
        "init.json",
    ]);
    let text = fs::read_to_string(w.path("init.json")).unwrap();
    assert!(text.contains("wordspot-estimator"));
    let config = fs::read_to_string(w.path("init.config.json")).unwrap();
    assert!(config.contains("\"iterations\": 0"));
}

#[test]
fn corrupted_corpus_exits_with_3_naming_the_line() {
    let w = Work::new();
    w.gen();
    let text = fs::read_to_string(w.path("corpus.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[4] = "{\"id\": 3";
    fs::write(w.path("broken.jsonl"), lines.join("\n")).unwrap();
    let out = w.run(&[
        "train",
        "--config",
        "run.json",
        "--corpus",
        "broken.jsonl",
        "--iterations",
        "0",
    ]);
    assert_eq!(code(&out), Some(3));
    assert!(stderr(&out).contains("broken.jsonl:5"), "{}", stderr(&out));

    let out = w.run(&["train", "--config", "run.json", "--corpus", "absent.jsonl"]);
    assert_eq!(code(&out), Some(3));
}

#[test]
fn full_pipeline_is_deterministic_and_checks_compatibility() {
    let w = Work::new();
    w.gen();
    w.train("est.json", "7");
    w.train("other.json", "8");
    assert_ne!(
        fs::read(w.path("est.json")).unwrap(),
        fs::read(w.path("other.json")).unwrap()
    );

    // TI needs no estimator.
    w.ok(&[
        "meta",
        "--config",
        "run.json",
        "--corpus",
        "corpus.jsonl",
        "--measure",
        "ti",
        "--out",
        "ti.json",
    ]);
    let no_est = w.run(&[
        "meta",
        "--config",
        "run.json",
        "--corpus",
        "corpus.jsonl",
        "--measure",
        "td",
    ]);
    assert_ne!(code(&no_est), Some(0));
    w.ok(&[
        "meta",
        "--config",
        "run.json",
        "--corpus",
        "corpus.jsonl",
        "--measure",
        "td",
        "--estimator",
        "est.json",
        "--out",
        "td.json",
    ]);

    let eval = |out: &str, estimator: &str, measures: &str, td: bool| {
        let mut args = vec![
            "eval",
            "--config",
            "run.json",
            "--corpus",
            "corpus.jsonl",
            "--estimator",
            estimator,
            "--ti",
            "ti.json",
            "--measures",
            measures,
            "--out",
            out,
        ];
        if td {
            args.extend(["--td", "td.json"]);
        }
        w.run(&args)
    };
    for out in ["a", "b"] {
        let o = eval(out, "est.json", "activation,test_dropout,ti_meta,td_meta", true);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    // The resolved configs differ only in their output directory.
    let csvs = |dir: &str| -> Vec<(PathBuf, Vec<u8>)> {
        tree(&w.path(dir))
            .into_iter()
            .filter(|(p, _)| p != Path::new("config.json"))
            .collect()
    };
    let a = csvs("a");
    assert_eq!(a.len(), 4 * 4 + 1);
    assert!(a == csvs("b"), "CSV bundles differ between identical runs");
    let summary = fs::read_to_string(w.path("a/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);
    assert!(fs::read_to_string(w.path("a/config.json")).unwrap().contains("td_meta"));

    let o = eval("c", "est.json", "activation,ti_meta", false);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(w.path("c/summary.csv")).unwrap().lines().count(), 3);

    let o = eval("d", "est.json", "td_meta", false);
    assert_eq!(code(&o), Some(4), "{}", stderr(&o));
    let o = eval("e", "other.json", "td_meta", true);
    assert_eq!(code(&o), Some(4), "{}", stderr(&o));
    let o = eval("a", "est.json", "activation", false);
    assert_eq!(code(&o), Some(2), "{}", stderr(&o));
}
