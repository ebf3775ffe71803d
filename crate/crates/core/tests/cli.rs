use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_hybrid-cascade");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Data, split, DS1 and DS2 models and a histogram in a temp dir.
struct Pipeline {
    dir: tempfile::TempDir,
}

impl Pipeline {
    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn build() -> Self {
        let s = Pipeline {
            dir: tempfile::tempdir().unwrap(),
        };
        let (data, split) = (s.file("data.csv"), s.file("split.json"));
        ok(&["dataset", "gen", "--preset", "pro7", "--scale", "0.01", "--seed", "5", "--ds1-noise", "1.2", "-o", p(&data)]);
        ok(&["dataset", "split", p(&data), "--seed", "2", "-o", p(&split)]);
        for (name, cols) in [("ds1.json", "8..16"), ("ds2.json", "0..8")] {
            ok(&[
                "train", p(&data), "--split", p(&split), "--columns", cols, "--c", "1,10", "--gamma", "0.125", "-o",
                p(&s.file(name)),
            ]);
        }
        ok(&[
            "calibrate", p(&data), "--split", p(&split), "--model", p(&s.file("ds1.json")), "--bins", "10", "-o",
            p(&s.file("hist.json")),
        ]);
        s
    }

    fn route(&self, extra: &[&str], out: &str) -> Output {
        let data = self.file("data.csv");
        let split = self.file("split.json");
        let ds1 = self.file("ds1.json");
        let hist = self.file("hist.json");
        let out = self.file(out);
        let mut args = vec![
            "route", p(&data), "--split", p(&split), "--model", p(&ds1), "--histogram", p(&hist), "--budget", "0.2",
            "--seed", "1", "-o", p(&out),
        ];
        args.extend_from_slice(extra);
        run(&args)
    }
}

fn finals(doc: &Value) -> Vec<u64> {
    doc["outcomes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["final_class"].as_u64().unwrap())
        .collect()
}

#[test]
fn gen_split_train_calibrate_route() {
    let s = Pipeline::build();

    let inspect = ok(&["dataset", "inspect", p(&s.file("data.csv"))]);
    assert!(inspect.contains("PRO-7") || inspect.contains("7"), "{inspect}");

    let split = json(&s.file("split.json"));
    let z3 = split["z3"].as_array().unwrap().len();
    assert!(z3 > 0);

    let hist = json(&s.file("hist.json"));
    assert_eq!(hist["n"], 10);
    assert_eq!(hist["m"], 7);

    let ds2 = s.file("ds2.json");
    assert!(s.route(&["--strong", p(&ds2)], "local.json").status.success());
    let local = json(&s.file("local.json"));
    assert_eq!(finals(&local).len(), z3);
    let budget = local["budget"].as_u64().unwrap();
    assert!(budget > 0);
    assert_eq!(local["routed"].as_u64().unwrap(), budget);
    assert!(local.get("error").is_none());

    // the same DS2 behind the protocol gives the same labels
    let remote = s.route(&["--strong-command", BIN, "serve", "--model", p(&ds2)], "remote.json");
    assert!(remote.status.success(), "{}", String::from_utf8_lossy(&remote.stderr));
    assert_eq!(finals(&json(&s.file("remote.json"))), finals(&local));

    assert!(s.route(&["--strong", p(&ds2), "--random"], "random.json").status.success());
    assert_eq!(json(&s.file("random.json"))["routed"].as_u64().unwrap(), budget);
}

#[test]
fn dying_server_exits_two_and_keeps_ds1_labels() {
    let s = Pipeline::build();
    let ds2 = s.file("ds2.json");
    let out = s.route(
        &["--strong-command", BIN, "serve", "--model", p(&ds2), "--exit-after", "3"],
        "dead.json",
    );
    assert_eq!(out.status.code(), Some(2));
    let doc = json(&s.file("dead.json"));
    assert!(doc["error"].as_str().is_some());
    assert_eq!(doc["routed"], 0);
    assert_eq!(doc["ds1_kappa"], doc["final_kappa"]);
    for o in doc["outcomes"].as_array().unwrap() {
        assert_eq!(o["final_class"], o["ds1"]["class"]);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["train", "x.csv"]).status.code(), Some(1));
    assert_eq!(run(&["dataset", "gen", "--preset", "nope", "-o", "/dev/null"]).status.code(), Some(1));

    let missing = run(&["dataset", "inspect", "/nonexistent/data.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
}

const SMALL: &str = r#"
repetitions = 2
bins = 8
budget_fraction = 0.15

[dataset]
preset = "lar2"
scale = 0.1
seed = 3

[ds1]
grid = { c = [10.0], gamma = [0.125] }

[ds2]
grid = { c = [10.0], gamma = [0.125] }
delay_ratio = 1.0
"#;

#[test]
fn evaluate_compare_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");

    let text = ok(&["evaluate", p(&cfg), "-o", p(&a)]);
    assert!(text.contains("hybrid-RS"), "{text}");
    let report = json(&a);
    assert_eq!(report["raw"].as_array().unwrap().len(), 2);
    assert_eq!(report["summaries"].as_array().unwrap().len(), 4);

    ok(&["evaluate", p(&cfg), "-o", p(&b), "--repetitions", "1", "--seed", "9"]);
    assert_eq!(json(&b)["raw"].as_array().unwrap().len(), 1);

    let table = ok(&["compare", p(&a), p(&b)]);
    for t in ["DS1", "DS2", "hybrid", "hybrid-RS"] {
        assert!(table.contains(t), "{table}");
    }

    let sweep = dir.path().join("sweep.json");
    ok(&["sweep-bins", p(&cfg), "--bins", "4,8", "--repetitions", "1", "-o", p(&sweep)]);
    let doc = json(&sweep);
    assert_eq!(doc["bins"], serde_json::json!([4, 8]));
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows[0]["fingerprints"], rows[1]["fingerprints"]);
}
