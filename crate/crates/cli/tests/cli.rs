use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use cra_core::ingest::serialize_review_dump;
use cra_core::labels::write_labels;
use cra_core::synth::{generate, SynthConfig};

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden").join(name)
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

/// Runs the command in-process with only the given environment.
fn cra(args: &[&str], env: &[(&str, &str)]) -> Run {
    let env: HashMap<String, String> = env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("cra").chain(args.iter().copied());
    let code = cra_cli::run(argv, &mut out, &mut err, |k| env.get(k).cloned());
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn store(&self) -> String {
        self.path("cra.db").to_string_lossy().into_owned()
    }

    fn run(&self, args: &[&str]) -> Run {
        let store = self.store();
        cra(args, &[("CRA_STORE", store.as_str())])
    }

    /// Writes a synthetic history and its labels, returning their paths.
    fn synthetic(&self, comments: usize) -> (String, String) {
        let h = generate(&SynthConfig { comments, ..SynthConfig::default() });
        let dump = self.path("synthetic.json");
        std::fs::write(&dump, serialize_review_dump(&h.dump)).unwrap();
        let labels = self.path("labels.csv");
        write_labels(std::fs::File::create(&labels).unwrap(), &h.labels).unwrap();
        (dump.to_string_lossy().into_owned(), labels.to_string_lossy().into_owned())
    }
}

#[test]
fn usage_errors_exit_one() {
    let r = cra(&["rank", "--from", "2024-01-01", "--to", "2024-02-01", "--sort-by", "ri"], &[]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("--sort-by"), "{}", r.err);
    assert!(r.err.contains("Usage"));

    let r = cra(&["--help"], &[]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains("evaluate"));

    let w = Workspace::new();
    assert_eq!(w.run(&["predict", "--model", "m"]).code, 1);
    assert_eq!(w.run(&["train", "--algo", "svm", "--out", "m"]).code, 1);
    assert_eq!(w.run(&["rank", "--from", "2024-02-01", "--to", "2024-01-01"]).code, 1);
    assert_eq!(w.run(&["rank", "--from", "soon", "--to", "2024-01-01"]).code, 1);
    assert_eq!(w.run(&["rank", "--from", "2024-01-01", "--to", "2024-02-01", "--key", "speed"]).code, 1);
    assert_eq!(w.run(&["rank", "--from", "2024-01-01", "--to", "2024-02-01", "--csv", "--json"]).code, 1);
    let r = w.run(&["mine"]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("review server"), "{}", r.err);
}

#[test]
fn runtime_failures_exit_two_and_name_the_module() {
    let w = Workspace::new();
    let bad = w.path("bad.json");
    std::fs::write(&bad, "{\"format_version\": 1, \"changes\": [").unwrap();
    let r = w.run(&["import", bad.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.err.starts_with("error: ingest:"), "{}", r.err);

    let r = w.run(&["predict", "--model", w.path("missing.cra").to_str().unwrap(), "--all-unpredicted"]);
    assert_eq!(r.code, 2);
    assert!(r.err.contains("model artifact"), "{}", r.err);

    // the credential variable is unset, so mining stops before any request
    let store = w.store();
    let r = cra(
        &["mine", "--since", "2024-01-01"],
        &[
            ("CRA_STORE", store.as_str()),
            ("CRA_GERRIT_URL", "http://127.0.0.1:9"),
            ("CRA_GERRIT_USER", "bot"),
        ],
    );
    assert_eq!(r.code, 2);
    assert!(r.err.starts_with("error: miner:"), "{}", r.err);
    assert!(!r.err.contains("CRA_GERRIT_PASSWORD=") && !r.err.contains("password:"));

    let r = cra(&["rank", "--from", "2024-01-01", "--to", "2024-02-01"], &[("CRA_SEED", "many")]);
    assert_eq!(r.code, 2);
    assert!(r.err.contains("config: CRA_SEED"), "{}", r.err);
}

#[test]
fn import_is_idempotent() {
    let w = Workspace::new();
    let fixture = golden("fixture.json");
    let first = w.run(&["import", fixture.to_str().unwrap()]);
    assert_eq!(first.code, 0, "{}", first.err);
    assert_eq!(first.out, "imported 30 changes: 30 new, 0 updated\n");
    let again = w.run(&["import", fixture.to_str().unwrap()]);
    assert_eq!(again.out, "imported 30 changes: 0 new, 0 updated\n");
}

#[test]
fn golden_run_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("g.db");
    let bin = env!("CARGO_BIN_EXE_cra");
    let step = |args: &[&str]| {
        let o = Command::new(bin)
            .args(args)
            .env("CRA_STORE", &store)
            .env_remove("CRA_CONFIG")
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    step(&["import", golden("fixture.json").to_str().unwrap()]);
    let predicted = step(&["predict", "--model", golden("model.cra").to_str().unwrap(), "--all-unpredicted"]);
    assert!(String::from_utf8(predicted).unwrap().starts_with("predicted 81 comments (24 useful)"));
    let csv = step(&["rank", "--from", "2024-03-01", "--to", "2024-04-01", "--key", "RI", "--csv"]);
    assert_eq!(csv, std::fs::read(golden("golden.csv")).unwrap());
    // a second prediction pass finds nothing new and the ranking is unchanged
    step(&["predict", "--model", golden("model.cra").to_str().unwrap(), "--all-unpredicted"]);
    let again = step(&["rank", "--from", "2024-03-01", "--to", "2024-04-01", "--key", "ri", "--csv"]);
    assert_eq!(again, csv);
}

#[test]
fn labels_round_trip_and_authorship_is_enforced() {
    let w = Workspace::new();
    let (dump, labels) = w.synthetic(60);
    assert_eq!(w.run(&["import", &dump]).code, 0);
    let r = w.run(&["import-labels", &labels]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("imported "));
    let exported = w.path("out.csv");
    assert_eq!(w.run(&["export-labels", "--out", exported.to_str().unwrap()]).code, 0);
    let read = |p: &Path| {
        let mut rows: Vec<String> = std::fs::read_to_string(p).unwrap().lines().map(String::from).collect();
        rows.sort();
        rows
    };
    assert_eq!(read(&exported), read(Path::new(&labels)));
    let stdout = w.run(&["export-labels"]);
    let mut lines: Vec<String> = stdout.out.lines().map(String::from).collect();
    lines.sort();
    assert_eq!(lines, read(&exported));

    let mut text = std::fs::read_to_string(&labels).unwrap();
    let first = text.lines().nth(1).unwrap().to_string();
    let mut fields: Vec<&str> = first.split(',').collect();
    fields[1] = "someone-else";
    text.push_str(&(fields.join(",") + "\n"));
    let forged = w.path("forged.csv");
    std::fs::write(&forged, text).unwrap();
    let r = w.run(&["import-labels", forged.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.err.starts_with("error: store:"), "{}", r.err);
}

#[test]
fn train_predict_and_evaluate_on_synthetic_history() {
    let w = Workspace::new();
    let (dump, labels) = w.synthetic(240);
    assert_eq!(w.run(&["import", &dump]).code, 0);
    let a = w.path("a.cra");
    let b = w.path("b.cra");
    for out in [&a, &b] {
        let r = w.run(&["train", "--labels", &labels, "--algo", "dt", "--no-rfe", "--out", out.to_str().unwrap()]);
        assert_eq!(r.code, 0, "{}", r.err);
        assert!(r.out.contains("trained on 240 labeled comments"), "{}", r.out);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "training is not reproducible");

    let r = w.run(&["predict", "--model", a.to_str().unwrap(), "--all-unpredicted", "--json"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let preds: Vec<serde_json::Value> = serde_json::from_str(&r.out).unwrap();
    assert!(!preds.is_empty());
    let some = preds[0]["comment_id"].as_str().unwrap().to_string();
    let one = w.run(&["predict", "--model", a.to_str().unwrap(), "--comment", &some]);
    assert!(one.out.starts_with(&format!("{some}: ")), "{}", one.out);
    let r = w.run(&["predict", "--model", a.to_str().unwrap(), "--all-unpredicted"]);
    assert!(r.out.starts_with("predicted 0 comments"), "{}", r.out);

    let r = w.run(&[
        "evaluate", "--labels", &labels, "--algo", "dt", "--repeats", "2", "--folds", "3", "--no-rfe", "--json",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    let rows = v["reports"][0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for row in rows {
        for k in ["accuracy"] {
            let x = row[k].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
        for class in ["useful", "not_useful"] {
            for k in ["precision", "recall", "f1"] {
                let x = row[class][k].as_f64().unwrap();
                assert!((0.0..=1.0).contains(&x), "{class}.{k} = {x}");
            }
        }
    }

    let r = w.run(&[
        "evaluate", "--labels", &labels, "--compare", "dt,lr", "--repeats", "2", "--folds", "3", "--no-rfe", "--explain",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("accuracy"), "{}", r.out);
    assert!(r.out.contains("dt-lr"), "{}", r.out);
    assert!(r.out.contains("selected: "), "{}", r.out);
    let table: Vec<&str> = r.out.lines().filter(|l| l.starts_with("dt ") || l.starts_with("lr ")).collect();
    assert_eq!(table.len(), 2, "{}", r.out);
}

#[test]
fn rank_formats() {
    let w = Workspace::new();
    w.run(&["import", golden("fixture.json").to_str().unwrap()]);
    w.run(&["predict", "--model", golden("model.cra").to_str().unwrap(), "--all-unpredicted"]);
    let r = w.run(&["rank", "--from", "2024-03-01", "--to", "2024-04-01", "--entity", "project", "--key", "cud", "--json"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(v["key"], "cud");
    let cuds: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert!(cuds.windows(2).all(|p| p[0] >= p[1]));
    let text = w.run(&["rank", "--from", "2024-03-01", "--to", "2024-04-01"]);
    assert!(text.out.lines().next().unwrap().contains("developer_id"));
    assert_eq!(text.out.lines().count(), 8);
}

#[test]
fn serve_answers_api_requests() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.db");
    let bin = env!("CARGO_BIN_EXE_cra");
    let import = Command::new(bin)
        .args(["import", golden("fixture.json").to_str().unwrap()])
        .env("CRA_STORE", &store)
        .output()
        .unwrap();
    assert!(import.status.success());
    let site = dir.path().join("site");
    std::fs::create_dir(&site).unwrap();
    std::fs::write(site.join("index.html"), "ok").unwrap();
    let mut child = Command::new(bin)
        .args(["serve", "--port", "0", "--static-dir", site.to_str().unwrap()])
        .env("CRA_STORE", &store)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    stderr.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap_or_else(|| panic!("{line}")).to_string();
    let get = |path: &str| {
        let mut s = std::net::TcpStream::connect(&addr).unwrap();
        write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
        let mut resp = String::new();
        s.read_to_string(&mut resp).unwrap();
        resp
    };
    let dash = get("/api/dashboard?from=2024-03-01&to=2024-04-01");
    let index = get("/");
    let bad = get("/api/rankings?key=nope");
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(dash.starts_with("HTTP/1.1 200"), "{dash}");
    assert!(dash.contains("\"top5_reviewers\""));
    assert!(index.starts_with("HTTP/1.1 200") && index.ends_with("ok"), "{index}");
    assert!(bad.starts_with("HTTP/1.1 400"), "{bad}");
}
