use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use serde_json::Value;

fn qtl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtl"))
        .current_dir(dir)
        .env_remove("QTL_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn store(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("qtl-store.json")).unwrap()).unwrap()
}

#[test]
fn issue_qticket_records_labels_and_copies() {
    let dir = tempfile::tempdir().unwrap();
    let o = qtl(dir.path(), &["--seed", "1", "issue", "--N", "100"]);
    assert_eq!(code(&o), 0);
    let serial = stdout(&o).trim().to_string();
    assert_eq!(serial.len(), 32);
    let s = store(dir.path());
    assert_eq!(s["serials"].as_array().unwrap().len(), 1);
    assert_eq!(s["serials"][0]["labels"].as_array().unwrap().len(), 100);
    assert_eq!(s["serials"][0]["serial"], serial.as_str());

    let o = qtl(dir.path(), &["--seed", "2", "issue", "--N", "10", "--copies", "3", "--out", "multi.json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(store(dir.path())["serials"][1]["issued_copies"], 3);
    for i in 1..=3 {
        assert!(dir.path().join(format!("multi.{i}.json")).exists());
    }
}

#[test]
fn issue_cv_matches_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o = qtl(dir.path(), &["--seed", "3", "issue", "--kind", "cv", "--n", "4", "--r", "2", "--ftol", "3/4"]);
    assert_eq!(code(&o), 0);
    let rec = &store(dir.path())["serials"][0];
    assert_eq!((rec["n"].as_u64(), rec["r"].as_u64()), (Some(4), Some(2)));
    assert_eq!(rec["pairs"].as_array().unwrap().len(), 8);
    assert_eq!(rec["f_tol"], "3/4");
    let tok: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("token.json")).unwrap()).unwrap();
    assert_eq!(tok["kind"], "cv");
    assert_eq!(tok["qubits"].as_array().unwrap().len(), 16);
}

#[test]
fn duplicate_seed_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qtl(dir.path(), &["--seed", "9", "issue", "--N", "5"])), 0);
    assert_eq!(code(&qtl(dir.path(), &["--seed", "9", "issue", "--N", "5"])), 2);
}

#[test]
fn verify_accepts_once_then_exhausts() {
    let dir = tempfile::tempdir().unwrap();
    qtl(dir.path(), &["--seed", "4", "issue", "--N", "50"]);
    let o = qtl(dir.path(), &["--seed", "5", "verify", "--token", "token.json", "--keep"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["reason"], "accepted");
    assert_eq!(store(dir.path())["serials"][0]["accepted_count"], 1);
    let o = qtl(dir.path(), &["--seed", "6", "verify", "--token", "token.json"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("serial-exhausted"));
    assert!(!dir.path().join("token.json").exists());
}

#[test]
fn verify_rejects_heavily_degraded_token() {
    let dir = tempfile::tempdir().unwrap();
    qtl(dir.path(), &["--seed", "7", "issue", "--N", "200", "--ftol", "9/10"]);
    let o = qtl(dir.path(), &["--seed", "8", "verify", "--token", "token.json", "--fidelity", "0.6"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("\"rejected\""));
}

#[test]
fn verify_cv_locally() {
    let dir = tempfile::tempdir().unwrap();
    qtl(dir.path(), &["--seed", "10", "issue", "--kind", "cv", "--n", "6", "--r", "5", "--ftol", "4/5", "--frames"]);
    let o = qtl(dir.path(), &["--seed", "11", "verify", "--token", "token.json", "--policy", "complementary"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rec = &store(dir.path())["serials"][0];
    assert_eq!((rec["attempts"].as_u64(), rec["accepted_count"].as_u64()), (Some(1), Some(1)));
}

#[test]
fn unknown_serial_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    qtl(dir.path(), &["--seed", "12", "issue", "--N", "5", "--store", "other.json"]);
    let o = qtl(dir.path(), &["verify", "--token", "token.json"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("unknown-serial"));
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "3", "sweep", "--N", "20", "--N", "40", "--ftol", "7/10", "--ftol", "9/10", "--trials", "300"];
    let a = qtl(dir.path(), &args);
    let b = qtl(dir.path(), &args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "f_tol,N,exact_prob,mc_prob,mc_stderr");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.7,20,"));

    let out = dir.path().join("s.csv");
    let o = qtl(dir.path(), &["--seed", "3", "sweep", "--N", "20", "--N", "40", "--ftol", "7/10", "--ftol", "9/10", "--trials", "300", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(&out).unwrap(), a.stdout);
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_qtl"))
            .current_dir(dir.path())
            .env("QTL_SEED", "77")
            .args(["sweep", "--N", "10", "--ftol", "4/5", "--trials", "100"])
            .output()
            .unwrap()
    };
    assert_eq!(run().stdout, run().stdout);
}

#[test]
fn sweep_rejects_unknown_strategies() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qtl(dir.path(), &["sweep", "--strategy", "photocopier", "--trials", "1"])), 2);
    assert_eq!(code(&qtl(dir.path(), &["sweep", "--strategy", "intermediate-basis", "--trials", "1"])), 2);
}

#[test]
fn bounds_table_reports_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let o = qtl(dir.path(), &["bounds", "--ftol", "5/6", "--ftol", "9/10"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let row = |prefix: &str| text.lines().find(|l| l.starts_with(prefix)).unwrap_or_else(|| panic!("{prefix}")).to_string();
    assert!(row("qticket threshold").contains("0.8333333333"));
    assert!(row("cv threshold").contains("0.8535533906"));
    for c in ["c=1 5/6", "c=2 11/12", "c=3 19/20"] {
        assert!(text.contains(c), "{c}");
    }
    assert!(row("security exponent    F_tol=5/6").contains("0.0000000000"));
    assert!(row("security             N=1000 F_tol=5/6").contains("insecure-parameters"));
    assert!(row("security             N=1000 F_tol=9/10").contains("1.058652e-19"));
}

#[test]
fn games_report_values() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&qtl(dir.path(), &["games"]));
    let value = |name: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        line.split_whitespace().last().unwrap().parse().unwrap()
    };
    assert!((value("Sel(G_Z)") - 1.0).abs() < 1e-9);
    assert!((value("Sel(G_X)") - 1.0).abs() < 1e-9);
    assert!((value("Sel(G_and)") - 0.75).abs() < 1e-9);
    assert!((value("Sel(G_avg)") - (0.5 + 1.0 / 8f64.sqrt())).abs() < 1e-9);
    assert!((value("mixed average") - (0.75 + 2f64.sqrt() / 8.0)).abs() < 1e-9);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qtl(dir.path(), &[])), 2);
    assert_eq!(code(&qtl(dir.path(), &["issue", "--ftol", "3/2"])), 2);
    assert_eq!(code(&qtl(dir.path(), &["cv-demo"])), 2);
    assert_eq!(code(&qtl(dir.path(), &["cv-demo", "--listen", "a", "--connect", "b"])), 2);
}

#[test]
fn reported_constants_are_computed_not_hard_coded() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).parent().unwrap();
    let mut files: Vec<PathBuf> = Vec::new();
    let mut stack: Vec<PathBuf> = ["core/src", "cli/src"].iter().map(|d| root.join(d)).collect();
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "rs") {
                files.push(p);
            }
        }
    }
    assert!(files.len() > 10);
    for f in files {
        let text = fs::read_to_string(&f).unwrap();
        let code = text.split("#[cfg(test)]").next().unwrap();
        for lit in ["0.8535", "0.853553", "0.9267", "0.927"] {
            assert!(!code.contains(lit), "{} contains {lit}", f.display());
        }
    }
}

struct Verifier {
    child: Child,
    addr: String,
}

fn spawn_verifier(dir: &Path, seed: &str, store: &str, sessions: &str, log: &str) -> Verifier {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qtl"))
        .current_dir(dir)
        .args(["--seed", seed, "cv-demo", "--listen", "127.0.0.1:0", "--store", store, "--sessions", sessions, "--out", log])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.as_mut().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("listen banner").to_string();
    Verifier { child, addr }
}

impl Verifier {
    fn wait(mut self) -> i32 {
        self.child.wait().unwrap().code().unwrap()
    }
}

#[test]
fn cv_demo_honest_replay_and_redemption() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = qtl(p, &["--seed", "20", "issue", "--kind", "cv", "--n", "16", "--r", "4", "--ftol", "3/4"]);
    assert_eq!(code(&o), 0);
    fs::copy(p.join("qtl-store.json"), p.join("fresh.json")).unwrap();

    let v = spawn_verifier(p, "21", "qtl-store.json", "2", "verifier.jsonl");
    let h = qtl(p, &["--seed", "22", "cv-demo", "--connect", &v.addr, "--token", "token.json", "--record", "answer.json"]);
    assert_eq!(code(&h), 0, "{}", String::from_utf8_lossy(&h.stderr));
    let transcript = stdout(&h);
    let kinds: Vec<String> = transcript
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["message"]["type"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds, ["hello", "challenge", "answer", "verdict"]);
    assert!(!p.join("token.json").exists());

    // same serial again: refused without a challenge
    let r = qtl(p, &["cv-demo", "--connect", &v.addr, "--replay", "answer.json"]);
    assert_eq!(code(&r), 1);
    assert!(stdout(&r).contains("already-redeemed"));
    assert_eq!(v.wait(), 1);
    let log = fs::read_to_string(p.join("verifier.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 6);
    assert_eq!(store(p)["serials"][0]["accepted_count"], 1);

    // a verifier that never saw the ticket asks a fresh question
    let v = spawn_verifier(p, "23", "fresh.json", "1", "fresh.jsonl");
    let r = qtl(p, &["cv-demo", "--connect", &v.addr, "--replay", "answer.json"]);
    assert_eq!(code(&r), 1);
    assert!(stdout(&r).contains("\"reason\":\"rejected\""));
    assert_eq!(v.wait(), 1);
}

#[test]
fn cv_demo_malformed_json_is_a_protocol_error() {
    let dir = tempfile::tempdir().unwrap();
    let v = spawn_verifier(dir.path(), "24", "qtl-store.json", "1", "log.jsonl");
    let mut s = TcpStream::connect(&v.addr).unwrap();
    s.write_all(b"{\"type\":\"hello\",\n").unwrap();
    let mut reply = String::new();
    BufReader::new(&s).read_line(&mut reply).unwrap();
    let m: Value = serde_json::from_str(&reply).unwrap();
    assert_eq!(m["type"], "error");
    assert_eq!(v.wait(), 3);
}

#[test]
fn cv_demo_holder_without_verifier_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    qtl(dir.path(), &["--seed", "30", "issue", "--kind", "cv", "--n", "2", "--r", "2", "--ftol", "1/2"]);
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    drop(listener);
    let o = qtl(dir.path(), &["cv-demo", "--connect", &addr, "--token", "token.json", "--keep"]);
    assert_eq!(code(&o), 3);
}
