use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::Value;

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn speceval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speceval"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = speceval(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn program_count() -> usize {
    fs::read_dir(corpus().join("programs")).unwrap().count()
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &target);
        } else {
            fs::copy(e.path(), target).unwrap();
        }
    }
}

#[test]
fn validate_accepts_the_bundled_corpus() {
    let out = run_ok(&["validate", "--corpus", p(&corpus())]);
    assert!(out.contains("branch%"));
    assert!(out.contains("palindrome"));
    assert!(out.contains(&format!("{} programs", program_count())));
}

#[test]
fn validate_names_the_refuting_test() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    copy_dir(&corpus(), &root);
    let path = root.join("programs/max2.sj");
    let text = fs::read_to_string(&path).unwrap();
    let broken = text.replacen(
        "\\result >= a && \\result >= b",
        "\\result > a && \\result >= b",
        1,
    );
    assert_ne!(text, broken);
    fs::write(&path, broken).unwrap();
    let out = speceval(&["validate", "--corpus", p(&root)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("max2") && err.contains("refuted by test #"),
        "{err}"
    );
}

#[test]
fn validate_rejects_a_stale_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    copy_dir(&corpus(), &root);
    let path = root.join("tests/abs.jsonl");
    let mut tests = fs::read_to_string(&path).unwrap();
    tests.push_str("{\"method\":\"abs\",\"args\":[7],\"expected\":7}\n");
    fs::write(&path, tests).unwrap();
    assert_eq!(
        speceval(&["validate", "--corpus", p(&root)]).status.code(),
        Some(2)
    );
    run_ok(&["validate", "--corpus", p(&root), "--write-manifest"]);
    run_ok(&["validate", "--corpus", p(&root)]);
}

#[test]
fn perturb_writes_every_variant_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(&[
            "perturb",
            "--corpus",
            p(&corpus()),
            "--output",
            p(out),
            "--seed",
            "5",
        ]);
    }
    let mut files = 0;
    for kind in [
        "defuse_break",
        "ifelse_flip",
        "independent_swap",
        "name_random",
        "name_shuffle",
    ] {
        let va = a.join("variants").join(kind);
        for e in fs::read_dir(&va).unwrap() {
            let name = e.unwrap().file_name();
            if Path::new(&name).extension().is_some_and(|x| x == "sj") {
                files += 1;
            }
            let other = b.join("variants").join(kind).join(&name);
            assert_eq!(
                fs::read(va.join(&name)).unwrap(),
                fs::read(other).unwrap(),
                "{kind}/{name:?}"
            );
        }
        let maps: Value =
            serde_json::from_str(&fs::read_to_string(va.join("rename_map.json")).unwrap()).unwrap();
        assert_eq!(maps.as_object().unwrap().len(), program_count());
    }
    assert_eq!(files, 5 * program_count());
}

#[test]
fn perturb_reports_a_broken_rewrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = speceval(&[
        "perturb",
        "--corpus",
        p(&corpus()),
        "--output",
        p(dir.path()),
        "--inject-fault",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("changed behavior"));
}

#[test]
fn gen_tasks_covers_every_cell_and_keeps_keys_apart() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "gen-tasks",
        "--corpus",
        p(&corpus()),
        "--output",
        p(dir.path()),
    ]);
    let tasks = jsonl(&dir.path().join("tasks.jsonl"));
    let stats: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("gen_stats.json")).unwrap())
            .unwrap();
    let skipped = stats["skipped"].as_array().unwrap().len();
    assert_eq!(tasks.len() + skipped, 6 * 4 * program_count());
    assert!(tasks.iter().all(|t| t.get("answer_key").is_none()));
    let keys = jsonl(&dir.path().join("keys/answer_keys.jsonl"));
    assert_eq!(keys.len(), tasks.len());
    let fizz = tasks
        .iter()
        .find(|t| t["task_id"] == "fizzbuzz/original/selection")
        .unwrap();
    assert_eq!(fizz["payload"]["options"].as_array().unwrap().len(), 4);
}

/// Texts that would give an answer away if they reached a prompt.
fn key_texts(key: &Value) -> Vec<String> {
    let a = &key["key"]["answer"];
    let mut out = vec![key["key"]["unit"].as_str().unwrap().to_string()];
    match a["task"].as_str().unwrap() {
        "infilling" => out.push(serde_json::to_string(&a["source"]).unwrap()),
        "generation" => out.push(a["annotated_program"].as_str().unwrap().to_string()),
        _ => {}
    }
    out
}

#[test]
fn prompts_never_contain_answer_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    run_ok(&["gen-tasks", "--corpus", p(&corpus()), "--output", out]);
    run_ok(&[
        "run",
        "--corpus",
        p(&corpus()),
        "--output",
        out,
        "--endpoint",
        "fixed:true",
        "--run-id",
        "audit",
    ]);
    let transcript = fs::read_to_string(dir.path().join("runs/audit/transcript.jsonl")).unwrap();
    assert!(!transcript.contains("answer_key"));
    let keys = jsonl(&dir.path().join("keys/answer_keys.jsonl"));
    for k in &keys {
        for text in key_texts(k) {
            let escaped = serde_json::to_string(&text).unwrap();
            let needle = escaped.trim_matches('"');
            assert!(!transcript.contains(needle), "{} leaks", k["task_id"]);
        }
    }
    assert_eq!(transcript.lines().count(), keys.len());
}

fn run_dir(out: &Path) -> PathBuf {
    out.join("runs/oracle-k2")
}

#[test]
fn oracle_run_scores_perfectly_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        for cmd in ["gen-tasks", "run", "score"] {
            run_ok(&[
                cmd,
                "--corpus",
                p(&corpus()),
                "--output",
                p(out),
                "--seed",
                "9",
            ]);
        }
    }
    for f in [
        "tasks.jsonl",
        "keys/answer_keys.jsonl",
        "runs/oracle-k2/report.json",
        "runs/oracle-k2/report.md",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let graded = jsonl(&run_dir(&a).join("graded.jsonl"));
    assert!(graded.iter().all(|g| g["success"] == true));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(run_dir(&a).join("report.json")).unwrap())
            .unwrap();
    assert!(report["missing"].as_array().unwrap().is_empty());
}

#[test]
fn interrupted_runs_resume_to_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(&["gen-tasks", "--corpus", p(&corpus()), "--output", p(out)]);
        run_ok(&["run", "--corpus", p(&corpus()), "--output", p(out)]);
    }
    // Keep a third of b's results and tear the last line.
    let graded = run_dir(&b).join("graded.jsonl");
    let text = fs::read_to_string(&graded).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let keep = lines.len() / 3;
    let mut partial: String = lines[..keep].iter().map(|l| format!("{l}\n")).collect();
    partial.push_str(&lines[keep][..10]);
    fs::write(&graded, partial).unwrap();
    let out = run_ok(&["run", "--corpus", p(&corpus()), "--output", p(&b)]);
    assert!(out.contains(&format!("({keep} already graded")), "{out}");
    for out in [&a, &b] {
        run_ok(&["score", "--corpus", p(&corpus()), "--output", p(out)]);
    }
    assert_eq!(
        fs::read(run_dir(&a).join("report.json")).unwrap(),
        fs::read(run_dir(&b).join("report.json")).unwrap()
    );
}

#[test]
fn score_fails_when_a_cell_is_missing() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    run_ok(&["gen-tasks", "--corpus", p(&corpus()), "--output", out]);
    run_ok(&["run", "--corpus", p(&corpus()), "--output", out]);
    let graded = run_dir(dir.path()).join("graded.jsonl");
    let kept: String = fs::read_to_string(&graded)
        .unwrap()
        .lines()
        .filter(|l| {
            !l.contains("\"type\":\"infilling\"") || !l.contains("\"category\":\"name_random\"")
        })
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&graded, kept).unwrap();
    let res = speceval(&["score", p(&run_dir(dir.path()))]);
    assert_eq!(res.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&res.stderr).contains("name_random/infilling"));
    assert!(run_dir(dir.path()).join("report.md").exists());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "corpus = {:?}\noutput = \"out\"\nseed = 3\nshots = 1\ncategories = [\"original\", \"name_shuffle\"]\ntask_types = [\"judgement\"]\nendpoint = \"fixed:true\"\n",
            corpus().to_str().unwrap()
        ),
    )
    .unwrap();
    for cmd in ["gen-tasks", "run"] {
        run_ok(&[cmd, "--config", p(&cfg)]);
    }
    let out = dir.path().join("out");
    let tasks = jsonl(&out.join("tasks.jsonl"));
    assert_eq!(tasks.len(), 2 * program_count());
    let run = out.join("runs/fixed_true-k1");
    assert_eq!(jsonl(&run.join("graded.jsonl")).len(), tasks.len());
    run_ok(&["score", "--config", p(&cfg)]);
    let bad = speceval(&["gen-tasks", "--config", p(&cfg), "--shots", "3"]);
    assert!(!bad.status.success());
}

/// Minimal chat-completions server. Every `drop_every`-th request is
/// dropped without a response.
fn stub_server(reply: &'static str, drop_every: usize) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    let seen = Arc::new(AtomicUsize::new(0));
    let counter = seen.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let n = counter.fetch_add(1, Ordering::SeqCst) + 1;
            thread::spawn(move || {
                serve(
                    stream,
                    reply,
                    drop_every > 0 && n.is_multiple_of(drop_every),
                )
            });
        }
    });
    (url, seen)
}

fn serve(stream: TcpStream, reply: &str, drop: bool) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0usize;
    let mut auth = String::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
        if lower.starts_with("authorization:") {
            auth = line.to_string();
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    if drop {
        return;
    }
    let request: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(request["temperature"], 0.0);
    let (status, payload) = if auth.ends_with("Bearer test-key") {
        (
            "200 OK",
            serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": reply } }] }).to_string(),
        )
    } else {
        ("401 Unauthorized", "{}".to_string())
    };
    let mut s = stream;
    let _ = write!(
        s,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
}

fn http_config(dir: &Path, url: &str) -> PathBuf {
    let cfg = dir.join("run.toml");
    fs::write(
        &cfg,
        format!(
            "corpus = {:?}\noutput = \"out\"\ntask_types = [\"judgement\"]\nconcurrency = 3\nrun_id = \"stub\"\n\n[endpoint]\nkind = \"http_chat\"\nbase_url = \"{url}\"\nmodel = \"stub-model\"\nmax_retries = 0\ntimeout_secs = 5\n",
            corpus().to_str().unwrap()
        ),
    )
    .unwrap();
    cfg
}

fn run_with_key(cfg: &Path, cmd: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speceval"))
        .args([cmd, "--config", p(cfg)])
        .env("SPECEVAL_API_KEY", "test-key")
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

#[test]
fn http_endpoint_runs_against_a_stub() {
    let dir = tempfile::tempdir().unwrap();
    let (url, seen) = stub_server("The specification holds.\n\ntrue", 0);
    let cfg = http_config(dir.path(), &url);
    assert!(run_with_key(&cfg, "gen-tasks").status.success());
    let out = run_with_key(&cfg, "run");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = dir.path().join("out/runs/stub");
    let graded = jsonl(&run.join("graded.jsonl"));
    assert_eq!(graded.len(), 6 * program_count());
    assert_eq!(seen.load(Ordering::SeqCst), graded.len());
    assert!(graded
        .iter()
        .all(|g| g["model"] == "stub-model" && g["note"].is_null()));
    let yes = graded.iter().filter(|g| g["success"] == true).count();
    assert!(yes > 0 && yes < graded.len());
}

#[test]
fn dropped_requests_degrade_single_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let (url, _) = stub_server("true", 10);
    let cfg = http_config(dir.path(), &url);
    assert!(run_with_key(&cfg, "gen-tasks").status.success());
    let out = run_with_key(&cfg, "run");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = dir.path().join("out/runs/stub");
    let graded = jsonl(&run.join("graded.jsonl"));
    let transcript = jsonl(&run.join("transcript.jsonl"));
    assert_eq!(graded.len(), 6 * program_count());
    assert_eq!(transcript.len(), graded.len());
    let errors: Vec<&Value> = graded
        .iter()
        .filter(|g| {
            g["note"]
                .as_str()
                .is_some_and(|n| n.starts_with("endpoint error"))
        })
        .collect();
    assert_eq!(errors.len(), graded.len() / 10);
    assert!(errors.iter().all(|g| g["success"] == false));
}

#[test]
fn missing_api_key_is_an_auth_failure_per_task() {
    let dir = tempfile::tempdir().unwrap();
    let (url, _) = stub_server("true", 0);
    let cfg = http_config(dir.path(), &url);
    run_ok(&["gen-tasks", "--config", p(&cfg)]);
    let out = Command::new(env!("CARGO_BIN_EXE_speceval"))
        .args(["run", "--config", p(&cfg)])
        .env_remove("SPECEVAL_API_KEY")
        .output()
        .unwrap();
    assert!(out.status.success());
    let graded = jsonl(&dir.path().join("out/runs/stub/graded.jsonl"));
    assert!(graded.iter().all(|g| g["success"] == false));
}
