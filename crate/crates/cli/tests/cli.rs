use serde_json::{json, Value};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scimcp"));
    c.env_remove("SCI_MCP_FIXTURE");
    c
}

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn run(c: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = c.output().unwrap();
    (
        status.code().unwrap_or(-1),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

fn scenario(name: &str, out: &Path) -> (i32, String, String) {
    run(bin()
        .arg("scenario")
        .arg(data(&format!("scenarios/{name}.json")))
        .arg("--out")
        .arg(out))
}

#[test]
fn shipped_scenarios_exit_zero_and_write_stable_traces() {
    let dir = tempfile::tempdir().unwrap();
    for name in [
        "model_discovery",
        "multi_site",
        "compute_only",
        "monitoring",
        "recovery",
    ] {
        let a = dir.path().join(format!("{name}.a.json"));
        let b = dir.path().join(format!("{name}.b.json"));
        let (code, stdout, stderr) = scenario(name, &a);
        assert_eq!(code, 0, "{name}: {stdout}{stderr}");
        assert!(stdout.starts_with("PASS"), "{stdout}");
        assert_eq!(scenario(name, &b).0, 0);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{name}");
    }
}

#[test]
fn missing_software_is_a_mismatch_naming_unresolved_task() {
    let dir = tempfile::tempdir().unwrap();
    let mut fixture: Value = serde_json::from_str(&std::fs::read_to_string(data("fixture.json")).unwrap()).unwrap();
    for t in fixture["compute"]["tools"].as_array_mut().unwrap() {
        if t["name"] == "build_tree" {
            t["requirements"]["software"] = json!(["gromacs"]);
        }
    }
    let fx = dir.path().join("fixture.json");
    std::fs::write(&fx, fixture.to_string()).unwrap();
    let (code, stdout, _) = run(bin()
        .arg("scenario")
        .arg(data("scenarios/multi_site.json"))
        .arg("--fixture")
        .arg(&fx)
        .arg("--out")
        .arg(dir.path().join("t.json")));
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("UNRESOLVED_TASK"), "{stdout}");
}

#[test]
fn malformed_scenario_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"name\": ").unwrap();
    let (code, _, stderr) = run(bin().arg("scenario").arg(&p));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("bad.json"));
}

#[test]
fn fixture_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut s: Value =
        serde_json::from_str(&std::fs::read_to_string(data("scenarios/compute_only.json")).unwrap()).unwrap();
    s.as_object_mut().unwrap().remove("fixture");
    let p = dir.path().join("s.json");
    std::fs::write(&p, s.to_string()).unwrap();
    let out = dir.path().join("t.json");
    let (code, _, stderr) = run(bin().arg("scenario").arg(&p).arg("--out").arg(&out));
    assert_eq!(code, 2, "{stderr}");
    let (code, stdout, stderr) = run(bin()
        .arg("scenario")
        .arg(&p)
        .arg("--out")
        .arg(&out)
        .env("SCI_MCP_FIXTURE", data("fixture.json")));
    assert_eq!(code, 0, "{stdout}{stderr}");
}

fn bench(extra: &[&str], out: &Path) -> (i32, String, String) {
    run(bin()
        .arg("bench-recall")
        .arg("--corpus")
        .arg(data("corpus.jsonl"))
        .arg("--benchmark")
        .arg(data("benchmark.jsonl"))
        .arg("--out")
        .arg(out)
        .args(extra))
}

#[test]
fn bench_recall_prints_a_strategy_by_k_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let (code, stdout, stderr) = bench(&[], &out);
    assert_eq!(code, 0, "{stderr}");
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with("NAME_")).collect();
    assert_eq!(rows.len(), 4, "{stdout}");
    for r in &rows {
        assert_eq!(r.split_whitespace().count(), 5, "{r}");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["per_strategy"].as_object().unwrap().len(), 4);
    assert_eq!(report["per_strategy"]["NAME_DESC_HELP_README"]["5"], 1.0);

    let (code, stdout, _) = bench(&["--strategy", "NAME_ONLY"], &out);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("NAME_")).count(), 1);
}

#[test]
fn bench_recall_rejects_unknown_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b.jsonl");
    std::fs::write(
        &b,
        "{\"query\": \"align reads\", \"ground_truth_tool\": \"bwa_mem\"}\n{\"query\": \"x\", \"ground_truth_tool\": \"nonexistent\"}\n",
    )
    .unwrap();
    let (code, _, stderr) = run(bin()
        .arg("bench-recall")
        .arg("--corpus")
        .arg(data("corpus.jsonl"))
        .arg("--benchmark")
        .arg(&b)
        .arg("--out")
        .arg(dir.path().join("r.json")));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("nonexistent"), "{stderr}");
    assert!(stderr.contains('2'), "{stderr}");
}

#[test]
fn report_tabulates_recovery_and_rejects_truncated_traces() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.json");
    assert_eq!(scenario("recovery", &trace).0, 0);
    let (code, stdout, _) = run(bin().arg("report").arg(&trace));
    assert_eq!(code, 0);
    let row = stdout.lines().find(|l| l.starts_with("stage")).unwrap();
    assert_eq!(row.split_whitespace().nth(1), Some("2"), "{stdout}");

    let empty = dir.path().join("e.json");
    std::fs::write(&empty, "{\"trace\": []}").unwrap();
    let (code, stdout, _) = run(bin().arg("report").arg(&empty));
    assert_eq!(code, 0);
    assert!(stdout.contains("0 bindings"));

    let text = std::fs::read_to_string(&trace).unwrap();
    let cut = dir.path().join("cut.json");
    std::fs::write(&cut, &text[..text.len() / 2]).unwrap();
    assert_eq!(run(bin().arg("report").arg(&cut)).0, 2);
}

#[test]
fn serve_rejects_a_missing_fixture_with_its_path() {
    let (code, _, stderr) = run(bin()
        .args(["serve", "--bind", "127.0.0.1:0", "--fixture"])
        .arg("/no/such/fixture.json"));
    assert_eq!(code, 2);
    assert!(stderr.contains("/no/such/fixture.json"), "{stderr}");
}

#[test]
fn serve_reports_an_occupied_port() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let (code, _, stderr) = run(bin()
        .args(["serve", "--servers", "status", "--bind"])
        .arg(taken.local_addr().unwrap().to_string())
        .arg("--fixture")
        .arg(data("fixture.json")));
    assert_eq!(code, 3, "{stderr}");
}

#[test]
fn stdio_needs_exactly_one_server() {
    let (code, _, stderr) = run(bin()
        .args(["serve", "--transport", "stdio", "--fixture"])
        .arg(data("fixture.json")));
    assert_eq!(code, 2);
    assert!(stderr.contains("exactly one"), "{stderr}");
}

#[test]
fn serve_stdio_answers_on_stdout() {
    let mut child = bin()
        .args(["serve", "--transport", "stdio", "--servers", "status", "--fixture"])
        .arg(data("fixture.json"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    {
        let stdin = child.stdin.as_mut().unwrap();
        writeln!(
            stdin,
            r#"{{"jsonrpc":"2.0","id":1,"method":"initialize","params":{{}}}}"#
        )
        .unwrap();
        writeln!(stdin, r#"{{"jsonrpc":"2.0","id":2,"method":"tools/list"}}"#).unwrap();
    }
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let lines: Vec<Value> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["result"]["serverInfo"]["name"], "status");
    assert!(lines[1]["result"]["tools"].as_array().unwrap().len() >= 5);
}

struct Killed(Child);

impl Drop for Killed {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// Start `serve` and return the endpoint URL of each server from its banner.
fn serve_http(servers: &str) -> (Killed, Vec<(String, String)>) {
    let mut child = bin()
        .args(["serve", "--bind", "127.0.0.1:0", "--servers", servers, "--corpus"])
        .arg(data("corpus.jsonl"))
        .arg("--fixture")
        .arg(data("fixture.json"))
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .unwrap();
    let mut endpoints = Vec::new();
    let mut reader = BufReader::new(child.stdout.take().unwrap());
    let mut line = String::new();
    loop {
        line.clear();
        assert!(reader.read_line(&mut line).unwrap() > 0, "serve exited before ready");
        if line.starts_with("ready") {
            break;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if let ["serving", id, "at", url] = parts[..] {
            endpoints.push((id.to_string(), url.to_string()));
        }
    }
    (Killed(child), endpoints)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn serve_http_status_answers_health_queries() {
    let (_proc, endpoints) = serve_http("status,auth");
    let ids: Vec<&str> = endpoints.iter().map(|(i, _)| i.as_str()).collect();
    assert_eq!(ids, ["status", "auth"]);
    let auth = scimcp_transport::HttpClient::connect(&endpoints[1].1).await.unwrap();
    let grant = auth
        .call_tool(
            "acquire_grant",
            json!({"user_id": "alice", "secret": "alice-secret", "scopes": ["status:read"]}),
            None,
        )
        .await
        .unwrap();
    let token = grant.structured["token"].as_str().unwrap().to_string();
    let status = scimcp_transport::HttpClient::connect(&endpoints[0].1).await.unwrap();
    let denied = status
        .call_tool("get_system_health", json!({"system": "polaris"}), None)
        .await;
    assert!(denied.is_err() || denied.unwrap().is_error);
    let health = status
        .call_tool("get_system_health", json!({"system": "polaris"}), Some(&token))
        .await
        .unwrap();
    assert!(!health.is_error, "{:?}", health.structured);
    assert_eq!(health.structured["health"], "up");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn serve_hosts_discovery_when_given_a_corpus() {
    let (_proc, endpoints) = serve_http("discovery");
    let c = scimcp_transport::HttpClient::connect(&endpoints[0].1).await.unwrap();
    assert_eq!(c.list_tools().await.unwrap().len(), 1);
}
