use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Command, Stdio};

fn noractl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noractl"))
}

#[test]
fn score_prints_affect_json() {
    let out = noractl().args(["score", "--text", "I am so happy today"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["sentiment"]["label"], "positive");
    let stress = v["stress"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&stress));
}

#[test]
fn score_rejects_empty_text() {
    let out = noractl().args(["score", "--text", ""]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = noractl().args(["score", "--text", "hi", "--lang", "fr"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nora.toml");
    std::fs::write(&path, "stress_threshold = 3.0\n").unwrap();
    let out = noractl().args(["score", "--text", "hi", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&path, "colour = \"blue\"\n").unwrap();
    let out = noractl().args(["score", "--text", "hi", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn short_simulation_passes() {
    let out = noractl().args(["simulate", "--days", "3", "--users", "2"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["program"]["health_records"], 6);
}

#[test]
fn example_config_loads() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../nora.example.toml");
    let out = noractl().args(["score", "--text", "我很开心", "--lang", "zh", "--config", path]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn serve_answers_health_and_persists_accounts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let register = r#"{"alias":"nia","password":"password123"}"#;

    let (status, _) = with_server(&data, |port| request(port, "POST", "/api/auth/register", register));
    assert_eq!(status, 200);
    let (status, body) = with_server(&data, |port| {
        assert_eq!(request(port, "GET", "/health", "").0, 200);
        assert_eq!(request(port, "POST", "/api/auth/register", register).0, 409);
        request(port, "POST", "/api/auth/login", r#"{"alias":"nia","password":"password123"}"#)
    });
    assert_eq!(status, 200, "{body}");
    assert!(body.contains("\"token\""));
}

fn with_server<T>(data: &std::path::Path, f: impl FnOnce(u16) -> T) -> T {
    let mut child = noractl()
        .args(["serve", "--port", "0", "--data"])
        .arg(data)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let port: u16 = line.trim().rsplit(':').next().unwrap().parse().unwrap();
    let out = f(port);
    child.kill().unwrap();
    child.wait().unwrap();
    out
}

/// Minimal HTTP/1.1 client: returns (status, body).
fn request(port: u16, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut s = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let status = resp.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = resp.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}
