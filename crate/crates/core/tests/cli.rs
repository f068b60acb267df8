use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use onestep_glm::runtime::codec::{decode_frame, encode_frame, FrameHeader, HEADER_LEN};
use onestep_glm::runtime::{Message, WorkerRequest, WorkerResponse};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_onestep-glm");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("ONESTEP_GLM_CONFIG").output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn generate(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let p = path.to_str().unwrap();
    let mut args = vec!["generate", "--family", "logistic", "--n", "4000", "--beta", "0.5,-1,0.8", "--seed", "3", "--out", p];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn coefs(v: &Value) -> Vec<(f64, f64)> {
    v["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["estimate"].as_f64().unwrap(), c["std_error"].as_f64().unwrap()))
        .collect()
}

#[test]
fn one_step_lands_within_three_standard_errors_of_global() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.csv", &[]);
    let d = data.to_str().unwrap();
    let base = ["estimate", "--data", d, "--family", "logistic", "--shards", "4", "--sharding", "random"];
    let global = json(&run(&[&base[..], &["--method", "global"]].concat()));
    let one_step = json(&run(&[&base[..], &["--method", "one-step", "--pilot-fraction", "0.2"]].concat()));
    for ((g, se), (o, _)) in coefs(&global).into_iter().zip(coefs(&one_step)) {
        assert!((g - o).abs() <= 3.0 * se, "global {g} one-step {o} se {se}");
    }
    assert_eq!(one_step["heavy_rounds"], 2);
    assert!(global["heavy_rounds"].as_u64().unwrap() >= 3);
}

#[test]
fn reruns_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.csv", &[]);
    let args = ["estimate", "--data", data.to_str().unwrap(), "--family", "logistic", "--shards", "3", "--sharding", "random", "--seed", "8"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sorted_data_orders_log_likelihoods() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "sorted.csv", &["--sort-by-covariate-sum"]);
    let d = data.to_str().unwrap();
    let ll = |method: &str| {
        let v = json(&run(&[
            "estimate", "--data", d, "--family", "logistic", "--shards", "5", "--sharding", "contiguous",
            "--pilot-fraction", "0.05", "--method", method,
        ]));
        v["log_lik"].as_f64().unwrap()
    };
    let (os, one, go) = (ll("one-shot"), ll("one-step"), ll("global"));
    assert!(os <= one && one <= go, "one-shot {os}, one-step {one}, global {go}");
}

#[test]
fn invalid_response_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "y,x1\n1,0.5\n0,0.1\n2.0,0.3\n").unwrap();
    let out = run(&["estimate", "--data", path.to_str().unwrap(), "--family", "logistic", "--method", "global"]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3"), "{err}");
}

#[test]
fn missing_config_is_a_config_error() {
    let out = run(&["simulate", "--config", "/nonexistent/run.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_replication_preset_cell_is_quick() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = run(&[
        "simulate", "--preset", "table1", "--cell", "N=10000,K=5,p=0.10,sharding=random", "--reps", "1", "--out",
        dir.path().to_str().unwrap(),
    ]);
    let took = start.elapsed();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(took < Duration::from_secs(5), "took {took:?}");
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(files.iter().any(|f| f.to_string_lossy().ends_with(".csv")));
    assert!(files.iter().any(|f| f.to_string_lossy().ends_with(".json")));
}

#[test]
fn test_command_degrees_of_freedom_and_null_at_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.csv", &[]);
    let d = data.to_str().unwrap();
    let base = ["test", "--data", d, "--family", "logistic", "--shards", "4", "--sharding", "random"];

    let two = json(&run(&[&base[..], &["--fix", "x2=0", "--fix", "x3=0"]].concat()));
    assert_eq!(two["df"], 2);
    assert!(two["p_value"].as_f64().unwrap() < 1e-6);

    let unknown = run(&[&base[..], &["--fix", "nope=1"]].concat());
    assert_eq!(unknown.status.code(), Some(2));

    // Fixing every coefficient at its one-step value gives a statistic near 0.
    let est = json(&run(&[
        "estimate", "--data", d, "--family", "logistic", "--shards", "4", "--sharding", "random",
    ]));
    let fixes: Vec<String> = ["x1", "x2", "x3"]
        .iter()
        .zip(coefs(&est))
        .map(|(n, (b, _))| format!("--fix={n}={b:e}"))
        .collect();
    let mut args: Vec<&str> = base.to_vec();
    args.extend(fixes.iter().map(String::as_str));
    let zero = json(&run(&args));
    assert_eq!(zero["df"], 3);
    assert!(zero["statistic"].as_f64().unwrap() < 1e-6, "{zero}");
}

fn exchange(s: &mut TcpStream, frame: &[u8]) -> Message {
    s.write_all(frame).unwrap();
    let mut head = [0u8; HEADER_LEN];
    s.read_exact(&mut head).unwrap();
    let h = FrameHeader::parse(&head).unwrap();
    let mut buf = head.to_vec();
    buf.resize(HEADER_LEN + h.payload_len as usize, 0);
    s.read_exact(&mut buf[HEADER_LEN..]).unwrap();
    decode_frame(&buf).unwrap().0
}

#[test]
fn worker_daemon_serves_and_stops_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.csv", &[]);
    let mut child = Command::new(BIN)
        .args(["worker", "--listen", "127.0.0.1:0", "--data", data.to_str().unwrap(), "--family", "logistic"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("announces its address").to_string();

    let mut s = TcpStream::connect(&addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    match exchange(&mut s, &encode_frame(&Message::Request(WorkerRequest::ShardInfo))) {
        Message::Response(WorkerResponse::ShardInfo { count, dim }) => assert_eq!((count, dim), (4000, 3)),
        other => panic!("unexpected {other:?}"),
    }
    let mut bad = b"OGLM\x01\x03".to_vec();
    bad.extend_from_slice(&3u32.to_le_bytes());
    bad.extend_from_slice(&[0, 0, 0]);
    assert!(matches!(exchange(&mut s, &bad), Message::Response(WorkerResponse::Error { .. })));
    assert!(matches!(
        exchange(&mut s, &encode_frame(&Message::Request(WorkerRequest::ShardInfo))),
        Message::Response(WorkerResponse::ShardInfo { .. })
    ));
    drop(s);

    // The remote session reproduces the in-process global fit.
    let remote = json(&run(&["estimate", "--workers", &addr, "--family", "logistic", "--method", "global"]));
    let local = json(&run(&["estimate", "--data", data.to_str().unwrap(), "--family", "logistic", "--method", "global"]));
    // Column names stay with the worker; remote coefficients are labelled b1..bd.
    assert_eq!(coefs(&remote), coefs(&local));

    let pid = child.id().to_string();
    assert!(Command::new("kill").args(["-TERM", &pid]).status().unwrap().success());
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        if let Some(status) = child.try_wait().unwrap() {
            assert_eq!(status.code(), Some(0));
            break;
        }
        assert!(Instant::now() < deadline, "worker ignored SIGTERM");
        std::thread::sleep(Duration::from_millis(50));
    }
}
