use serde_json::Value;
use sha2::Digest;
use std::path::Path;
use std::process::{Command, Output};

fn stochnewton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochnewton")).args(args).env_remove("STOCHNEWTON_SEED").output().expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn json_stderr(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn find_roots_reports_every_root() {
    let out = stochnewton(&["--json", "--seed", "1", "find-roots", "--poly", "z^3 - 2z + 2"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    assert_eq!(doc["schema"], "stochnewton.find-roots/v1");
    assert_eq!(doc["manifest"]["schema"], "stochnewton.manifest/v1");
    assert_eq!(doc["manifest"]["seed"], 1);
    let roots = doc["result"]["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 3);
}

#[test]
fn bad_arguments_exit_one_with_error_document() {
    for args in [
        &["find-roots", "--poly", "1 + z^2 +"][..],
        &["no-such-command"][..],
        &["find-roots", "--poly", "z^2 + 1", "--radius", "1.5"][..],
        &["basin-map", "--poly", "z^2 - 1", "--res", "0"][..],
    ] {
        let out = stochnewton(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = json_stderr(&out);
        assert_eq!(err["schema"], "stochnewton.error/v1");
        assert_eq!(err["exit_code"], 1);
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn algorithmic_failure_exits_two() {
    let measure = r#"{"kind":"finite","atoms":[[[0.5,0],0.5],[[2,0],0.5]]}"#;
    let out = stochnewton(&["classify", "--measure", measure]);
    assert_eq!(out.status.code(), Some(2));
    let err = json_stderr(&out);
    assert_eq!(err["error"]["kind"], "algorithmic_failure");
}

#[test]
fn classify_quadratic_example() {
    let measure = r#"{"kind":"finite","atoms":[[[0.5,0],0.5],[[6,0],0.5]]}"#;
    let out = stochnewton(&["--json", "classify", "--measure", measure]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    assert_eq!(doc["result"]["kind"], "Ic");
    let chi = doc["result"]["chi"]["value"]["finite"].as_f64().unwrap();
    assert!((chi - 0.5 * 3f64.ln()).abs() < 1e-12);
}

#[test]
fn seeded_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str, seed: &str| {
        let (r, c, p) =
            (dir.path().join(format!("{tag}.json")), dir.path().join(format!("{tag}.csv")), dir.path().join(format!("{tag}.png")));
        let out = stochnewton(&[
            "--seed",
            seed,
            "--out",
            path(&r),
            "basin-map",
            "--poly",
            "z^3 - 1",
            "--res",
            "12",
            "--runs",
            "6",
            "--csv",
            path(&c),
            "--png",
            path(&p),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(r).unwrap(), std::fs::read(c).unwrap(), std::fs::read(p).unwrap())
    };
    let a = run("a", "9");
    let b = run("b", "9");
    let c = run("c", "10");
    // file paths differ between runs, so compare the grid rather than the whole document
    let grid = |bytes: &[u8]| serde_json::from_slice::<Value>(bytes).unwrap()["result"]["grid"].clone();
    assert_eq!(grid(&a.0), grid(&b.0));
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    assert_ne!(a.1, c.1);
    assert_eq!(&c.2[..8], b"\x89PNG\r\n\x1a\n");
}

#[test]
fn seed_can_come_from_environment() {
    let with_env = Command::new(env!("CARGO_BIN_EXE_stochnewton"))
        .args(["--json", "trap-demo", "--runs", "50"])
        .env("STOCHNEWTON_SEED", "77")
        .output()
        .unwrap();
    let with_flag = stochnewton(&["--json", "--seed", "77", "trap-demo", "--runs", "50"]);
    assert_eq!(json_stdout(&with_env)["result"], json_stdout(&with_flag)["result"]);
    assert_eq!(json_stdout(&with_env)["manifest"]["seed"], 77);
}

#[test]
fn manifest_hashes_outputs_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let (out1, man) = (dir.path().join("r1.json"), dir.path().join("m.json"));
    let first =
        stochnewton(&["--seed", "4", "--out", path(&out1), "--manifest", path(&man), "trap-demo", "--runs", "40", "--radius", "0.6"]);
    assert_eq!(first.status.code(), Some(0));
    let manifest: Value = serde_json::from_slice(&std::fs::read(&man).unwrap()).unwrap();
    assert_eq!(manifest["command"], "trap-demo");
    let bytes = std::fs::read(&out1).unwrap();
    let record = manifest["outputs"].as_array().unwrap().iter().find(|o| o["name"] == "result").unwrap();
    assert_eq!(record["sha256"], hex::encode(sha2::Sha256::digest(&bytes)));

    // seed and measure come back from the manifest's config
    let out2 = dir.path().join("r2.json");
    let replay = stochnewton(&["--config", path(&man), "--out", path(&out2), "trap-demo", "--runs", "40"]);
    assert_eq!(replay.status.code(), Some(0), "{}", String::from_utf8_lossy(&replay.stderr));
    assert_eq!(bytes, std::fs::read(&out2).unwrap());
}

#[test]
fn sequential_flag_matches_parallel() {
    let args = ["--json", "--seed", "2", "basin-map", "--poly", "z^2 - 1", "--res", "6", "--runs", "4"];
    let par = stochnewton(&args);
    let mut seq_args = vec!["--sequential"];
    seq_args.extend_from_slice(&args);
    let seq = stochnewton(&seq_args);
    assert_eq!(json_stdout(&par)["result"], json_stdout(&seq)["result"]);
}

#[test]
fn lyapunov_and_markov_commands() {
    let out = stochnewton(&["--json", "lyapunov", "--poly", "z^2 - 1", "--point", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    assert_eq!(doc["schema"], "stochnewton.lyapunov/v1");
    assert_eq!(doc["result"]["method"], "closed_form");
    assert_eq!(doc["result"]["classification"]["classification"], "Attracting");

    let measure = r#"{"kind":"finite","atoms":[[[0.3,0],1,1]]}"#;
    let out = stochnewton(&["--json", "markov", "--family", "rotation", "--n", "2", "--measure", measure]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"period\": 2"));
}
