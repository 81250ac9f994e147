//! Drives the compiled binary end to end: key lifecycle, verdict exit
//! codes, channel replay, oracle spot values, and experiment CSVs.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn prc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prc"))
}

fn run(args: &[&str]) -> Output {
    prc().args(args).output().expect("binary runs")
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = prc()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary spawns");
    child
        .stdin
        .take()
        .expect("stdin piped")
        .write_all(input.as_bytes())
        .expect("stdin accepts");
    child.wait_with_output().expect("binary exits")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write_file(path: &Path, text: &str) {
    std::fs::write(path, text).expect("test file writes");
}

const SUB_PARAMS: &str = r#"{
    "profile": "demo", "n": 2, "p": 0.05, "q": 0.0,
    "family": {"kind": "sparse-parity", "locality": 1},
    "m": 256, "block_len": 1536
}"#;

const IDX_PARAMS: &str = r#"{
    "profile": "demo", "n": 2, "p": 0.1, "q": 0.0,
    "family": {"kind": "sparse-parity", "locality": 1},
    "m": 256, "block_len": 768, "rho": 2
}"#;

/// Agreement threshold sits below m only from m = 512 up at this noise
/// level, so the watermark fixture mirrors the library's demo scale.
const WM_PARAMS: &str = r#"{
    "profile": "demo", "n": 2, "p": 0.05, "q": 0.0,
    "family": {"kind": "sparse-parity", "locality": 1},
    "m": 512, "block_len": 1536, "rho": 2,
    "alpha": 0.05, "sigma_size": 98305, "l_max": 1100
}"#;

const WM_MODEL: &str =
    r#"{"kind": "fixed-length-uniform", "alphabet_size": 98305, "terminal": 0, "length": 1080}"#;

fn keygen(dir: &Path, kind: &str, params: &str, seed: &str, name: &str) -> std::path::PathBuf {
    let params_path = dir.join(format!("{name}.json"));
    write_file(&params_path, params);
    let key_path = dir.join(format!("{name}.key"));
    let out = run(&[
        "keygen",
        "--kind",
        kind,
        "--params",
        params_path.to_str().unwrap(),
        "--seed",
        seed,
        "--out",
        key_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "keygen failed: {}", stderr(&out));
    key_path
}

#[test]
fn keygen_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let a = keygen(dir.path(), "sub", SUB_PARAMS, "7", "a");
    let b = keygen(dir.path(), "sub", SUB_PARAMS, "7", "b");
    let c = keygen(dir.path(), "sub", SUB_PARAMS, "8", "c");
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap());
    assert_ne!(bytes_a, std::fs::read(&c).unwrap());
}

#[test]
fn encode_decode_pipe_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "sub", SUB_PARAMS, "1", "k");
    let enc = run(&["encode", "--key", key.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(code(&enc), 0, "encode failed: {}", stderr(&enc));
    let word = stdout(&enc);

    let dec = run_stdin(&["decode", "--key", key.to_str().unwrap()], &word);
    assert_eq!(
        code(&dec),
        0,
        "expected ACCEPT: {}{}",
        stdout(&dec),
        stderr(&dec)
    );
    let line = stdout(&dec);
    assert!(
        line.starts_with("ACCEPT W="),
        "unexpected verdict line: {line}"
    );
    assert!(
        line.contains("samples=256"),
        "unexpected verdict line: {line}"
    );

    // Same seed, same codeword.
    let enc2 = run(&["encode", "--key", key.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(stdout(&enc2), word);
}

#[test]
fn random_noise_rejects_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "sub", SUB_PARAMS, "2", "k");
    // A fixed unkeyed string; 1536 alternating bits.
    let junk = "01".repeat(768);
    let dec = run_stdin(&["decode", "--key", key.to_str().unwrap()], &junk);
    assert_eq!(code(&dec), 1);
    assert!(stdout(&dec).starts_with("REJECT W="));
}

#[test]
fn wrong_length_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "sub", SUB_PARAMS, "3", "k");
    let dec = run_stdin(&["decode", "--key", key.to_str().unwrap()], "0101");
    assert_eq!(code(&dec), 2, "stderr: {}", stderr(&dec));
}

#[test]
fn key_kinds_are_checked_per_command() {
    let dir = tempfile::tempdir().unwrap();
    let sub = keygen(dir.path(), "sub", SUB_PARAMS, "4", "s");
    let wm = keygen(dir.path(), "wm", WM_PARAMS, "4", "w");

    let detect = run_stdin(&["detect", "--key", sub.to_str().unwrap()], "0101");
    assert_eq!(code(&detect), 2);

    let decode = run_stdin(&["decode", "--key", wm.to_str().unwrap()], "0101");
    assert_eq!(code(&decode), 2);

    let encode = run(&["encode", "--key", wm.to_str().unwrap()]);
    assert_eq!(code(&encode), 2);
}

#[test]
fn idx_encode_decode_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "idx", IDX_PARAMS, "5", "k");
    let enc = run(&["encode", "--key", key.to_str().unwrap(), "--seed", "6"]);
    assert_eq!(code(&enc), 0, "encode failed: {}", stderr(&enc));
    let dec = run_stdin(&["decode", "--key", key.to_str().unwrap()], &stdout(&enc));
    assert_eq!(
        code(&dec),
        0,
        "expected ACCEPT: {}{}",
        stdout(&dec),
        stderr(&dec)
    );
}

#[test]
fn attack_at_rate_zero_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let chan = dir.path().join("chan.json");
    write_file(
        &chan,
        r#"{"kind": "substitution", "rate": 0.0,
            "strategy": {"type": "iid-random"},
            "seed": {"value": 11, "label": ""}}"#,
    );
    let out = run_stdin(
        &[
            "attack",
            "--channel",
            chan.to_str().unwrap(),
            "--alphabet",
            "4",
        ],
        "0 1 2 3 2 1 0",
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out), "0 1 2 3 2 1 0\n");
}

#[test]
fn scripted_attack_replays_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let chan = dir.path().join("chan.json");
    write_file(
        &chan,
        r#"{"kind": "edit", "rate": 0.75,
            "strategy": {"type": "custom-script", "script": "D 0\nI 2 3\nS 0 3"},
            "seed": {"value": 0, "label": ""}}"#,
    );
    // [0 1 2 1]: delete 0 -> [1 2 1], insert 3 at 2 -> [1 2 3 1],
    // substitute position 0 -> [3 2 3 1].
    let out = run_stdin(
        &[
            "attack",
            "--channel",
            chan.to_str().unwrap(),
            "--alphabet",
            "4",
        ],
        "0 1 2 1",
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out), "3 2 3 1\n");

    // One more op than the budget allows must be refused.
    let over = dir.path().join("over.json");
    write_file(
        &over,
        r#"{"kind": "edit", "rate": 0.5,
            "strategy": {"type": "custom-script", "script": "D 0\nI 2 3\nS 0 3"},
            "seed": {"value": 0, "label": ""}}"#,
    );
    let refused = run_stdin(
        &[
            "attack",
            "--channel",
            over.to_str().unwrap(),
            "--alphabet",
            "4",
        ],
        "0 1 2 1",
    );
    assert_eq!(code(&refused), 2);
    assert!(stderr(&refused).contains("budget"));
}

#[test]
fn watermark_sample_detects_and_junk_does_not() {
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "wm", WM_PARAMS, "9", "k");
    let model = dir.path().join("model.json");
    write_file(&model, WM_MODEL);

    let toks = dir.path().join("toks.txt");
    let wat = run(&[
        "wat",
        "--key",
        key.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--seed",
        "12",
        "--out",
        toks.to_str().unwrap(),
    ]);
    assert_eq!(code(&wat), 0, "wat failed: {}", stderr(&wat));

    let hit = run(&[
        "detect",
        "--key",
        key.to_str().unwrap(),
        "--input",
        toks.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&hit),
        0,
        "expected DETECTED: {}{}",
        stdout(&hit),
        stderr(&hit)
    );
    assert!(
        stdout(&hit).starts_with("DETECTED window=["),
        "verdict: {}",
        stdout(&hit)
    );

    // Unrelated tokens over the same alphabet.
    let junk: Vec<String> = (0..1080u32)
        .map(|i| ((i * 7919) % 98305).to_string())
        .collect();
    let miss = run_stdin(&["detect", "--key", key.to_str().unwrap()], &junk.join(" "));
    assert_eq!(code(&miss), 1, "stderr: {}", stderr(&miss));
    assert_eq!(stdout(&miss), "NOT-DETECTED\n");
}

#[test]
fn oracle_values_match_closed_forms() {
    // 5 marked among 10, 2 draws: TV distance is exactly 1/18.
    let tvd = run(&["oracle", "tvd", "10", "5", "2"]);
    assert_eq!(code(&tvd), 0);
    let got: f64 = stdout(&tvd).trim().parse().unwrap();
    assert!((got - 1.0 / 18.0).abs() < 1e-12, "tvd printed {got}");

    // Two-bit parity: both routes give 2 delta (1 - delta).
    let brute = run(&["oracle", "ns-brute", "0110", "0.1"]);
    let fourier = run(&["oracle", "ns-fourier", "0110", "0.1"]);
    let nb: f64 = stdout(&brute).trim().parse().unwrap();
    let nf: f64 = stdout(&fourier).trim().parse().unwrap();
    assert!((nb - 0.18).abs() < 1e-12, "brute printed {nb}");
    assert!((nf - 0.18).abs() < 1e-12, "fourier printed {nf}");

    // Length-1 strings over [2] come out uniform.
    let law = run(&["oracle", "pd-law", "2", "1"]);
    assert_eq!(stdout(&law), "0 0.5\n1 0.5\n");

    // One non-uniform spot value, conditioned on y0 = {0}: drawing
    // y1 = 0 keeps it, drawing y1 = 1 maps back to 0, so the mass on
    // "0" is 1 (the perturbation restores the conditioned set).
    let given = run(&["oracle", "pd-law", "2", "1", "--y0", "1"]);
    assert_eq!(stdout(&given), "0 1\n1 0\n");
}

#[test]
fn embed_marginal_oracle_reads_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("embed.json");
    write_file(
        &spec,
        r#"{"p": [0.5, 0.25, 0.25], "phi": [0, 1, 1], "k_prc": 2}"#,
    );
    let out = run(&["oracle", "embed-marginal", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let mut total = 0.0;
    for (i, line) in stdout(&out).lines().enumerate() {
        let (tok, p) = line.split_once(' ').expect("token probability pairs");
        assert_eq!(tok.parse::<usize>().unwrap(), i);
        let p: f64 = p.parse().unwrap();
        let expected = [0.5, 0.25, 0.25][i];
        assert!((p - expected).abs() < 1e-12, "token {i} printed {p}");
        total += p;
    }
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn keygen_size_guard_gates_large_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let over = r#"{
        "profile": "demo", "n": 2, "p": 0.05, "q": 0.0,
        "family": {"kind": "sparse-parity", "locality": 1},
        "m": 128, "block_len": 16777217
    }"#;
    let params = dir.path().join("over.json");
    write_file(&params, over);
    let out_path = dir.path().join("over.key");
    let refused = run(&[
        "keygen",
        "--kind",
        "sub",
        "--params",
        params.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&refused), 2);
    assert!(
        stderr(&refused).contains("--allow-large"),
        "stderr: {}",
        stderr(&refused)
    );
    assert!(!out_path.exists());

    // At the limit exactly, no flag needed.
    let at = r#"{
        "profile": "demo", "n": 2, "p": 0.05, "q": 0.0,
        "family": {"kind": "sparse-parity", "locality": 1},
        "m": 128, "block_len": 16777216
    }"#;
    let params_at = dir.path().join("at.json");
    write_file(&params_at, at);
    let at_path = dir.path().join("at.key");
    let ok = run(&[
        "keygen",
        "--kind",
        "sub",
        "--params",
        params_at.to_str().unwrap(),
        "--out",
        at_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&ok), 0, "stderr: {}", stderr(&ok));
    assert!(at_path.exists());
}

#[test]
fn experiment_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    write_file(
        &config,
        r#"{
            "kind": "sub",
            "keygen": {
                "profile": "demo", "n": 2, "p": 0.05, "q": 0.0,
                "family": {"kind": "sparse-parity", "locality": 1},
                "m": 256, "block_len": 1536
            },
            "rates": [0.0, 0.02],
            "trials": 20
        }"#,
    );
    let csv_path = dir.path().join("sweep.csv");
    let first = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
        "--seed",
        "21",
    ]);
    assert_eq!(code(&first), 0, "stderr: {}", stderr(&first));
    let csv = std::fs::read_to_string(&csv_path).unwrap();

    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config-hash: "));
    assert_eq!(
        lines.next().unwrap(),
        "rate,alpha,n,trials,detect_rate,fp_rate,mean_stat,wall_ms"
    );
    let clean: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(clean[0], "0");
    assert_eq!(clean[3], "20");
    let detect_rate: f64 = clean[4].parse().unwrap();
    assert!(detect_rate >= 0.95, "noiseless detect rate {detect_rate}");
    let fp_rate: f64 = clean[5].parse().unwrap();
    assert_eq!(fp_rate, 0.0);
    assert!(lines.next().is_some(), "second rate row missing");
    assert!(lines.next().is_none());

    // Rerun into a fresh file: byte-identical.
    let again_path = dir.path().join("sweep2.csv");
    let again = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        again_path.to_str().unwrap(),
        "--seed",
        "21",
    ]);
    assert_eq!(code(&again), 0);
    assert_eq!(csv, std::fs::read_to_string(&again_path).unwrap());
}

#[test]
fn experiment_runs_the_watermark_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("wm-exp.json");
    // Tiny scale: the agreement threshold exceeds m here, so nothing
    // can be detected; the row still exercises sampling, the channel,
    // the scanner, and the false-positive draw.
    write_file(
        &config,
        r#"{
            "kind": "wm",
            "keygen": {
                "profile": "demo", "n": 2, "p": 0.05, "q": 0.0,
                "family": {"kind": "sparse-parity", "locality": 1},
                "m": 8, "block_len": 24, "rho": 2,
                "alpha": 0.125, "sigma_size": 97, "l_max": 40
            },
            "model": {"kind": "fixed-length-uniform", "alphabet_size": 97, "terminal": 0, "length": 30},
            "rates": [0.0],
            "trials": 3
        }"#,
    );
    let csv_path = dir.path().join("wm.csv");
    let out = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let row: Vec<&str> = csv
        .lines()
        .nth(2)
        .expect("one data row")
        .split(',')
        .collect();
    assert_eq!(row[1], "0.125", "alpha column: {csv}");
    assert_eq!(row[2], "17", "code length column: {csv}");
}
