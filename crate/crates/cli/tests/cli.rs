use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_defurnish"));
    c.env_remove("DEFURNISH_BACKEND_URL");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn text(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "[context]\nworking_height = 64\npad = 32\n\n[blend]\nr_near = 6.0\nr_far = 16.0\nfeather_sigma = 2.0\n";

struct Fixture {
    dir: tempfile::TempDir,
    input: PathBuf,
    mask: PathBuf,
    config: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let out = run(&["synth-data", "--out", text(&ds), "--count", "2", "--width", "512", "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = dir.path().join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    Fixture {
        input: ds.join("input/eval_00000.png"),
        mask: ds.join("mask/eval_00000.png"),
        config,
        dir,
    }
}

#[test]
fn prompts_list_prints_32_lines() {
    let out = run(&["prompts", "list"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 32);
    assert_eq!(lines[0], "empty room");
}

#[test]
fn defurnish_writes_image_and_report() {
    let f = fixture();
    let out_png = f.dir.path().join("out.png");
    let report = f.dir.path().join("report.json");
    let out = run(&[
        "defurnish", "--input", text(&f.input), "--mask", text(&f.mask), "--config", text(&f.config),
        "--endpoint", "mock:identity", "--seed", "5", "--out", text(&out_png), "--report", text(&report),
        "--blend.tau", "0.1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = image::open(&out_png).unwrap();
    assert_eq!((img.width(), img.height()), (512, 256));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["backend_name"], "mock-identity");
    assert_eq!(json["output_path"], text(&out_png));
    assert_eq!(json["stages"].as_array().unwrap().len(), 7);
}

#[test]
fn exit_codes_follow_error_class() {
    let f = fixture();
    let out_png = f.dir.path().join("out.png");
    let base = ["defurnish", "--input", text(&f.input), "--mask", text(&f.mask), "--config", text(&f.config), "--out", text(&out_png)];

    let bad_param = bin().args(base).args(["--endpoint", "mock:identity", "--set", "blend.tau=0"]).output().unwrap();
    assert_eq!(bad_param.status.code(), Some(2));

    let missing = run(&["defurnish", "--input", "/nonexistent.png", "--mask", text(&f.mask), "--endpoint", "mock:identity", "--out", text(&out_png)]);
    assert_eq!(missing.status.code(), Some(4));

    let dead = bin()
        .args(base)
        .args(["--endpoint", "http://127.0.0.1:1", "--set", "backend.retries=0"])
        .output()
        .unwrap();
    assert_eq!(dead.status.code(), Some(3), "{}", String::from_utf8_lossy(&dead.stderr));

    let oracle_dir = f.dir.path().join("targets");
    std::fs::create_dir(&oracle_dir).unwrap();
    let mode = format!("mock:oracle:{}", oracle_dir.display());
    let no_target = bin().args(base).args(["--endpoint", &mode]).output().unwrap();
    assert_eq!(no_target.status.code(), Some(3));

    let usage = run(&["defurnish", "--input", text(&f.input)]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn eval_csv_is_deterministic() {
    let f = fixture();
    let manifest = f.input.parent().unwrap().parent().unwrap().join("manifest.ndjson");
    let args = [
        "eval", "--manifest", text(&manifest), "--config", text(&f.config),
        "--methods", "oracle,identity,oracle-pipeline",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let csv = String::from_utf8(a.stdout).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("method,case_id,psnr_db,ssim,masked_psnr_db"));

    let bad = run(&["eval", "--manifest", text(&manifest), "--methods", "bogus"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn serve_mock_answers_the_pipeline() {
    let f = fixture();
    let mut child = bin()
        .args(["serve-mock", "--mode", "constant:200", "--bind", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().rsplit(' ').next().unwrap().to_string();
    assert!(url.starts_with("http://127.0.0.1:"), "{line}");

    let out_png = f.dir.path().join("served.png");
    let out = bin()
        .args(["defurnish", "--input", text(&f.input), "--mask", text(&f.mask), "--config", text(&f.config), "--out", text(&out_png)])
        .env("DEFURNISH_BACKEND_URL", &url)
        .output()
        .unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_png.exists());
}
