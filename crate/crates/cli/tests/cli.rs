use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CRM: &str =
    r#"{"design":"crm","label":"crm_a","skeleton":[0.05,0.12,0.25,0.4,0.55,0.7],"prior":{"mu":0.0,"sigma":0.5}}"#;
const KINROW: &str = r#"{"design":"kinrow","k":2}"#;

fn dosefind(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dosefind")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run_fixed(out: &Path, jobs: &str) -> Output {
    dosefind(&[
        "--jobs",
        jobs,
        "run",
        "--seed",
        "11",
        "--design",
        CRM,
        "--design",
        KINROW,
        "--replicates",
        "20",
        "--cohorts",
        "8",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn run_writes_all_outputs_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = run_fixed(&a, "1");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run_fixed(&b, "3")), 0);
    for name in ["report.json", "runs.csv", "summary.csv", "hist_crm_a.csv", "hist_kinrow.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} depends on thread count");
    }
    let runs = String::from_utf8(read(&a, "runs.csv")).unwrap();
    // header plus 2 designs x 6 scenarios x 20 replicates
    assert_eq!(runs.lines().count(), 1 + 2 * 6 * 20);
    let summary = String::from_utf8(read(&a, "summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("crm_a,120,"));
}

#[test]
fn report_reproduces_summary() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run_fixed(tmp.path(), "1")), 0);
    let report = tmp.path().join("report.json");
    let o = dosefind(&["report", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(o.stdout, read(tmp.path(), "summary.csv"));
    let o = dosefind(&["report", report.to_str().unwrap(), "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
replicates = 5
cohorts = 6
format = "json"

[[designs]]
design = "group_ud"
k = 2
a = 0
b = 1
"#,
    )
    .unwrap();
    let out = tmp.path().join("o");
    let o = dosefind(&[
        "run",
        "--seed",
        "2",
        "--config",
        cfg.to_str().unwrap(),
        "--replicates",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let runs: serde_json::Value = serde_json::from_slice(&read(&out, "runs.json")).unwrap();
    assert_eq!(runs.as_array().unwrap().len(), 6 * 3);
    let report: serde_json::Value = serde_json::from_slice(&read(&out, "report.json")).unwrap();
    assert_eq!(report["cohorts"], 6);
    assert!(out.join("summary.json").exists());
}

#[test]
fn generated_ensemble_feeds_run() {
    let tmp = TempDir::new().unwrap();
    let ens = tmp.path().join("ens.jsonl");
    let gen = |p: &Path| {
        dosefind(&[
            "gen-scenarios",
            "--seed",
            "5",
            "--quotas",
            "2,2,2,2",
            "--post-filter",
            "--out",
            p.to_str().unwrap(),
        ])
    };
    assert_eq!(code(&gen(&ens)), 0);
    let again = tmp.path().join("again.jsonl");
    assert_eq!(code(&gen(&again)), 0);
    assert_eq!(fs::read(&ens).unwrap(), fs::read(&again).unwrap());
    assert_eq!(fs::read_to_string(&ens).unwrap().lines().count(), 1 + 8);

    let out = tmp.path().join("o");
    let o = dosefind(&[
        "run",
        "--seed",
        "5",
        "--scenarios",
        ens.to_str().unwrap(),
        "--design",
        KINROW,
        "--replicates",
        "2",
        "--cohorts",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let runs = String::from_utf8(read(&out, "runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 8 * 2);
}

#[test]
fn zero_quotas_and_zero_replicates() {
    let tmp = TempDir::new().unwrap();
    let ens = tmp.path().join("empty.jsonl");
    assert_eq!(
        code(&dosefind(&["gen-scenarios", "--seed", "1", "--quotas", "0,0,0,0", "--out", ens.to_str().unwrap()])),
        0
    );
    assert_eq!(fs::read_to_string(&ens).unwrap().lines().count(), 1);

    let out = tmp.path().join("o");
    let o = dosefind(&[
        "run",
        "--seed",
        "1",
        "--scenarios",
        ens.to_str().unwrap(),
        "--design",
        KINROW,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&read(&out, "report.json")).unwrap();
    assert_eq!(report["scenarios"], 0);
    assert!(report["designs"][0]["overall"].is_null());
    assert_eq!(String::from_utf8(read(&out, "runs.csv")).unwrap().lines().count(), 1);
}

#[test]
fn permute_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let go = |d: &Path| {
        dosefind(&[
            "permute",
            "--seed",
            "9",
            "--design",
            CRM,
            "--scenario",
            "normal",
            "--replicates",
            "30",
            "--out",
            d.to_str().unwrap(),
        ])
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = go(&a);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&go(&b)), 0);
    assert_eq!(read(&a, "runs.csv"), read(&b, "runs.csv"));
    assert_eq!(String::from_utf8(read(&a, "runs.csv")).unwrap().lines().count(), 31);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    // missing required seed
    assert_eq!(code(&dosefind(&["run", "--design", KINROW])), 2);
    assert_eq!(code(&dosefind(&["--help"])), 0);
    // no designs
    assert_eq!(code(&dosefind(&["run", "--seed", "1", "--out", out])), 2);
    // malformed design
    assert_eq!(code(&dosefind(&["run", "--seed", "1", "--design", r#"{"design":"kinrow"}"#, "--out", out])), 2);
    // skeleton length does not match the six calibrated levels
    let short = r#"{"design":"crm","skeleton":[0.1,0.3],"prior":{"mu":0,"sigma":1}}"#;
    assert_eq!(code(&dosefind(&["run", "--seed", "1", "--design", short, "--out", out])), 2);
    // missing scenario file
    let missing = tmp.path().join("nope.jsonl");
    assert_eq!(
        code(&dosefind(&[
            "run",
            "--seed",
            "1",
            "--design",
            KINROW,
            "--scenarios",
            missing.to_str().unwrap(),
            "--out",
            out
        ])),
        4
    );

    // step bounds that almost no candidate meets, with a tiny retry budget
    let gen = tmp.path().join("gen.json");
    let mut cfg: serde_json::Value = serde_json::to_value(dosefind::scenarios::SceneConfig::new(4)).unwrap();
    cfg["minstep"] = 0.2.into();
    cfg["maxstep"] = 0.2001.into();
    cfg["retry_budget"] = 2.into();
    fs::write(&gen, cfg.to_string()).unwrap();
    let o = dosefind(&[
        "gen-scenarios",
        "--seed",
        "3",
        "--quotas",
        "1,1,1,1",
        "--generator",
        gen.to_str().unwrap(),
        "--out",
        tmp.path().join("e.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
