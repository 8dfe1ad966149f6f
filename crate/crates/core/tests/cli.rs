//! End-to-end runs of the command-line tool: golden outputs, seeded
//! reproducibility and exit codes.
//!
//! Set `PLASTICITY_BLESS=1` to rewrite the files under `tests/golden`.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plasticity"))
}

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn check_golden(name: &str, actual: &[u8]) {
    let path = golden(name);
    if std::env::var_os("PLASTICITY_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let want = std::fs::read(&path).unwrap_or_else(|_| panic!("missing golden {}", path.display()));
    assert!(
        want == actual,
        "{name} differs from golden:\n--- want\n{}\n--- got\n{}",
        String::from_utf8_lossy(&want),
        String::from_utf8_lossy(actual)
    );
}

/// Runs `args` with `--out` pointing into a temp dir (plus any extra output
/// files named in `extra`) and returns the bytes of every output.
fn outputs(args: &[&str], extra: &[(&str, &str)]) -> Vec<Vec<u8>> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cmd = bin();
    cmd.args(args).arg("--out").arg(&out);
    for (flag, file) in extra {
        cmd.arg(flag).arg(dir.path().join(file));
    }
    let o = cmd.output().unwrap();
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    let mut files = vec![std::fs::read(&out).unwrap()];
    for (_, file) in extra {
        files.push(std::fs::read(dir.path().join(file)).unwrap());
    }
    files
}

struct Case {
    golden: &'static [&'static str],
    args: Vec<String>,
    extra: &'static [(&'static str, &'static str)],
}

fn cases() -> Vec<Case> {
    let m = |n: &str| model(n).display().to_string();
    let a = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    vec![
        Case {
            golden: &["validate_two_resident.json"],
            args: [a(&["validate", "--config"]), vec![m("two_resident.json")]].concat(),
            extra: &[],
        },
        Case {
            golden: &["classes_two_resident.json"],
            args: [a(&["classes", "--config"]), vec![m("two_resident.json")]].concat(),
            extra: &[],
        },
        Case {
            golden: &["micro_two_resident.csv"],
            args: [
                a(&["micro", "--config"]),
                vec![m("two_resident.json")],
                a(&["--seed", "7", "--t-end", "2", "--sample-dt", "0.5"]),
            ]
            .concat(),
            extra: &[],
        },
        Case {
            golden: &["lvs_example_a.csv", "lvs_example_a.equilibrium.json"],
            args: [
                a(&["lvs", "--config"]),
                vec![m("example_a.json")],
                a(&["--t-end", "5", "--sample-dt", "1"]),
            ]
            .concat(),
            extra: &[("--report", "report.json")],
        },
        Case {
            golden: &["fitness_example_a.json"],
            args: [a(&["fitness", "--config"]), vec![m("example_a.json")], a(&["--mutant", "gt,pt1"])].concat(),
            extra: &[],
        },
        Case {
            golden: &["qvec_example_b.json"],
            args: [a(&["qvec", "--config"]), vec![m("example_b.json")]].concat(),
            extra: &[],
        },
        Case {
            golden: &["pesp_example_a.jsonl"],
            args: [
                a(&["pesp", "--config"]),
                vec![m("example_a_pesp.json")],
                a(&["--seed", "3", "--t-end", "20"]),
            ]
            .concat(),
            extra: &[],
        },
        Case {
            golden: &["mc_invasion_example_a.json"],
            args: [
                a(&["mc-invasion", "--config"]),
                vec![m("example_a.json")],
                a(&["--mutant", "gt,pt1", "--replicates", "100", "--seed", "1"]),
            ]
            .concat(),
            extra: &[],
        },
    ]
}

#[test]
fn outputs_match_goldens_and_are_reproducible() {
    for case in cases() {
        let args: Vec<&str> = case.args.iter().map(String::as_str).collect();
        let first = outputs(&args, case.extra);
        let second = outputs(&args, case.extra);
        assert_eq!(first, second, "{args:?} is not byte-reproducible");
        for (name, bytes) in case.golden.iter().zip(&first) {
            check_golden(name, bytes);
        }
    }
}

#[test]
fn stdout_matches_out_file() {
    let cfg = model("example_a.json");
    let o = run(&["fitness", "--config", cfg.to_str().unwrap(), "--mutant", "gt,pt1"]);
    assert!(o.status.success());
    let file = outputs(&["fitness", "--config", cfg.to_str().unwrap(), "--mutant", "gt,pt1"], &[]);
    assert_eq!(o.stdout, file[0]);
}

#[test]
fn fitness_reports_example_a_values() {
    let cfg = model("example_a.json");
    let o = run(&["fitness", "--config", cfg.to_str().unwrap(), "--mutant", "gt,pt1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["lambda_max"].as_f64().unwrap() - 1.280).abs() < 2e-3);
    assert!((v["invasion_probability"].as_f64().unwrap() - 0.199).abs() < 2e-3);
}

#[test]
fn empty_population_gives_one_absorbed_row() {
    let cfg = model("empty_init.json");
    let o = run(&["micro", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with("time,"));
    assert!(lines[1].starts_with("0,"));
    assert_eq!(lines[2], "# absorbed,0");
}

fn write_variant(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(model("two_resident.json")).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join("variant.json");
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let two_resident = model("two_resident.json");
    let t1 = two_resident.to_str().unwrap();

    // structural violation: negative birth rate
    let bad = write_variant(dir.path(), |v| v["birth"]["p1"] = serde_json::json!(-1.0));
    let o = run(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["valid"], false);
    let o = run(&["fitness", "--config", bad.to_str().unwrap(), "--mutant", "gt,pt1"]);
    assert_eq!(o.status.code(), Some(2));

    // one-way switch leaves a transient phenotype
    let transient = write_variant(dir.path(), |v| v["switch_natural"]["g"]["p2,p1"] = serde_json::json!(0.0));
    let tr = transient.to_str().unwrap();
    assert_eq!(run(&["validate", "--config", tr]).status.code(), Some(2));
    assert_eq!(run(&["fitness", "--config", tr, "--mutant", "gt,pt1"]).status.code(), Some(2));
    // `classes` still prints the partition, flagging the open class
    let o = run(&["classes", "--config", tr]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["g"][0]["closed"], false);

    // residents are the initial traits outside the mutant's class, so
    // querying a resident class reports the third-step matrix instead
    let o = run(&["fitness", "--config", t1, "--mutant", "g,p1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["lambda_max"].as_f64().unwrap() < 0.0);
    assert_eq!(v["invasion_probability"], 0.0);

    // unknown trait
    let o = run(&["fitness", "--config", t1, "--mutant", "zz,p1"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[fitness]"));

    // unreachable tolerance: no equilibrium in time
    let out = dir.path().join("lvs.csv");
    let o = run(&["lvs", "--config", t1, "--tol", "1e-300", "--t-end", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.exists(), "trajectory is written before the failure");

    // unknown key, unreadable file, bad flag
    let unknown = write_variant(dir.path(), |v| v["colour"] = serde_json::json!("red"));
    let o = run(&["validate", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    assert_eq!(run(&["validate", "--config", "/nonexistent/model.json"]).status.code(), Some(1));
    assert_eq!(run(&["micro", "--config", t1, "--seed", "minus-one"]).status.code(), Some(1));
    assert_eq!(run(&["validate", "--config", t1]).status.code(), Some(0));
}
