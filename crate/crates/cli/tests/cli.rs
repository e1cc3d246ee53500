use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn codemix(dir: &Path, args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_codemix"))
        .args(args)
        .current_dir(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    if let Some(s) = stdin {
        // The child may exit before reading, e.g. on a bad model file.
        let _ = child.stdin.take().unwrap().write_all(s.as_bytes());
    }
    child.wait_with_output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = codemix(dir, args, None);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const TINY: &str = "baseline_epochs = 1\nconv1d_epochs = 1\nlm_epochs = 1\nlm_hidden = 8\nsiamese_epochs = 1\npair_subsample = 0.01\n";

fn prepared() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("c.toml"), TINY).unwrap();
    ok(p, &["synth", "--lang", "low-half", "--seed", "1", "--out", "w0.txt"]);
    ok(p, &["synth", "--lang", "high-half", "--seed", "2", "--out", "w1.txt"]);
    ok(p, &["--config", "c.toml", "prepare", "--wordlist0", "w0.txt", "--wordlist1", "w1.txt"]);
    dir
}

#[test]
fn prepare_writes_six_parts_per_language_deterministically() {
    let dir = prepared();
    let p = dir.path();
    let first = std::fs::read(p.join("data/lang1/test.tsv")).unwrap();
    for part in ["train0", "train1", "train2", "train3", "dev", "test"] {
        let text = std::fs::read_to_string(p.join(format!("data/lang0/{part}.tsv"))).unwrap();
        assert_eq!(text.lines().count(), 1000);
        assert!(p.join(format!("data/lang0/{part}.tsv.manifest.json")).exists());
    }
    ok(p, &["--config", "c.toml", "prepare", "--wordlist0", "w0.txt", "--wordlist1", "w1.txt"]);
    assert_eq!(std::fs::read(p.join("data/lang1/test.tsv")).unwrap(), first);
}

#[test]
fn prepare_reports_shortfall() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["synth", "--lang", "low-half", "--count", "5999", "--out", "a.txt"]);
    ok(p, &["synth", "--lang", "high-half", "--out", "b.txt"]);
    let out = codemix(p, &["prepare", "--wordlist0", "a.txt", "--wordlist1", "b.txt"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 short"));
}

#[test]
fn train_ensemble_eval_and_tag() {
    let dir = prepared();
    let p = dir.path();
    let out = codemix(p, &with(&["train", "--method", "augment", "--batch", "0"]), None);
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `augment --batch 0` first"));
    ok(p, &with(&["augment", "--batch", "0"]));
    let mut models = Vec::new();
    for m in ["baseline", "conv1d", "augment", "siamese"] {
        models.push(ok(p, &with(&["train", "--method", m, "--batch", "0"])).trim().to_string());
    }
    let mut args = with(&["ensemble", "--out", "ens.cmx", "--models"]);
    args.extend(models.iter().map(String::as_str));
    let weights = ok(p, &args);
    assert_eq!(weights.lines().count(), 4);

    let mut args = with(&["eval", "--level", "token", "--out", "r.tsv", "--models"]);
    args.extend(models.iter().map(String::as_str));
    args.push("ens.cmx");
    ok(p, &args);
    let tsv = std::fs::read_to_string(p.join("r.tsv")).unwrap();
    let names: Vec<&str> = tsv.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["baseline", "conv1d", "augment", "siamese", "ensemble"]);

    let out = codemix(p, &["tag", "--model", "ens.cmx"], Some("abc\n\nxyz\n42\n"));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("abc\t"));
    assert_eq!(lines[1], "");
    assert_eq!(lines[3], "42\tU");
}

fn with<'a>(rest: &[&'a str]) -> Vec<&'a str> {
    ["--config", "c.toml"].into_iter().chain(rest.iter().copied()).collect()
}

#[test]
fn corrupted_artifacts_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("bad.cmx"), b"CMIXMDL\0\x02\0\0\0").unwrap();
    let out = codemix(p, &["tag", "--model", "bad.cmx"], Some("abc\n"));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("format version 2"));
}

#[test]
fn unknown_config_keys_fail() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "epochs = 3\n").unwrap();
    let out = codemix(dir.path(), &["--config", "c.toml", "augment", "--batch", "0"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochs"));
}
