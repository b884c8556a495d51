//! End-to-end runs of the `fvk` binary.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;

fn fvk(dir: &Path, args: &[&str]) -> (i32, HashMap<String, String>) {
    let out = Command::new(env!("CARGO_BIN_EXE_fvk"))
        .current_dir(dir)
        .args(["--out", "run"])
        .args(args)
        .output()
        .unwrap();
    let report = String::from_utf8(out.stdout).unwrap();
    let kv = report
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    (out.status.code().unwrap(), kv)
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn kernel_writes_certificate_and_artifacts() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "t.sexp",
        "(union (leaf v) (leaf v) (leaf v) (leaf v) (leaf v))",
    );
    let (code, r) = fvk(d.path(), &["kernel", "--tree", "t.sexp", "--protect", "1"]);
    assert_eq!(code, 0);
    assert_eq!(r["schema"], "1");
    assert_eq!(r["size.before"], "5");
    assert_eq!(r["size.after"], "3");
    assert_eq!(r["cert.oracle"], "equivalent");
    for f in ["report.txt", "config.toml", "kernel.sexp", "kernel.str"] {
        assert!(d.path().join("run").join(f).exists(), "{f}");
    }
}

#[test]
fn modelcheck_agrees_with_direct_evaluation() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "t.sexp",
        "(join (leaf v) (union (leaf v) (leaf v) (leaf v)))",
    );
    write(d.path(), "phi.fo", "exists x. forall y. (~y=x -> E(x,y))");
    let (code, r) = fvk(
        d.path(),
        &["modelcheck", "--tree", "t.sexp", "--formula", "phi.fo"],
    );
    assert_eq!(code, 0);
    assert_eq!(r["value"], "true");
    assert_eq!(r["direct_agrees"], "true");
}

#[test]
fn psc_of_at_least_two_vertices() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "two.fo", "exists x. exists y. ~x=y");
    let (code, r) = fvk(
        d.path(),
        &[
            "psc-check",
            "--formula",
            "two.fo",
            "--k",
            "2",
            "--max-size",
            "4",
            "--simple",
            "--duality",
        ],
    );
    assert_eq!(code, 0);
    assert_eq!(r["verdict"], "TRUE-UP-TO-4");
    assert_eq!(r["duality.agree"], "true");
    let (_, r) = fvk(
        d.path(),
        &[
            "psc-check",
            "--formula",
            "two.fo",
            "--k",
            "1",
            "--max-size",
            "4",
            "--simple",
        ],
    );
    assert_eq!(r["verdict"], "FALSE");
}

#[test]
fn scale_reaches_interval() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "t.sexp",
        "(union (leaf v) (leaf v) (leaf v) (leaf v))",
    );
    let (code, r) = fvk(
        d.path(),
        &[
            "scale", "--tree", "t.sexp", "--rank", "1", "--min", "9", "--max", "10",
        ],
    );
    assert_eq!(code, 0);
    let size: usize = r["size.after"].parse().unwrap();
    assert!((9..=10).contains(&size));
}

#[test]
fn config_is_echoed_and_validated() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "t.sexp", "(union (leaf v) (leaf v))");
    write(d.path(), "good.toml", "fo_cap = 12\n");
    write(d.path(), "bad.toml", "fo_cap = 0\n");
    let (code, _) = fvk(
        d.path(),
        &["--config", "good.toml", "eval", "--tree", "t.sexp"],
    );
    assert_eq!(code, 0);
    let echoed = std::fs::read_to_string(d.path().join("run/config.toml")).unwrap();
    assert!(echoed.contains("fo_cap = 12"), "{echoed}");
    let (code, _) = fvk(
        d.path(),
        &["--config", "bad.toml", "eval", "--tree", "t.sexp"],
    );
    assert_ne!(code, 0);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let (code, _) = fvk(d.path(), &["eval", "--tree", "missing.sexp"]);
    assert_eq!(code, 2);
    let (code, _) = fvk(d.path(), &["no-such-command"]);
    assert_eq!(code, 2);
    // 12 points exceed the default MSO oracle cap
    write(
        d.path(),
        "big.sexp",
        &format!("(union{})", " (leaf v)".repeat(12)),
    );
    let (code, r) = fvk(d.path(), &["eval", "--tree", "big.sexp"]);
    assert_eq!(code, 0);
    let str_file = format!("run/{}", r["file.structure_str"]);
    let (code, _) = fvk(
        d.path(),
        &[
            "type",
            "--structure",
            &str_file,
            "--logic",
            "mso",
            "--rank",
            "3",
        ],
    );
    assert_eq!(code, 3);
}
