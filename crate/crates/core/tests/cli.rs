use std::fs;
use std::path::Path;

use besovlab::cli::run_cli;
use besovlab::io::{sha256_hex, Manifest};

fn run(args: &[&str]) -> i32 {
    let argv: Vec<&str> = std::iter::once("besovlab").chain(args.iter().copied()).collect();
    run_cli(argv)
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn heat_writes_fits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("heat");
    assert_eq!(run(&["verify", "heat", "--j", "4", "--p", "2", "--out", out.to_str().unwrap()]), 0);
    let fits = fs::read_to_string(out.join("heat_fit.csv")).unwrap();
    let mut lines = fits.lines();
    assert_eq!(lines.next(), Some("trial,seed,j,c,C,slope"));
    assert_eq!(lines.count(), 20);
    let ratios = fs::read_to_string(out.join("heat.csv")).unwrap();
    assert!(ratios.starts_with("config_id,seed,j,lhs,rhs,ratio\n"));
    let m = manifest(&out);
    assert_eq!(m.command, "verify heat");
    for entry in &m.files {
        let bytes = fs::read(out.join(&entry.file)).unwrap();
        assert_eq!(sha256_hex(&bytes), entry.sha256);
    }
    assert!(out.join("run.log").exists());
}

#[test]
fn simulate_taylor_green() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tg.toml");
    fs::write(
        &cfg,
        "seed = 4\n[grid]\nn = 32\n[initial]\nkind = \"taylor-green\"\n\
         [simulation]\ndt = 0.001\nhorizon = 0.02\nsnapshot_every = 10\n",
    )
    .unwrap();
    let out = tmp.path().join("sim");
    assert_eq!(
        run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        0
    );
    for f in ["diagnostics.csv", "snap_0000.bsns", "snap_0001.bsns", "snap_0002.bsns"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let snap = besovlab::io::load_snapshot(out.join("snap_0002.bsns")).unwrap();
    assert!((snap.t - 0.02).abs() < 1e-12);

    let norm = tmp.path().join("norm");
    let code = run(&[
        "norm",
        "--spec",
        "2/p-1,r=1",
        "--field",
        "u",
        "--input",
        out.join("snap_0001.bsns").to_str().unwrap(),
        "--out",
        norm.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let env = tmp.path().join("env");
    let diag = out.join("diagnostics.csv");
    assert_eq!(
        run(&["verify", "envelope", "--input", diag.to_str().unwrap(), "--out", env.to_str().unwrap()]),
        0
    );
}

#[test]
fn homogeneous_norm_of_constant_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let code = run(&[
        "norm",
        "--spec",
        "2/p-1,p=3,r=1,homog",
        "--constant",
        "1.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    let code = run(&["norm", "--spec", "0,inhom", "--constant", "1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["transmogrify"]), 2);
    assert_eq!(run(&["verify", "bogus"]), 2);
    assert_eq!(run(&["verify", "heat", "--frobnicate", "1"]), 2);
    assert_eq!(run(&["norm", "--spec", "1,z=2"]), 2);
    assert_eq!(run(&["decompose", "--config", "/nonexistent/x.toml"]), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let code = run(&["verify", "commutator", "--trials", "4", "--seed", "9", "--out", dir.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    assert_eq!(
        fs::read(a.join("commutator.csv")).unwrap(),
        fs::read(b.join("commutator.csv")).unwrap()
    );
    assert_eq!(manifest(&a), manifest(&b));
}

#[test]
fn lagrangian_shear() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("lag");
    let code = run(&["lagrangian", "--n", "32", "--t-end", "0.2", "--spacing", "0.1", "--dt", "0.01", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(out.join("lagrangian.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
