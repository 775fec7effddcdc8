use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn earm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_earm")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("earm-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).expect("csv exists");
    r.records().map(|x| x.unwrap()).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|x| x.unwrap()[idx].to_string()).collect()
}

fn run_ok(args: &[&str]) {
    let out = earm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn patch_problem_has_zero_estimator() {
    let dir = scratch("patch");
    let d = dir.to_str().unwrap();
    for (method, order, recovery) in [("cg", "1", "cg-orth"), ("cg", "2", "cg-pou"), ("nc", "1", "nc-facet"), ("nc", "2", "nc-fs2"), ("dg", "1", "dg")] {
        run_ok(&["run", "--problem", "patch", "--method", method, "--order", order, "--recovery", recovery, "--levels", "2", "--jitter", "0.2", "--out", d]);
        for eta in column(&dir.join("estimator.csv"), "eta") {
            let v: f64 = eta.parse().unwrap();
            assert!(v < 1e-10, "{method}{order} {recovery}: eta = {v:e}");
        }
        for e in column(&dir.join("estimator.csv"), "effectivity") {
            assert_eq!(e, "exact");
        }
    }
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    for dir in [&a, &b] {
        run_ok(&["run", "--problem", "checkerboard", "--jump", "100", "--method", "cg", "--order", "2", "--recovery", "cg-pou", "--mode", "adaptive", "--levels", "3", "--jitter", "0.15", "--seed", "7", "--out", dir.to_str().unwrap()]);
    }
    for file in ["estimator.csv", "indicators_level_02.csv", "mesh_level_02.txt"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert!(x == y, "{file} differs between runs");
    }
}

#[test]
fn incompatible_pair_is_rejected_with_names() {
    let out = earm(&["run", "--method", "cg", "--order", "1", "--recovery", "nc-fs2", "--out", scratch("bad").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nc-fs2") && err.contains("cg"), "{err}");
    let out = earm(&["run", "--method", "cg", "--gamma", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = scratch("cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("study.txt");
    std::fs::write(&file, "# small study\nproblem = smooth\nmethod = nc\norder = 3\nlevels = 3\n").unwrap();
    let out = dir.join("out");
    run_ok(&["run", "--config", file.to_str().unwrap(), "--levels", "1", "--out", out.to_str().unwrap()]);
    let r = rows(&out.join("estimator.csv"));
    assert_eq!(r.len(), 1);
    assert_eq!(&r[0][4], "nc");
    let echoed = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echoed.contains("order = 3") && echoed.contains("levels = 1"), "{echoed}");
}

#[test]
fn verify_passes_and_detects_a_flipped_sign() {
    let out = earm(&["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let out = earm(&["verify", "--jump", "1e4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let out = earm(&["verify", "--flip-sign", "3,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("VIOLATED"));
}

#[test]
fn dg2_estimator_converges_at_rate_two() {
    let dir = scratch("dg2");
    run_ok(&["run", "--problem", "smooth", "--method", "dg", "--order", "2", "--levels", "4", "--out", dir.to_str().unwrap()]);
    let file = dir.join("estimator.csv");
    let ndof: Vec<f64> = column(&file, "ndof").iter().map(|s| s.parse().unwrap()).collect();
    let eta: Vec<f64> = column(&file, "eta").iter().map(|s| s.parse().unwrap()).collect();
    let n = ndof.len();
    let slope = (eta[n - 1] / eta[n - 2]).ln() / (ndof[n - 1] / ndof[n - 2]).sqrt().ln();
    assert!((slope + 2.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn adaptive_eta_lies_below_uniform_at_equal_ndof() {
    let dir = scratch("adapt");
    let curve = |mode: &str, levels: &str| {
        let mut args = vec!["run", "--problem", "checkerboard", "--jump", "1e4", "--method", "cg", "--order", "1"];
        args.extend(["--mode", mode, "--levels", levels, "--out", dir.to_str().unwrap()]);
        run_ok(&args);
        let file = dir.join("estimator.csv");
        let parse = |c: &str| column(&file, c).iter().map(|s| s.parse::<f64>().unwrap()).collect::<Vec<_>>();
        parse("ndof").into_iter().zip(parse("eta")).collect::<Vec<_>>()
    };
    let adaptive = curve("adaptive", "10");
    let uniform = curve("uniform", "5");
    for &(n, eta) in &adaptive[6..] {
        let j = uniform.windows(2).position(|w| w[0].0 <= n && n <= w[1].0).expect("uniform curve spans the adaptive dofs");
        let ((n0, e0), (n1, e1)) = (uniform[j], uniform[j + 1]);
        let t = (n / n0).ln() / (n1 / n0).ln();
        let interpolated = (e0.ln() + t * (e1 / e0).ln()).exp();
        assert!(eta < interpolated, "ndof {n}: adaptive {eta:e} vs uniform {interpolated:e}");
    }
}
