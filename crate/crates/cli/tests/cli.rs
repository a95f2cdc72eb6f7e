use std::path::Path;
use std::process::{Command, Output};

fn spade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spade"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = spade(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

fn col(row: &[String], i: usize) -> f64 {
    row[i].parse().unwrap()
}

#[test]
fn sweep_contract() {
    let out = stdout(&[
        "--epsilon2",
        "0.0033",
        "--x-grid",
        "3e-3:0.5:60:log",
        "chernoff-sweep",
    ]);
    let header = out.lines().next().unwrap();
    assert_eq!(
        header,
        "x,xi_median,xi_q25,xi_q75,xi_quantum,xi_di_asymptotic,xi_small_branch,xi_large_branch"
    );
    let rows = rows(&out);
    assert_eq!(rows.len(), 60);
    for r in &rows {
        assert!(col(r, 1) <= col(r, 4));
        assert_eq!(r[1], r[2]);
        assert_eq!(r[1], r[3]);
    }
}

#[test]
fn sweep_is_deterministic_and_writes_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let ens = dir.path().join(format!("{name}.ens"));
        let args = [
            "--model",
            "unitary_random",
            "--epsilon2",
            "0.0033",
            "--seed",
            "42",
            "--x-grid",
            "1e-2:0.3:6:log",
            "--out",
            out.to_str().unwrap(),
            "chernoff-sweep",
            "--samples",
            "50",
            "--ensemble-out",
            ens.to_str().unwrap(),
        ];
        stdout(&args);
        (
            std::fs::read(out).unwrap(),
            std::fs::read_to_string(ens).unwrap(),
        )
    };
    let (a, ens) = run("a.csv");
    let (b, _) = run("b.csv");
    assert_eq!(a, b);
    assert!(ens.starts_with("sample_index,seed,realized_epsilon2,p0,x,xi\n"));
    assert_eq!(ens.lines().count(), 1 + 50 * 6);
    for r in rows(std::str::from_utf8(&a).unwrap()) {
        assert!(col(&r, 2) <= col(&r, 1) && col(&r, 1) <= col(&r, 3));
    }
}

#[test]
fn semi_test_bound_holds_in_curves() {
    let args = [
        "error-curves",
        "--test",
        "semi(0.02)",
        "--x-list",
        "0.02,0.05",
        "--method",
        "exact_binomial",
    ];
    let rows = rows(&stdout(&args));
    let (at_min, wider): (Vec<_>, Vec<_>) = rows.iter().partition(|r| col(r, 1) == 0.02);
    assert_eq!(at_min.len(), wider.len());
    for (a, b) in at_min.iter().zip(&wider) {
        assert_eq!(a[0], b[0]);
        assert!(col(b, 5) <= col(a, 5));
    }
}

#[test]
fn original_test_tends_to_coin_flip() {
    let rows = rows(&stdout(&[
        "error-curves",
        "--test",
        "original",
        "--x-list",
        "0.05",
    ]));
    let last = rows.last().unwrap();
    assert_eq!(last[0], "10000000");
    assert!((col(last, 5) - 0.5).abs() < 1e-3);
}

#[test]
fn zeta_never_beats_likelihood_ratio() {
    let curve = |test: &str| {
        rows(&stdout(&[
            "--epsilon2",
            "0.0666666666666667",
            "error-curves",
            "--test",
            test,
            "--x-list",
            "0.1",
            "--method",
            "exact_binomial",
        ]))
    };
    let zeta = curve("zeta(0.01,0.8)");
    let lrt = curve("binary-lrt(0.1)");
    for (z, l) in zeta.iter().zip(&lrt) {
        assert!(col(z, 5) >= col(l, 5), "N = {}", z[0]);
    }
}

#[test]
fn plan_json() {
    let out = stdout(&["plan", "--xmin", "0.02", "--pe-max", "0.05"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let n = v["n_required"].as_u64().unwrap();
    assert!((5e5..1e6).contains(&(n as f64)), "{n}");
    assert!(v["pe_at_n"].as_f64().unwrap() <= 0.05);
    assert_eq!(v["method"], "gaussian+exact-verify");
    assert_eq!(out, stdout(&["plan", "--xmin", "0.02", "--pe-max", "0.05"]));
    let single = stdout(&["plan", "--xmin", "0.3", "--pe-max", "0.49"]);
    assert!(single.starts_with("{\"n_required\":1,"));
}

#[test]
fn simulate_matches_analytic() {
    let out = stdout(&[
        "--seed", "9", "simulate", "--test", "original", "--x", "0.05", "--n", "300", "--trials",
        "10000",
    ]);
    let rows = rows(&out);
    assert_eq!(rows.len(), 12);
    let all = &rows[10];
    let analytic = &rows[11];
    assert_eq!((all[0].as_str(), analytic[0].as_str()), ("all", "analytic"));
    let a = col(analytic, 1);
    let sigma = (a * (1.0 - a) / 1e4).sqrt();
    assert!((col(all, 1) - a).abs() <= 3.0 * sigma);
    let again = stdout(&[
        "--seed", "9", "simulate", "--test", "original", "--x", "0.05", "--n", "300", "--trials",
        "10000",
    ]);
    assert_eq!(out, again);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# plan inputs\nxmin = 0.02\npe-max = 0.05\nepsilon2 = 0.02\n",
    )
    .unwrap();
    let from_file = stdout(&["--config", cfg.to_str().unwrap(), "plan"]);
    let overridden = stdout(&[
        "--config",
        cfg.to_str().unwrap(),
        "--epsilon2",
        "0.01",
        "plan",
    ]);
    assert_ne!(from_file, overridden);
    assert_eq!(
        overridden,
        stdout(&["plan", "--xmin", "0.02", "--pe-max", "0.05"])
    );
}

#[test]
fn file_model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let c = spade_core::montecarlo::random_crosstalk(2, 0.01, 4).unwrap();
    std::fs::write(&path, c.to_json()).unwrap();
    let model = format!("file:{}", path.display());
    let from_file = stdout(&[
        "--model", &model, "plan", "--xmin", "0.05", "--pe-max", "0.1",
    ]);
    let seeded = stdout(&[
        "--model",
        "unitary_random",
        "--seed",
        "4",
        "plan",
        "--xmin",
        "0.05",
        "--pe-max",
        "0.1",
    ]);
    assert_eq!(from_file, seeded);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| spade(args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["plan", "--xmin", "0.02", "--pe-max", "0.05"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["plan", "--xmin", "0.02"]), 1);
    assert_eq!(code(&["plan", "--xmin", "0.02", "--pe-max", "0.5"]), 1);
    assert_eq!(code(&["--x-grid", "2:1:5:lin", "chernoff-sweep"]), 1);
    assert_eq!(code(&["--epsilon2", "0.5", "chernoff-sweep"]), 1);
    assert_eq!(
        code(&["simulate", "--test", "original", "--x", "0.05", "--n", "0"]),
        1
    );
    assert_eq!(
        code(&[
            "--model",
            "file:/nonexistent.json",
            "plan",
            "--xmin",
            "0.1",
            "--pe-max",
            "0.1"
        ]),
        1
    );
    assert_eq!(code(&["--config", "/nonexistent.cfg", "plan"]), 1);
    // Gaussian error curves need non-degenerate variance; ideal crosstalk has p0 = 0.
    assert_eq!(
        code(&["--model", "identity", "error-curves", "--test", "naive"]),
        1
    );
    assert!(!Path::new("/nonexistent.json").exists());
}
