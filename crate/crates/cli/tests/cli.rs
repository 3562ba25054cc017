use std::process::{Command, Output};

fn collider(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collider"))
        .args(args)
        .output()
        .expect("spawn collider")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn seqtest_rejects_a_far_null() {
    let out = collider(&[
        "seqtest",
        "--dist",
        "uniform:k=10",
        "--c0",
        "0.3",
        "--seed",
        "4",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("verdict=reject"), "{}", stdout(&out));
}

#[test]
fn same_seed_same_output() {
    let args = [
        "estimate",
        "--dist",
        "powerlaw:k=20",
        "--alpha",
        "2",
        "--beta",
        "0.01",
        "--n",
        "50000",
        "--seed",
        "9",
    ];
    assert_eq!(stdout(&collider(&args)), stdout(&collider(&args)));
}

#[test]
fn estimate_sized_from_c_lower() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("est.csv");
    let out = collider(&[
        "estimate",
        "--dist",
        "uniform:k=2",
        "--alpha",
        "5",
        "--beta",
        "0.1",
        "--eps-rel",
        "1",
        "--c-lower",
        "0.5",
        "--clamp",
        "--trials",
        "2",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 3);
    // Poisson group sizes around 1280 · 23 · ln 10 / 0.5 = 135577 users.
    let n: f64 = rows
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(9)
        .unwrap()
        .parse()
        .unwrap();
    assert!((n - 135_577.0).abs() < 2_000.0, "{n}");
    let estimate: f64 = rows
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(10)
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&estimate));
}

#[test]
fn seqtest_trials_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("seq.csv");
    let out = collider(&[
        "seqtest",
        "--dist",
        "uniform:k=10",
        "--c0",
        "0.3",
        "--trials",
        "4",
        "--seed",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(
        stdout(&out).contains("reject rate: 1.000 over 4 trials"),
        "{}",
        stdout(&out)
    );
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);
}

#[test]
fn batch_accepts_the_true_value() {
    let out = collider(&[
        "batch",
        "--dist",
        "uniform:k=10",
        "--c0",
        "0.1",
        "--epsilon",
        "0.2",
        "--estimator",
        "plugin",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("verdict=accept"), "{}", stdout(&out));
}

#[test]
fn bad_distribution_is_reported() {
    let out = collider(&["batch", "--dist", "zipf:k=3", "--c0", "0.1", "--eps", "0.1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("zipf"));
}

#[test]
fn infeasible_plan_names_minimum() {
    let out = collider(&[
        "estimate",
        "--dist",
        "uniform:k=2",
        "--alpha",
        "1",
        "--beta",
        "0.1",
        "--n",
        "5",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("369"));
}

#[test]
fn audit_prints_fraction() {
    let out = collider(&[
        "audit",
        "--alpha",
        "1.0986122886681098",
        "--beta",
        "0.04",
        "--trials",
        "200",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("salts: 111"), "{text}");
    assert!(text.contains("violation fraction"), "{text}");
    assert!(text.contains("PASS"), "{text}");
}

#[test]
fn doubling_prints_history() {
    let out = collider(&[
        "doubling",
        "--dist",
        "uniform:k=1",
        "--c0",
        "0.0",
        "--alpha",
        "5",
        "--beta",
        "0.1",
        "--n0",
        "524288",
        "--max-rounds",
        "1",
        "--c-lower",
        "1",
        "--history",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("round,n_t"), "{text}");
    assert!(text.contains("verdict=reject"), "{text}");
}

#[test]
fn experiment_recipe_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = collider(&[
        "experiment",
        "--recipe",
        "fig4",
        "--scale",
        "smoke",
        "--out",
        dir.path().to_str().unwrap(),
        "--plot-stub",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert!(records.starts_with("algorithm,distribution,k,alpha,beta,eps,delta,trial,seed,"));
    // 2 distributions × 2 estimators × 5 trials.
    assert_eq!(records.lines().count(), 1 + 20);
    assert!(dir.path().join("summary.csv").exists());
    assert!(dir.path().join("rmse.csv").exists());
    assert!(dir.path().join("plot.gp").exists());
}

#[test]
fn experiment_from_toml() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "[[experiment]]\nalgorithm = \"seqtest\"\ndistribution = \"uniform:k=10\"\nc0 = 0.3\ndelta = 0.1\nbudget = 100000\ntrials = 3\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = collider(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = std::fs::read_to_string(out_dir.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 4);
}

#[test]
fn experiment_needs_a_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = collider(&["experiment", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
}
