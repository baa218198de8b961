use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SLIPPERY: &str = r#"
seed = 3

[scenario]
duration = 4.0

[scenario.terrain]
segments = [{ start = 0.0, end = 4.0, mu = 0.19 }]

[identifier]
enforce_time_budget = false
"#;

fn frictid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frictid"))
        .args(args)
        .output()
        .unwrap()
}

fn setup(config: &str) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("experiment.toml");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn run_in(dir: &Path, config: &Path, args: &[&str], out: &str) -> Output {
    let out = dir.join(out);
    let mut all = args.to_vec();
    all.extend([
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    frictid(&all)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_stream_echo_and_manifest() {
    let (dir, cfg) = setup(SLIPPERY);
    let o = run_in(dir.path(), &cfg, &["simulate"], "a");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("a");
    let (header, rows) = read_csv(&out.join("stream.csv"));
    assert_eq!(header[0], "t");
    assert!(header.contains(&"foot_0_vx".to_string()));
    assert_eq!(rows.len(), 401);
    let manifest: toml::Table =
        toml::from_str(&fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(rows.iter().all(|r| r.last().unwrap() == hash));
    assert_eq!(manifest["seed"].as_integer(), Some(3));
    let echo = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echo.contains("gamma_conf = 0.58"));

    // the echo reproduces the run
    let again = run_in(dir.path(), &out.join("config.toml"), &["simulate"], "b");
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));
    assert_eq!(
        fs::read(out.join("stream.csv")).unwrap(),
        fs::read(dir.path().join("b/stream.csv")).unwrap()
    );
}

#[test]
fn fixed_seed_gives_identical_bytes() {
    let (dir, cfg) = setup(SLIPPERY);
    for out in ["a", "b"] {
        assert_eq!(
            run_in(dir.path(), &cfg, &["simulate", "--seed", "11"], out)
                .status
                .code(),
            Some(0)
        );
    }
    let a = fs::read(dir.path().join("a/stream.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/stream.csv")).unwrap());
    assert_eq!(
        run_in(dir.path(), &cfg, &["simulate", "--seed", "12"], "c")
            .status
            .code(),
        Some(0)
    );
    assert_ne!(a, fs::read(dir.path().join("c/stream.csv")).unwrap());
}

#[test]
fn config_errors_exit_with_two() {
    let (dir, cfg) = setup("[identifier]\ngama_conf = 0.5\n");
    let o = run_in(dir.path(), &cfg, &["simulate"], "out");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gama_conf"), "{}", stderr(&o));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let missing = dir.path().join("nope.toml");
    assert_eq!(
        run_in(dir.path(), &missing, &["identify"], "out")
            .status
            .code(),
        Some(2)
    );

    let (dir, cfg) = setup("[identifier]\ngamma_conf = 1.5\n");
    assert_eq!(
        run_in(dir.path(), &cfg, &["identify"], "out").status.code(),
        Some(2)
    );

    let (dir, cfg) = setup(SLIPPERY);
    assert_eq!(
        run_in(dir.path(), &cfg, &["sweep", "sideways"], "out")
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run_in(dir.path(), &cfg, &["identify", "--method", "newton"], "out")
            .status
            .code(),
        Some(2)
    );
    assert_eq!(frictid(&["simulate"]).status.code(), Some(2));
}

fn final_mu_hat(path: &Path) -> f64 {
    let (header, rows) = read_csv(path);
    rows.last().unwrap()[column(&header, "mu_hat")]
        .parse()
        .unwrap()
}

#[test]
fn identify_on_slippery_ground() {
    let (dir, cfg) = setup(SLIPPERY);
    let o = run_in(dir.path(), &cfg, &["identify"], "smoothed");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let path = dir.path().join("smoothed/identify.csv");
    let (header, rows) = read_csv(&path);
    assert_eq!(
        header,
        [
            "t",
            "mu_hat",
            "mu_star",
            "eta",
            "eta_accepted",
            "loss",
            "method",
            "wall_ms",
            "n_rejected",
            "config_hash"
        ]
    );
    assert_eq!(rows.len(), 40);
    assert!((final_mu_hat(&path) - 0.19).abs() < 0.05);
    assert!(rows
        .iter()
        .all(|r| r[column(&header, "method")] == "Smoothed"));

    let o = run_in(
        dir.path(),
        &cfg,
        &["identify", "--method", "nonsmooth"],
        "nonsmooth",
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("nonsmooth/identify.csv"));
    assert!(rows
        .iter()
        .all(|r| r[column(&header, "method")] == "Nonsmooth"));
}

#[test]
fn identify_from_recorded_stream() {
    let (dir, cfg) = setup(SLIPPERY);
    assert_eq!(
        run_in(dir.path(), &cfg, &["simulate"], "sim").status.code(),
        Some(0)
    );
    assert_eq!(
        run_in(dir.path(), &cfg, &["identify"], "direct")
            .status
            .code(),
        Some(0)
    );
    let stream = dir.path().join("sim/stream.csv");
    let o = run_in(
        dir.path(),
        &cfg,
        &["identify", "--stream", stream.to_str().unwrap()],
        "replayed",
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let direct = final_mu_hat(&dir.path().join("direct/identify.csv"));
    let replayed = final_mu_hat(&dir.path().join("replayed/identify.csv"));
    assert!((direct - replayed).abs() < 1e-6, "{direct} vs {replayed}");
}

#[test]
fn gradcheck_reports_and_fails_on_flipped_sign() {
    let (dir, cfg) = setup("");
    let o = run_in(dir.path(), &cfg, &["gradcheck"], "ok");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout
        .lines()
        .filter(|l| l.starts_with("PASS"))
        .all(|l| l.contains("cond")));
    let (header, rows) = read_csv(&dir.path().join("ok/gradcheck.csv"));
    let cond = column(&header, "condition_number");
    assert!(rows.iter().all(|r| r[cond].parse::<f64>().unwrap() >= 1.0));

    let o = run_in(dir.path(), &cfg, &["gradcheck", "--flip-sign"], "flipped");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn sweeps() {
    let (dir, cfg) = setup(
        &SLIPPERY
            .replace("duration = 4.0", "duration = 2.0")
            .replace("end = 4.0", "end = 2.0"),
    );
    let o = run_in(dir.path(), &cfg, &["sweep", "initials"], "initials");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("initials/sweep_initials.csv"));
    assert_eq!(rows.len(), 20);
    let mu = column(&header, "mu_init");
    assert_eq!(rows[0][mu], "0.05");
    assert_eq!(rows[19][mu], "1");

    let o = run_in(dir.path(), &cfg, &["sweep", "rho"], "rho");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("rho/sweep_rho.csv"));
    assert_eq!(rows.len(), 5);
    let loss = column(&header, "average_loss");
    assert!(rows.iter().all(|r| r[loss].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn bench_four_methods_seven_trials() {
    let config = r#"
[scenario]
duration = 1.5

[scenario.terrain]
segments = [{ start = 0.0, end = 1.5, mu = 0.19 }]
"#;
    let (dir, cfg) = setup(config);
    let o = run_in(dir.path(), &cfg, &["bench"], "bench");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("bench/bench.csv"));
    assert_eq!(rows.len(), 28);
    let ms = column(&header, "wall_ms_per_solve");
    assert!(rows.iter().all(|r| r[ms].parse::<f64>().unwrap() >= 0.0));

    let (header, rows) = read_csv(&dir.path().join("bench/bench_summary.csv"));
    let median = |tag: &str| -> f64 {
        let row = rows
            .iter()
            .find(|r| r[column(&header, "method")] == tag)
            .unwrap();
        row[column(&header, "median_solve_ms")].parse().unwrap()
    };
    assert!(median("Smoothed") < median("RandZeroth"));
    assert!(median("Smoothed") < median("RandFirst"));
}
