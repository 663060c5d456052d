//! Interface tests of the binary: exit codes, CSV shapes, and the structural
//! identities of the sweep output.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sgmlab")
}

struct Setup {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

fn setup(config_body: &str) -> Setup {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    std::fs::write(
        root.join("mix.toml"),
        "weights = [0.5, 0.5]\nmeans = [[2.0, 0.0], [-2.0, 0.0]]\nscale = 1.0\ndim = 2\n",
    )
    .unwrap();
    std::fs::write(
        root.join("std.toml"),
        "weights = [1.0]\nmeans = [[0.0, 0.0]]\nscale = 1.0\ndim = 2\n",
    )
    .unwrap();
    std::fs::write(root.join("run.toml"), config_body).unwrap();
    Setup { _dir: dir, root }
}

fn run(args: &[&str]) -> (String, String, i32) {
    let out = Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.code().unwrap_or(-1),
    )
}

fn cfg_path(s: &Setup) -> String {
    s.root.join("run.toml").to_str().unwrap().to_string()
}

const STD_RUN: &str = r#"
mixture = "std.toml"
t_horizon = 2.0
n_steps = 200
n_samples = 128
seed = 5

[sweep]
step = [0.02, 0.01]
t_horizon = [2.0, 4.0]
eps = [0.0, 0.1, 0.2]
"#;

#[test]
fn constants_prints_expected_values() {
    let s = setup(STD_RUN);
    let (stdout, _, code) = run(&["constants", "--config", &cfg_path(&s)]);
    assert_eq!(code, 0);
    assert!(stdout.contains("xi=0\n"), "{stdout}");
    assert!(stdout.contains("eta0=0\n"));
    assert!(stdout.contains("l_uniform=3\n"));
    assert!(stdout.contains("h_max=0.024691358024691357\n"));
    // CSV form has matching header/row lengths.
    let (csv, _, code) = run(&["constants", "--config", &cfg_path(&s), "--csv"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert_eq!(
        lines[1].split(',').count(),
        lines[2].split(',').count(),
        "{csv}"
    );
}

#[test]
fn constants_rejects_override_with_inadmissible_step() {
    // eta(1,2) = log(2)/2 shows up through the override; with L_U = 9 the
    // step bound 2/(9 L^2) = 2/1089 is far below h = 0.01.
    let s = setup(
        r#"
mixture = "std.toml"
t_horizon = 2.0
n_steps = 200
n_samples = 64
seed = 5

[override_params]
alpha = 1.0
big_m = 2.0
l_u = 9.0
"#,
    );
    let (_, stderr, code) = run(&["constants", "--config", &cfg_path(&s)]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("step size"), "{stderr}");

    // The eta/xi values themselves are fine with an admissible grid.
    let s2 = setup(
        r#"
mixture = "std.toml"
t_horizon = 2.0
n_steps = 4000
n_samples = 64
seed = 5

[override_params]
alpha = 1.0
big_m = 2.0
l_u = 9.0
"#,
    );
    let (stdout, _, code) = run(&["constants", "--config", &cfg_path(&s2)]);
    assert_eq!(code, 0);
    let xi_line = stdout.lines().find(|l| l.starts_with("xi=")).unwrap();
    let xi: f64 = xi_line.trim_start_matches("xi=").parse().unwrap();
    assert!((xi - 0.5 * std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn missing_mixture_exits_2_without_output() {
    let s = setup(STD_RUN);
    std::fs::remove_file(s.root.join("std.toml")).unwrap();
    let (stdout, stderr, code) = run(&["constants", "--config", &cfg_path(&s)]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stdout.is_empty(), "partial output: {stdout}");
}

#[test]
fn verify_exits_4_on_false_claims() {
    // Claiming M = 0 asserts log-concavity of a separated two-mode mixture;
    // the suite must fail and the exit code must say so.
    let s = setup(
        r#"
mixture = "mix.toml"
t_horizon = 2.0
n_steps = 200
n_samples = 64
seed = 5

[override_params]
alpha = 1.0
big_m = 0.0
l_u = 1.0
"#,
    );
    let out = s.root.join("out");
    let (stdout, _, code) = run(&[
        "verify",
        "--config",
        &cfg_path(&s),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 4, "{stdout}");
    assert!(stdout.contains("false"), "{stdout}");
}

#[test]
fn sample_csv_shape_and_seed_flag() {
    let s = setup(STD_RUN);
    let out = s.root.join("out");
    let (_, _, code) = run(&[
        "sample",
        "--config",
        &cfg_path(&s),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let body = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert!(lines[0].contains("seed=5"));
    assert_eq!(lines[1], "x0,x1");
    assert_eq!(lines.len(), 2 + 128);

    // Seed override changes the draw and is recorded.
    let out2 = s.root.join("out2");
    run(&[
        "sample",
        "--config",
        &cfg_path(&s),
        "--seed",
        "99",
        "--out",
        out2.to_str().unwrap(),
    ]);
    let body2 = std::fs::read_to_string(out2.join("samples.csv")).unwrap();
    assert!(body2.lines().next().unwrap().contains("seed=99"));
    assert_ne!(body, body2);
}

fn parse_sweep(path: &Path) -> Vec<(f64, f64, f64, f64, f64)> {
    // (h, T, eps, w2_exact, bound)
    let body = std::fs::read_to_string(path).unwrap();
    body.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("h,"))
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|t| t.parse().unwrap()).collect();
            (f[0], f[1], f[2], f[3], f[6])
        })
        .collect()
}

#[test]
fn sweep_bound_structure() {
    let s = setup(STD_RUN);
    let out = s.root.join("out");
    let (_, _, code) = run(&[
        "sweep",
        "--config",
        &cfg_path(&s),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let rows = parse_sweep(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 2 * 2 * 3);

    // Every cell is dominated by its bound.
    for (h, t, eps, w2, bound) in &rows {
        assert!(w2 <= bound, "h={h} T={t} eps={eps}: {w2} > {bound}");
    }

    // eps linearity: for the standard Gaussian eta = 0, so the bound gap for
    // d_eps = 0.1 is exactly 4 * 0.1 * T.
    let find = |h: f64, t: f64, eps: f64| -> f64 {
        rows.iter()
            .find(|r| {
                (r.0 - h).abs() < 1e-15 && (r.1 - t).abs() < 1e-15 && (r.2 - eps).abs() < 1e-15
            })
            .unwrap()
            .4
    };
    for &t in &[2.0, 4.0] {
        for &h in &[0.02, 0.01] {
            let gap1 = find(h, t, 0.1) - find(h, t, 0.0);
            let gap2 = find(h, t, 0.2) - find(h, t, 0.1);
            assert!((gap1 - 0.4 * t).abs() < 1e-9, "gap1={gap1}");
            assert!((gap2 - gap1).abs() < 1e-9, "eps linearity broken");
        }
    }

    // Halving h shrinks the discretization part (bound minus the
    // h-independent init term) by exactly sqrt(2).
    for &t in &[2.0f64, 4.0] {
        let init_term = (-t).exp() * (2.0f64.sqrt() + 2.0f64.sqrt());
        let disc_02 = find(0.02, t, 0.0) - init_term;
        let disc_01 = find(0.01, t, 0.0) - init_term;
        assert!(
            (disc_02 / disc_01 - 2.0f64.sqrt()).abs() < 1e-12,
            "disc ratio {}",
            disc_02 / disc_01
        );
    }
}

#[test]
fn sweep_skips_inadmissible_cells_with_warning() {
    let s = setup(
        r#"
mixture = "std.toml"
t_horizon = 2.0
n_steps = 200
n_samples = 64
seed = 5

[sweep]
step = [0.05, 0.01]
t_horizon = [2.0]
eps = [0.0]
"#,
    );
    let out = s.root.join("out");
    let (_, _, code) = run(&[
        "sweep",
        "--config",
        &cfg_path(&s),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let body = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(body.contains("# warning: skipped cell h=0.05"), "{body}");
    assert_eq!(parse_sweep(&out.join("sweep.csv")).len(), 1);
}

#[test]
fn w2_subcommand_reads_csvs_and_reports() {
    let s = setup(STD_RUN);
    let out = s.root.join("out");
    run(&[
        "sample",
        "--config",
        &cfg_path(&s),
        "--out",
        out.to_str().unwrap(),
    ]);
    let samples = out.join("samples.csv");
    let p = samples.to_str().unwrap();
    let (stdout, _, code) = run(&["w2", p, p, "--method", "exact"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "method,value,se,n,nproj,seed");
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "exact_matching");
    let value: f64 = fields[1].parse().unwrap();
    assert!(value < 1e-12, "self-distance {value}");

    let (stdout, _, code) = run(&["w2", p, p, "--method", "sliced", "--nproj", "32"]);
    assert_eq!(code, 0);
    assert!(stdout.lines().nth(1).unwrap().starts_with("sliced,0,"));

    let (_, stderr, code) = run(&["w2", p, p, "--method", "nope"]);
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn coupling_third_distance_column_is_zero_without_perturbation() {
    let s = setup(
        r#"
mixture = "mix.toml"
t_horizon = 1.0
n_steps = 100
n_samples = 64
seed = 5
eps = 0.0
fine_factor = 2

[override_params]
alpha = 1.0
big_m = 4.0
l_u = 1.0
"#,
    );
    let out = s.root.join("out");
    let (_, _, code) = run(&[
        "coupling",
        "--config",
        &cfg_path(&s),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let body = std::fs::read_to_string(out.join("coupling.csv")).unwrap();
    for line in body.lines().skip(2) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[4], "0", "dist_init_star must stay zero: {line}");
    }
}

#[test]
fn numeric_blowup_exits_3() {
    // An absurd perturbation overflows the state on the first step.
    let s = setup(
        r#"
mixture = "std.toml"
t_horizon = 2.0
n_steps = 200
n_samples = 8
seed = 5
eps = 1e308
oracle = "perturbed"
"#,
    );
    let out = s.root.join("out");
    let (_, stderr, code) = run(&[
        "sample",
        "--config",
        &cfg_path(&s),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("numeric failure at step 0"), "{stderr}");
    assert!(!out.join("samples.csv").exists());
}

#[test]
fn verify_exits_0_for_standard_gaussian() {
    let s = setup(STD_RUN);
    let out = s.root.join("out");
    let (stdout, _, code) = run(&[
        "verify",
        "--config",
        &cfg_path(&s),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.lines().all(|l| l.contains(",true,")), "{stdout}");
}

#[test]
fn exactly_one_of_n_steps_or_step() {
    let s = setup(
        r#"
mixture = "std.toml"
t_horizon = 2.0
n_steps = 200
step = 0.01
n_samples = 64
seed = 5
"#,
    );
    let (_, stderr, code) = run(&["constants", "--config", &cfg_path(&s)]);
    assert_eq!(code, 2);
    assert!(stderr.contains("exactly one"), "{stderr}");

    let s2 = setup(
        r#"
mixture = "std.toml"
t_horizon = 2.0
step = 0.01
n_samples = 64
seed = 5
"#,
    );
    let (stdout, _, code) = run(&["constants", "--config", &cfg_path(&s2)]);
    assert_eq!(code, 0);
    assert!(stdout.contains("n_steps=200"));
}
