//! End-to-end runs of the `gci` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geodesic_causal::dataset::{read_dataset, write_dataset, AnyDataset};
use geodesic_causal::simulation::{covariance_truth, gen_covariance, gen_euclidean, COVARIANCE_DIM};
use geodesic_causal::spaces::{FrobeniusSpace, Interval, MatrixKind, SymMatrix};
use geodesic_causal::{GeodesicSpace, Observation};

fn gci(args: &[&str]) -> Output {
    gci_env(args, &[])
}

fn gci_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gci"));
    cmd.args(args).env_remove("GCI_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("gci runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn euclidean_file(dir: &Path, name: &str, samples: &[Observation<f64>]) -> PathBuf {
    let path = dir.join(name);
    write_dataset(&Interval::real_line(), samples, &path).unwrap();
    path
}

/// Estimate report rows keyed by method: `(contrast, theta0.., theta1..)`.
fn read_estimates(path: &Path) -> Vec<(String, f64, Vec<f64>)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("#space="));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let first_theta = header.iter().position(|c| c.starts_with("theta0_")).unwrap();
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            let thetas = cells[first_theta..].iter().map(|c| c.parse().unwrap()).collect();
            (cells[0].to_string(), cells[1].parse().unwrap(), thetas)
        })
        .collect()
}

#[test]
fn help_lists_every_subcommand_and_flag() {
    let top = stdout(&gci(&["--help"]));
    for sub in ["simulate", "estimate", "hulc", "selftest", "--jobs", "--config"] {
        assert!(top.contains(sub), "top-level help lacks {sub}");
    }
    let sim = stdout(&gci(&["simulate", "--help"]));
    for flag in ["--space", "--n", "--q", "--or", "--ps", "--seed", "--methods", "--eta0", "--folds", "--extension", "--metric", "--out"] {
        assert!(sim.contains(flag), "simulate help lacks {flag}");
    }
    let hulc = stdout(&gci(&["hulc", "--help"]));
    for flag in ["--data", "--method", "--alpha", "--delta", "--space-header", "--diagnostics"] {
        assert!(hulc.contains(flag), "hulc help lacks {flag}");
    }
}

#[test]
fn selftest_passes() {
    let o = gci(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = euclidean_file(dir.path(), "d.csv", &gen_euclidean(100, 1));
    let d = path_str(&data);
    assert_eq!(code(&gci(&["simulate", "--q", "0"])), 2);
    assert_eq!(code(&gci(&["simulate", "--space", "torus"])), 2);
    assert_eq!(code(&gci(&["hulc", "--data", d, "--alpha", "1.5"])), 2);
    assert_eq!(code(&gci(&["estimate", "--data", d, "--eta0", "0.7"])), 2);
    assert_eq!(code(&gci(&["estimate", "--data", path_str(&dir.path().join("missing.csv"))])), 2);
    assert_eq!(code(&gci(&["--jobs", "0", "selftest"])), 2);
    assert_eq!(code(&gci_env(&["selftest"], &[("GCI_SEED", "abc")])), 2);
}

#[test]
fn single_arm_data_exits_with_four_and_writes_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let samples: Vec<Observation<f64>> =
        gen_euclidean(60, 2).into_iter().map(|o| Observation::new(o.y, true, o.x)).collect();
    let data = euclidean_file(dir.path(), "one_arm.csv", &samples);
    let out = dir.path().join("est.csv");
    let o = gci(&["estimate", "--data", path_str(&data), "--out", path_str(&out)]);
    assert_eq!(code(&o), 4);
    let diag = std::fs::read_to_string(dir.path().join("est.csv.diagnostics.txt")).unwrap();
    assert!(diag.contains("n: 60 treated: 60 control: 0"), "{diag}");
}

#[test]
fn too_few_units_for_the_folds_exits_with_five() {
    let dir = tempfile::tempdir().unwrap();
    let samples: Vec<Observation<f64>> =
        (0..6).map(|i| Observation::new(i as f64, i % 2 == 0, vec![i as f64 * 0.1])).collect();
    let data = euclidean_file(dir.path(), "tiny.csv", &samples);
    assert_eq!(code(&gci(&["estimate", "--data", path_str(&data), "--method", "cf", "--folds", "10"])), 5);
}

#[test]
fn simulate_writes_one_row_per_method_and_sample_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let o = gci(&["simulate", "--space", "covariance", "--n", "100,200", "--q", "3", "--seed", "4", "--methods", "dr,or,ipw", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let table = stdout(&o);
    let head = table.lines().next().unwrap();
    for col in ["space", "DR", "OR", "IPW", "failed"] {
        assert!(head.contains(col), "{head}");
    }
    assert_eq!(table.lines().count(), 3);

    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "space,n,or,ps,q,seed,extension,method,ase,sd,aed,aed_sd,failures,theory_unsupported");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!(r[0], "covariance");
        assert_eq!((r[2], r[3], r[4], r[5]), ("correct", "correct", "3", "4"));
        assert!(r[8].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn config_file_supplies_defaults_and_the_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# simulation defaults\nspace = compositional\nq = 2\nn = 60\nseed = 9\nmethods = dr\n").unwrap();
    let a = dir.path().join("a.csv");
    let o = gci(&["simulate", "--config", path_str(&cfg), "--n", "80", "--out", path_str(&a)]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(&a).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[0], row[1], row[4], row[5], row[7]), ("compositional", "80", "2", "9", "dr"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn seed_environment_variable_overrides_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    let args = |seed: &str, out: &Path| {
        vec!["simulate".to_string(), "--space".into(), "compositional".into(), "--n".into(), "60".into(), "--q".into(), "2".into(), "--methods".into(), "dr".into(), "--seed".into(), seed.into(), "--out".into(), path_str(out).to_string()]
    };
    let run = |seed: &str, out: &Path, env: &[(&str, &str)]| {
        let v = args(seed, out);
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        assert_eq!(code(&gci_env(&refs, env)), 0);
        std::fs::read_to_string(out).unwrap()
    };
    let with_env = run("1", &a, &[("GCI_SEED", "17")]);
    let direct = run("17", &b, &[]);
    let other = run("1", &c, &[]);
    assert_eq!(with_env, direct);
    assert_ne!(with_env, other);
}

#[test]
fn covariance_estimates_are_close_to_the_truth_and_methods_differ() {
    let dir = tempfile::tempdir().unwrap();
    let space = FrobeniusSpace::new(COVARIANCE_DIM, MatrixKind::covariance()).unwrap();
    let data = dir.path().join("cov.csv");
    write_dataset(&space, &gen_covariance(1000, 31), &data).unwrap();
    let AnyDataset::Matrix(_, back) = read_dataset(&data, None).unwrap() else { panic!("covariance header") };
    assert_eq!(back.samples.len(), 1000);

    let out = dir.path().join("est.csv");
    let o = gci(&["estimate", "--data", path_str(&data), "--method", "dr,ipw", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let rows = read_estimates(&out);
    assert_eq!(rows.len(), 2);
    let truth = covariance_truth();
    let true_contrast = space.distance(&truth.theta0, &truth.theta1);
    let packed = COVARIANCE_DIM * (COVARIANCE_DIM + 1) / 2;
    let (dr, ipw) = (&rows[0], &rows[1]);
    assert_eq!((dr.0.as_str(), ipw.0.as_str()), ("dr", "ipw"));
    let theta0 = SymMatrix::from_packed(COVARIANCE_DIM, dr.2[..packed].to_vec()).unwrap();
    let theta1 = SymMatrix::from_packed(COVARIANCE_DIM, dr.2[packed..].to_vec()).unwrap();
    let err = space.distance(&theta0, &truth.theta0).powi(2) + space.distance(&theta1, &truth.theta1).powi(2);
    assert!(err < 3.0, "squared error {err}");
    assert!((dr.1 - true_contrast).abs() < 1.5, "contrast {} vs {true_contrast}", dr.1);
    assert!((dr.1 - ipw.1).abs() > 1e-6);
}

#[test]
fn hulc_report_has_the_expected_layout() {
    let dir = tempfile::tempdir().unwrap();
    let data = euclidean_file(dir.path(), "e.csv", &gen_euclidean(400, 3));
    let out = dir.path().join("iv.csv");
    let o = gci(&["hulc", "--data", path_str(&data), "--alpha", "0.1", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "method,alpha,delta,seed,b,tau,b_star,lo,hi,split_contrasts");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (b_star, lo, hi): (usize, f64, f64) = (row[6].parse().unwrap(), row[7].parse().unwrap(), row[8].parse().unwrap());
    assert_eq!(row[9].split(';').count(), b_star);
    assert!(lo <= hi);
}
