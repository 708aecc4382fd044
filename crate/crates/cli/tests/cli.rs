use std::path::Path;
use std::process::{Command, Output};

use freeknot_cli::spline_file::read_spline;
use freeknot_cli::ExperimentReport;

fn freeknot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freeknot"))
        .args(args)
        .env_remove("FREEKNOT_WORKERS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_report(dir: &Path, name: &str) -> ExperimentReport {
    let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn p_below_one_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = freeknot(&["rate", "--p", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p >= 1"), "{}", stderr(&o));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"p": 0.5}"#).unwrap();
    let o = freeknot(&["rate", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p >= 1"), "{}", stderr(&o));
}

#[test]
fn unknown_experiment_and_bad_orders_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(freeknot(&["no-such-thing", "--out", out]).status.code(), Some(2));
    let o = freeknot(&["rate", "--r", "0", "--s", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least the integration order"));
    assert_eq!(freeknot(&["rate", "--replicates", "0", "--out", out]).status.code(), Some(2));
}

#[test]
fn csv_is_identical_across_worker_counts() {
    let mut csvs = Vec::new();
    for workers in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let o = freeknot(&[
            "rate",
            "--seed",
            "11",
            "--replicates",
            "24",
            "--grid-n",
            "512",
            "--k-list",
            "2,4,8",
            "--workers",
            workers,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        csvs.push(std::fs::read(dir.path().join("rate.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    assert!(text.starts_with("k,mean_error,std_error,mean_gamma,k_pow_beta_times_error\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    let o = freeknot(&["tau", "--replicates", "30", "--grid-n", "128", "--out", a.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed: "), "auto seed is echoed");
    let rep = read_report(a.path(), "tau");

    let b = tempfile::tempdir().unwrap();
    let mut cfg = rep.config.clone();
    cfg.out = Some(b.path().to_path_buf());
    let cfg_path = b.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let o = freeknot(&["--config", cfg_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(a.path().join("tau.csv")).unwrap(),
        std::fs::read(b.path().join("tau.csv")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "negmom", "replicates": 5, "seed": 2, "k_list": [1, 2, 3]}"#).unwrap();
    let out = dir.path().to_str().unwrap();
    let o = freeknot(&["--config", cfg.to_str().unwrap(), "--replicates", "7", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = read_report(dir.path(), "negmom");
    assert_eq!(rep.config.replicates, Some(7));
    assert_eq!(rep.config.k_list, Some(vec![1, 2, 3]));
    assert_eq!(rep.seed, 2);
}

fn write_path(file: &Path, f: impl Fn(f64) -> f64, n: usize) {
    let mut text = String::from("t,x\n");
    for i in 0..=n {
        let t = i as f64 / n as f64;
        text.push_str(&format!("{t:?},{:?}\n", f(t)));
    }
    std::fs::write(file, text).unwrap();
}

#[test]
fn linear_input_gives_one_exact_piece() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("line.csv");
    write_path(&input, |t| 2.0 * t + 1.0, 100);
    let o = freeknot(&[
        "approximate-file",
        "--input",
        input.to_str().unwrap(),
        "--k",
        "4",
        "--r",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("pieces: 1"), "{stdout}");
    let rep = read_report(dir.path(), "approximate-file");
    assert_eq!(rep.estimates["gamma"].value, 0.0);
    assert!(rep.estimates["error"].value < 1e-12);
}

#[test]
fn spline_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("wave.csv");
    write_path(&input, |t| (7.0 * t).sin() + t * t, 1000);
    let o = freeknot(&[
        "approximate-file",
        "--input",
        input.to_str().unwrap(),
        "--k",
        "6",
        "--r",
        "2",
        "--p",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = std::fs::File::open(freeknot_cli::run::spline_path(dir.path())).unwrap();
    let sf = read_spline(std::io::BufReader::new(file)).unwrap();
    assert_eq!((sf.k, sf.r), (6, 2));
    assert!(sf.spline.n_pieces() <= 6);

    let mut buf = Vec::new();
    freeknot_cli::spline_file::write_spline(&mut buf, &sf).unwrap();
    let again = read_spline(buf.as_slice()).unwrap();
    for i in 0..=1000 {
        let t = i as f64 / 1000.0;
        let (a, b) = (sf.spline.eval(t).unwrap(), again.spline.eval(t).unwrap());
        assert!((a - b).abs() <= 1e-12, "t = {t}: {a} vs {b}");
    }
    assert_eq!(sf, again);

    let rep = read_report(dir.path(), "approximate-file");
    let path = freeknot_cli::run::read_path_csv(&input).unwrap();
    let err = freeknot::spline_error(&path, &sf.spline, freeknot::Norm::L2).unwrap();
    assert!((err - rep.estimates["error"].value).abs() <= 1e-12 * err.max(1.0));
}

#[test]
fn non_uniform_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "0,0\n0.25,1\n0.6,2\n1,3\n").unwrap();
    let o = freeknot(&["approximate-file", "--input", input.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not uniform"), "{}", stderr(&o));
}

#[test]
fn reports_match_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let small = ["--seed", "5", "--replicates", "12", "--grid-n", "256", "--out", out];
    let runs: Vec<Vec<&str>> = vec![
        vec!["tau"],
        vec!["rate", "--k-list", "2,4,8"],
        vec!["avg-knots", "--epsilon-list", "0.8,0.4,0.2"],
        vec!["xi-check", "--j-max", "3"],
        vec!["smalldev", "--epsilon-list", "0.3,0.6,0.9,1.2"],
        vec!["negmom", "--k-list", "1,4,16"],
        vec!["eta-kappa", "--p", "2"],
        vec!["diffusion", "--k-list", "4,8,16", "--p", "inf"],
    ];
    for args in runs {
        let all: Vec<&str> = args.iter().chain(small.iter()).copied().collect();
        let o = freeknot(&all);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        let text = std::fs::read_to_string(dir.path().join(format!("{}.json", args[0]))).unwrap();
        let inst: serde_json::Value = serde_json::from_str(&text).unwrap();
        let errors: Vec<String> = validator.iter_errors(&inst).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{}: {errors:?}", args[0]);
        assert!(dir.path().join(format!("{}.csv", args[0])).exists());
    }
}

#[test]
fn json_format_skips_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = freeknot(&[
        "negmom",
        "--format",
        "json",
        "--replicates",
        "3",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(dir.path().join("negmom.json").exists());
    assert!(!dir.path().join("negmom.csv").exists());
}
