//! End-to-end checks of the batch tool: exit codes, artifact formats,
//! determinism, and the fit/predict round trip.

use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use robustmv_cli::run_command;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["robustmv"];
    argv.extend_from_slice(args);
    run_command(argv)
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

fn line_data(n: usize) -> String {
    let mut out = String::from("x1,y\n");
    for i in 0..n {
        let x = i as f64 * 0.5;
        out.push_str(&format!("{x},{}\n", 1.0 + 2.0 * x + 0.01 * (i as f64).sin()));
    }
    out
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["fit", "--bogus"]), 2);
}

#[test]
fn missing_file_is_a_computation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    assert_eq!(
        run(&[
            "fit",
            "--method",
            "ols",
            "--in",
            "/nonexistent/never.csv",
            "--y",
            "y",
            "--out",
            out.to_str().unwrap(),
        ]),
        1
    );
}

#[test]
fn non_numeric_rows_are_skipped_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(dir.path(), "d.csv", &format!("{}badrow,NA\n", line_data(20)));
    let out = dir.path().join("m.json");
    assert_eq!(
        run(&[
            "fit",
            "--method",
            "ols",
            "--in",
            data.to_str().unwrap(),
            "--y",
            "y",
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    assert!(out.exists());
}

#[test]
fn mm_fit_records_the_derived_tuning_constant() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(dir.path(), "d.csv", &line_data(30));
    let out = dir.path().join("m.json");
    assert_eq!(
        run(&[
            "fit",
            "--method",
            "mm",
            "--efficiency",
            "0.85",
            "--in",
            data.to_str().unwrap(),
            "--y",
            "y",
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["config"]["k"], serde_json::json!(3.44));
    assert_eq!(doc["config"]["efficiency"], serde_json::json!(0.85));
}

#[test]
fn simulate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        assert_eq!(
            run(&[
                "simulate",
                "--scenario",
                "correlated-cluster",
                "--seed",
                "7",
                "--out",
                out.to_str().unwrap(),
            ]),
            0
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(fs::read_to_string(&a).unwrap().starts_with("# {"));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    assert_eq!(
        run(&["simulate", "--scenario", "nope", "--out", out.to_str().unwrap()]),
        2
    );
}

fn latent_rank3_csv(n: usize) -> String {
    use rand::SeedableRng;
    let mut r = ChaCha8Rng::seed_from_u64(99);
    let loadings = [
        [1.0, 0.5, 0.0, -0.5, 1.0],
        [0.0, 1.0, 1.0, 0.5, -1.0],
        [0.5, 0.0, -1.0, 1.0, 0.5],
    ];
    let mut out = String::from("x1,x2,x3,x4,x5,y\n");
    for _ in 0..n {
        let t: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut r)).collect();
        let y = 2.0 * t[0] - t[1] + 0.5 * t[2];
        let xs: Vec<String> = (0..5)
            .map(|j| {
                let v: f64 = (0..3).map(|c| t[c] * loadings[c][j]).sum();
                format!("{v:.17e}")
            })
            .collect();
        out.push_str(&format!("{},{y:.17e}\n", xs.join(",")));
    }
    out
}

#[test]
fn cv_records_the_chosen_complexity() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(dir.path(), "d.csv", &latent_rank3_csv(60));
    let out = dir.path().join("cv.csv");
    assert_eq!(
        run(&[
            "cv",
            "--method",
            "pls",
            "--components",
            "1:5",
            "--trim",
            "0.15",
            "--splits",
            "30",
            "--in",
            data.to_str().unwrap(),
            "--y",
            "y",
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    let text = fs::read_to_string(&out).unwrap();
    let config: serde_json::Value =
        serde_json::from_str(text.lines().next().unwrap().trim_start_matches("# ")).unwrap();
    assert_eq!(config["chosen"], serde_json::json!(3));
    // The chosen flag marks exactly the argmin row.
    let marked: Vec<&str> = text
        .lines()
        .skip(2)
        .filter(|l| l.ends_with(",1"))
        .collect();
    assert_eq!(marked.len(), 1);
    assert!(marked[0].starts_with("3,"));
}

#[test]
fn bootstrap_artifact_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(dir.path(), "d.csv", &line_data(25));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        assert_eq!(
            run(&[
                "bootstrap",
                "--method",
                "ols",
                "--replicates",
                "200",
                "--seed",
                "3",
                "--in",
                data.to_str().unwrap(),
                "--y",
                "y",
                "--out",
                out.to_str().unwrap(),
            ]),
            0
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(2).unwrap().starts_with("intercept,"));
}

#[test]
fn least_squares_breaks_down_at_one_contaminated_case() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(dir.path(), "d.csv", &line_data(20));
    let out = dir.path().join("bd.csv");
    assert_eq!(
        run(&[
            "diagnose",
            "--kind",
            "breakdown",
            "--method",
            "ols",
            "--trials",
            "2",
            "--in",
            data.to_str().unwrap(),
            "--y",
            "y",
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    let text = fs::read_to_string(&out).unwrap();
    let row = text.lines().nth(2).unwrap();
    let fraction: f64 = row.split(',').next().unwrap().parse().unwrap();
    assert!((fraction - 0.05).abs() < 1e-12);
    assert!(row.ends_with(",1"));
}

#[test]
fn fit_save_load_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    // Full-rank data so the dense fits are well posed.
    use rand::SeedableRng;
    let mut r = ChaCha8Rng::seed_from_u64(123);
    let mut content = String::from("x1,x2,x3,x4,x5,y\n");
    for _ in 0..50 {
        let xs: Vec<f64> = (0..5).map(|_| StandardNormal.sample(&mut r)).collect();
        let e: f64 = StandardNormal.sample(&mut r);
        let y = xs.iter().sum::<f64>() + 0.1 * e;
        let cells: Vec<String> = xs.iter().map(|v| format!("{v:.17e}")).collect();
        content.push_str(&format!("{},{y:.17e}\n", cells.join(",")));
    }
    let data = write_file(dir.path(), "d.csv", &content);
    for method in ["ols", "huber", "pls", "prm"] {
        let model_path = dir.path().join(format!("{method}.json"));
        let mut args = vec![
            "fit",
            "--method",
            method,
            "--in",
            data.to_str().unwrap(),
            "--y",
            "y",
            "--out",
            model_path.to_str().unwrap(),
        ];
        if method == "pls" || method == "prm" {
            args.extend_from_slice(&["--components", "3"]);
        }
        assert_eq!(run(&args), 0, "{method}");
        let p1 = dir.path().join(format!("{method}_1.csv"));
        let p2 = dir.path().join(format!("{method}_2.csv"));
        for out in [&p1, &p2] {
            assert_eq!(
                run(&[
                    "predict",
                    "--model",
                    model_path.to_str().unwrap(),
                    "--in",
                    data.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ]),
                0
            );
        }
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }
}
