use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gp-relevance"))
        .args(args)
        .env("GP_RELEVANCE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn toygen(out: &Path, n: usize, extra: &[&str]) {
    let n = n.to_string();
    let mut args = vec!["toygen", "--n", &n, "--seed", "3", "--out", p(out)];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn csv_shape(path: &Path) -> (usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    (lines.len() - 1, lines[0].split(',').count())
}

#[test]
fn missing_target_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "fit",
        "--data",
        "x.csv",
        "--out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn unknown_method_is_a_usage_error() {
    let o = run(&["rank", "--model", "m.json", "--method", "lasso"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_numeric_cell_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "a,b,y\n1,2,3\n4,oops,6\n7,8,9\n").unwrap();
    let out = dir.path().join("m.json");
    let o = run(&["fit", "--data", p(&data), "--target", "y", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(3));
    let msg = stderr(&o);
    assert!(msg.contains("row 2") && msg.contains("'b'"), "{msg}");
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn missing_data_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "fit",
        "--data",
        p(&dir.path().join("absent.csv")),
        "--target",
        "y",
        "--out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn toygen_shapes_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    toygen(&a, 300, &["--dist", "uniform"]);
    toygen(&b, 300, &["--dist", "uniform"]);
    assert_eq!(csv_shape(&a), (300, 9));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(dir.path().join("a.csv.manifest.json").exists());

    let wide = dir.path().join("wide.csv");
    toygen(&wide, 50, &["--dist", "normal", "--irrelevant", "42"]);
    assert_eq!(csv_shape(&wide), (50, 51));
    let header = fs::read_to_string(&wide).unwrap();
    assert!(header.starts_with("x1,x2,"));
    assert!(header.lines().next().unwrap().ends_with(",x50,y"));
}

#[test]
fn toygen_rejects_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    assert_eq!(
        run(&["toygen", "--dist", "cauchy", "--out", p(&out)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["toygen", "--n", "0", "--out", p(&out)]).status.code(),
        Some(2)
    );
    assert!(!out.exists());
}

#[test]
fn fit_then_rank_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    toygen(&data, 60, &["--dist", "normal"]);
    let model = dir.path().join("model.json");
    let o = run(&[
        "fit",
        "--data",
        p(&data),
        "--target",
        "y",
        "--restarts",
        "2",
        "--out",
        p(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("model.json.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["seed"], 0);
    let hash = manifest["input_hashes"][p(&data)].as_str().unwrap();
    assert_eq!(hash.len(), 64);

    let doc =
        gp_relevance::gp::ModelDocument::from_json(&fs::read_to_string(&model).unwrap()).unwrap();
    assert!(doc.preprocessing.is_some());
    assert_eq!(doc.column_names.len(), 8);
    doc.to_model().unwrap();

    let report = dir.path().join("ard.csv");
    let o = run(&[
        "rank",
        "--model",
        p(&model),
        "--method",
        "ard",
        "--out",
        p(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&report).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "variable,aggregate,scaled,rank");
    assert_eq!(rows.len(), 9);
    let max_scaled = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert_eq!(max_scaled, 1.0);

    let json = dir.path().join("var.json");
    let pw = dir.path().join("var_points.csv");
    let o = run(&[
        "rank",
        "--model",
        p(&model),
        "--method",
        "var",
        "--quad-order",
        "16",
        "--pointwise",
        p(&pw),
        "--out",
        p(&json),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["aggregate"].as_array().unwrap().len(), 8);
    assert_eq!(csv_shape(&pw), (60, 9));

    let o = run(&["rank", "--model", p(&model), "--method", "kl"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 9);
}

#[test]
fn tiny_delta_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    toygen(&data, 40, &[]);
    let model = dir.path().join("m.json");
    assert!(run(&[
        "fit",
        "--data",
        p(&data),
        "--target",
        "y",
        "--restarts",
        "1",
        "--out",
        p(&model)
    ])
    .status
    .success());
    let o = run(&[
        "rank",
        "--model",
        p(&model),
        "--method",
        "kl",
        "--delta",
        "1e-9",
    ]);
    assert!(o.status.success());
    let msg = stderr(&o);
    assert!(msg.contains("warning") && msg.contains("outside"), "{msg}");
    assert_eq!(msg.matches("outside").count(), 1, "{msg}");

    let o = run(&["rank", "--model", p(&model), "--method", "kl"]);
    assert!(!stderr(&o).contains("outside"));
}

#[test]
fn kl_and_var_agree_on_single_signal() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("single.csv");
    let mut r = ChaCha8Rng::seed_from_u64(17);
    let mut text = String::from("a,b,c,y\n");
    for _ in 0..80 {
        let x: Vec<f64> = (0..3).map(|_| r.sample(StandardNormal)).collect();
        let noise: f64 = r.sample(StandardNormal);
        let y = 2.0 * (1.2 * x[1]).sin() + 0.1 * noise;
        text.push_str(&format!("{},{},{},{}\n", x[0], x[1], x[2], y));
    }
    fs::write(&data, text).unwrap();
    let model = dir.path().join("m.json");
    assert!(run(&[
        "fit",
        "--data",
        p(&data),
        "--target",
        "y",
        "--out",
        p(&model)
    ])
    .status
    .success());
    let top = |method: &str| {
        let o = run(&["rank", "--model", p(&model), "--method", method]);
        assert!(o.status.success());
        let out = String::from_utf8(o.stdout).unwrap();
        out.lines()
            .skip(1)
            .find(|l| l.ends_with(",1"))
            .map(|l| l.split(',').next().unwrap().to_string())
            .unwrap()
    };
    assert_eq!(top("kl"), "b");
    assert_eq!(top("var"), "b");
    assert_eq!(top("ard"), "b");
}

#[test]
fn corrupted_model_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::write(&model, "{\"n\": 3}").unwrap();
    let o = run(&["rank", "--model", p(&model), "--method", "ard"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn benchmark_smoke_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    toygen(&data, 70, &["--dist", "uniform"]);
    let bench = |out: &Path| {
        let o = run(&[
            "benchmark",
            "--data",
            p(&data),
            "--target",
            "y",
            "--methods",
            "ard,kl,var",
            "--n-train",
            "50",
            "--resamples",
            "2",
            "--seed",
            "5",
            "--restarts",
            "1",
            "--sizes",
            "1,2,8",
            "--out-dir",
            p(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    bench(&a);
    bench(&b);
    for f in ["curves.csv", "entropy.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert_eq!(csv_shape(&a.join("curves.csv")), (3 * 2 * 3, 6));
    assert_eq!(csv_shape(&a.join("entropy.csv")), (3 * 8, 3));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "benchmark");
    assert_eq!(m["config"]["resamples"], 2);
}

#[test]
fn benchmark_rejects_oversized_training_set() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    toygen(&data, 30, &[]);
    let o = run(&[
        "benchmark",
        "--data",
        p(&data),
        "--target",
        "y",
        "--n-train",
        "30",
        "--resamples",
        "1",
        "--out-dir",
        p(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_resample_benchmark_completes_without_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    toygen(&data, 50, &[]);
    let out = dir.path().join("out");
    let o = run(&[
        "benchmark",
        "--data",
        p(&data),
        "--target",
        "y",
        "--methods",
        "ard,ard",
        "--n-train",
        "35",
        "--resamples",
        "1",
        "--restarts",
        "1",
        "--sizes",
        "1",
        "--out-dir",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv_shape(&out.join("curves.csv")), (2, 6));
    assert_eq!(csv_shape(&out.join("entropy.csv")), (0, 3));
    let m = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(m.contains("entropy for method ard"), "{m}");
}
