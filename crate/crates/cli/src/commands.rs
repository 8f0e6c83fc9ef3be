use std::path::{Path, PathBuf};
use std::time::Instant;

use gp_relevance::experiments::{
    fit_standardized, forward_selection, generate_toy, ranking_entropy, write_curves_csv,
    write_entropy_csv, EntropyProfile, SelectionConfig, ToyConfig,
};
use gp_relevance::gp::ModelDocument;
use gp_relevance::relevance::{delta_outside_safe_range, relevance, SAFE_DELTA_RANGE};
use gp_relevance::{Dataset, Method, OptimizerConfig};

use crate::output::{commit_files, manifest_path, RunManifest};
use crate::{BenchmarkArgs, Failure, FitArgs, RankArgs, ToygenArgs};

fn config_json<T: serde::Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn load_dataset(manifest: &mut RunManifest, path: &Path, target: &str) -> Result<Dataset, Failure> {
    let bytes = manifest.read_input(path)?;
    Dataset::read_csv(bytes.as_slice(), target)
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> gp_relevance::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Failure::data(e.to_string()))?;
    Ok(buf)
}

fn finish(
    mut manifest: RunManifest,
    mut files: Vec<(PathBuf, Vec<u8>)>,
    manifest_file: PathBuf,
) -> Result<(), Failure> {
    manifest.outputs = files.iter().map(|(p, _)| p.display().to_string()).collect();
    files.push((manifest_file, manifest.to_bytes()));
    commit_files(&files)
}

pub fn fit(a: FitArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("fit", config_json(&a), Some(a.seed));
    let priors = a.priors.resolve()?;
    if a.restarts == 0 {
        return Err(Failure::usage("--restarts must be at least 1"));
    }
    let data = load_dataset(&mut manifest, &a.data, &a.target)?;
    let opt = OptimizerConfig {
        restarts: a.restarts,
        seed: a.seed,
        ..OptimizerConfig::default()
    };
    let (g, std) = fit_standardized(&data, priors.as_ref(), &opt).map_err(Failure::from_compute)?;
    manifest.time("fit", start);

    let doc = ModelDocument::from_model(&g, data.column_names.clone(), Some(std));
    let mut json = doc.to_json().map_err(|e| Failure::data(e.to_string()))?;
    json.push('\n');
    let manifest_file = manifest_path(&a.out);
    finish(manifest, vec![(a.out, json.into_bytes())], manifest_file)
}

pub fn rank(a: RankArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("rank", config_json(&a), None);
    if !(a.delta > 0.0) {
        return Err(Failure::usage("--delta must be positive"));
    }
    if a.method == Method::Kl && delta_outside_safe_range(a.delta) {
        eprintln!(
            "warning: --delta {:e} is outside [{:e}, {:e}]; KL relevances may be unreliable",
            a.delta, SAFE_DELTA_RANGE.0, SAFE_DELTA_RANGE.1
        );
    }
    let bytes = manifest.read_input(&a.model)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Failure::data(format!("{} is not UTF-8", a.model.display())))?;
    let doc = ModelDocument::from_json(&text).map_err(Failure::from_input)?;
    let g = doc.to_model().map_err(Failure::from_input)?;

    let report =
        relevance(&g, a.method, g.x(), a.delta, a.quad_order).map_err(Failure::from_compute)?;
    manifest.time("rank", start);

    let names = &doc.column_names;
    let mut files = Vec::new();
    if let Some(path) = &a.pointwise {
        if report.pointwise.is_none() {
            return Err(Failure::usage(format!(
                "method {} has no pointwise relevances",
                a.method
            )));
        }
        files.push((
            path.clone(),
            to_bytes(|b| report.write_pointwise_csv(names, b))?,
        ));
    }
    match &a.out {
        Some(path) => {
            let is_json = path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("json"));
            let body = if is_json {
                let mut s = report.to_json().map_err(|e| Failure::data(e.to_string()))?;
                s.push('\n');
                s.into_bytes()
            } else {
                to_bytes(|b| report.write_csv(names, b))?
            };
            files.push((path.clone(), body));
            let manifest_file = manifest_path(path);
            finish(manifest, files, manifest_file)
        }
        None => {
            commit_files(&files)?;
            report
                .write_csv(names, std::io::stdout().lock())
                .map_err(|e| Failure::data(e.to_string()))
        }
    }
}

pub fn toygen(a: ToygenArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let manifest_cfg = config_json(&a);
    let mut cfg = ToyConfig::new(a.n, a.dist, a.seed).with_irrelevant(a.irrelevant);
    cfg.noise_sd = a.noise_sd;
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let data = generate_toy(&cfg).map_err(|e| Failure::usage(e.to_string()))?;
    let body = to_bytes(|b| data.write_csv(b))?;
    let mut manifest = RunManifest::new("toygen", manifest_cfg, Some(a.seed));
    manifest.time("generate", start);
    let manifest_file = manifest_path(&a.out);
    finish(manifest, vec![(a.out, body)], manifest_file)
}

pub fn benchmark(a: BenchmarkArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("benchmark", config_json(&a), Some(a.seed));
    let priors = a.priors.resolve()?;
    if a.restarts == 0 {
        return Err(Failure::usage("--restarts must be at least 1"));
    }
    if a.methods.contains(&Method::Kl) && delta_outside_safe_range(a.delta) {
        eprintln!(
            "warning: --delta {:e} is outside [{:e}, {:e}]; KL relevances may be unreliable",
            a.delta, SAFE_DELTA_RANGE.0, SAFE_DELTA_RANGE.1
        );
    }
    let mut methods: Vec<Method> = Vec::new();
    for &m in &a.methods {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    let data = load_dataset(&mut manifest, &a.data, &a.target)?;
    if !a.out_dir.is_dir() {
        std::fs::create_dir_all(&a.out_dir)
            .map_err(|e| Failure::data(format!("cannot create {}: {e}", a.out_dir.display())))?;
    }

    let mut cfg = SelectionConfig::new(a.n_train, a.resamples, a.seed);
    cfg.priors = priors;
    cfg.optimizer.restarts = a.restarts;
    cfg.delta = a.delta;
    cfg.quad_order = a.quad_order;
    cfg.sizes = a.sizes.clone();
    let run = forward_selection(&data, &methods, &cfg).map_err(Failure::from_compute)?;
    manifest.time("forward_selection", start);

    for &r in &run.dropped_resamples {
        manifest
            .failures
            .push(format!("resample {r}: full model could not be fitted"));
    }
    if run.failed_submodels > 0 {
        manifest
            .failures
            .push(format!("{} submodel fits failed", run.failed_submodels));
    }
    for (r, m, msg) in &run.method_failures {
        manifest
            .failures
            .push(format!("resample {r}, method {m}: {msg}"));
    }

    let mut completed = Vec::new();
    let mut profiles = Vec::new();
    for (mi, &m) in run.methods.iter().enumerate() {
        let rankings = &run.rankings[mi];
        if rankings.is_empty() {
            manifest
                .failures
                .push(format!("method {m} produced no rankings"));
            continue;
        }
        completed.push(m);
        match ranking_entropy(rankings) {
            Ok(profile) => profiles.push(EntropyProfile {
                method: Some(m),
                ..profile
            }),
            Err(e) => manifest
                .failures
                .push(format!("entropy for method {m}: {e}")),
        }
    }
    if completed.is_empty() {
        let manifest_file = a.out_dir.join("manifest.json");
        finish(manifest, Vec::new(), manifest_file)?;
        return Err(Failure {
            code: 5,
            message: "no method completed; see manifest.json".into(),
        });
    }
    let curves: Vec<_> = run
        .curves
        .iter()
        .filter(|c| completed.contains(&c.method))
        .cloned()
        .collect();
    let files = vec![
        (
            a.out_dir.join("curves.csv"),
            to_bytes(|b| write_curves_csv(&curves, b))?,
        ),
        (
            a.out_dir.join("entropy.csv"),
            to_bytes(|b| write_entropy_csv(&profiles, b))?,
        ),
    ];
    manifest.time("total", start);
    let manifest_file = a.out_dir.join("manifest.json");
    finish(manifest, files, manifest_file)
}
