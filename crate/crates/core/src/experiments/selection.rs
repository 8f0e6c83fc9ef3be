//! Forward-selection curves: rank variables on the full model, refit
//! submodels on the top-k variables, and score them on held-out data.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mlpd, mse};
use crate::dataset::{Dataset, Standardization};
use crate::error::{Error, Result};
use crate::gp::{fit, FittedGP, HyperPriors, OptimizerConfig};
use crate::relevance::{self, Method, DEFAULT_DELTA, DEFAULT_QUAD_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    Mlpd,
    Mse,
}

impl UtilityKind {
    pub fn name(&self) -> &'static str {
        match self {
            UtilityKind::Mlpd => "mlpd",
            UtilityKind::Mse => "mse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub n_train: usize,
    pub n_resamples: usize,
    pub priors: Option<HyperPriors>,
    pub optimizer: OptimizerConfig,
    pub delta: f64,
    pub quad_order: usize,
    pub seed: u64,
    /// Submodel sizes to evaluate; `None` means `1..=p`.
    pub sizes: Option<Vec<usize>>,
}

impl SelectionConfig {
    pub fn new(n_train: usize, n_resamples: usize, seed: u64) -> Self {
        Self {
            n_train,
            n_resamples,
            priors: Some(HyperPriors::default()),
            optimizer: OptimizerConfig {
                seed,
                ..OptimizerConfig::default()
            },
            delta: DEFAULT_DELTA,
            quad_order: DEFAULT_QUAD_ORDER,
            seed,
            sizes: None,
        }
    }
}

/// Utility of top-k submodels against k, summarized over resamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCurve {
    pub method: Method,
    pub utility: UtilityKind,
    pub sizes: Vec<usize>,
    pub mean: Vec<f64>,
    /// Half-width of the normal-approximation 95% interval (1.96·SE).
    pub ci_half_width: Vec<f64>,
    /// Resamples that contributed at each size.
    pub count: Vec<usize>,
    /// `values[r][s]`: utility of resample `r` at `sizes[s]`, NaN where the fit failed.
    pub values: Vec<Vec<f64>>,
}

/// Everything produced by one forward-selection run over several methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRun {
    pub curves: Vec<SelectionCurve>,
    /// `rankings[m][r]`: ranking by `methods[m]` on resample `r` (completed resamples only).
    pub rankings: Vec<Vec<Vec<usize>>>,
    pub methods: Vec<Method>,
    /// Resample indices dropped because the full model could not be fitted.
    pub dropped_resamples: Vec<usize>,
    /// Number of submodel fits that failed.
    pub failed_submodels: usize,
    /// Method-level failures on a completed resample, as `(resample, method, message)`.
    pub method_failures: Vec<(usize, Method, String)>,
}

struct ResampleOutcome {
    rankings: Vec<Option<Vec<usize>>>,
    // [method][size] -> (mlpd, mse)
    utilities: Vec<Vec<Option<(f64, f64)>>>,
    failed_submodels: usize,
    method_errors: Vec<(Method, String)>,
}

/// Fits a GP on standardized inputs and centered targets; returns the model
/// and the statistics used.
pub fn fit_standardized(
    train: &Dataset,
    priors: Option<&HyperPriors>,
    opt: &OptimizerConfig,
) -> Result<(FittedGP, Standardization)> {
    let s = Standardization::fit(train);
    let t = s.transform(train);
    let g = fit(&t.x, &t.y, priors, opt)?;
    Ok((g, s))
}

fn summarize(values: &[Vec<f64>], n_sizes: usize) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let mut mean = Vec::with_capacity(n_sizes);
    let mut ci = Vec::with_capacity(n_sizes);
    let mut count = Vec::with_capacity(n_sizes);
    for s in 0..n_sizes {
        let ok: Vec<f64> = values
            .iter()
            .map(|r| r[s])
            .filter(|v| v.is_finite())
            .collect();
        let m = ok.len();
        count.push(m);
        if m == 0 {
            mean.push(f64::NAN);
            ci.push(f64::NAN);
            continue;
        }
        let mu = ok.iter().sum::<f64>() / m as f64;
        let half = if m > 1 {
            let var = ok.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m as f64 - 1.0);
            1.96 * (var / m as f64).sqrt()
        } else {
            0.0
        };
        mean.push(mu);
        ci.push(half);
    }
    (mean, ci, count)
}

fn run_resample(
    data: &Dataset,
    methods: &[Method],
    cfg: &SelectionConfig,
    sizes: &[usize],
    r: usize,
) -> Result<ResampleOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(r as u64 + 1);
    let mut idx: Vec<usize> = (0..data.n()).collect();
    idx.shuffle(&mut rng);
    let (tr, te) = idx.split_at(cfg.n_train);
    let train = data.select_rows(tr);
    let test = data.select_rows(te);

    let priors = cfg.priors.as_ref();
    let (full, stats) = fit_standardized(&train, priors, &cfg.optimizer)?;
    let train_std = stats.transform(&train);
    let p = data.p();

    let mut cache: BTreeMap<Vec<usize>, Option<(f64, f64)>> = BTreeMap::new();
    let full_key: Vec<usize> = (0..p).collect();
    let full_util = (
        mlpd(&full, Some(&stats), &test)?,
        mse(&full, Some(&stats), &test)?,
    );
    cache.insert(full_key, Some(full_util));

    let mut rankings = Vec::with_capacity(methods.len());
    let mut utilities = Vec::with_capacity(methods.len());
    let mut failed = 0;
    let mut method_errors = Vec::new();
    for &m in methods {
        let report = match relevance::relevance(&full, m, full.x(), cfg.delta, cfg.quad_order) {
            Ok(rep) => rep,
            Err(e) => {
                log::warn!("resample {r}: {m} relevance failed: {e}");
                method_errors.push((m, e.to_string()));
                rankings.push(None);
                utilities.push(vec![None; sizes.len()]);
                continue;
            }
        };
        let mut row = Vec::with_capacity(sizes.len());
        for &k in sizes {
            let mut vars: Vec<usize> = report.ranking[..k].to_vec();
            vars.sort_unstable();
            if let Some(u) = cache.get(&vars) {
                row.push(*u);
                continue;
            }
            let sub_stats = stats.select_columns(&vars);
            let sub_x = train_std.x.select_columns(&vars);
            let u = fit(&sub_x, &train_std.y, priors, &cfg.optimizer).and_then(|g| {
                let sub_test = test.select_columns(&vars);
                Ok((
                    mlpd(&g, Some(&sub_stats), &sub_test)?,
                    mse(&g, Some(&sub_stats), &sub_test)?,
                ))
            });
            let u = match u {
                Ok(u) => Some(u),
                Err(e) => {
                    log::warn!("resample {r}: submodel {vars:?} failed: {e}");
                    failed += 1;
                    None
                }
            };
            cache.insert(vars, u);
            row.push(u);
        }
        rankings.push(Some(report.ranking));
        utilities.push(row);
    }
    Ok(ResampleOutcome {
        rankings,
        utilities,
        failed_submodels: failed,
        method_errors,
    })
}

/// Runs the forward-selection protocol for every method on shared splits and
/// full-model fits.
pub fn forward_selection(
    data: &Dataset,
    methods: &[Method],
    cfg: &SelectionConfig,
) -> Result<SelectionRun> {
    let p = data.p();
    if cfg.n_train >= data.n() {
        return Err(Error::InvalidArgument(format!(
            "n_train = {} must be smaller than the {} available rows",
            cfg.n_train,
            data.n()
        )));
    }
    if cfg.n_train < 2 || cfg.n_resamples == 0 || methods.is_empty() {
        return Err(Error::InvalidArgument(
            "need n_train ≥ 2, at least one resample and one method".into(),
        ));
    }
    let sizes: Vec<usize> = match &cfg.sizes {
        Some(s) => s.clone(),
        None => (1..=p).collect(),
    };
    if sizes.iter().any(|&k| k == 0 || k > p) {
        return Err(Error::InvalidArgument(format!("sizes must lie in 1..={p}")));
    }

    let outcomes: Vec<Result<ResampleOutcome>> = (0..cfg.n_resamples)
        .into_par_iter()
        .map(|r| run_resample(data, methods, cfg, &sizes, r))
        .collect();

    let mut dropped = Vec::new();
    let mut failed_submodels = 0;
    let mut method_failures = Vec::new();
    let mut rankings = vec![Vec::new(); methods.len()];
    let mut mlpd_vals = vec![Vec::new(); methods.len()];
    let mut mse_vals = vec![Vec::new(); methods.len()];
    for (r, out) in outcomes.into_iter().enumerate() {
        let out = match out {
            Ok(o) => o,
            Err(e) => {
                log::warn!("resample {r} dropped: {e}");
                dropped.push(r);
                continue;
            }
        };
        failed_submodels += out.failed_submodels;
        for (m, msg) in out.method_errors {
            method_failures.push((r, m, msg));
        }
        for (mi, (rank, util)) in out.rankings.into_iter().zip(out.utilities).enumerate() {
            if let Some(rank) = rank {
                rankings[mi].push(rank);
            }
            let nan = f64::NAN;
            mlpd_vals[mi].push(util.iter().map(|u| u.map_or(nan, |u| u.0)).collect());
            mse_vals[mi].push(util.iter().map(|u| u.map_or(nan, |u| u.1)).collect());
        }
    }

    let mut curves = Vec::new();
    for (mi, &m) in methods.iter().enumerate() {
        for (kind, vals) in [
            (UtilityKind::Mlpd, &mlpd_vals[mi]),
            (UtilityKind::Mse, &mse_vals[mi]),
        ] {
            let (mean, ci, count) = summarize(vals, sizes.len());
            curves.push(SelectionCurve {
                method: m,
                utility: kind,
                sizes: sizes.clone(),
                mean,
                ci_half_width: ci,
                count,
                values: vals.clone(),
            });
        }
    }
    Ok(SelectionRun {
        curves,
        rankings,
        methods: methods.to_vec(),
        dropped_resamples: dropped,
        failed_submodels,
        method_failures,
    })
}

/// Single-method convenience wrapper; returns the MLPD curve.
pub fn forward_selection_curve(
    data: &Dataset,
    method: Method,
    cfg: &SelectionConfig,
) -> Result<SelectionCurve> {
    let run = forward_selection(data, &[method], cfg)?;
    run.curves
        .into_iter()
        .find(|c| c.utility == UtilityKind::Mlpd)
        .ok_or_else(|| Error::InvalidArgument("no curve produced".into()))
}
