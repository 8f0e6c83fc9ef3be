//! Input-variable relevance estimators.
//!
//! * ARD: inverse fitted length-scale.
//! * KL: `√(2·KL(p(y*|x) ‖ p(y*|x + Δe_j))) / Δ`, averaged over evaluation points.
//! * VAR: variance of the latent posterior mean along coordinate `j` under the
//!   Gaussian conditional `x_j | x_{-j}`, by Gauss–Hermite quadrature, averaged
//!   over evaluation points.

mod divergence;
mod quadrature;

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{FittedGP, Flavor};
use crate::input_model::{Conditional1D, InputGaussian};
use crate::kernel;

pub use divergence::{kl_bernoulli, kl_gaussian};
pub use quadrature::{gauss_hermite, GaussHermiteRule, MAX_ORDER};

pub const DEFAULT_DELTA: f64 = 1e-4;
pub const DEFAULT_QUAD_ORDER: usize = 32;
/// Perturbation sizes outside this range are known to change KL rankings.
pub const SAFE_DELTA_RANGE: (f64, f64) = (1e-7, 1e-2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ard,
    Kl,
    Var,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ard, Method::Kl, Method::Var];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Ard => "ard",
            Method::Kl => "kl",
            Method::Var => "var",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ard" => Ok(Method::Ard),
            "kl" => Ok(Method::Kl),
            "var" => Ok(Method::Var),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Method parameters recorded alongside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MethodConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictive: Option<Flavor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub method: Method,
    pub aggregate: Vec<f64>,
    /// Evaluation points × variables; exported separately, never inlined in JSON.
    #[serde(skip)]
    pub pointwise: Option<DMatrix<f64>>,
    pub ranking: Vec<usize>,
    pub config: MethodConfig,
}

/// Variable indices by descending score, ties by ascending index.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Scores divided by their maximum (all zeros if the maximum is not positive).
pub fn scale_to_max(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        scores.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; scores.len()]
    }
}

impl RelevanceReport {
    fn from_pointwise(method: Method, pointwise: DMatrix<f64>, config: MethodConfig) -> Self {
        let n = pointwise.nrows() as f64;
        let aggregate: Vec<f64> = pointwise.column_iter().map(|c| c.sum() / n).collect();
        Self {
            method,
            ranking: rank_descending(&aggregate),
            aggregate,
            pointwise: Some(pointwise),
            config,
        }
    }

    pub fn scaled(&self) -> Vec<f64> {
        scale_to_max(&self.aggregate)
    }

    /// 1-based rank of each variable.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.aggregate.len()];
        for (pos, &j) in self.ranking.iter().enumerate() {
            r[j] = pos + 1;
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per variable: `variable,aggregate,scaled,rank`.
    pub fn write_csv<W: Write>(&self, names: &[String], w: W) -> Result<()> {
        self.check_names(names)?;
        let mut wr = csv_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record(["variable", "aggregate", "scaled", "rank"])
            .map_err(io)?;
        let scaled = self.scaled();
        let ranks = self.ranks();
        for j in 0..self.aggregate.len() {
            wr.write_record([
                names[j].clone(),
                self.aggregate[j].to_string(),
                scaled[j].to_string(),
                ranks[j].to_string(),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Pointwise matrix with one column per variable and one row per evaluation point.
    pub fn write_pointwise_csv<W: Write>(&self, names: &[String], w: W) -> Result<()> {
        self.check_names(names)?;
        let pw = self.pointwise.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("{} has no pointwise relevances", self.method))
        })?;
        let mut wr = csv_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut header = vec!["point".to_string()];
        header.extend(names.iter().cloned());
        wr.write_record(&header).map_err(io)?;
        for (i, row) in pw.row_iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wr.write_record(&rec).map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }

    fn check_names(&self, names: &[String]) -> Result<()> {
        if names.len() != self.aggregate.len() {
            return Err(Error::DimensionMismatch {
                expected: self.aggregate.len(),
                got: names.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn ard_relevance(g: &FittedGP) -> RelevanceReport {
    let aggregate: Vec<f64> = g
        .hypers()
        .log_lengthscales
        .iter()
        .map(|l| (-l).exp())
        .collect();
    RelevanceReport {
        method: Method::Ard,
        ranking: rank_descending(&aggregate),
        aggregate,
        pointwise: None,
        config: MethodConfig::default(),
    }
}

fn check_index(g: &FittedGP, x: &[f64], j: usize) -> Result<()> {
    if x.len() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: x.len(),
        });
    }
    if j >= g.p() {
        return Err(Error::IndexOutOfRange {
            index: j,
            dim: g.p(),
        });
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(())
}

/// True when `delta` lies outside the range where KL rankings are stable.
pub fn delta_outside_safe_range(delta: f64) -> bool {
    delta < SAFE_DELTA_RANGE.0 || delta > SAFE_DELTA_RANGE.1
}

/// KL relevance of variable `j` at point `x` under forward perturbation `delta`.
pub fn kl_relevance_point(g: &FittedGP, x: &[f64], j: usize, delta: f64) -> Result<f64> {
    check_index(g, x, j)?;
    check_delta(delta)?;
    kl_point_unchecked(g, x, j, delta)
}

fn kl_point_unchecked(g: &FittedGP, x: &[f64], j: usize, delta: f64) -> Result<f64> {
    let base = g.predict(x, Flavor::Observation)?;
    let mut shifted = x.to_vec();
    shifted[j] += delta;
    let pert = g.predict(&shifted, Flavor::Observation)?;
    let kl = kl_gaussian(&base, &pert)?;
    Ok((2.0 * kl).sqrt() / delta)
}

/// Pointwise and averaged KL relevances over the rows of `x_eval`.
pub fn kl_relevance(g: &FittedGP, x_eval: &DMatrix<f64>, delta: f64) -> Result<RelevanceReport> {
    check_delta(delta)?;
    check_eval(g, x_eval)?;
    if delta_outside_safe_range(delta) {
        log::warn!(
            "delta = {delta:e} is outside [{:e}, {:e}]; KL relevances may be unreliable",
            SAFE_DELTA_RANGE.0,
            SAFE_DELTA_RANGE.1
        );
    }
    let p = g.p();
    let rows: Vec<Vec<f64>> = (0..x_eval.nrows())
        .map(|i| kernel::row_vec(x_eval, i))
        .collect();
    let values: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|x| (0..p).map(|j| kl_point_unchecked(g, x, j, delta)).collect())
        .collect::<Result<_>>()?;
    let pw = DMatrix::from_fn(rows.len(), p, |i, j| values[i][j]);
    Ok(RelevanceReport::from_pointwise(
        Method::Kl,
        pw,
        MethodConfig {
            delta: Some(delta),
            quadrature_order: None,
            predictive: Some(Flavor::Observation),
        },
    ))
}

/// Variance of `f` under `N(m, s²)` by the rule: second moment minus squared
/// first moment, each `π^{-1/2} Σ w_i f(√2 s k_i + m)^{1,2}`.
pub fn gauss_hermite_variance(
    rule: &GaussHermiteRule,
    cond: Conditional1D,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    let inv_sqrt_pi = std::f64::consts::FRAC_2_SQRT_PI * 0.5;
    let scale = std::f64::consts::SQRT_2 * cond.s;
    let values: Vec<f64> = rule.nodes.iter().map(|&k| f(scale * k + cond.m)).collect();
    let mean = inv_sqrt_pi
        * rule
            .weights
            .iter()
            .zip(&values)
            .map(|(w, v)| w * v)
            .sum::<f64>();
    // Centering before squaring is algebraically the same as E[f²] − E[f]²
    // (the weights sum to √π) without the cancellation.
    let var = inv_sqrt_pi
        * rule
            .weights
            .iter()
            .zip(&values)
            .map(|(w, v)| w * (v - mean) * (v - mean))
            .sum::<f64>();
    if var < -1e-12 {
        return Err(Error::NegativeVariance(var));
    }
    Ok(var.max(0.0))
}

/// Latent posterior mean as a function of coordinate `j` alone, other
/// coordinates fixed at `x`. Precomputes the product over the other dimensions.
struct SliceMean {
    offset: f64,
    coef: Vec<f64>,
    centers: Vec<f64>,
    inv_sq: f64,
}

impl SliceMean {
    fn new(g: &FittedGP, x: &[f64], j: usize) -> Self {
        let h = g.hypers();
        let p = g.p();
        let sf2 = (2.0 * h.log_sigma_f).exp();
        let c2 = (2.0 * h.log_const).exp();
        let inv_sq: Vec<f64> = h
            .log_lengthscales
            .iter()
            .map(|l| (-2.0 * l).exp())
            .collect();
        let alpha = g.alpha();
        let xs = g.x();
        let n = g.n();
        let mut coef = Vec::with_capacity(n);
        let mut centers = Vec::with_capacity(n);
        for t in 0..n {
            let mut r2 = 0.0;
            for d in 0..p {
                if d != j {
                    let diff = x[d] - xs[(t, d)];
                    r2 += diff * diff * inv_sq[d];
                }
            }
            coef.push(alpha[t] * sf2 * (-0.5 * r2).exp());
            centers.push(xs[(t, j)]);
        }
        Self {
            offset: c2 * alpha.sum(),
            coef,
            centers,
            inv_sq: inv_sq[j],
        }
    }

    fn eval(&self, z: f64) -> f64 {
        self.offset
            + self
                .coef
                .iter()
                .zip(&self.centers)
                .map(|(a, c)| {
                    let d = z - c;
                    a * (-0.5 * d * d * self.inv_sq).exp()
                })
                .sum::<f64>()
    }
}

/// VAR relevance of variable `j` at point `x`.
pub fn var_relevance_point(
    g: &FittedGP,
    im: &InputGaussian,
    x: &[f64],
    j: usize,
    rule: &GaussHermiteRule,
) -> Result<f64> {
    check_index(g, x, j)?;
    if im.dim() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: im.dim(),
        });
    }
    var_point_unchecked(g, im, x, j, rule)
}

fn var_point_unchecked(
    g: &FittedGP,
    im: &InputGaussian,
    x: &[f64],
    j: usize,
    rule: &GaussHermiteRule,
) -> Result<f64> {
    let cond = im.conditional_1d(j, x)?;
    let slice = SliceMean::new(g, x, j);
    gauss_hermite_variance(rule, cond, |z| slice.eval(z))
}

/// Pointwise and averaged VAR relevances over the rows of `x_eval`.
pub fn var_relevance(
    g: &FittedGP,
    im: &InputGaussian,
    x_eval: &DMatrix<f64>,
    rule: &GaussHermiteRule,
) -> Result<RelevanceReport> {
    check_eval(g, x_eval)?;
    if im.dim() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: im.dim(),
        });
    }
    let p = g.p();
    let rows: Vec<Vec<f64>> = (0..x_eval.nrows())
        .map(|i| kernel::row_vec(x_eval, i))
        .collect();
    let values: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|x| {
            (0..p)
                .map(|j| var_point_unchecked(g, im, x, j, rule))
                .collect()
        })
        .collect::<Result<_>>()?;
    let pw = DMatrix::from_fn(rows.len(), p, |i, j| values[i][j]);
    Ok(RelevanceReport::from_pointwise(
        Method::Var,
        pw,
        MethodConfig {
            delta: None,
            quadrature_order: Some(rule.order()),
            predictive: Some(Flavor::Latent),
        },
    ))
}

fn check_eval(g: &FittedGP, x_eval: &DMatrix<f64>) -> Result<()> {
    if x_eval.ncols() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: x_eval.ncols(),
        });
    }
    if x_eval.nrows() == 0 {
        return Err(Error::InvalidArgument("no evaluation points".into()));
    }
    Ok(())
}

/// Runs `method` on `g` with evaluation points `x_eval` (usually the training
/// inputs). The VAR input model is estimated from the training inputs.
pub fn relevance(
    g: &FittedGP,
    method: Method,
    x_eval: &DMatrix<f64>,
    delta: f64,
    quad_order: usize,
) -> Result<RelevanceReport> {
    match method {
        Method::Ard => Ok(ard_relevance(g)),
        Method::Kl => kl_relevance(g, x_eval, delta),
        Method::Var => {
            let im = InputGaussian::estimate(g.x())?;
            let rule = gauss_hermite(quad_order)?;
            var_relevance(g, &im, x_eval, &rule)
        }
    }
}

#[cfg(test)]
mod tests;
