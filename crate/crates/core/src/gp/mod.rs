//! Exact GP regression with a Gaussian likelihood and zero prior mean.
//!
//! [`fit`] maximizes the hyperparameter log-posterior (or the log marginal
//! likelihood when no priors are given) and caches one Cholesky factor of
//! `K_y = K + σ_n²I` together with `α = K_y⁻¹y`; every prediction reuses them.

mod io;
mod optim;
mod priors;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, KernelHypers};
use crate::linalg::{cholesky, JitterPolicy, SpdFactor};

pub use io::{ModelDocument, NaturalHypers};
pub use optim::{bfgs, Minimum, OptimizerConfig, Termination};
pub use priors::HyperPriors;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Distribution of the noiseless function value.
    Latent,
    /// Distribution of a new noisy observation.
    Observation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPredictive {
    pub mean: f64,
    pub variance: f64,
    pub flavor: Flavor,
}

impl GaussianPredictive {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Value and gradient of an objective over the flat log-hyper vector.
#[derive(Debug, Clone)]
pub struct ValueGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

struct Posterior {
    factor: SpdFactor,
    alpha: DVector<f64>,
}

fn check_data(h: &KernelHypers, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.ncols() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: x.ncols(),
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite training data".into()));
    }
    Ok(())
}

fn noisy_gram(h: &KernelHypers, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut k = kernel::kernel_matrix(h, x, None)?;
    let s2 = (2.0 * h.log_sigma_n).exp();
    for i in 0..k.nrows() {
        k[(i, i)] += s2;
    }
    Ok(k)
}

fn condition(h: &KernelHypers, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Posterior> {
    let k = noisy_gram(h, x)?;
    let factor = cholesky(&k, &JitterPolicy::default())?;
    let alpha = factor.solve(y)?;
    Ok(Posterior { factor, alpha })
}

fn lml_with_rows(
    h: &KernelHypers,
    x: &DMatrix<f64>,
    rows: &[f64],
    y: &DVector<f64>,
) -> Result<ValueGrad> {
    let n = y.len();
    let post = condition(h, x, y)?;
    let value = -0.5 * y.dot(&post.alpha) - 0.5 * post.factor.log_det() - 0.5 * n as f64 * LN_2PI;

    // W = ααᵀ − K_y⁻¹; ∂/∂θ = ½ tr(W ∂K_y/∂θ)
    let mut w = post.factor.inverse();
    for j in 0..n {
        let aj = post.alpha[j];
        for i in 0..n {
            w[(i, j)] = post.alpha[i] * aj - w[(i, j)];
        }
    }
    let mut grad = kernel::half_trace_products(h, rows, &w);
    grad.push((2.0 * h.log_sigma_n).exp() * w.trace());
    Ok(ValueGrad { value, grad })
}

/// `log p(y | X, θ)` and its gradient over the log-hypers.
pub fn log_marginal_likelihood(
    h: &KernelHypers,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<ValueGrad> {
    check_data(h, x, y)?;
    if y.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 training points".into(),
        ));
    }
    lml_with_rows(h, x, &kernel::rows_flat(x), y)
}

/// Log marginal likelihood plus the log-scale hyperprior densities.
pub fn log_posterior(
    h: &KernelHypers,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    priors: &HyperPriors,
) -> Result<ValueGrad> {
    let mut vg = log_marginal_likelihood(h, x, y)?;
    let (lp, lg) = priors.log_density(h);
    vg.value += lp;
    for (g, d) in vg.grad.iter_mut().zip(lg) {
        *g += d;
    }
    Ok(vg)
}

fn objective(
    h: &KernelHypers,
    x: &DMatrix<f64>,
    rows: &[f64],
    y: &DVector<f64>,
    priors: Option<&HyperPriors>,
) -> Result<ValueGrad> {
    let mut vg = lml_with_rows(h, x, rows, y)?;
    if let Some(pr) = priors {
        let (lp, lg) = pr.log_density(h);
        vg.value += lp;
        for (g, d) in vg.grad.iter_mut().zip(lg) {
            *g += d;
        }
    }
    Ok(vg)
}

/// Trained model: data, MAP hyperparameters and the cached factorization.
#[derive(Debug, Clone)]
pub struct FittedGP {
    x: DMatrix<f64>,
    rows: Vec<f64>,
    y: DVector<f64>,
    hypers: KernelHypers,
    priors: Option<HyperPriors>,
    factor: SpdFactor,
    alpha: DVector<f64>,
    log_posterior_at_map: f64,
}

impl FittedGP {
    /// Conditions on `(x, y)` at fixed hyperparameters.
    pub fn from_hypers(
        x: DMatrix<f64>,
        y: DVector<f64>,
        hypers: KernelHypers,
        priors: Option<HyperPriors>,
    ) -> Result<Self> {
        check_data(&hypers, &x, &y)?;
        if !hypers.is_valid() {
            return Err(Error::InvalidArgument(format!(
                "invalid hyperparameters {hypers:?}"
            )));
        }
        let rows = kernel::rows_flat(&x);
        let post = condition(&hypers, &x, &y)?;
        let n = y.len();
        let mut value =
            -0.5 * y.dot(&post.alpha) - 0.5 * post.factor.log_det() - 0.5 * n as f64 * LN_2PI;
        if let Some(pr) = &priors {
            value += pr.log_density(&hypers).0;
        }
        Ok(Self {
            x,
            rows,
            y,
            hypers,
            priors,
            factor: post.factor,
            alpha: post.alpha,
            log_posterior_at_map: value,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn hypers(&self) -> &KernelHypers {
        &self.hypers
    }

    pub fn priors(&self) -> Option<&HyperPriors> {
        self.priors.as_ref()
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn log_posterior_at_map(&self) -> f64 {
        self.log_posterior_at_map
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    fn check_point(&self, x_star: &[f64]) -> Result<()> {
        if x_star.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: x_star.len(),
            });
        }
        Ok(())
    }

    /// Posterior mean of the latent function, `k_*ᵀα`.
    pub fn predict_mean(&self, x_star: &[f64]) -> Result<f64> {
        self.check_point(x_star)?;
        Ok(self.mean_unchecked(x_star))
    }

    pub(crate) fn mean_unchecked(&self, x_star: &[f64]) -> f64 {
        kernel::cross_cov(&self.hypers, &self.rows, x_star).dot(&self.alpha)
    }

    pub fn predict(&self, x_star: &[f64], flavor: Flavor) -> Result<GaussianPredictive> {
        self.check_point(x_star)?;
        let mut k = kernel::cross_cov(&self.hypers, &self.rows, x_star);
        let mean = k.dot(&self.alpha);
        let prior_var = (2.0 * self.hypers.log_const).exp() + (2.0 * self.hypers.log_sigma_f).exp();
        self.factor.forward_solve_in_place(k.as_mut_slice());
        let mut variance = prior_var - k.norm_squared();
        if variance < 0.0 {
            if variance < -1e-10 * prior_var.max(1.0) {
                log::warn!("negative latent variance {variance:e} clamped to zero");
            }
            variance = 0.0;
        }
        if flavor == Flavor::Observation {
            variance += (2.0 * self.hypers.log_sigma_n).exp();
        }
        Ok(GaussianPredictive {
            mean,
            variance,
            flavor,
        })
    }

    pub fn predict_batch(
        &self,
        x_star: &DMatrix<f64>,
        flavor: Flavor,
    ) -> Result<Vec<GaussianPredictive>> {
        if x_star.ncols() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: x_star.ncols(),
            });
        }
        let rows = kernel::rows_flat(x_star);
        rows.chunks_exact(self.p().max(1))
            .take(x_star.nrows())
            .map(|r| self.predict(r, flavor))
            .collect()
    }
}

/// Fits hyperparameters by multi-restart BFGS on the log-posterior (log
/// marginal likelihood when `priors` is `None`) and returns the best restart.
pub fn fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    priors: Option<&HyperPriors>,
    cfg: &OptimizerConfig,
) -> Result<FittedGP> {
    let p = x.ncols();
    if y.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 training points".into(),
        ));
    }
    if let Some(pr) = priors {
        pr.validate()?;
    }
    let template = KernelHypers::from_vec(&vec![0.0; p + 3])?;
    check_data(&template, x, y)?;
    if x.nrows() <= p {
        log::warn!("n = {} is not larger than p = {p}", x.nrows());
    }
    let rows = kernel::rows_flat(x);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(init) = &cfg.initial {
        if init.len() != p + 3 {
            return Err(Error::DimensionMismatch {
                expected: p + 3,
                got: init.len(),
            });
        }
        starts.push(init.clone());
    }
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64);
        starts.push(
            (0..p + 3)
                .map(|_| rng.gen_range(-cfg.init_range..=cfg.init_range))
                .collect(),
        );
    }
    if starts.is_empty() {
        return Err(Error::InvalidArgument("no restarts requested".into()));
    }

    let bound = cfg.log_bound;
    let neg = |theta: &[f64]| -> Option<(f64, Vec<f64>)> {
        if theta.iter().any(|v| !v.is_finite() || v.abs() > bound) {
            return None;
        }
        let h = KernelHypers::from_vec(theta).ok()?;
        let vg = objective(&h, x, &rows, y, priors).ok()?;
        Some((-vg.value, vg.grad.iter().map(|g| -g).collect()))
    };

    let results: Vec<Option<Minimum>> = starts
        .par_iter()
        .map(|s| bfgs(neg, s, cfg.max_iter, cfg.grad_tol))
        .collect();

    let mut best: Option<&Minimum> = None;
    for (i, m) in results.iter().enumerate() {
        match m {
            None => log::warn!("restart {i} failed at its starting point"),
            Some(m) => {
                log::debug!(
                    "restart {i}: value {:.6} after {} iterations ({:?})",
                    -m.value,
                    m.iterations,
                    m.termination
                );
                if best.is_none_or(|b| m.value < b.value) {
                    best = Some(m);
                }
            }
        }
    }
    let best = best.ok_or_else(|| {
        Error::OptimizationFailed("every restart failed at its starting point".into())
    })?;
    let hypers = KernelHypers::from_vec(&best.x)?;
    FittedGP::from_hypers(x.clone(), y.clone(), hypers, priors.cloned())
}
