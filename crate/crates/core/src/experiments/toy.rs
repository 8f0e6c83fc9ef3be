//! Additive sinusoid toy data: `y = Σ_j A_j sin(φ_j x_j) + ε`, with the
//! frequencies equally spaced in `[π/10, π]` and each `A_j` chosen so the
//! corresponding term has unit variance under the input distribution.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputDist {
    /// `U(−1, 1)`
    Uniform,
    /// `N(0, 0.4²)`
    Normal,
}

impl InputDist {
    pub const UNIFORM_HALF_WIDTH: f64 = 1.0;
    pub const NORMAL_SD: f64 = 0.4;

    /// `Var[sin(φx)]` in closed form. Both distributions are symmetric about
    /// zero, so `E[sin(φx)] = 0` and the variance is `E[sin²(φx)]`.
    pub fn sin_variance(&self, phi: f64) -> f64 {
        match self {
            InputDist::Uniform => {
                let a = Self::UNIFORM_HALF_WIDTH;
                0.5 - (2.0 * phi * a).sin() / (4.0 * phi * a)
            }
            InputDist::Normal => {
                let t = Self::NORMAL_SD;
                0.5 * (1.0 - (-2.0 * phi * phi * t * t).exp())
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            InputDist::Uniform => {
                rng.gen_range(-Self::UNIFORM_HALF_WIDTH..Self::UNIFORM_HALF_WIDTH)
            }
            InputDist::Normal => Normal::new(0.0, Self::NORMAL_SD).unwrap().sample(rng),
        }
    }
}

impl std::str::FromStr for InputDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(InputDist::Uniform),
            "normal" => Ok(InputDist::Normal),
            other => Err(Error::InvalidArgument(format!(
                "unknown input distribution '{other}' (expected uniform|normal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub n: usize,
    pub p_relevant: usize,
    pub p_irrelevant: usize,
    pub input_dist: InputDist,
    pub noise_sd: f64,
    pub seed: u64,
}

impl ToyConfig {
    pub fn new(n: usize, input_dist: InputDist, seed: u64) -> Self {
        Self {
            n,
            p_relevant: 8,
            p_irrelevant: 0,
            input_dist,
            noise_sd: 0.3,
            seed,
        }
    }

    pub fn with_irrelevant(mut self, p_irrelevant: usize) -> Self {
        self.p_irrelevant = p_irrelevant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if self.p_relevant == 0 {
            return Err(Error::InvalidArgument(
                "need at least one relevant input".into(),
            ));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::InvalidArgument(
                "noise_sd must be finite and ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// `φ_j` for `j = 1..p_relevant`, equally spaced from `π/10` to `π`.
pub fn frequencies(p_relevant: usize) -> Vec<f64> {
    if p_relevant == 1 {
        return vec![PI / 10.0];
    }
    let step = (PI - PI / 10.0) / (p_relevant - 1) as f64;
    (0..p_relevant)
        .map(|j| PI / 10.0 + j as f64 * step)
        .collect()
}

/// `A_j = Var[sin(φ_j x)]^{−1/2}`.
pub fn amplitudes(p_relevant: usize, dist: InputDist) -> Vec<f64> {
    frequencies(p_relevant)
        .into_iter()
        .map(|phi| dist.sin_variance(phi).sqrt().recip())
        .collect()
}

/// The additive component `f_j(x) = A_j sin(φ_j x)` (0-based `j`).
pub fn component(j: usize, x: f64, freqs: &[f64], amps: &[f64]) -> f64 {
    amps[j] * (freqs[j] * x).sin()
}

/// Columns `x1..xp` (relevant first, then irrelevant) and target `y`.
pub fn generate_toy(cfg: &ToyConfig) -> Result<Dataset> {
    cfg.validate()?;
    let p = cfg.p_relevant + cfg.p_irrelevant;
    let freqs = frequencies(cfg.p_relevant);
    let amps = amplitudes(cfg.p_relevant, cfg.input_dist);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, 1.0).unwrap();

    let mut flat = Vec::with_capacity(cfg.n * p);
    let mut y = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let start = flat.len();
        for _ in 0..p {
            flat.push(cfg.input_dist.sample(&mut rng));
        }
        let row = &flat[start..];
        let signal: f64 = (0..cfg.p_relevant)
            .map(|j| component(j, row[j], &freqs, &amps))
            .sum();
        let eps: f64 = noise.sample(&mut rng);
        y.push(signal + cfg.noise_sd * eps);
    }
    let x = DMatrix::from_row_slice(cfg.n, p, &flat);
    Dataset::with_default_names(x, DVector::from_vec(y))
}
