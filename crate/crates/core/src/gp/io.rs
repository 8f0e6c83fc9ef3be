//! JSON persistence of fitted models. The factor and `α` are recomputed on
//! load and checked against their defining identities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{noisy_gram, FittedGP, HyperPriors};
use crate::dataset::Standardization;
use crate::error::{Error, Result};
use crate::kernel::KernelHypers;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalHypers {
    pub sigma_f: f64,
    pub lengthscales: Vec<f64>,
    pub constant: f64,
    pub sigma_n: f64,
}

impl From<&KernelHypers> for NaturalHypers {
    fn from(h: &KernelHypers) -> Self {
        Self {
            sigma_f: h.sigma_f(),
            lengthscales: h.lengthscales(),
            constant: h.constant(),
            sigma_n: h.sigma_n(),
        }
    }
}

impl NaturalHypers {
    pub fn to_log(&self) -> KernelHypers {
        KernelHypers::new(
            self.sigma_f,
            &self.lengthscales,
            self.constant,
            self.sigma_n,
        )
    }
}

/// On-disk model. Training inputs are stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub n: usize,
    pub p: usize,
    pub column_names: Vec<String>,
    pub hypers: NaturalHypers,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub log_posterior_at_map: f64,
    pub prior_config: Option<HyperPriors>,
    pub library_version: String,
    /// Standardization applied to the raw data before fitting, if any.
    #[serde(default)]
    pub preprocessing: Option<Standardization>,
}

impl ModelDocument {
    pub fn from_model(
        g: &FittedGP,
        column_names: Vec<String>,
        preprocessing: Option<Standardization>,
    ) -> Self {
        Self {
            n: g.n(),
            p: g.p(),
            column_names,
            hypers: NaturalHypers::from(g.hypers()),
            x: g.x
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            y: g.y.iter().copied().collect(),
            log_posterior_at_map: g.log_posterior_at_map,
            prior_config: g.priors.clone(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            preprocessing,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Rebuilds the model and validates the cached factorization.
    pub fn to_model(&self) -> Result<FittedGP> {
        if self.x.len() != self.n || self.y.len() != self.n {
            return Err(Error::Data(format!(
                "model declares n = {} but stores {} inputs and {} targets",
                self.n,
                self.x.len(),
                self.y.len()
            )));
        }
        if self.x.iter().any(|r| r.len() != self.p) || self.hypers.lengthscales.len() != self.p {
            return Err(Error::Data(format!(
                "rows inconsistent with p = {}",
                self.p
            )));
        }
        if self.column_names.len() != self.p {
            return Err(Error::Data("column_names length differs from p".into()));
        }
        let flat: Vec<f64> = self.x.iter().flatten().copied().collect();
        let x = DMatrix::from_row_slice(self.n, self.p, &flat);
        let y = DVector::from_vec(self.y.clone());
        let g = FittedGP::from_hypers(x, y, self.hypers.to_log(), self.prior_config.clone())?;

        let k = noisy_gram(&g.hypers, &g.x)?;
        let recon = g.factor.reconstruct();
        let jitter = g.factor.jitter_applied();
        let mut diff = recon - &k;
        for i in 0..g.n() {
            diff[(i, i)] -= jitter;
        }
        if diff.norm() > 1e-8 * k.norm() {
            return Err(Error::Data(
                "cached factor fails reconstruction check".into(),
            ));
        }
        let resid = (&k * &g.alpha - &g.y).amax();
        if resid > 1e-6 * g.y.amax().max(1e-12) + jitter * g.alpha.amax() {
            return Err(Error::Data(format!(
                "weight vector residual {resid:e} too large"
            )));
        }
        let stored = self.log_posterior_at_map;
        let tol = 1e-6 * stored.abs().max(1.0);
        if (g.log_posterior_at_map - stored).abs() > tol {
            return Err(Error::Data(format!(
                "stored log posterior {stored} does not match recomputed {}",
                g.log_posterior_at_map
            )));
        }
        Ok(g)
    }
}
