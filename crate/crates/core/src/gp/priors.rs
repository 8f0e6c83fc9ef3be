use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernel::KernelHypers;

/// Hyperpriors for MAP-II fitting: half-t on the magnitudes (σ_f, c, σ_n) and
/// inverse-gamma on every length-scale. Densities are defined on the natural
/// scale; [`HyperPriors::log_density`] adds the log-scale Jacobian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub half_t_df: f64,
    pub half_t_scale: f64,
    pub invgamma_shape: f64,
    pub invgamma_scale: f64,
}

impl Default for HyperPriors {
    fn default() -> Self {
        Self {
            half_t_df: 4.0,
            half_t_scale: 1.0,
            invgamma_shape: 2.0,
            invgamma_scale: 1.0,
        }
    }
}

impl HyperPriors {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.half_t_df,
            self.half_t_scale,
            self.invgamma_shape,
            self.invgamma_scale,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "prior parameters must be positive and finite: {self:?}"
            )))
        }
    }

    /// Log-density of `η = log θ` under a half-t prior on `θ`, and its derivative in `η`.
    fn half_t(&self, eta: f64) -> (f64, f64) {
        let nu = self.half_t_df;
        let s = self.half_t_scale;
        let x = eta.exp();
        let u = (x / s).powi(2) / nu;
        let norm = std::f64::consts::LN_2 + ln_gamma(0.5 * (nu + 1.0))
            - ln_gamma(0.5 * nu)
            - 0.5 * (nu * std::f64::consts::PI).ln()
            - s.ln();
        let value = norm - 0.5 * (nu + 1.0) * u.ln_1p() + eta;
        let grad = 1.0 - (nu + 1.0) * u / (1.0 + u);
        (value, grad)
    }

    /// Log-density of `η = log l` under an inverse-gamma prior on `l`, and its derivative.
    fn inv_gamma(&self, eta: f64) -> (f64, f64) {
        let a = self.invgamma_shape;
        let b = self.invgamma_scale;
        let inv_x = (-eta).exp();
        let value = a * b.ln() - ln_gamma(a) - a * eta - b * inv_x;
        let grad = -a + b * inv_x;
        (value, grad)
    }

    /// Sum of the log-prior densities over all hyperparameters, with gradient
    /// laid out like [`KernelHypers::to_vec`].
    pub fn log_density(&self, h: &KernelHypers) -> (f64, Vec<f64>) {
        let mut grad = Vec::with_capacity(h.n_params());
        let mut total = 0.0;
        let (v, g) = self.half_t(h.log_sigma_f);
        total += v;
        grad.push(g);
        for &l in &h.log_lengthscales {
            let (v, g) = self.inv_gamma(l);
            total += v;
            grad.push(g);
        }
        for eta in [h.log_const, h.log_sigma_n] {
            let (v, g) = self.half_t(eta);
            total += v;
            grad.push(g);
        }
        (total, grad)
    }
}
