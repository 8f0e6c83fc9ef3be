//! Gaussian approximation of the input distribution and the univariate
//! conditionals `x_j | x_{-j}` it implies.
//!
//! The `p` leave-one-out covariance factors are derived from the full factor
//! by rank-one updates once per model and shared by every query point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, delete_index_factor, JitterPolicy, SpdFactor};

#[derive(Debug, Clone)]
pub struct InputGaussian {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    factor: SpdFactor,
    deleted_factors: Vec<SpdFactor>,
}

/// `N(m, s²)` for one coordinate given the others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditional1D {
    pub m: f64,
    pub s: f64,
}

impl InputGaussian {
    /// Sample mean and unbiased sample covariance of the rows of `x`.
    pub fn estimate(x: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n < 2 || p == 0 {
            return Err(Error::InvalidArgument(format!(
                "need n ≥ 2 and p ≥ 1, got n = {n}, p = {p}"
            )));
        }
        if n < p {
            return Err(Error::DegenerateInputs(format!(
                "n = {n} < p = {p}; covariance shrinkage is not supported"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite input".into()));
        }
        let mu = DVector::from_fn(p, |j, _| x.column(j).sum() / n as f64);
        let mut centered = x.clone();
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mu[j]);
        }
        let sigma = (centered.transpose() * &centered) / (n as f64 - 1.0);
        if let Some(j) = (0..p).find(|&j| !(sigma[(j, j)] > 0.0)) {
            return Err(Error::DegenerateInputs(format!(
                "column {j} has zero variance"
            )));
        }
        let factor = cholesky(&sigma, &JitterPolicy::default())
            .map_err(|e| Error::DegenerateInputs(e.to_string()))?;
        let deleted_factors = if p > 1 {
            (0..p)
                .map(|j| delete_index_factor(&factor, j))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            mu,
            sigma,
            factor,
            deleted_factors,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn deleted_factors(&self) -> &[SpdFactor] {
        &self.deleted_factors
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Conditional of coordinate `j` given the other coordinates of `x`
    /// (the value of `x[j]` itself is ignored).
    pub fn conditional_1d(&self, j: usize, x: &[f64]) -> Result<Conditional1D> {
        let p = self.dim();
        if j >= p {
            return Err(Error::IndexOutOfRange { index: j, dim: p });
        }
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: x.len(),
            });
        }
        // The factor of Σ may carry jitter; the conditional is taken on the
        // matrix that was actually factorized.
        let jitter = self.factor.jitter_applied();
        let var_j = self.sigma[(j, j)] + jitter;
        if p == 1 {
            return Ok(Conditional1D {
                m: self.mu[0],
                s: var_j.sqrt(),
            });
        }
        let f = &self.deleted_factors[j];
        let others = (0..p).filter(|&k| k != j);
        let mut cross: Vec<f64> = others.clone().map(|k| self.sigma[(j, k)]).collect();
        let mut dev: Vec<f64> = others.map(|k| x[k] - self.mu[k]).collect();
        // m = μ_j + (L⁻¹σ)ᵀ(L⁻¹(x−μ)),  s² = σ_jj − |L⁻¹σ|²
        f.forward_solve_in_place(&mut cross);
        f.forward_solve_in_place(&mut dev);
        let m = self.mu[j] + cross.iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>();
        let explained: f64 = cross.iter().map(|v| v * v).sum();
        let s2 = var_j - explained;
        if !(s2 > 0.0) {
            return Err(Error::DegenerateInputs(format!(
                "conditional variance of column {j} is {s2:e}"
            )));
        }
        Ok(Conditional1D { m, s: s2.sqrt() })
    }
}
