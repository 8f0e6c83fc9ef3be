//! Squared-exponential ARD kernel plus a constant term:
//!
//! `k(x, x') = c² + σ_f²·exp(−½ Σᵢ (xᵢ − x'ᵢ)² / lᵢ²)`
//!
//! All positive hyperparameters are stored on the log scale.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-scale kernel and noise hyperparameters.
///
/// The flat parameter vector used by the optimizer is laid out as
/// `[log σ_f, log l_1, …, log l_p, log c, log σ_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHypers {
    pub log_sigma_f: f64,
    pub log_lengthscales: Vec<f64>,
    pub log_const: f64,
    pub log_sigma_n: f64,
}

impl KernelHypers {
    /// Builds hypers from natural-scale values.
    pub fn new(sigma_f: f64, lengthscales: &[f64], constant: f64, sigma_n: f64) -> Self {
        Self {
            log_sigma_f: sigma_f.ln(),
            log_lengthscales: lengthscales.iter().map(|l| l.ln()).collect(),
            log_const: constant.ln(),
            log_sigma_n: sigma_n.ln(),
        }
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscales.len()
    }

    /// Number of entries in the flat parameter vector.
    pub fn n_params(&self) -> usize {
        self.dim() + 3
    }

    pub fn sigma_f(&self) -> f64 {
        self.log_sigma_f.exp()
    }

    pub fn constant(&self) -> f64 {
        self.log_const.exp()
    }

    pub fn sigma_n(&self) -> f64 {
        self.log_sigma_n.exp()
    }

    pub fn lengthscales(&self) -> Vec<f64> {
        self.log_lengthscales.iter().map(|v| v.exp()).collect()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.push(self.log_sigma_f);
        v.extend_from_slice(&self.log_lengthscales);
        v.push(self.log_const);
        v.push(self.log_sigma_n);
        v
    }

    pub fn from_vec(v: &[f64]) -> Result<Self> {
        if v.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "hyperparameter vector needs at least 4 entries, got {}",
                v.len()
            )));
        }
        let p = v.len() - 3;
        Ok(Self {
            log_sigma_f: v[0],
            log_lengthscales: v[1..=p].to_vec(),
            log_const: v[p + 1],
            log_sigma_n: v[p + 2],
        })
    }

    /// All exponentiated values strictly positive and finite.
    pub fn is_valid(&self) -> bool {
        let ok = |x: f64| {
            let e = x.exp();
            e.is_finite() && e > 0.0
        };
        ok(self.log_sigma_f)
            && ok(self.log_const)
            && ok(self.log_sigma_n)
            && self.log_lengthscales.iter().all(|&l| ok(l))
    }

    fn inv_sq_lengthscales(&self) -> Vec<f64> {
        self.log_lengthscales
            .iter()
            .map(|l| (-2.0 * l).exp())
            .collect()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

#[inline]
fn weighted_sq_dist(a: &[f64], b: &[f64], inv_sq: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(inv_sq)
        .map(|((x, y), w)| {
            let d = x - y;
            d * d * w
        })
        .sum()
}

/// Row `i` of `x` as an owned vector.
pub(crate) fn row_vec(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// Row-major copy of `x`: point `i` occupies `[i*p, (i+1)*p)`.
pub(crate) fn rows_flat(x: &DMatrix<f64>) -> Vec<f64> {
    x.transpose().as_slice().to_vec()
}

pub fn kernel_eval(h: &KernelHypers, x: &[f64], x2: &[f64]) -> Result<f64> {
    h.check_dim(x.len())?;
    h.check_dim(x2.len())?;
    let r2 = weighted_sq_dist(x, x2, &h.inv_sq_lengthscales());
    let sf2 = (2.0 * h.log_sigma_f).exp();
    let c2 = (2.0 * h.log_const).exp();
    Ok(c2 + sf2 * (-0.5 * r2).exp())
}

/// Cross-covariance between the rows of `x` and the rows of `x2`; when `x2` is
/// `None` the result is the exactly symmetric Gram matrix of `x`.
pub fn kernel_matrix(
    h: &KernelHypers,
    x: &DMatrix<f64>,
    x2: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    h.check_dim(x.ncols())?;
    let inv_sq = h.inv_sq_lengthscales();
    let sf2 = (2.0 * h.log_sigma_f).exp();
    let c2 = (2.0 * h.log_const).exp();
    let p = h.dim();
    let a = rows_flat(x);
    let n = x.nrows();
    match x2 {
        None => {
            let mut k = DMatrix::zeros(n, n);
            for j in 0..n {
                let xj = &a[j * p..(j + 1) * p];
                k[(j, j)] = c2 + sf2;
                for i in j + 1..n {
                    let xi = &a[i * p..(i + 1) * p];
                    let v = c2 + sf2 * (-0.5 * weighted_sq_dist(xi, xj, &inv_sq)).exp();
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            Ok(k)
        }
        Some(x2) => {
            h.check_dim(x2.ncols())?;
            let b = rows_flat(x2);
            let m = x2.nrows();
            Ok(DMatrix::from_fn(n, m, |i, j| {
                let r2 = weighted_sq_dist(&a[i * p..(i + 1) * p], &b[j * p..(j + 1) * p], &inv_sq);
                c2 + sf2 * (-0.5 * r2).exp()
            }))
        }
    }
}

/// Covariances between each training row (given row-major) and one query point.
pub(crate) fn cross_cov(h: &KernelHypers, rows: &[f64], x_star: &[f64]) -> DVector<f64> {
    let p = h.dim();
    let inv_sq = h.inv_sq_lengthscales();
    let sf2 = (2.0 * h.log_sigma_f).exp();
    let c2 = (2.0 * h.log_const).exp();
    let n = rows.len() / p.max(1);
    DVector::from_iterator(
        n,
        rows.chunks_exact(p)
            .map(|xi| c2 + sf2 * (-0.5 * weighted_sq_dist(xi, x_star, &inv_sq)).exp()),
    )
}

/// `∂K/∂θ` for every log-hyperparameter except the noise, in the order
/// `[log σ_f, log l_1, …, log l_p, log c]`.
pub fn kernel_matrix_grads(h: &KernelHypers, x: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    h.check_dim(x.ncols())?;
    let p = h.dim();
    let n = x.nrows();
    let inv_sq = h.inv_sq_lengthscales();
    let sf2 = (2.0 * h.log_sigma_f).exp();
    let c2 = (2.0 * h.log_const).exp();
    let a = rows_flat(x);

    let mut grads = vec![DMatrix::zeros(n, n); p + 2];
    for j in 0..n {
        for i in 0..n {
            let xi = &a[i * p..(i + 1) * p];
            let xj = &a[j * p..(j + 1) * p];
            let se = sf2 * (-0.5 * weighted_sq_dist(xi, xj, &inv_sq)).exp();
            grads[0][(i, j)] = 2.0 * se;
            for d in 0..p {
                let diff = xi[d] - xj[d];
                grads[1 + d][(i, j)] = se * diff * diff * inv_sq[d];
            }
            grads[p + 1][(i, j)] = 2.0 * c2;
        }
    }
    Ok(grads)
}

/// `½·Σᵢⱼ Wᵢⱼ·∂Kᵢⱼ/∂θ` for each kernel log-hyperparameter, with `W` symmetric,
/// without materializing the derivative matrices. Same ordering as
/// [`kernel_matrix_grads`].
pub(crate) fn half_trace_products(h: &KernelHypers, rows: &[f64], w: &DMatrix<f64>) -> Vec<f64> {
    let p = h.dim();
    let n = w.nrows();
    let inv_sq = h.inv_sq_lengthscales();
    let sf2 = (2.0 * h.log_sigma_f).exp();
    let c2 = (2.0 * h.log_const).exp();

    let mut out = vec![0.0; p + 2];
    let mut len_acc = vec![0.0; p];
    let mut se_acc = 0.0;
    let mut w_sum = 0.0;
    let ws = w.as_slice();
    for j in 0..n {
        let xj = &rows[j * p..(j + 1) * p];
        let wcol = &ws[j * n..(j + 1) * n];
        // diagonal: distance zero, derivative w.r.t. lengthscales vanishes
        se_acc += wcol[j] * sf2;
        w_sum += wcol[j];
        for i in j + 1..n {
            let xi = &rows[i * p..(i + 1) * p];
            let wij = 2.0 * wcol[i];
            w_sum += wij;
            let mut r2 = 0.0;
            for d in 0..p {
                let diff = xi[d] - xj[d];
                r2 += diff * diff * inv_sq[d];
            }
            let wse = wij * sf2 * (-0.5 * r2).exp();
            se_acc += wse;
            for d in 0..p {
                let diff = xi[d] - xj[d];
                len_acc[d] += wse * diff * diff;
            }
        }
    }
    out[0] = se_acc;
    for d in 0..p {
        out[1 + d] = 0.5 * len_acc[d] * inv_sq[d];
    }
    out[p + 1] = c2 * w_sum;
    out
}
