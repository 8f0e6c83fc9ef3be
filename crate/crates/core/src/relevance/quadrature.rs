//! Gauss–Hermite rules for `∫ f(k) e^{−k²} dk`.
//!
//! Nodes come from the eigenvalues of the symmetric tridiagonal Jacobi matrix
//! (Golub–Welsch) and are polished with Newton steps on the orthonormal
//! Hermite recurrence. Weights use
//! `w_i = 2^{N−1} N! √π / (N² H_{N−1}(k_i)²)`, evaluated in the equivalent
//! overflow-free form `1 / (N · h_{N−1}(k_i)²)` with `h` the orthonormal
//! Hermite polynomials.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ w_i f(k_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&k, &w)| w * f(k))
            .sum()
    }
}

/// Orthonormal Hermite values `(h_{n−1}(x), h_n(x))`, orthonormal w.r.t. `e^{−x²}`.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    for k in 0..n {
        let next =
            (2.0 / (k as f64 + 1.0)).sqrt() * x * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

pub fn gauss_hermite(order: usize) -> Result<GaussHermiteRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    let n = order;
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (hm1, hn) = orthonormal_hermite(n, *x);
            // h_n'(x) = √(2n) h_{n−1}(x)
            let d = (2.0 * n as f64).sqrt() * hm1;
            if d != 0.0 {
                *x -= hn / d;
            }
        }
    }
    // exact symmetry about zero
    for i in 0..n / 2 {
        let a = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (hm1, _) = orthonormal_hermite(n, x);
            1.0 / (n as f64 * hm1 * hm1)
        })
        .collect();
    Ok(GaussHermiteRule { nodes, weights })
}
