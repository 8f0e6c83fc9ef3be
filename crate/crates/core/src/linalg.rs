//! Dense symmetric-positive-definite linear algebra.
//!
//! Matrices are `nalgebra::DMatrix<f64>` (column-major). The hot loops below
//! work directly on the column slices so that every inner loop is a
//! contiguous axpy or dot product.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative diagonal jitter ladder tried in order until a factorization succeeds.
///
/// Each rung is multiplied by `mean(diag(A))` before being added to the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterPolicy {
    pub ladder: Vec<f64>,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            ladder: vec![0.0, 1e-10, 1e-8, 1e-6, 1e-4],
        }
    }
}

impl JitterPolicy {
    /// Only the exact factorization, no jitter.
    pub fn none() -> Self {
        Self { ladder: vec![0.0] }
    }
}

/// Lower Cholesky factor `L` with `L·Lᵀ = A + jitter_applied·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    l: DMatrix<f64>,
    jitter_applied: f64,
}

/// In-place left-looking Cholesky on the lower triangle of a column-major
/// `n×n` buffer. Returns `false` when a pivot is not positive or has been
/// reduced to rounding level relative to its diagonal entry.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    let tol = n as f64 * f64::EPSILON;
    for j in 0..n {
        let (left, right) = a.split_at_mut(j * n);
        let col_j = &mut right[..n];
        let orig = col_j[j];
        for k in 0..j {
            let col_k = &left[k * n..(k + 1) * n];
            let ljk = col_k[j];
            if ljk != 0.0 {
                for (dst, &src) in col_j[j..].iter_mut().zip(&col_k[j..]) {
                    *dst -= ljk * src;
                }
            }
        }
        let d = col_j[j];
        if !(d > tol * orig) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        col_j[j] = d;
        let inv = 1.0 / d;
        for v in &mut col_j[j + 1..] {
            *v *= inv;
        }
        for v in &mut col_j[..j] {
            *v = 0.0;
        }
    }
    true
}

/// Factorizes `(A + Aᵀ)/2 + ε·I`, escalating `ε` along the policy's ladder.
pub fn cholesky(a: &DMatrix<f64>, policy: &JitterPolicy) -> Result<SpdFactor> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let mut sym = a.clone();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            sym[(i, j)] = v;
            sym[(j, i)] = v;
        }
    }
    let mean_diag = sym.diagonal().iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let scale = if mean_diag > 0.0 && mean_diag.is_finite() {
        mean_diag
    } else {
        1.0
    };

    let mut last = 0.0;
    for &rung in &policy.ladder {
        let eps = rung * scale;
        last = eps;
        let mut work = sym.clone();
        for i in 0..n {
            work[(i, i)] += eps;
        }
        if cholesky_in_place(work.as_mut_slice(), n) {
            if eps > 0.0 {
                log::debug!("cholesky succeeded with jitter {eps:e}");
            }
            return Ok(SpdFactor {
                l: work,
                jitter_applied: eps,
            });
        }
    }
    Err(Error::NotPositiveDefinite { max_jitter: last })
}

impl SpdFactor {
    /// Wraps an existing lower-triangular factor. The diagonal must be positive.
    pub fn from_lower(l: DMatrix<f64>, jitter_applied: f64) -> Result<Self> {
        let n = l.nrows();
        if l.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: l.ncols(),
            });
        }
        if (0..n).any(|i| !(l[(i, i)] > 0.0)) {
            return Err(Error::NotPositiveDefinite { max_jitter: 0.0 });
        }
        Ok(Self { l, jitter_applied })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter_applied
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L·z = b` in place.
    pub fn forward_solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let l = self.l.as_slice();
        for k in 0..n {
            let col = &l[k * n..(k + 1) * n];
            let bk = b[k] / col[k];
            b[k] = bk;
            if bk != 0.0 {
                for (dst, &lik) in b[k + 1..].iter_mut().zip(&col[k + 1..]) {
                    *dst -= bk * lik;
                }
            }
        }
    }

    /// Solves `Lᵀ·x = z` in place.
    pub fn backward_solve_in_place(&self, z: &mut [f64]) {
        let n = self.dim();
        let l = self.l.as_slice();
        for k in (0..n).rev() {
            let col = &l[k * n..(k + 1) * n];
            let dot: f64 = col[k + 1..]
                .iter()
                .zip(&z[k + 1..])
                .map(|(a, b)| a * b)
                .sum();
            z[k] = (z[k] - dot) / col[k];
        }
    }

    /// Solves `L·z = b`.
    pub fn forward_solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(b.len())?;
        let mut z = b.clone();
        self.forward_solve_in_place(z.as_mut_slice());
        Ok(z)
    }

    /// Solves `(L·Lᵀ)·x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(b.len())?;
        let mut x = b.clone();
        self.forward_solve_in_place(x.as_mut_slice());
        self.backward_solve_in_place(x.as_mut_slice());
        Ok(x)
    }

    /// Column-wise solve of `(L·Lᵀ)·X = B`.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_len(b.nrows())?;
        let n = self.dim();
        let mut x = b.clone();
        for col in x.as_mut_slice().chunks_mut(n) {
            self.forward_solve_in_place(col);
            self.backward_solve_in_place(col);
        }
        Ok(x)
    }

    /// Explicit `(L·Lᵀ)⁻¹`, computed as `L⁻ᵀ·L⁻¹` exploiting triangular structure.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let l = self.l.as_slice();
        // Column c of L⁻¹ is zero above row c.
        let mut linv = vec![0.0; n * n];
        for c in 0..n {
            let col = &mut linv[c * n..(c + 1) * n];
            col[c] = 1.0;
            for k in c..n {
                let lk = &l[k * n..(k + 1) * n];
                let bk = col[k] / lk[k];
                col[k] = bk;
                if bk != 0.0 {
                    for (dst, &lik) in col[k + 1..].iter_mut().zip(&lk[k + 1..]) {
                        *dst -= bk * lik;
                    }
                }
            }
        }
        let mut inv = DMatrix::zeros(n, n);
        for b in 0..n {
            let cb = &linv[b * n..(b + 1) * n];
            for a in 0..=b {
                let ca = &linv[a * n..(a + 1) * n];
                let v: f64 = ca[b..].iter().zip(&cb[b..]).map(|(x, y)| x * y).sum();
                inv[(a, b)] = v;
                inv[(b, a)] = v;
            }
        }
        inv
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }
}

/// `L̃·L̃ᵀ = L·Lᵀ + v·vᵀ` in place, by sequential Givens-style rotations.
fn rank_one_update(l: &mut DMatrix<f64>, v: &mut [f64]) {
    let m = l.nrows();
    for k in 0..m {
        let lkk = l[(k, k)];
        let vk = v[k];
        if vk == 0.0 {
            continue;
        }
        let r = lkk.hypot(vk);
        let c = r / lkk;
        let s = vk / lkk;
        l[(k, k)] = r;
        for i in k + 1..m {
            let lik = (l[(i, k)] + s * v[i]) / c;
            v[i] = c * v[i] - s * lik;
            l[(i, k)] = lik;
        }
    }
}

/// Factor of `Σ` with row and column `j` removed, derived from the factor of
/// `Σ` in `O((n−j)²)` by updating the trailing block with the deleted column.
pub fn delete_index_factor(f: &SpdFactor, j: usize) -> Result<SpdFactor> {
    let n = f.dim();
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, dim: n });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "cannot delete an index from a 1×1 factor".into(),
        ));
    }
    let l = &f.l;
    let m = n - 1;
    let mut out = DMatrix::zeros(m, m);
    // L_A and L_C keep their place.
    for c in 0..j {
        for r in c..n {
            if r == j {
                continue;
            }
            let rr = if r > j { r - 1 } else { r };
            out[(rr, c)] = l[(r, c)];
        }
    }
    let tail = n - j - 1;
    if tail > 0 {
        let mut block = l.view((j + 1, j + 1), (tail, tail)).into_owned();
        let mut v: Vec<f64> = (j + 1..n).map(|r| l[(r, j)]).collect();
        rank_one_update(&mut block, &mut v);
        out.view_mut((j, j), (tail, tail)).copy_from(&block);
    }
    Ok(SpdFactor {
        l: out,
        jitter_applied: f.jitter_applied,
    })
}

/// Copy of `a` with row and column `j` removed.
pub fn remove_row_col(a: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    a.clone().remove_row(j).remove_column(j)
}
