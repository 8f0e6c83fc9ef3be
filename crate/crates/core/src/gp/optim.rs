//! BFGS with Armijo backtracking, used to maximize the hyperparameter
//! log-posterior (we minimize its negative).

use serde::{Deserialize, Serialize};

/// Settings for the multi-restart quasi-Newton search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Restart points are drawn uniformly from `[−init_range, init_range]` per log-hyper.
    pub init_range: f64,
    pub seed: u64,
    /// Optional additional starting point tried before the random restarts.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    /// Log-hypers outside `[−bound, bound]` are treated as failed evaluations.
    pub log_bound: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iter: 500,
            grad_tol: 1e-5,
            init_range: 1.0,
            seed: 0,
            initial: None,
            log_bound: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    NoProgress,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

const MAX_STEP: f64 = 5.0;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

/// Minimizes `f`, which returns `None` where the objective is undefined.
/// Returns `None` if `f` is undefined at the starting point.
pub fn bfgs<F>(f: F, x0: &[f64], max_iter: usize, grad_tol: f64) -> Option<Minimum>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    // Row-major inverse-Hessian approximation.
    let mut hinv = identity(d);
    let mut fresh = true;
    let mut stalls = 0;

    for iter in 0..max_iter {
        if inf_norm(&g) < grad_tol {
            return Some(Minimum {
                x,
                value: fx,
                grad: g,
                iterations: iter,
                termination: Termination::GradientTolerance,
            });
        }
        let mut dir: Vec<f64> = (0..d)
            .map(|i| -dot(&hinv[i * d..(i + 1) * d], &g))
            .collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hinv = identity(d);
            fresh = true;
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let dmax = inf_norm(&dir);
        let mut t = if dmax > MAX_STEP {
            MAX_STEP / dmax
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite()
                    && gt.iter().all(|v| v.is_finite())
                    && ft <= fx + ARMIJO_C1 * t * slope
                {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }

        let Some((xn, fnew, gn)) = accepted else {
            if fresh {
                return Some(Minimum {
                    x,
                    value: fx,
                    grad: g,
                    iterations: iter,
                    termination: Termination::NoProgress,
                });
            }
            hinv = identity(d);
            fresh = true;
            continue;
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                for v in hinv.iter_mut() {
                    *v *= scale;
                }
            }
            bfgs_update(&mut hinv, &s, &y, sy);
            fresh = false;
        }

        if (fx - fnew).abs() <= 1e-13 * (1.0 + fx.abs()) {
            stalls += 1;
        } else {
            stalls = 0;
        }
        x = xn;
        fx = fnew;
        g = gn;
        if stalls >= 5 {
            return Some(Minimum {
                x,
                value: fx,
                grad: g,
                iterations: iter + 1,
                termination: Termination::NoProgress,
            });
        }
    }
    Some(Minimum {
        x,
        value: fx,
        grad: g,
        iterations: max_iter,
        termination: Termination::MaxIterations,
    })
}

fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(sᵀy)`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..d).map(|i| dot(&h[i * d..(i + 1) * d], y)).collect();
    let yhy = dot(y, &hy);
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..d {
        for j in 0..d {
            h[i * d + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
