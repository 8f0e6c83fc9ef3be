use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relevance::Method;

/// Normalized entropy of the variable chosen at each selection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub method: Option<Method>,
    pub entropy: Vec<f64>,
}

/// For each step `k`, the entropy of which variable is ranked `k`-th across
/// resamples, divided by `log p` (the uniform-choice maximum).
pub fn ranking_entropy(rankings: &[Vec<usize>]) -> Result<EntropyProfile> {
    if rankings.len() < 2 {
        return Err(Error::InsufficientResamples(rankings.len()));
    }
    let p = rankings[0].len();
    if let Some(bad) = rankings.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: bad.len(),
        });
    }
    let total = rankings.len() as f64;
    let max_entropy = (p as f64).ln();
    let entropy = (0..p)
        .map(|k| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for r in rankings {
                *counts.entry(r[k]).or_default() += 1;
            }
            let h: f64 = counts
                .values()
                .map(|&c| {
                    let q = c as f64 / total;
                    -q * q.ln()
                })
                .sum();
            // `h` is −0.0 when a single variable is always chosen.
            if max_entropy > 0.0 && h > 0.0 {
                (h / max_entropy).min(1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(EntropyProfile {
        method: None,
        entropy,
    })
}
