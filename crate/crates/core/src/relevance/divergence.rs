use crate::error::{Error, Result};
use crate::gp::GaussianPredictive;

const PROB_CLAMP: f64 = 1e-12;

/// `KL(p ‖ q)` between two univariate Gaussians.
pub fn kl_gaussian(p: &GaussianPredictive, q: &GaussianPredictive) -> Result<f64> {
    for v in [p.variance, q.variance] {
        if !(v > 0.0) {
            return Err(Error::NonPositiveVariance(v));
        }
    }
    // log(σ_q/σ_p) + (σ_p² + Δμ²)/(2σ_q²) − ½, written as ½(r − 1 − ln r) + Δμ²/(2σ_q²)
    // with r = σ_p²/σ_q² so that nearly equal variances do not cancel.
    let t = (p.variance - q.variance) / q.variance;
    let var_term = 0.5 * (t - t.ln_1p());
    let dm = p.mean - q.mean;
    Ok((var_term + 0.5 * dm * dm / q.variance).max(0.0))
}

/// `KL(Bern(π) ‖ Bern(π'))`, both probabilities clamped to `[1e-12, 1 − 1e-12]`.
pub fn kl_bernoulli(pi: f64, pi2: f64) -> f64 {
    let a = pi.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let b = pi2.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let v = a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln();
    v.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Flavor;

    fn n(mean: f64, variance: f64) -> GaussianPredictive {
        GaussianPredictive {
            mean,
            variance,
            flavor: Flavor::Observation,
        }
    }

    /// The textbook form, evaluated literally.
    fn literal(p: &GaussianPredictive, q: &GaussianPredictive) -> f64 {
        (q.sd() / p.sd()).ln() + (p.variance + (p.mean - q.mean).powi(2)) / (2.0 * q.variance) - 0.5
    }

    #[test]
    fn identical_is_zero() {
        let p = n(0.3, 1.7);
        assert_eq!(kl_gaussian(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_values() {
        assert!((kl_gaussian(&n(0.0, 1.0), &n(1.0, 1.0)).unwrap() - 0.5).abs() < 1e-15);
        let expected = 2f64.ln() + 1.0 / 8.0 - 0.5;
        assert!((kl_gaussian(&n(0.0, 1.0), &n(0.0, 4.0)).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_literal_form() {
        for (p, q) in [
            (n(0.1, 0.5), n(-0.4, 2.0)),
            (n(3.0, 9.0), n(2.5, 0.25)),
            (n(-1.0, 0.01), n(-1.0, 0.02)),
        ] {
            let a = kl_gaussian(&p, &q).unwrap();
            assert!((a - literal(&p, &q)).abs() < 1e-13 * a.max(1.0));
        }
    }

    #[test]
    fn non_positive_variance() {
        assert!(matches!(
            kl_gaussian(&n(0.0, 0.0), &n(0.0, 1.0)),
            Err(Error::NonPositiveVariance(_))
        ));
    }

    #[test]
    fn bernoulli_values() {
        assert_eq!(kl_bernoulli(0.3, 0.3), 0.0);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_bernoulli(0.5, 0.25) - expected).abs() < 1e-15);
        assert!((kl_bernoulli(0.9, 0.5) - kl_bernoulli(0.5, 0.9)).abs() > 1e-3);
        assert!(kl_bernoulli(0.0, 1.0).is_finite());
    }
}
