use crate::dataset::{Dataset, Standardization};
use crate::error::{Error, Result};
use crate::gp::{FittedGP, Flavor, GaussianPredictive};
use crate::kernel;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn log_normal_pdf(y: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * (LN_2PI + variance.ln() + (y - mean).powi(2) / variance)
}

/// Observation-flavor predictions for the raw test inputs, with the mean
/// mapped back to the raw target scale.
fn raw_predictions(
    g: &FittedGP,
    std: Option<&Standardization>,
    test: &Dataset,
) -> Result<Vec<GaussianPredictive>> {
    if test.n() == 0 {
        return Err(Error::EmptyTestSet);
    }
    let x = match std {
        Some(s) => s.transform_x(&test.x),
        None => test.x.clone(),
    };
    let shift = std.map_or(0.0, |s| s.y_mean);
    (0..test.n())
        .map(|i| {
            let mut pr = g.predict(&kernel::row_vec(&x, i), Flavor::Observation)?;
            pr.mean += shift;
            Ok(pr)
        })
        .collect()
}

/// Mean log predictive density of the test targets. The target is only
/// centered, so the change of variables back to raw units has unit Jacobian.
pub fn mlpd(g: &FittedGP, std: Option<&Standardization>, test: &Dataset) -> Result<f64> {
    let preds = raw_predictions(g, std, test)?;
    let total: f64 = preds
        .iter()
        .zip(test.y.iter())
        .map(|(p, &y)| log_normal_pdf(y, p.mean, p.variance))
        .sum();
    Ok(total / test.n() as f64)
}

/// Mean squared error of the predictive means, in raw target units.
pub fn mse(g: &FittedGP, std: Option<&Standardization>, test: &Dataset) -> Result<f64> {
    let preds = raw_predictions(g, std, test)?;
    Ok(preds
        .iter()
        .zip(test.y.iter())
        .map(|(p, &y)| (y - p.mean).powi(2))
        .sum::<f64>()
        / test.n() as f64)
}
