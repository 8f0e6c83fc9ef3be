//! Reproduction harness: toy generator, predictive utilities, forward
//! selection and ranking-entropy summaries, plus their CSV exports.

pub mod entropy;
pub mod metrics;
pub mod selection;
pub mod toy;

use std::io::Write;

pub use entropy::{ranking_entropy, EntropyProfile};
pub use metrics::{log_normal_pdf, mlpd, mse};
pub use selection::{
    fit_standardized, forward_selection, forward_selection_curve, SelectionConfig, SelectionCurve,
    SelectionRun, UtilityKind,
};
pub use toy::{generate_toy, InputDist, ToyConfig};

use crate::error::{Error, Result};
use crate::relevance::csv_writer;

/// `method,utility,size,mean,ci_half_width,count`, one row per curve point.
pub fn write_curves_csv<W: Write>(curves: &[SelectionCurve], w: W) -> Result<()> {
    let mut wr = csv_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record([
        "method",
        "utility",
        "size",
        "mean",
        "ci_half_width",
        "count",
    ])
    .map_err(io)?;
    for c in curves {
        for (s, &k) in c.sizes.iter().enumerate() {
            wr.write_record([
                c.method.name().to_string(),
                c.utility.name().to_string(),
                k.to_string(),
                c.mean[s].to_string(),
                c.ci_half_width[s].to_string(),
                c.count[s].to_string(),
            ])
            .map_err(io)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// `method,step,entropy` with 1-based steps.
pub fn write_entropy_csv<W: Write>(profiles: &[EntropyProfile], w: W) -> Result<()> {
    let mut wr = csv_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record(["method", "step", "entropy"]).map_err(io)?;
    for prof in profiles {
        let name = prof.method.map_or("", |m| m.name());
        for (k, e) in prof.entropy.iter().enumerate() {
            wr.write_record([name.to_string(), (k + 1).to_string(), e.to_string()])
                .map_err(io)?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relevance::Method;

    #[test]
    fn csv_layouts() {
        let c = SelectionCurve {
            method: Method::Kl,
            utility: UtilityKind::Mlpd,
            sizes: vec![1, 2],
            mean: vec![-1.5, -1.25],
            ci_half_width: vec![0.5, 0.25],
            count: vec![3, 3],
            values: vec![],
        };
        let mut buf = Vec::new();
        write_curves_csv(&[c], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,utility,size,mean,ci_half_width,count\nkl,mlpd,1,-1.5,0.5,3\nkl,mlpd,2,-1.25,0.25,3\n"
        );
        let e = EntropyProfile {
            method: Some(Method::Var),
            entropy: vec![0.0, 0.5],
        };
        let mut buf = Vec::new();
        write_entropy_csv(&[e], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,step,entropy\nvar,1,0\nvar,2,0.5\n"
        );
    }
}
