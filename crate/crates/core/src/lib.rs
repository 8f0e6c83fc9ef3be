//! Gaussian-process regression with three estimators of input-variable
//! relevance:
//!
//! * **ARD**: inverse fitted length-scales of the squared-exponential kernel.
//! * **KL**: Kullback–Leibler sensitivity of the posterior predictive to a
//!   small perturbation of one input.
//! * **VAR**: variance of the latent posterior mean along one input under the
//!   Gaussian conditional of that input given the others.
//!
//! The [`experiments`] module holds the toy data generator and the
//! forward-selection harness used to compare the three rankings.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod experiments;
pub mod gp;
pub mod input_model;
pub mod kernel;
pub mod linalg;
pub mod relevance;

pub use dataset::{Dataset, Standardization};
pub use error::{Error, Result};
pub use gp::{fit, FittedGP, Flavor, GaussianPredictive, HyperPriors, OptimizerConfig};
pub use input_model::{Conditional1D, InputGaussian};
pub use kernel::KernelHypers;
pub use relevance::{Method, RelevanceReport};
