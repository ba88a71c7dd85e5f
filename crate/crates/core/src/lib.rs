//! Density deconvolution with Bernstein-polynomial (beta mixture) models.
//!
//! Observations `y = x + ε` carry additive noise with a known law. The
//! density of `x` on a compact support is modelled as a mixture of beta
//! densities whose weights are fitted by EM on the convolved likelihood, and
//! the mixture degree is chosen by change-point detection on the
//! log-likelihood increments of a warm-started degree sweep.

pub mod bernstein;
pub mod convolution;
pub mod deconvolver;
pub mod degree_selection;
pub mod error;
pub mod error_models;
pub mod likelihood_em;
pub mod quadrature;
pub mod simulation;

pub use bernstein::{basis_eval, SimplexWeights};
pub use convolution::{conv_basis, psi_eval, ConvMatrix};
pub use deconvolver::{choose_support, fit, DeconvModel, FitOptions, MODEL_VERSION};
pub use degree_selection::{
    changepoint_stat, estimate_moments, lower_bound_degree, select_degree, sweep, DegreeTrace,
    Moments, SelectionResult,
};
pub use error::{DeconvError, Result};
pub use error_models::ErrorModel;
pub use likelihood_em::{em_step, fit_fixed_degree, loglik, EmConfig, EmResult};
