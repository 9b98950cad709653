//! Parametric pilot models for the two bootstrap selectors: an AIC-chosen
//! polynomial regression with normal errors, and a Gaussian mixture of
//! B-spline regressions fitted by EM.

mod bspline;
mod mixture;
pub(crate) mod peaks;
mod polynomial;

pub use bspline::{bspline_basis_eval, BSplineBasis};
pub use mixture::{
    fit_mixture_bspline, mixture_conditional_modes, simulate_mixture, CandidateFit, EmConfig,
    MixtureFit, MixtureModel,
};
pub(crate) use mixture::{gaussian_mixture_modes, simulate_mixture_stream};
pub use polynomial::{fit_polynomial_aic, simulate_polynomial, PolynomialModel};
pub(crate) use polynomial::simulate_polynomial_stream;
