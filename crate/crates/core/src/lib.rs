//! Nonparametric modal regression.
//!
//! The conditional density of `Y` given `X = x` is estimated with a product
//! Gaussian kernel and two bandwidths, `h1` for the covariate and `h2` for
//! the response. Its local modes in `y` are found by the mean-shift
//! algorithm, which yields a set of mode curves rather than a single
//! regression function.
//!
//! Bandwidths that are good for estimating the density are often poor for
//! estimating its modes. The [`selectors`] module offers four
//! density-targeted selectors and two mode-targeted ones:
//!
//! | method | target | criterion |
//! |---|---|---|
//! | `reference` | density | closed form under a normal working model |
//! | `regression` | density | penalized prediction error, `h2` from the reference rule |
//! | `boot_density` | density | parametric bootstrap with a polynomial pilot |
//! | `cv_density` | density | leave-one-out integrated squared error |
//! | `cv_mode` | modes | leave-one-out distance to the mode set, times its size squared |
//! | `boot_mode` | modes | parametric bootstrap with a mixture-of-regressions pilot |
//!
//! ```
//! use modalband::{estimate_modes, Bandwidths, MeanShiftConfig, Sample};
//!
//! let sample = Sample::from_pairs(&[(0.0, -1.0), (0.1, -1.1), (0.0, 1.0), (0.1, 0.9)])?;
//! let h = Bandwidths::new(0.5, 0.3)?;
//! let modes = estimate_modes(&sample, h, 0.05, &MeanShiftConfig::for_sample(&sample))?;
//! assert_eq!(modes.len(), 2);
//! # Ok::<(), modalband::Error>(())
//! ```

pub mod density;
pub mod error;
pub mod io;
pub mod modes;
pub mod parametric;
pub mod rng;
pub mod selectors;
pub mod setdist;
pub mod simulation;

pub use density::{
    conditional_density, conditional_density_dy, gaussian_kernel, weight_window, Bandwidths,
    Sample, WeightWindow,
};
pub use error::{Error, ErrorClass, Result};
pub use modes::{
    estimate_modes, mean_shift_trajectory, mean_shift_update, mode_curves, CurvePoint,
    MeanShiftConfig, MissingReason, ModeSet,
};
pub use selectors::{Method, SearchSpec, SelectionResult};
pub use setdist::{hausdorff, point_to_set, FiniteSet};
