//! Kernel estimation and inference for time-varying vector autoregressions.
//!
//! The crate covers local-constant estimation of coefficient and innovation
//! covariance paths, lag and bandwidth selection, structural impulse
//! responses with delta-method bands, nonparametric trends with a dependent
//! wild bootstrap, simulation from locally stationary designs and
//! expanding-window forecast comparisons.

pub mod algebra;
pub mod error;
pub mod forecast;
pub mod irf;
pub mod kernel;
pub(crate) mod local_ls;
pub mod modelselect;
pub mod series;
pub mod simlab;
pub mod stats;
pub mod trend;
pub mod tvvar;

pub use error::{Error, Result};
pub use series::SeriesMatrix;
