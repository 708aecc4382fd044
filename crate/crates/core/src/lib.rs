//! Free-knot polynomial spline approximation of sampled stochastic processes.

pub mod diffusion;
pub mod error;
pub mod fit;
pub mod knots;
pub mod mc;
pub mod norm;
pub mod path;
pub mod poly;
pub mod rng;
pub mod sim;
pub mod spline;

pub use error::{Error, Result};
pub use fit::{best_poly, delta, lp_norm, FitResult, Fitter};
pub use norm::Norm;
pub use path::{PathKind, SampledPath};
pub use poly::Polynomial;
pub use rng::RngStream;
pub use knots::{
    build_spline, build_spline_eps, gamma_k, stopping_times, ApproxParams, FreeKnotSpline, KnotSchedule,
    DEFAULT_TOL_REL,
};
pub use spline::{spline_error, Spline};
