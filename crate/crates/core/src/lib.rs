//! Copula-based diffusion models.
//!
//! An observed process `Y = V(X)` is a strictly increasing, nonparametric
//! transformation of an underlying parametric diffusion `X`. The crate covers
//! the model algebra (scale, stationary and transition densities, the implied
//! copula and identification normalisations), exact and Euler simulation,
//! pseudo- and sieve-maximum-likelihood estimation, kernel drift/diffusion
//! estimators, and a bootstrap pseudo-likelihood-ratio test.

pub mod error;
pub mod numerics;
pub mod marginals;
pub mod upd;
pub mod transform;
pub mod simulate;
pub mod estimate;
pub mod inference;
pub mod io;

pub use error::{Error, Result};
pub use upd::{Domain, ModelKind, ModelSpec, StationaryLaw, TransitionDensitySpec, TransitionMethod, UpdModel};
pub use transform::{copula_density, equivalence_check, MarginalDescriptor, Provenance, SmoothMonotone, Structure, Transformation};
pub use simulate::{Init, PathConfig};
pub use estimate::{EstimatorKind, Family, FitOptions, FitResult, ParametricModel};
pub use marginals::{EmpiricalCdf, KernelEstimate, MarginalSource, Skst, SkstParams};
pub use inference::{Dgp, LrTestConfig, LrTestReport, McConfig, McReport};
