//! Simulation and analysis toolkit for the Cox–Ingersoll–Ross process
//!
//! `dv = k(θ − v)dt + ξ√v dW`.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: parameters, Feller ratio, boundary classification, time grids
//!   and closed-form conditional moments.
//! * [`rng`]: keyed, splittable random streams plus gamma, Poisson and
//!   noncentral chi-squared samplers.
//! * [`schemes`]: the full truncation Euler recursion, its interpolant, the
//!   partial truncation and reflection baselines, and the exact transition.
//! * [`theory`]: the constants, sequences and bounds governing the negativity
//!   probability of the truncated scheme.
//! * [`experiments`]: Monte Carlo estimators for strong errors, negativity
//!   frequencies and moments, with deterministic parallel reduction.

pub mod error;
pub mod experiments;
pub mod model;
pub mod rng;
pub mod schemes;
pub mod summation;
pub mod theory;

pub use error::{Error, Result};
pub use experiments::{ErrorEstimate, MomentReport, NegativityReport, RateFit};
pub use model::{BoundaryClass, CirParams, Grid};
pub use rng::{StreamKey, Substream};
pub use schemes::{CoupledPaths, PathState, SchemeKind};
pub use theory::{BoundSequences, FellerDerived};
