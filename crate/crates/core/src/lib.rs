//! Numerical toolkit for the Kullback–Leibler property of kernel mixture
//! priors: a kernel catalog, condition checkers, the approximating mixtures
//! used to prove the property, a KL quadrature engine and prior-mass Monte
//! Carlo.

pub mod approximants;
pub mod conditions;
pub mod density;
pub mod error;
pub mod kernels;
pub mod kl;
pub mod mixture;
pub mod parallel;
pub mod prior_mc;
pub mod quadrature;
pub mod special_fn;
pub mod verdict;

pub use approximants::{ApproximantSequence, Family};
pub use conditions::{
    check_a_conditions, check_location_scale, check_moment, check_theorem, CheckParams, ConditionItem,
    ConditionReport, ParamBox, Theorem, Weight, Witness,
};
pub use density::{DensitySpec, Support, Window};
pub use error::{Error, Result};
pub use kernels::{BaseDensity, KernelSpec, LocationScaleView};
pub use kl::{kl_divergence, KlResult, LogDensity};
pub use mixture::{Atom, MixingDistribution, MixtureDensity, MixtureKernel};
pub use prior_mc::{BaseMeasure, DPSpec, MassEstimate, MassProblem, ParamDist};
pub use quadrature::{Integral, QuadError, Quadrature};
pub use verdict::Verdict;
