//! Consensus-based optimization for stochastic programs
//! `min_x E[F(x, Y)]`.
//!
//! Two pipelines turn the expectation into a deterministic objective that
//! the particle system minimizes: sample averages over `M` draws of `Y`
//! ([`approximation::saa_objective`]) and composite-midpoint quadrature
//! ([`approximation::quadrature_objective`]). The [`experiments`] module
//! drives the convergence-rate and success-rate studies and writes CSV.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which the experiment drivers use.
//!
//! ```
//! use stochcbo::{approximation, objectives, CboParams, InitDistribution, RecordPolicy, RunSeed};
//!
//! let obj = objectives::catalog::<f64>("lls-k2").unwrap();
//! let sample = approximation::draw_saa_sample(obj.law(), 500, RunSeed::new(7, 0, 0)).unwrap();
//! let f = approximation::saa_objective(&obj, &sample, Default::default()).unwrap();
//! let run = stochcbo::run_cbo(
//!     &f,
//!     &CboParams::standard(),
//!     &InitDistribution::default(),
//!     200,
//!     1,
//!     RunSeed::new(7, 0, 0),
//!     &RecordPolicy::default(),
//! )
//! .unwrap();
//! assert!((run.final_consensus()[0] - 0.75).abs() < 0.1);
//! ```

// Guards like `!(x > 0.0)` reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approximation;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod objectives;
pub mod scalar;
pub mod seed;

pub use dynamics::{
    consensus_point, em_step, run_cbo, run_meanfield_surrogate, CboParams, DiffusionKind, InitDistribution,
    Objective, ParticleEnsemble, RecordPolicy, Trajectory,
};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use seed::{Role, RunSeed, Stream};

pub type Ensemble = ParticleEnsemble<f64>;
pub type Params = CboParams<f64>;
pub type Init = InitDistribution<f64>;
pub type Objective64 = objectives::StochasticObjective<f64>;
pub type Approx = approximation::ApproxObjective<f64>;
pub type Grid = approximation::QuadratureGrid<f64>;
pub type Sample = approximation::SaaSample<f64>;
pub type Measure = metrics::EmpiricalMeasure<f64>;
