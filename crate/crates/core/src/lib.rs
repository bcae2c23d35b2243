//! Pilot-wave spin measurement workbench.
//!
//! The numerical layers are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix them to double precision, which is what the reports use.
//! The Bell laboratory works in `f64` throughout, with an exact rational path
//! for the joint-distribution linear program.

pub mod bell;
pub mod ensembles;
pub mod error;
pub mod export;
pub mod guidance;
pub mod quantum;
pub mod real;
pub mod sampling;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use real::Real;

pub type Direction64 = quantum::Direction<f64>;
pub type SpinCoefficients64 = quantum::SpinCoefficients<f64>;
pub type Grid64 = solver::Grid1D<f64>;
pub type SpinorField64 = solver::SpinorField<f64>;
pub type FieldProfile64 = solver::FieldProfile<f64>;
pub type Propagator64 = solver::Propagator<f64>;
pub type Trajectory64 = guidance::Trajectory<f64>;
pub type TrajectoryRun64 = guidance::TrajectoryRun<f64>;
pub type Scenario64 = scenario::Scenario<f64>;
pub type HiddenSample64 = ensembles::HiddenSample<f64>;
pub type EnsemblePartition64 = ensembles::EnsemblePartition<f64>;
pub type HiddenJointTable64 = ensembles::HiddenJointTable<f64>;
pub type SequentialTable64 = ensembles::SequentialTable<f64>;
