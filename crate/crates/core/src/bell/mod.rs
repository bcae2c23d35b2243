//! Two-particle local hidden-variable laboratory.
//!
//! [`model`] holds λ spaces and response functions, [`chsh`] the correlation
//! algebra and the deterministic vertex set, [`behavior`] the four-table
//! bipartite statistics, and [`fine`] the joint-distribution feasibility
//! check backed by the dense simplex in [`simplex`].

pub mod behavior;
pub mod chsh;
pub mod fine;
pub mod model;
pub mod simplex;

pub use behavior::Behavior;
pub use chsh::{chsh, correlation, deterministic_bound, ChshVariant, DeterministicStrategy};
pub use fine::{fine_equivalence_scan, fine_feasibility, FineOutcome, JointDistribution16};
pub use model::{coincidence, hidden_joint_per_particle, Integration, LambdaSpace, LocalModel, Response};
