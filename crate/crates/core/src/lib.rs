//! Epsilon-global-optimal joint power and sub-carrier allocation for
//! multi-cell, multi-carrier downlink NOMA.
//!
//! The solver pipeline is:
//!
//! 1. [`model`]: the problem instance, canonical indexing, SINR and sum-rate
//!    evaluation, constraint checking and the pairwise SIC feasibility test.
//! 2. [`reduction`]: assigns each (cell, sub-carrier) to its strongest user
//!    and maps between per-carrier powers and SINR vectors `z = 1 + gamma`.
//! 3. [`fractional`]: Dinkelbach projection of an SINR vertex onto the
//!    boundary of the feasible SINR set, with the inner max-min problem solved
//!    exactly by [`simplex`].
//! 4. [`polyblock`]: outer polyblock approximation returning an allocation
//!    whose sum rate is certified within `epsilon` nats of the optimum.
//!
//! [`oracle`] holds independent checks (grid search) and baseline
//! allocators, [`registry`] exposes every allocator behind one trait, and
//! [`experiments`] generates hexagonal two-cell scenarios and runs the
//! Monte Carlo studies.

pub mod error;
pub mod experiments;
pub mod fractional;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod polyblock;
pub mod reduction;
pub mod registry;
pub mod simplex;

pub use error::{Error, Result};
pub use model::{Allocation, CanonicalIndex, DecodingOrder, Scenario};
pub use polyblock::{SolveOptions, SolveResult};
pub use reduction::{ReducedProblem, SinrVector};
pub use registry::{Allocator, AllocatorRegistry};
