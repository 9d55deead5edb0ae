//! Gas network design optimizer.
//!
//! Selects discrete pipe diameters and active-element states that carry a
//! demand nomination at minimum construction cost. The solver couples a
//! convex flow master problem with a nonconvex validation subproblem through
//! no-good cuts, wraps that loop in a binary search on the budget, and seeds
//! the search from a cheapest-first enumeration. A mixed-integer conic
//! relaxation provides independent lower bounds.

pub mod convex;
pub mod cvxflow;
pub mod decomposition;
pub mod error;
pub mod ingest;
pub mod mip;
pub mod model;
pub mod relaxation;
pub mod subproblem;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use model::{
    assignment_cost, effective_pipe, ActiveLimits, Arc, ArcClass, ArcKind, DesignAssignment, FormulationConfig,
    Instance, Network, Node, Nomination, PhysicsConstants, PipeCandidate,
};
