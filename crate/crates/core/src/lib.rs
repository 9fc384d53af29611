//! Optimal control of multiclass fluid queueing networks and oblique
//! decision-tree policies learned from solver labels.

pub mod dataset;
pub mod fluid;
pub mod linalg;
pub mod lp;
pub mod network;
pub mod octree;
pub mod policy;
pub mod scalar;

/// Double-precision network instance.
pub type Network = network::NetworkSpec<f64>;
/// Double-precision linear program.
pub type Lp = lp::LpProblem<f64>;
