//! Distributed gradient descent with local updates and model averaging on
//! problems whose local optimal sets intersect.
//!
//! - [`objectives`]: local loss oracles (least squares with power `l`, the
//!   two-node disk/half-plane problem).
//! - [`geometry`]: affine subspaces, projections and the separation constant.
//! - [`simulator`]: the local-descent / averaging loop with per-round
//!   telemetry and the distance-decrement audit.
//! - [`tradeoff`]: decay models, round and cost bounds, optimal local step
//!   counts and the lower Lambert W branch.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

mod error;
pub mod geometry;
pub mod linalg;
pub mod objectives;
pub mod regression;
pub mod simulator;
pub mod tradeoff;

pub use error::{Error, Result};
pub use geometry::{AffineSubspace, OptimalSet, SubspaceCollection};
pub use linalg::Matrix;
pub use objectives::{Beck, BeckNode, LeastSquares, Objective};
pub use simulator::{
    LocalUpdatePolicy, NodeExecutor, Problem, RoundRecord, SimulationRun, StepRule, StopRule,
    Termination,
};
pub use tradeoff::{CostModel, DecayModel};
