//! Tabular robust constrained MDPs.
//!
//! The crate provides exact evaluation of occupancies, values and Lagrangian
//! values, uncertainty sets over transition kernels, softmax policy mirror
//! descent with augmented-Lagrangian multipliers, adversarial kernel ascent
//! (projected mirror ascent and conservative policy iteration over kernels),
//! seeded Monte-Carlo estimators and the primal-dual training loop that ties
//! them together. It is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;

pub mod driver;
pub mod error;
pub mod instances;
pub mod math;
pub mod model;
pub mod policy_md;
pub mod protocol;
pub mod sampling;
pub mod tma;
pub mod uncertainty;

pub use error::{Error, Result};
pub use model::{
    all_values, g_values, lagrangian_cost, lagrangian_value, mismatch_coefficient, occupancy,
    perf_diff_terms, q_values, value, CostShape, CostTable, OccupancyPair, PerfDiffForm, RcmdpSpec,
    SoftmaxPolicy, StochasticPolicy, TabularPolicy, TransitionKernel, ValueFunction,
};
pub use uncertainty::{
    contains, distort, linear_maximize, project, Containment, NonRectSet, Norm, RectSet, Sign,
    UncertaintySet,
};
