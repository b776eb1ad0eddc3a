//! Independence and indetermination couplings of two finite margins, with
//! exact sampling, association criteria, modularity clustering, guessing and
//! task-partition bounds, and a continuous counterpart on rectangles.

pub mod association;
pub mod continuous;
pub mod coupling;
pub mod error;
pub mod graph_cluster;
pub mod guessing;
pub mod matrix;
pub mod rng;
pub mod sampler;
pub mod task_partition;
pub mod tolerance;

pub use coupling::{
    check_condition_h, independence_coupling, indetermination_coupling, indetermination_signed, CouplingKind,
    JointDistribution, Margin, SignedCouplingMatrix,
};
pub use error::{CoreError, Result};
pub use matrix::Matrix;
