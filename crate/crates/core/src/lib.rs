//! Grasp analysis and synthesis around the min-weight force-closure metric.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod collision;
pub mod epsilon;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod kinematics;
pub mod lp;
pub mod min_weight;
pub mod qp;
pub mod refinement;
pub mod sampler;
pub mod sqp;
pub mod wrench;

pub use collision::Halfspace;
pub use epsilon::{EpsilonMethod, EpsilonResult};
pub use error::{GraspError, Result};
pub use geometry::{ObjectConfig, ObjectModel, Primitive, TriMesh};
pub use kinematics::{HandConfig, HandModel};
pub use min_weight::{MetricGradient, MinWeightSolution};
pub use refinement::{
    RefinementProblem, RefinementResult, RefinementSettings, RefinementStatus, Residuals, SynthesisSettings, Tolerances,
};
pub use sampler::SamplerConfig;
pub use wrench::{ContactFrame, WrenchSet};
