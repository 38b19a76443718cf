//! Optimization drivers over an abstract bilevel problem.

pub mod config;
pub mod driver;
pub mod fixture;
pub mod hypergrad;
pub mod problem;
pub mod step;

pub use config::{OptimizerConfig, StepRule};
pub use driver::{
    am_smo, bismo_run, inner_unroll, mo_only, run, Method, RunInit, RunReport, RunState, TrajectoryPoint,
};
pub use fixture::QuadraticBilevel;
pub use hypergrad::{hypergrad_cg, hypergrad_fd, hypergrad_neumann, CgOutcome, NeumannOutcome};
pub use problem::{audit_gradients, AuditReport, BilevelProblem, SmoProblem};
pub use step::{step, AdamState, StepState};
