//! Mini-batch quasi-Newton proximal solvers for constrained, total-variation
//! regularized inverse problems.
//!
//! Every numerical routine is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which is what the experiment
//! harness uses.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual_tv;
pub mod error;
pub mod forward;
pub mod grid;
pub mod linalg;
pub mod scalar;
pub mod solvers;
pub mod sr1;
pub mod tv;
pub mod wpm;

pub use error::{Error, Result};
pub use grid::Grid;
pub use scalar::Scalar;
pub use tv::{DualField, TvMode};
pub use wpm::{BoxSet, DiagPlusLowRank, MetricSign};

pub type DualField64 = tv::DualField<f64>;
pub type Metric64 = wpm::DiagPlusLowRank<f64>;
pub type Box64 = wpm::BoxSet<f64>;
pub type Sr1Estimate64 = sr1::Sr1Estimate<f64>;
pub type ViewProblem64 = forward::ViewProblem<f64>;
pub type Phantom64 = forward::Phantom<f64>;
pub type SolverConfig64 = solvers::SolverConfig<f64>;
pub type SolverOutput64 = solvers::SolverOutput<f64>;
pub type IterationTrace64 = solvers::IterationTrace<f64>;
