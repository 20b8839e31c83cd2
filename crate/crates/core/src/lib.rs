//! Active search for feasible designs that cover a multi-objective
//! constraint region.
//!
//! Gaussian-process surrogates model each objective. Each round the search
//! picks the candidate whose optimistic outcome would add the most new,
//! not-yet-covered volume inside the feasible box `[τ, ub]`, using either a
//! Monte-Carlo volume (hard) or a smooth closed form (soft).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod baselines;
pub mod check;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod gp;
pub mod linalg;
pub mod metrics;
pub mod normal;
pub mod pool;
pub mod search;
pub mod synthetic;

pub use acquisition::{OptimismSchedule, OverlapWeight, SoftAcqParams};
pub use baselines::PolicyKind;
pub use error::{Error, Result};
pub use geometry::{FeasibleRegion, OutcomeSet};
pub use gp::{GpModel, KernelParams, Scaling};
pub use pool::Pool;
pub use search::{run, AcquisitionMode, History, MocConfig, RunResult, SearchSpace};
pub use synthetic::{ProblemKind, SyntheticProblem};
