//! Full-splitting proximal solver for `min F(Ax) + G(y) + H(x, y)` with
//! `F`, `G` proper lower semicontinuous and `H` smooth, together with
//! runtime checks of the inequalities that drive its convergence theory.

pub mod bench;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod functions;
pub mod linop;
pub mod problem;
pub mod solver;
pub mod trace;
pub mod tuning;
pub mod vector;

pub use error::{Error, Result};
pub use functions::{ProxFunction, QuadraticCoupling, SmoothCoupling};
pub use linop::{DenseOperator, Spectrum};
pub use problem::{AssumptionFlags, PrimalDualPoint, ProblemInstance};
pub use solver::{run, step, RunOptions, RunOutcome, SolverState, StoppingRule};
pub use trace::{IterationRecord, IterationTrace, RunStatus};
pub use tuning::{derive_constants, select_parameters, validate, DerivedConstants, SolverParams};
