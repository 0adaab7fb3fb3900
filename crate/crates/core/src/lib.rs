//! Finite-volume laboratory for the attraction-repulsion Keller-Segel system
//!
//! ```text
//! u_t = lap u - chi div(u grad v) + xi div(u grad w)
//! v_t = D1 lap v + alpha u - beta v
//! w_t = D2 lap w + gamma u - delta w
//! ```
//!
//! on a rectangle with no-flux boundaries. The crate provides an IMEX solver
//! that conserves mass and keeps all fields nonnegative, the Lyapunov
//! functional and its dissipation evaluated on the grid, the algebraic regime
//! conditions, and post-processing (decay fits, linearised rates).

// `!(x > 0.0)` is used on purpose so that NaN is rejected with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod linsolve;
pub mod model;
pub mod output;
pub mod solver;
pub mod sweep;

pub use config::{make_init, parse_config, RunConfig};
pub use error::{Error, Result};
pub use functionals::DiagnosticsRow;
pub use grid::{Grid, ScalarField};
pub use model::{classify, Params, RegimeReport};
pub use solver::{run, Simulation, SolverConfig, State, Termination};
