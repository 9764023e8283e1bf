//! Free-boundary problems on semi-infinite intervals, solved with a
//! non-standard finite-difference scheme on quasi-uniform grids.
//!
//! The semi-infinite domain `[1, ∞]` is covered by the image of a uniform
//! grid under a logarithmic or algebraic map, so the last grid node sits
//! exactly at infinity and the far-field condition is imposed there without
//! truncating the domain. The free boundary is carried as an extra unknown.
//! Solutions on nested grids feed a Richardson extrapolation ladder and a
//! posteriori error estimators.
//!
//! The perpetual American put is the built-in benchmark:
//!
//! ```
//! use freebound::prelude::*;
//!
//! let put = PerpetualPut::new(MarketParameters::default()).unwrap();
//! let map = GridMap::logarithmic(20.0).unwrap();
//! let run = continuation_solve(&put, map, &[2, 4, 8, 16], &SolverSettings::default()).unwrap();
//! let r = run.free_boundaries();
//! assert!((r[3] - 4.6572864).abs() < 5e-6);
//! ```
//!
//! ## Feature flags
//!
//! - `parallel` (default): assemble residuals and Jacobians and build error
//!   reports on the rayon thread pool. Without it everything runs on the
//!   calling thread. Results are bit-identical either way.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod cli;
pub mod error;
pub mod grid;
pub mod par;
pub mod problem;
pub mod richardson;
pub mod scheme;
pub mod solver;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::grid::{GridMap, MapKind, QuasiUniformGrid, SchemeCoefficients};
    pub use crate::par::Execution;
    pub use crate::problem::{
        to_financial, ExactSolution, FinancialSolution, FreeBoundaryProblem, MarketParameters,
        PerpetualPut,
    };
    pub use crate::richardson::{
        build_ladder, error_estimate, error_report, observed_order, safe_error_estimate,
        ErrorReport, ExtrapolationTable,
    };
    pub use crate::scheme::{jacobian, residual, DiscreteSolution};
    pub use crate::solver::{
        continuation_solve, prolong, solve, Continuation, Method, SolveReport, SolverSettings,
        Termination,
    };
}
