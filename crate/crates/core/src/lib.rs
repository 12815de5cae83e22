//! Frank-Wolfe based projected Newton method for minimizing self-concordant
//! functions over sets with a cheap linear minimization oracle.
//!
//! The outer loop ([`nfw_solve`]) takes damped and then full inexact Newton
//! steps; each step solves the quadratic model of the objective over the
//! feasible set with a Frank-Wolfe inner solver ([`inner`]) to an accuracy
//! that shrinks geometrically once the iterate is in the fast region.
//!
//! ```
//! use newton_fw::{nfw_solve, NfwOptions, PortfolioProblem, Simplex, SolverParams, FeasibleSet};
//! use nalgebra::DMatrix;
//!
//! let returns = DMatrix::from_row_slice(3, 2, &[1.1, 0.9, 0.95, 1.05, 1.0, 1.02]);
//! let problem = PortfolioProblem::new(returns).unwrap();
//! let set = Simplex::new(2);
//! let report = nfw_solve(&problem, &set, &SolverParams::default(), &set.default_start(), &NfwOptions::default()).unwrap();
//! assert!(report.termination.is_converged());
//! ```

pub mod baselines;
pub mod bench;
pub mod error;
pub mod inner;
pub mod objectives;
pub mod oracles;
pub mod report;
pub mod sc;
pub mod solver;
pub mod sparse;

pub use baselines::{fw_away_dopt, fw_linesearch, fw_standard, pg_bb, BaselineConfig, BaselineMethod};
pub use error::{Error, Result};
pub use inner::{ActiveSet, InnerResult, QuadraticModel};
pub use objectives::{DOptProblem, LogisticProblem, PortfolioProblem, QuadraticObjective};
pub use oracles::{FeasibleSet, HessianOperator, L1Ball, Objective, Simplex, Vertex};
pub use report::{Budget, SolverReport, Stage, Termination, TraceRow};
pub use sc::{h, h_inv, nu_exponent, omega, omega_star, SolverParams};
pub use solver::{damped_descent_check, damped_step_size, k_max_damped, nfw_solve, InnerMethod, NfwOptions};
pub use sparse::CsrMatrix;
