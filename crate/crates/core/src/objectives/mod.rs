//! Self-concordant test objectives: log-utility portfolio selection,
//! D-optimal design, ridge logistic regression, and plain quadratics.

mod dopt;
mod logistic;
mod portfolio;
mod quadratic;

pub use dopt::{DOptFactor, DOptProblem};
pub use logistic::{softplus, LogisticProblem};
pub use portfolio::PortfolioProblem;
pub use quadratic::QuadraticObjective;
