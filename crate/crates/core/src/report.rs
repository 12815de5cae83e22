//! Per-iteration traces shared by every solver.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::DVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Damped,
    Full,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Damped => "damped",
            Stage::Full => "full",
        })
    }
}

/// One trace row. Row 0 describes the starting point; row `k + 1` the state
/// after iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub time_s: f64,
    pub fval: f64,
    /// Frank-Wolfe gap for first-order methods, the certificate `lambda_k` for
    /// the Newton method.
    pub gap_proxy: f64,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub stage: Option<Stage>,
    pub alpha: Option<f64>,
    pub inner_lmo: usize,
    pub lmo_calls_cum: usize,
    pub grad_evals_cum: usize,
    pub hess_ops_cum: usize,
}

impl TraceRow {
    pub fn new(iter: usize, time_s: f64, fval: f64, gap_proxy: f64, counters: &Counters) -> Self {
        Self {
            iter,
            time_s,
            fval,
            gap_proxy,
            gamma: None,
            eta: None,
            lambda: None,
            stage: None,
            alpha: None,
            inner_lmo: 0,
            lmo_calls_cum: counters.lmo,
            grad_evals_cum: counters.grad,
            hess_ops_cum: counters.hess,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// The solver's own stopping rule fired.
    Converged,
    IterationBudget,
    LmoBudget,
    TimeBudget,
    /// The subproblem solver ran out of iterations.
    InnerBudget,
    Failed(String),
}

impl Termination {
    pub fn is_converged(&self) -> bool {
        matches!(self, Termination::Converged)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Converged => f.write_str("converged"),
            Termination::IterationBudget => f.write_str("iteration budget exhausted"),
            Termination::LmoBudget => f.write_str("LMO budget exhausted"),
            Termination::TimeBudget => f.write_str("time budget exhausted"),
            Termination::InnerBudget => f.write_str("inner solver budget exhausted"),
            Termination::Failed(msg) => write!(f, "failed: {msg}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub lmo: usize,
    pub grad: usize,
    pub hess: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub max_iters: usize,
    pub max_lmo: usize,
    pub max_seconds: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_iters: 100_000, max_lmo: usize::MAX, max_seconds: f64::INFINITY }
    }
}

impl Budget {
    pub fn iterations(max_iters: usize) -> Self {
        Self { max_iters, ..Self::default() }
    }

    pub(crate) fn exhausted(&self, iter: usize, counters: &Counters, clock: &Clock) -> Option<Termination> {
        if iter >= self.max_iters {
            Some(Termination::IterationBudget)
        } else if counters.lmo >= self.max_lmo {
            Some(Termination::LmoBudget)
        } else if clock.elapsed() >= self.max_seconds {
            Some(Termination::TimeBudget)
        } else {
            None
        }
    }
}

pub(crate) struct Clock(Instant);

impl Clock {
    pub(crate) fn start() -> Self {
        Clock(Instant::now())
    }

    pub(crate) fn elapsed(&self) -> f64 {
        Duration::as_secs_f64(&self.0.elapsed())
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub solver: String,
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    /// Final iterate.
    pub x: DVector<f64>,
    /// Iterates matching `rows`, when recording was requested.
    pub iterates: Vec<DVector<f64>>,
    /// Notable events (domain fallbacks, failed runtime checks).
    pub events: Vec<String>,
}

impl SolverReport {
    pub fn final_value(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.fval)
    }

    pub fn lmo_calls(&self) -> usize {
        self.rows.last().map_or(0, |r| r.lmo_calls_cum)
    }

    /// Rows of the given stage.
    pub fn stage_rows(&self, stage: Stage) -> impl Iterator<Item = (usize, &TraceRow)> {
        self.rows.iter().enumerate().filter(move |(_, r)| r.stage == Some(stage))
    }
}
