//! First-order comparison methods: Frank-Wolfe with the `2/(t+2)` rule,
//! Frank-Wolfe with line search, projected gradient with Barzilai-Borwein
//! steps, and away-step Frank-Wolfe specialized to D-optimal design.
//!
//! Every method records the Frank-Wolfe gap at each iterate as `gap_proxy`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::objectives::DOptProblem;
use crate::oracles::{FeasibleSet, Objective, Simplex, Vertex};
use crate::report::{Budget, Clock, Counters, SolverReport, Termination, TraceRow};

const MAX_HALVINGS: usize = 60;
const BB_MIN: f64 = 1e-10;
const BB_MAX: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Fw,
    FwLs,
    PgBb,
    FwAwayDopt,
}

impl BaselineMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            BaselineMethod::Fw => "FW",
            BaselineMethod::FwLs => "FW-LS",
            BaselineMethod::PgBb => "PG-BB",
            BaselineMethod::FwAwayDopt => "FW-AWAY-DOPT",
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FW" => Ok(BaselineMethod::Fw),
            "FW-LS" => Ok(BaselineMethod::FwLs),
            "PG-BB" => Ok(BaselineMethod::PgBb),
            "FW-AWAY-DOPT" => Ok(BaselineMethod::FwAwayDopt),
            _ => Err(Error::Unsupported("unknown baseline method")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub budget: Budget,
    /// Stop once the Frank-Wolfe gap is at most this.
    pub gap_tol: f64,
    /// Line search stops when `|phi'(t)| <= ls_tol * |phi'(0)|`.
    pub ls_tol: f64,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod) -> Self {
        Self { method, budget: Budget::default(), gap_tol: 0.0, ls_tol: 1e-10 }
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }
}

struct Run {
    clock: Clock,
    counters: Counters,
    report: SolverReport,
}

impl Run {
    fn new(solver: &str, x0: &DVector<f64>) -> Self {
        Self {
            clock: Clock::start(),
            counters: Counters::default(),
            report: SolverReport {
                solver: solver.into(),
                rows: Vec::new(),
                termination: Termination::Converged,
                x: x0.clone(),
                iterates: Vec::new(),
                events: Vec::new(),
            },
        }
    }

    fn record(&mut self, t: usize, f: f64, gap: f64, alpha: Option<f64>) {
        let mut row = TraceRow::new(t, self.clock.elapsed(), f, gap, &self.counters);
        row.alpha = alpha;
        self.report.rows.push(row);
    }

    fn finish(mut self, x: DVector<f64>, termination: Termination) -> SolverReport {
        self.report.x = x;
        self.report.termination = termination;
        self.report
    }
}

fn check_start(objective: &dyn Objective, set: &dyn FeasibleSet, x0: &DVector<f64>) -> Result<()> {
    if !set.contains(x0, 1e-9) {
        return Err(Error::Infeasible);
    }
    if !objective.in_domain(x0) {
        return Err(Error::Domain("starting point".into()));
    }
    Ok(())
}

/// Gradient, FW vertex and FW gap at `x`.
fn fw_gap(
    objective: &dyn Objective,
    set: &dyn FeasibleSet,
    x: &DVector<f64>,
    counters: &mut Counters,
) -> Result<(DVector<f64>, Vertex, f64)> {
    let g = objective.gradient(x)?;
    counters.grad += 1;
    let v = set.lmo(&g)?;
    counters.lmo += 1;
    let gap = (g.dot(x) - v.dot(&g)).max(0.0);
    Ok((g, v, gap))
}

/// Shrink `tau` geometrically until `x + tau d` is in the domain.
fn shrink_into_domain(objective: &dyn Objective, x: &DVector<f64>, d: &DVector<f64>, mut tau: f64) -> Option<f64> {
    for _ in 0..=MAX_HALVINGS {
        if objective.in_domain(&(x + tau * d)) {
            return Some(tau);
        }
        tau *= 0.5;
    }
    None
}

/// Classic Frank-Wolfe with step `2 / (t + 2)`.
pub fn fw_standard(
    objective: &dyn Objective,
    set: &dyn FeasibleSet,
    x0: &DVector<f64>,
    cfg: &BaselineConfig,
) -> Result<SolverReport> {
    check_start(objective, set, x0)?;
    let mut run = Run::new("FW", x0);
    let mut x = x0.clone();
    let mut alpha = None;
    for t in 0.. {
        let (_, v, gap) = fw_gap(objective, set, &x, &mut run.counters)?;
        run.record(t, objective.value(&x), gap, alpha);
        if gap <= cfg.gap_tol {
            return Ok(run.finish(x, Termination::Converged));
        }
        if let Some(term) = cfg.budget.exhausted(t, &run.counters, &run.clock) {
            return Ok(run.finish(x, term));
        }
        let d = v.to_dense(x.len()) - &x;
        let rule = 2.0 / (t as f64 + 2.0);
        let tau = match shrink_into_domain(objective, &x, &d, rule) {
            Some(tau) => tau,
            None => return Ok(run.finish(x, Termination::Failed("no in-domain step".into()))),
        };
        if tau < rule {
            run.report.events.push(format!("iteration {t}: step shrunk to {tau:e} to stay in the domain"));
        }
        x.axpy(tau, &d, 1.0);
        alpha = Some(tau);
    }
    unreachable!()
}

/// Minimize `phi(t) = f(x + t d)` over `[0, t_max]` by safeguarded Newton
/// iterations on `phi'`. `slope0 = phi'(0) < 0`.
pub fn line_search(
    objective: &dyn Objective,
    x: &DVector<f64>,
    d: &DVector<f64>,
    slope0: f64,
    t_max: f64,
    tol: f64,
    counters: &mut Counters,
) -> Result<f64> {
    if !(slope0 < 0.0) {
        return Ok(0.0);
    }
    let deriv = |t: f64, counters: &mut Counters| -> Result<(f64, f64)> {
        let y = x + t * d;
        let g = objective.gradient(&y)?;
        let hd = objective.hvp(&y, d)?;
        counters.grad += 1;
        counters.hess += 1;
        Ok((g.dot(d), hd.dot(d)))
    };
    let (mut lo, mut hi) = (0.0, t_max);
    let mut t = 0.0;
    let (mut slope, mut curv) = (slope0, deriv(0.0, counters)?.1);
    for _ in 0..100 {
        let newton = if curv > 0.0 { t - slope / curv } else { f64::NAN };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let (s, c) = deriv(next, counters)?;
        t = next;
        slope = s;
        curv = c;
        if slope.abs() <= tol * slope0.abs() {
            break;
        }
        if slope < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
        if hi == t_max && lo == t_max {
            break;
        }
    }
    // minimum at the right end of a monotone decreasing segment
    if slope < 0.0 && hi >= t_max {
        let (s, _) = deriv(t_max, counters)?;
        if s <= 0.0 {
            return Ok(t_max);
        }
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("line search"));
    }
    Ok(t)
}

/// Closed-form step override for [`fw_linesearch_with`]; receives the
/// iterate and the Frank-Wolfe vertex.
pub type ExactStep<'a> = &'a dyn Fn(&DVector<f64>, &Vertex) -> Result<f64>;

/// Frank-Wolfe with a safeguarded line search on each segment.
pub fn fw_linesearch(
    objective: &dyn Objective,
    set: &dyn FeasibleSet,
    x0: &DVector<f64>,
    cfg: &BaselineConfig,
) -> Result<SolverReport> {
    fw_linesearch_with(objective, set, x0, cfg, None)
}

pub fn fw_linesearch_with(
    objective: &dyn Objective,
    set: &dyn FeasibleSet,
    x0: &DVector<f64>,
    cfg: &BaselineConfig,
    exact: Option<ExactStep<'_>>,
) -> Result<SolverReport> {
    check_start(objective, set, x0)?;
    let mut run = Run::new("FW-LS", x0);
    let mut x = x0.clone();
    let mut alpha = None;
    for t in 0.. {
        let (_, v, gap) = fw_gap(objective, set, &x, &mut run.counters)?;
        run.record(t, objective.value(&x), gap, alpha);
        if gap <= cfg.gap_tol {
            return Ok(run.finish(x, Termination::Converged));
        }
        if let Some(term) = cfg.budget.exhausted(t, &run.counters, &run.clock) {
            return Ok(run.finish(x, term));
        }
        let d = v.to_dense(x.len()) - &x;
        let searched = match exact {
            Some(step) => step(&x, &v),
            None => {
                let t_max = objective.max_step(&x, &d, 1.0);
                line_search(objective, &x, &d, -gap, t_max, cfg.ls_tol, &mut run.counters)
            }
        };
        let tau = match searched {
            Ok(tau) if tau.is_finite() && objective.in_domain(&(&x + tau * &d)) => tau,
            _ => {
                run.report.events.push(format!("iteration {t}: line search failed, using 2/(t+2)"));
                match shrink_into_domain(objective, &x, &d, 2.0 / (t as f64 + 2.0)) {
                    Some(tau) => tau,
                    None => return Ok(run.finish(x, Termination::Failed("no in-domain step".into()))),
                }
            }
        };
        x.axpy(tau, &d, 1.0);
        alpha = Some(tau);
    }
    unreachable!()
}

/// Projected gradient with the Barzilai-Borwein step `<s, y> / <y, y>`,
/// safeguarded into `[1e-10, 1e10]` and accepted without a monotonicity
/// test. `lmo_calls_cum` counts projections for this method.
pub fn pg_bb(
    objective: &dyn Objective,
    set: &dyn FeasibleSet,
    x0: &DVector<f64>,
    cfg: &BaselineConfig,
) -> Result<SolverReport> {
    check_start(objective, set, x0)?;
    set.project(x0)?;
    let mut run = Run::new("PG-BB", x0);
    let mut x = x0.clone();
    let mut g = objective.gradient(&x)?;
    run.counters.grad += 1;
    let mut step = (1.0 / g.amax().max(f64::MIN_POSITIVE)).clamp(BB_MIN, BB_MAX);
    let mut alpha = None;
    for t in 0.. {
        let v = set.lmo(&g)?;
        let gap = (g.dot(&x) - v.dot(&g)).max(0.0);
        run.record(t, objective.value(&x), gap, alpha);
        if gap <= cfg.gap_tol {
            return Ok(run.finish(x, Termination::Converged));
        }
        if let Some(term) = cfg.budget.exhausted(t, &run.counters, &run.clock) {
            return Ok(run.finish(x, term));
        }
        let mut tau = step;
        let mut next = None;
        for _ in 0..=MAX_HALVINGS {
            let y = set.project(&(&x - tau * &g))?;
            run.counters.lmo += 1;
            if objective.in_domain(&y) {
                next = Some(y);
                break;
            }
            tau *= 0.5;
        }
        let Some(x_new) = next else {
            return Ok(run.finish(x, Termination::Failed("no in-domain projected step".into())));
        };
        if tau < step {
            run.report.events.push(format!("iteration {t}: step halved to {tau:e} to stay in the domain"));
        }
        let g_new = objective.gradient(&x_new)?;
        run.counters.grad += 1;
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        let yy = yv.dot(&yv);
        if sy > 0.0 && yy > 0.0 {
            step = (sy / yy).clamp(BB_MIN, BB_MAX);
        }
        x = x_new;
        g = g_new;
        alpha = Some(tau);
    }
    unreachable!()
}

/// Away-step Frank-Wolfe directly on the D-optimal objective over the
/// simplex, with closed-form steps toward or away from a design point.
pub fn fw_away_dopt(problem: &DOptProblem, x0: &DVector<f64>, cfg: &BaselineConfig) -> Result<SolverReport> {
    let p = problem.dim();
    let set = Simplex::new(p);
    check_start(problem, &set, x0)?;
    let mut run = Run::new("FW-AWAY-DOPT", x0);
    let mut x = x0.clone();
    let mut alpha = None;
    for t in 0.. {
        let g = problem.gradient(&x)?;
        run.counters.grad += 1;
        let v = set.lmo(&g)?;
        run.counters.lmo += 1;
        let gx = g.dot(&x);
        let gap = (gx - g[v.index]).max(0.0);
        run.record(t, problem.value(&x), gap, alpha);
        if gap <= cfg.gap_tol {
            return Ok(run.finish(x, Termination::Converged));
        }
        if let Some(term) = cfg.budget.exhausted(t, &run.counters, &run.clock) {
            return Ok(run.finish(x, term));
        }
        // away point: the supported coordinate with the largest gradient
        let mut away: Option<usize> = None;
        for j in (0..p).filter(|&j| x[j] > 0.0) {
            if away.map_or(true, |a| g[j] > g[a]) {
                away = Some(j);
            }
        }
        let a = away.expect("iterate on the simplex has support");
        let away_gap = g[a] - gx;
        if gap >= away_gap || x[a] >= 1.0 {
            let tau = problem.linesearch_toward(&x, v.index, 0.0, 1.0)?;
            x *= 1.0 - tau;
            x[v.index] += tau;
            alpha = Some(tau);
        } else {
            let cap = x[a] / (1.0 - x[a]);
            let away_step = -problem.linesearch_toward(&x, a, -cap, 0.0)?;
            x *= 1.0 + away_step;
            if away_step >= cap {
                x[a] = 0.0;
            } else {
                x[a] -= away_step;
            }
            alpha = Some(-away_step);
        }
    }
    unreachable!()
}
