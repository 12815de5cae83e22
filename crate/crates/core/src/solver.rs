//! Frank-Wolfe based projected Newton method.
//!
//! Each outer iteration builds the second-order model of the objective at
//! `x_k`, solves it inexactly over the feasible set with a Frank-Wolfe inner
//! solver to accuracy `eta_k`, and moves along `d_k = z_k - x_k`:
//!
//! * damped step `x + alpha d` while far from the optimum, with `lambda`, `eta`
//!   held fixed;
//! * full step `x + d` once `gamma_k + eta_k <= h_inv(beta)` (or the certificate
//!   already sits below `beta`), after which `lambda` and `eta` contract by
//!   `sigma` each iteration.
//!
//! The run stops when `lambda_k <= eps`. `lambda_k` is a certificate bounding
//! `||x_k - x*||_{x*}` for standard self-concordant objectives under valid
//! parameters; it is never measured.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::inner::{
    default_max_iters, estimate_lambda_max, fw_away_quadratic, fw_quadratic, ActiveSet, InnerOptions,
    InnerResult, QuadraticModel,
};
use crate::oracles::{FeasibleSet, Objective};
use crate::report::{Budget, Clock, Counters, SolverReport, Stage, Termination, TraceRow};
use crate::sc::{h_inv, omega, SolverParams};

/// Power iterations spent on the inner budget estimate.
const POWER_ITERS: usize = 20;

/// Maximum number of accuracy halvings on a degenerate damped direction.
const MAX_ETA_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerMethod {
    #[default]
    Away,
    Plain,
}

#[derive(Debug, Clone, Default)]
pub struct NfwOptions {
    pub budget: Budget,
    pub inner: InnerMethod,
    /// Fixed inner iteration cap; the default derives one from a power
    /// iteration estimate of the Hessian's top eigenvalue.
    pub inner_max_iters: Option<usize>,
    /// Lower bound on the optimal value, enabling the damped-stage cap.
    pub fstar_lower: Option<f64>,
    pub record_iterates: bool,
}

/// `alpha = delta (gamma^2 - eta^2) / (gamma^3 + gamma^2 - eta^2 gamma)`; requires `gamma > eta >= 0`.
pub fn damped_step_size(gamma: f64, eta: f64, delta: f64) -> Result<f64> {
    if !(gamma > eta && eta >= 0.0) {
        return Err(Error::ScalarDomain { func: "damped_step_size", value: gamma });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::ScalarDomain { func: "damped_step_size(delta)", value: delta });
    }
    let g2 = gamma * gamma;
    let e2 = eta * eta;
    Ok(delta * (g2 - e2) / (gamma * (g2 + gamma - e2)))
}

/// Guaranteed-decrease test for a damped step:
/// `f_after <= f_before - delta omega((gamma^2 - eta^2) / gamma) + 1e-9`.
pub fn damped_descent_check(f_before: f64, f_after: f64, gamma: f64, eta: f64, delta: f64) -> bool {
    if !(gamma > 0.0) {
        return f_after <= f_before + 1e-9;
    }
    let decrease = omega(((gamma * gamma - eta * eta) / gamma).max(0.0)).unwrap_or(0.0);
    f_after <= f_before - delta * decrease + 1e-9
}

/// Cap on damped iterations:
/// `ceil((f0 - f_low) / (delta omega((1 - 2 C1) / C1 h_inv(beta))))`.
pub fn k_max_damped(f0: f64, fstar_lower: f64, params: &SolverParams) -> Result<u64> {
    if !(params.c_one > 0.0 && params.c_one < 0.5) {
        return Err(Error::InvalidParams(format!("C1 = {} outside (0, 0.5)", params.c_one)));
    }
    if f0 <= fstar_lower {
        return Ok(0);
    }
    let arg = (1.0 - 2.0 * params.c_one) / params.c_one * h_inv(params.beta)?;
    let per_step = params.delta * omega(arg)?;
    Ok(((f0 - fstar_lower) / per_step).ceil() as u64)
}

/// Mutable state of an outer run.
#[derive(Debug, Clone)]
pub struct NfwState {
    pub x: DVector<f64>,
    /// `lambda_{k-1}`; starts at `beta / sigma`.
    pub lambda: f64,
    pub eta: f64,
    pub stage: Stage,
    pub k: usize,
    pub counters: Counters,
}

impl NfwState {
    pub fn new(x0: DVector<f64>, params: &SolverParams) -> Result<Self> {
        Ok(Self {
            x: x0,
            lambda: params.beta / params.sigma,
            eta: params.eta0()?,
            stage: Stage::Damped,
            k: 0,
            counters: Counters::default(),
        })
    }
}

struct Subproblem {
    result: InnerResult,
    active: Option<ActiveSet>,
}

pub fn nfw_solve(
    objective: &dyn Objective,
    set: &dyn FeasibleSet,
    params: &SolverParams,
    x0: &DVector<f64>,
    opts: &NfwOptions,
) -> Result<SolverReport> {
    let check = params.validate();
    if !check.is_valid() {
        return Err(Error::InvalidParams(check.to_string()));
    }
    if !set.contains(x0, 1e-9) {
        return Err(Error::Infeasible);
    }
    if !objective.in_domain(x0) {
        return Err(Error::Domain("starting point".into()));
    }
    let clock = Clock::start();
    let switch_radius = h_inv(params.beta)?;
    let mut st = NfwState::new(x0.clone(), params)?;
    let mut active = match opts.inner {
        InnerMethod::Away => set.decompose(x0).map(|p| ActiveSet::from_parts(set.dim(), p)).transpose()?,
        InnerMethod::Plain => None,
    };
    let mut f = objective.value(&st.x);
    let damped_cap = match opts.fstar_lower {
        Some(lo) => Some(k_max_damped(f, lo, params)?),
        None => None,
    };

    let mut report = SolverReport {
        solver: "NFW".into(),
        rows: vec![TraceRow::new(0, 0.0, f, st.lambda, &st.counters)],
        termination: Termination::Converged,
        x: st.x.clone(),
        iterates: Vec::new(),
        events: Vec::new(),
    };
    if opts.record_iterates {
        report.iterates.push(st.x.clone());
    }
    let mut damped_steps = 0u64;
    let mut halvings = 0;

    loop {
        if let Some(t) = opts.budget.exhausted(st.k, &st.counters, &clock) {
            report.termination = t;
            break;
        }
        let grad = objective.gradient(&st.x)?;
        st.counters.grad += 1;
        let hess = objective.hessian_at(&st.x)?;
        let tol = st.eta * st.eta;
        let cap = match opts.inner_max_iters {
            Some(n) => n,
            None => {
                let (lam, ops) = estimate_lambda_max(hess.as_ref(), POWER_ITERS);
                st.counters.hess += ops;
                default_max_iters(lam, set.diameter(), tol)
            }
        };
        let remaining = opts.budget.max_lmo.saturating_sub(st.counters.lmo);
        let inner_opts = InnerOptions::with_max_iters(cap.min(remaining).max(1));
        let model = QuadraticModel::new(grad, hess.as_ref(), st.x.clone(), tol);

        let solved = match opts.inner {
            InnerMethod::Away => fw_away_quadratic(&model, set, active.clone(), inner_opts)
                .map(|(result, a)| Subproblem { result, active: Some(a) }),
            InnerMethod::Plain => fw_quadratic(&model, set, inner_opts).map(|result| Subproblem { result, active: None }),
        };
        let sub = match solved {
            Ok(s) => s,
            Err(Error::InnerBudgetExhausted(partial)) => {
                st.counters.lmo += partial.lmo_calls;
                st.counters.hess += partial.hess_ops;
                report.termination = if st.counters.lmo >= opts.budget.max_lmo {
                    Termination::LmoBudget
                } else {
                    Termination::InnerBudget
                };
                report.events.push(format!(
                    "iteration {}: inner solve stopped at gap {:e} after {} LMO calls",
                    st.k, partial.gap, partial.lmo_calls
                ));
                break;
            }
            Err(e) => return Err(e),
        };
        let inner = sub.result;
        st.counters.lmo += inner.lmo_calls;
        st.counters.hess += inner.hess_ops;

        let d = &inner.u - &st.x;
        // H d is already available from the inner solve
        let gamma = inner.hd.dot(&d).max(0.0).sqrt();
        let eta = st.eta;

        let mut full = gamma + eta <= switch_radius || st.lambda <= params.beta;
        let mut x_new = if full { inner.u.clone() } else { st.x.clone() };
        if full && !objective.in_domain(&x_new) {
            report.events.push(format!("iteration {}: full step left the domain, retried as damped", st.k));
            full = false;
        }

        let alpha;
        if full {
            alpha = 1.0;
            st.lambda *= params.sigma;
            st.eta *= params.sigma;
            st.stage = Stage::Full;
            active = sub.active;
        } else {
            if gamma <= eta {
                // the model gap is below the solve accuracy; tighten and re-solve
                halvings += 1;
                if halvings > MAX_ETA_HALVINGS {
                    report.events.push("accuracy halving limit reached".into());
                    report.termination = Termination::Converged;
                    break;
                }
                st.eta *= 0.5;
                continue;
            }
            alpha = damped_step_size(gamma, eta, params.delta)?;
            x_new = &st.x + alpha * &d;
            if let (Some(a), Some(z)) = (active.as_mut(), sub.active.as_ref()) {
                a.mix(z, alpha);
            }
            damped_steps += 1;
            if damped_cap.is_some_and(|cap| damped_steps == cap + 1) {
                report.events.push(format!("damped steps exceeded the bound {}", damped_cap.unwrap_or(0)));
            }
        }

        let f_new = objective.value(&x_new);
        if !f_new.is_finite() {
            return Err(Error::Domain(format!("iterate {} left the objective domain", st.k + 1)));
        }
        if !full && !damped_descent_check(f, f_new, gamma, eta, params.delta) {
            report.events.push(format!(
                "iteration {}: damped step decreased f by {:e}, less than guaranteed",
                st.k,
                f - f_new
            ));
        }
        st.x = x_new;
        f = f_new;
        st.k += 1;

        let mut row = TraceRow::new(st.k, clock.elapsed(), f, st.lambda, &st.counters);
        row.gamma = Some(gamma);
        row.eta = Some(eta);
        row.lambda = Some(st.lambda);
        row.stage = Some(if full { Stage::Full } else { Stage::Damped });
        row.alpha = Some(alpha);
        row.inner_lmo = inner.lmo_calls;
        report.rows.push(row);
        if opts.record_iterates {
            report.iterates.push(st.x.clone());
        }

        if full && st.lambda <= params.eps {
            report.termination = Termination::Converged;
            break;
        }
    }
    report.x = st.x;
    Ok(report)
}
