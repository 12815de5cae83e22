//! Frank-Wolfe solvers for the constrained Newton subproblem
//!
//! ```text
//! min_{u in X}  psi(u) = <h, u - u0> + 0.5 <H (u - u0), u - u0>
//! ```
//!
//! Both variants use the exact step along the chosen direction and stop once
//! the Frank-Wolfe gap `V_t = <grad psi(u_t), u_t - v_t>` drops to `tol`. Callers
//! pass `tol = eta^2`, which makes the returned point an eta-solution in the
//! sense `max_{w in X} <grad psi(u), u - w> <= eta^2`.
//!
//! Gradients are updated incrementally: each iteration costs one LMO call and
//! one Hessian column (two for away steps).

use std::collections::HashMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::oracles::{FeasibleSet, HessianOperator, Vertex, VertexKey};

/// Incrementally maintained products are recomputed exactly this often.
const REFRESH_EVERY: usize = 256;

/// Iterations with no representable movement before the solve is declared
/// stalled at the rounding floor.
const STALL_LIMIT: usize = 64;

/// Hard cap on inner iterations.
pub const MAX_INNER_ITERS: usize = 1_000_000;

pub struct QuadraticModel<'a> {
    /// `h`, the objective gradient at the anchor.
    pub gradient: DVector<f64>,
    pub hessian: &'a dyn HessianOperator,
    /// `u0`, the current outer iterate.
    pub anchor: DVector<f64>,
    /// Stopping threshold on the Frank-Wolfe gap.
    pub tol: f64,
}

impl<'a> QuadraticModel<'a> {
    pub fn new(
        gradient: DVector<f64>,
        hessian: &'a dyn HessianOperator,
        anchor: DVector<f64>,
        tol: f64,
    ) -> Self {
        Self { gradient, hessian, anchor, tol }
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// `psi(u)`
    pub fn value(&self, u: &DVector<f64>) -> f64 {
        let d = u - &self.anchor;
        self.gradient.dot(&d) + 0.5 * self.hessian.apply(&d).dot(&d)
    }

    /// `grad psi(u) = h + H (u - u0)`
    pub fn grad_at(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.gradient + self.hessian.apply(&(u - &self.anchor))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerOptions {
    pub max_iters: usize,
    /// Keep every gap value in [`InnerResult::gaps`].
    pub record_gaps: bool,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self { max_iters: MAX_INNER_ITERS, record_gaps: false }
    }
}

impl InnerOptions {
    pub fn with_max_iters(max_iters: usize) -> Self {
        Self { max_iters, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    /// Approximate subproblem solution.
    pub u: DVector<f64>,
    /// Last Frank-Wolfe gap.
    pub gap: f64,
    pub iterations: usize,
    pub lmo_calls: usize,
    pub hess_ops: usize,
    /// `H (u - u0)`, recomputed exactly on return.
    pub hd: DVector<f64>,
    /// Stopped because the gap hit the floating-point noise floor rather
    /// than `tol`.
    pub floor_reached: bool,
    pub gaps: Vec<f64>,
}

/// A point stored as a convex combination of vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    dim: usize,
    atoms: Vec<(Vertex, f64)>,
    index: HashMap<VertexKey, usize>,
}

impl ActiveSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, atoms: Vec::new(), index: HashMap::new() }
    }

    pub fn singleton(dim: usize, v: Vertex) -> Self {
        let mut s = Self::new(dim);
        s.add(v, 1.0);
        s
    }

    pub fn from_parts(dim: usize, parts: impl IntoIterator<Item = (Vertex, f64)>) -> Result<Self> {
        let mut s = Self::new(dim);
        for (v, w) in parts {
            if w > 0.0 {
                s.add(v, w);
            }
        }
        s.check(1e-9)?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[(Vertex, f64)] {
        &self.atoms
    }

    pub fn weight_sum(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    pub fn weight_of(&self, v: &Vertex) -> f64 {
        self.index.get(&v.key()).map_or(0.0, |&i| self.atoms[i].1)
    }

    /// Add `w` to the weight of `v`.
    pub fn add(&mut self, v: Vertex, w: f64) {
        match self.index.get(&v.key()) {
            Some(&i) => self.atoms[i].1 += w,
            None => {
                self.index.insert(v.key(), self.atoms.len());
                self.atoms.push((v, w));
            }
        }
    }

    pub fn remove(&mut self, v: &Vertex) {
        if let Some(i) = self.index.remove(&v.key()) {
            self.atoms.swap_remove(i);
            if i < self.atoms.len() {
                self.index.insert(self.atoms[i].0.key(), i);
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for (_, w) in &mut self.atoms {
            *w *= factor;
        }
    }

    /// Replace `self` by `(1 - alpha) self + alpha other`.
    pub fn mix(&mut self, other: &ActiveSet, alpha: f64) {
        if alpha >= 1.0 {
            *self = other.clone();
            return;
        }
        self.scale(1.0 - alpha);
        for (v, w) in &other.atoms {
            self.add(*v, alpha * w);
        }
        self.prune();
    }

    fn prune(&mut self) {
        let dead: Vec<Vertex> = self.atoms.iter().filter(|(_, w)| *w <= 0.0).map(|(v, _)| *v).collect();
        for v in &dead {
            self.remove(v);
        }
    }

    pub fn materialize(&self) -> DVector<f64> {
        let mut u = DVector::zeros(self.dim);
        for (v, w) in &self.atoms {
            v.axpy_into(*w, &mut u);
        }
        u
    }

    /// Weights nonnegative and summing to one within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::Inconsistent { drift: 1.0 });
        }
        let drift = (self.weight_sum() - 1.0).abs();
        if drift > tol {
            return Err(Error::Inconsistent { drift });
        }
        if let Some((_, w)) = self.atoms.iter().find(|(_, w)| *w < -tol) {
            return Err(Error::Inconsistent { drift: -w });
        }
        Ok(())
    }
}

/// Rounding floor of a computed gap `<g, u> - <g, v>`.
fn gap_floor(g: &DVector<f64>, u: &DVector<f64>, v: &Vertex) -> f64 {
    32.0 * f64::EPSILON * g.amax() * (u.lp_norm(1) + v.value.abs())
}

struct Tracker<'m, 'a> {
    model: &'m QuadraticModel<'a>,
    u: DVector<f64>,
    // H u0
    hu0: DVector<f64>,
    // H (u - u0), maintained incrementally
    hd: DVector<f64>,
    since_refresh: usize,
    stalled: usize,
    hess_ops: usize,
}

impl<'m, 'a> Tracker<'m, 'a> {
    fn new(model: &'m QuadraticModel<'a>, u: DVector<f64>) -> Self {
        let hu0 = model.hessian.apply(&model.anchor);
        let mut t = Self { model, hd: DVector::zeros(u.len()), u, hu0, since_refresh: 0, stalled: 0, hess_ops: 1 };
        if t.u != model.anchor {
            t.refresh();
        }
        t
    }

    fn refresh(&mut self) {
        self.hd = self.model.hessian.apply(&(&self.u - &self.model.anchor));
        self.hess_ops += 1;
        self.since_refresh = 0;
    }

    fn grad(&self) -> DVector<f64> {
        &self.model.gradient + &self.hd
    }

    fn hu(&self) -> DVector<f64> {
        &self.hu0 + &self.hd
    }

    fn vertex_product(&mut self, v: &Vertex) -> DVector<f64> {
        self.hess_ops += 1;
        self.model.hessian.apply_vertex(v)
    }

    /// Move `u += tau dir`, `hd += tau hdir`.
    fn step(&mut self, tau: f64, dir: &DVector<f64>, hdir: &DVector<f64>) {
        let moved = tau * dir.amax();
        if moved <= f64::EPSILON * self.u.amax().max(f64::MIN_POSITIVE) {
            self.stalled += 1;
        } else {
            self.stalled = 0;
        }
        self.u.axpy(tau, dir, 1.0);
        self.hd.axpy(tau, hdir, 1.0);
        self.since_refresh += 1;
    }

    fn result(mut self, gap: f64, iterations: usize, lmo_calls: usize, floor: bool, gaps: Vec<f64>) -> InnerResult {
        if self.since_refresh > 0 {
            self.refresh();
        }
        InnerResult {
            u: self.u,
            gap,
            iterations,
            lmo_calls,
            hess_ops: self.hess_ops,
            hd: self.hd,
            floor_reached: floor,
            gaps,
        }
    }
}

/// Exact minimizer of the model along a direction with slope `-slope` and
/// curvature `curv`, capped at `cap`. Flat directions take the full cap.
fn exact_step(slope: f64, curv: f64, cap: f64) -> f64 {
    if curv <= f64::EPSILON * slope.abs() {
        cap
    } else {
        (slope / curv).min(cap)
    }
}

/// Plain Frank-Wolfe on the quadratic model, started at the anchor.
pub fn fw_quadratic(
    model: &QuadraticModel<'_>,
    set: &dyn FeasibleSet,
    opts: InnerOptions,
) -> Result<InnerResult> {
    let mut tr = Tracker::new(model, model.anchor.clone());
    let mut gaps = Vec::new();
    let mut lmo_calls = 0;
    let mut gap = f64::INFINITY;
    for t in 0..opts.max_iters {
        let g = tr.grad();
        let v = set.lmo(&g)?;
        lmo_calls += 1;
        gap = g.dot(&tr.u) - v.dot(&g);
        if opts.record_gaps {
            gaps.push(gap);
        }
        let floor = gap_floor(&g, &tr.u, &v);
        if gap <= model.tol.max(floor) || tr.stalled >= STALL_LIMIT {
            if tr.since_refresh > 0 && tr.stalled < STALL_LIMIT {
                // confirm against an exactly recomputed gradient
                tr.refresh();
                continue;
            }
            let at_floor = gap > model.tol;
            return Ok(tr.result(gap, t, lmo_calls, at_floor, gaps));
        }
        let hv = tr.vertex_product(&v);
        let hdir = hv - tr.hu();
        let dir = v.to_dense(model.dim()) - &tr.u;
        let tau = exact_step(gap, hdir.dot(&dir), 1.0);
        if tau >= 1.0 {
            tr.step(1.0, &dir, &hdir);
            tr.u = v.to_dense(model.dim());
        } else {
            tr.step(tau, &dir, &hdir);
        }
        if tr.since_refresh >= REFRESH_EVERY {
            tr.refresh();
        }
    }
    let iters = opts.max_iters;
    Err(Error::InnerBudgetExhausted(Box::new(tr.result(gap, iters, lmo_calls, false, gaps))))
}

/// Away-step Frank-Wolfe on the quadratic model.
///
/// `warm` is the vertex representation of the starting point; without one
/// the solve starts at the vertex returned by the LMO for `h`.
pub fn fw_away_quadratic(
    model: &QuadraticModel<'_>,
    set: &dyn FeasibleSet,
    warm: Option<ActiveSet>,
    opts: InnerOptions,
) -> Result<(InnerResult, ActiveSet)> {
    let dim = model.dim();
    let mut lmo_calls = 0;
    let mut active = match warm {
        Some(a) if !a.is_empty() => a,
        _ => {
            lmo_calls += 1;
            ActiveSet::singleton(dim, set.lmo(&model.gradient)?)
        }
    };
    active.check(1e-9)?;
    let mut tr = Tracker::new(model, active.materialize());
    let mut gaps = Vec::new();
    let mut gap = f64::INFINITY;
    for t in 0..opts.max_iters {
        let g = tr.grad();
        let v = set.lmo(&g)?;
        lmo_calls += 1;
        let gu = g.dot(&tr.u);
        gap = gu - v.dot(&g);
        if opts.record_gaps {
            gaps.push(gap);
        }
        let floor = gap_floor(&g, &tr.u, &v);
        if gap <= model.tol.max(floor) || tr.stalled >= STALL_LIMIT {
            if tr.since_refresh > 0 && tr.stalled < STALL_LIMIT {
                tr.u = active.materialize();
                tr.refresh();
                continue;
            }
            let at_floor = gap > model.tol;
            return finish(tr, active, gap, t, lmo_calls, at_floor, gaps);
        }

        // away vertex: the active atom with the largest <g, a>
        let mut away: Option<(Vertex, f64, f64)> = None;
        if active.len() > 1 {
            for (a, w) in active.atoms() {
                let ga = a.dot(&g);
                if away.map_or(true, |(_, _, best)| ga > best) {
                    away = Some((*a, *w, ga));
                }
            }
        }
        let away_gap = away.map_or(f64::NEG_INFINITY, |(_, _, ga)| ga - gu);

        if gap >= away_gap {
            let hv = tr.vertex_product(&v);
            let hdir = hv - tr.hu();
            let dir = v.to_dense(dim) - &tr.u;
            let tau = exact_step(gap, hdir.dot(&dir), 1.0);
            if tau >= 1.0 {
                tr.step(1.0, &dir, &hdir);
                active = ActiveSet::singleton(dim, v);
                tr.u = v.to_dense(dim);
            } else {
                tr.step(tau, &dir, &hdir);
                active.scale(1.0 - tau);
                active.add(v, tau);
            }
        } else {
            let (a, wa, _) = away.expect("away candidate exists when away gap is finite");
            let cap = wa / (1.0 - wa);
            let ha = tr.vertex_product(&a);
            let hdir = tr.hu() - ha;
            let dir = &tr.u - a.to_dense(dim);
            let tau = exact_step(away_gap, hdir.dot(&dir), cap);
            tr.step(tau, &dir, &hdir);
            active.scale(1.0 + tau);
            if tau >= cap {
                active.remove(&a);
            } else {
                active.add(a, -tau);
            }
            if active.weight_of(&a) <= 0.0 {
                active.remove(&a);
            }
        }
        active.prune();
        if tr.since_refresh >= REFRESH_EVERY {
            tr.u = active.materialize();
            tr.refresh();
        }
    }
    tr.u = active.materialize();
    let iters = opts.max_iters;
    let res = tr.result(gap, iters, lmo_calls, false, gaps);
    Err(Error::InnerBudgetExhausted(Box::new(res)))
}

fn finish(
    mut tr: Tracker<'_, '_>,
    active: ActiveSet,
    gap: f64,
    iterations: usize,
    lmo_calls: usize,
    floor: bool,
    gaps: Vec<f64>,
) -> Result<(InnerResult, ActiveSet)> {
    active.check(1e-9)?;
    let exact = active.materialize();
    if exact != tr.u {
        tr.u = exact;
        tr.since_refresh = 1;
    }
    Ok((tr.result(gap, iterations, lmo_calls, floor, gaps), active))
}

/// Frank-Wolfe gap of the model at `u` with one LMO call; `u` is an
/// eta-solution iff the result is at most `eta^2`.
pub fn certify_eta_solution(
    model: &QuadraticModel<'_>,
    set: &dyn FeasibleSet,
    u: &DVector<f64>,
) -> Result<f64> {
    let g = model.grad_at(u);
    let v = set.lmo(&g)?;
    Ok((g.dot(u) - v.dot(&g)).max(0.0))
}

/// Power-iteration estimate of the largest Hessian eigenvalue. Returns the
/// estimate and the number of products used.
pub fn estimate_lambda_max(hess: &dyn HessianOperator, iters: usize) -> (f64, usize) {
    let p = hess.dim();
    let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    // break symmetry so the all-ones direction is not a fixed point by construction
    for (i, x) in v.iter_mut().enumerate() {
        *x *= 1.0 + 0.01 * ((i % 7) as f64);
    }
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let hv = hess.apply(&v);
        lambda = hv.dot(&v);
        let n = hv.norm();
        if n == 0.0 {
            return (0.0, iters);
        }
        v = hv / n;
    }
    (lambda, iters)
}

/// Inner iteration budget `50 * ceil(6 lambda D^2 / tol)`, capped at
/// [`MAX_INNER_ITERS`].
pub fn default_max_iters(lambda_max: f64, diameter: f64, tol: f64) -> usize {
    if !(tol > 0.0) {
        return MAX_INNER_ITERS;
    }
    let bound = (6.0 * lambda_max * diameter * diameter / tol).ceil();
    if !bound.is_finite() || bound * 50.0 >= MAX_INNER_ITERS as f64 {
        MAX_INNER_ITERS
    } else {
        (50.0 * bound.max(1.0)) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::Simplex;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn identity_hessian_first_step() {
        let h = DMatrix::<f64>::identity(2, 2);
        let model = QuadraticModel::new(DVector::from_vec(vec![0.5, -0.5]), &h, DVector::from_vec(vec![1.0, 0.0]), 0.0);
        let opts = InnerOptions { max_iters: 1, record_gaps: true };
        let err = fw_quadratic(&model, &Simplex::new(2), opts).unwrap_err();
        let Error::InnerBudgetExhausted(res) = err else { panic!("expected budget exhaustion") };
        assert_abs_diff_eq!(res.gaps[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(res.u, DVector::from_vec(vec![0.5, 0.5]), epsilon = 1e-15);
    }

    #[test]
    fn immediate_stop_when_anchor_solves() {
        let h = DMatrix::<f64>::identity(3, 3);
        let anchor = DVector::from_element(3, 1.0 / 3.0);
        let model = QuadraticModel::new(DVector::zeros(3), &h, anchor.clone(), 1e-8);
        let res = fw_quadratic(&model, &Simplex::new(3), InnerOptions::default()).unwrap();
        assert_eq!(res.lmo_calls, 1);
        assert_eq!(res.u, anchor);
    }

    #[test]
    fn single_atom_away_matches_plain_first_step() {
        let h = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0]);
        let anchor = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let model = QuadraticModel::new(DVector::from_vec(vec![0.3, -0.4, 0.1]), &h, anchor.clone(), 0.0);
        let set = Simplex::new(3);
        let opts = InnerOptions::with_max_iters(1);
        let Error::InnerBudgetExhausted(plain) = fw_quadratic(&model, &set, opts).unwrap_err() else { panic!() };
        let warm = ActiveSet::singleton(3, Vertex::new(0, 1.0));
        let Error::InnerBudgetExhausted(away) = fw_away_quadratic(&model, &set, Some(warm), opts).unwrap_err() else {
            panic!()
        };
        assert_abs_diff_eq!(plain.u, away.u, epsilon = 1e-15);
    }

    #[test]
    fn active_set_bookkeeping() {
        let mut s = ActiveSet::from_parts(3, [(Vertex::new(0, 1.0), 0.25), (Vertex::new(2, 1.0), 0.75)]).unwrap();
        s.add(Vertex::new(0, 1.0), 0.0);
        assert_eq!(s.len(), 2);
        let other = ActiveSet::singleton(3, Vertex::new(1, 1.0));
        s.mix(&other, 0.5);
        assert_abs_diff_eq!(s.weight_sum(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.materialize(), DVector::from_vec(vec![0.125, 0.5, 0.375]), epsilon = 1e-15);
        s.remove(&Vertex::new(0, 1.0));
        assert_eq!(s.weight_of(&Vertex::new(2, 1.0)), 0.375);
        assert!(s.check(1e-9).is_err());
        assert!(ActiveSet::from_parts(2, [(Vertex::new(0, 1.0), 0.5)]).is_err());
    }

    #[test]
    fn max_iter_budget_formula() {
        assert_eq!(default_max_iters(1.0, 1.0, 6.0), 50);
        assert_eq!(default_max_iters(1.0, 1.0, 1.0 / 1024.0), 50 * 6 * 1024);
        assert_eq!(default_max_iters(1.0, 1.0, 0.0), MAX_INNER_ITERS);
        assert_eq!(default_max_iters(1e6, 1.0, 1e-6), MAX_INNER_ITERS);
    }
}
