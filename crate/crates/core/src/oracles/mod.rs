//! Objective and feasible-set interfaces.
//!
//! Objectives expose values, gradients and Hessian-vector products; the
//! Hessian at a point is handed out as a [`HessianOperator`] that caches
//! whatever per-point data makes repeated products cheap. Feasible sets expose
//! a linear minimization oracle returning sparse [`Vertex`] values.

mod l1ball;
mod simplex;

pub use l1ball::{project_l1ball, L1Ball};
pub use simplex::{project_simplex, Simplex};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A vertex `value * e_index` of a simplex or cross-polytope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub index: usize,
    pub value: f64,
}

/// Hashable identity of a vertex: coordinate plus sign.
pub type VertexKey = (usize, bool);

impl Vertex {
    pub fn new(index: usize, value: f64) -> Self {
        Self { index, value }
    }

    pub fn key(&self) -> VertexKey {
        (self.index, self.value.is_sign_negative())
    }

    pub fn dot(&self, g: &DVector<f64>) -> f64 {
        self.value * g[self.index]
    }

    pub fn to_dense(&self, dim: usize) -> DVector<f64> {
        let mut v = DVector::zeros(dim);
        v[self.index] = self.value;
        v
    }

    /// `y += alpha * self`
    pub fn axpy_into(&self, alpha: f64, y: &mut DVector<f64>) {
        y[self.index] += alpha * self.value;
    }
}

/// A convex feasible region with a cheap linear minimization oracle.
pub trait FeasibleSet: Send + Sync {
    fn dim(&self) -> usize;

    /// A vertex minimizing `<g, u>` over the set. Ties go to the lowest index.
    fn lmo(&self, g: &DVector<f64>) -> Result<Vertex>;

    /// Euclidean diameter.
    fn diameter(&self) -> f64;

    fn contains(&self, x: &DVector<f64>, tol: f64) -> bool;

    /// Euclidean projection. Only the projected-gradient baseline needs it.
    fn project(&self, _y: &DVector<f64>) -> Result<DVector<f64>> {
        Err(Error::Unsupported("projection"))
    }

    /// Write `x` as a convex combination of vertices, if `x` is in the set.
    fn decompose(&self, x: &DVector<f64>) -> Option<Vec<(Vertex, f64)>>;

    /// All vertices. Meant for brute-force checks on small instances.
    fn vertices(&self) -> Vec<Vertex>;

    /// A default interior starting point.
    fn default_start(&self) -> DVector<f64>;
}

/// Linear action of a fixed Hessian.
pub trait HessianOperator {
    fn dim(&self) -> usize;

    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;

    /// Column `j`, i.e. `H e_j`.
    fn column(&self, j: usize) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim());
        e[j] = 1.0;
        self.apply(&e)
    }

    /// `H v` for a vertex.
    fn apply_vertex(&self, v: &Vertex) -> DVector<f64> {
        let mut col = self.column(v.index);
        col *= v.value;
        col
    }
}

impl HessianOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self * v
    }

    fn column(&self, j: usize) -> DVector<f64> {
        self.column(j).into_owned()
    }
}

/// A twice-differentiable convex objective, self-concordant on its domain.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn in_domain(&self, x: &DVector<f64>) -> bool;

    /// Objective value; `+inf` outside the domain.
    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Hessian at `x` as a reusable operator.
    fn hessian_at<'a>(&'a self, x: &DVector<f64>) -> Result<Box<dyn HessianOperator + 'a>>;

    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.hessian_at(x)?.apply(v))
    }

    /// `f(x) - f(y)`. Implementations may override this with a formulation
    /// that avoids cancellation when `x` and `y` are close.
    fn excess(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        Ok(self.value(x) - self.value(y))
    }

    /// Largest `t` in `[0, cap]` with `x + t d` (strictly) in the domain,
    /// backed off by a relative margin.
    fn max_step(&self, _x: &DVector<f64>, _d: &DVector<f64>, cap: f64) -> f64 {
        cap
    }

    /// A lower bound on the minimum over the problem's feasible set, when one
    /// is available from the data.
    fn value_lower_bound(&self) -> Option<f64> {
        None
    }
}

/// Local norm `sqrt(<H v, v>)` together with the product `H v`.
pub fn local_norm(hess: &dyn HessianOperator, v: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let hv = hess.apply(v);
    let curv = hv.dot(v);
    let scale = hv.norm() * v.norm();
    if curv < 0.0 {
        if curv < -1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPositiveSemidefinite { curvature: curv });
        }
        return Ok((0.0, hv));
    }
    Ok((curv.sqrt(), hv))
}

/// Local norm at a point of an objective.
pub fn local_norm_at(
    objective: &dyn Objective,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    local_norm(objective.hessian_at(x)?.as_ref(), v)
}

pub(crate) fn check_finite(g: &DVector<f64>) -> Result<()> {
    if g.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("LMO input"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn local_norm_identity() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let (n, hv) = local_norm(&eye, &DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(n, 5.0, epsilon = 1e-15);
        assert_eq!(hv, DVector::from_vec(vec![3.0, 4.0]));
        let (z, _) = local_norm(&eye, &DVector::zeros(2)).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn local_norm_rejects_negative_curvature() {
        let neg = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
        assert!(local_norm(&neg, &DVector::from_vec(vec![1.0, 0.0])).is_err());
    }

    #[test]
    fn vertex_dense_matches_sparse() {
        let v = Vertex::new(2, -3.5);
        let d = v.to_dense(4);
        assert_eq!(d.as_slice(), &[0.0, 0.0, -3.5, 0.0]);
        let g = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(v.dot(&g), d.dot(&g));
        assert_ne!(Vertex::new(2, 1.0).key(), v.key());
    }
}
