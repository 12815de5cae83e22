use std::sync::{Arc, Mutex};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};
use crate::oracles::{HessianOperator, Objective};

/// D-optimal design objective `f(x) = -log det(A Diag(x) A^T)` over weights
/// on the `p` design points stored as columns of `A` (`n x p`).
///
/// Every quantity at a point derives from the Cholesky factor `L` of
/// `M = A Diag(x) A^T` and `B = L^{-1} A`: the gradient is `-||b_j||^2` and the
/// Hessian entries are `(b_i^T b_j)^2`. The most recent factorization is cached.
#[derive(Debug)]
pub struct DOptProblem {
    points: DMatrix<f64>,
    cache: Mutex<Option<(DVector<f64>, Arc<DOptFactor>)>>,
}

impl Clone for DOptProblem {
    fn clone(&self) -> Self {
        Self { points: self.points.clone(), cache: Mutex::new(None) }
    }
}

/// Factorization of `M(x)` and the whitened points `B = L^{-1} A`.
#[derive(Debug)]
pub struct DOptFactor {
    pub log_det: f64,
    pub whitened: DMatrix<f64>,
}

impl DOptFactor {
    /// `kappa_j = a_j^T M^{-1} a_j`
    pub fn leverage(&self, j: usize) -> f64 {
        self.whitened.column(j).norm_squared()
    }
}

impl DOptProblem {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::data("empty design matrix"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite design entry"));
        }
        Ok(Self { points, cache: Mutex::new(None) })
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// Dimension `n` of the design space.
    pub fn space_dim(&self) -> usize {
        self.points.nrows()
    }

    fn moment(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.points.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= x[j];
        }
        scaled * self.points.transpose()
    }

    pub fn factor(&self, x: &DVector<f64>) -> Result<Arc<DOptFactor>> {
        check_dim(x, self.points.ncols())?;
        let mut cache = self.cache.lock().unwrap();
        if let Some((key, f)) = cache.as_ref() {
            if key == x {
                return Ok(f.clone());
            }
        }
        let chol = Cholesky::new(self.moment(x))
            .ok_or_else(|| Error::Domain("A Diag(x) A^T is not positive definite".into()))?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let whitened = l
            .solve_lower_triangular(&self.points)
            .ok_or_else(|| Error::Domain("singular Cholesky factor".into()))?;
        let f = Arc::new(DOptFactor { log_det, whitened });
        *cache = Some((x.clone(), f.clone()));
        Ok(f)
    }

    /// Hessian column `j`: `((b_i^T b_j)^2)_i`.
    pub fn hess_column(&self, x: &DVector<f64>, j: usize) -> Result<DVector<f64>> {
        let f = self.factor(x)?;
        Ok(column_from_whitened(&f.whitened, j))
    }

    /// Exact minimizer over `tau in [0, 1]` of `f((1 - tau) x + tau e_j)`.
    pub fn linesearch_step(&self, x: &DVector<f64>, j: usize) -> Result<f64> {
        self.linesearch_toward(x, j, 0.0, 1.0)
    }

    /// Minimizer of `f((1 - tau) x + tau e_j)` over `tau in [lo, hi]`. Negative
    /// `tau` moves mass away from point `j` (away steps).
    pub fn linesearch_toward(&self, x: &DVector<f64>, j: usize, lo: f64, hi: f64) -> Result<f64> {
        let f = self.factor(x)?;
        Ok(closed_form_step(f.leverage(j), self.space_dim() as f64, lo, hi))
    }
}

/// Minimizer of `-(n-1) ln(1 - tau) - ln(1 - tau + tau kappa)` over `[lo, hi]`.
pub(crate) fn closed_form_step(kappa: f64, n: f64, lo: f64, hi: f64) -> f64 {
    if kappa <= 1.0 + f64::EPSILON {
        // derivative (n-1)/(1-tau) + (1-kappa)/(1-tau+tau kappa) is nonnegative on the domain
        return lo;
    }
    ((kappa - n) / (n * (kappa - 1.0))).clamp(lo, hi)
}

fn column_from_whitened(b: &DMatrix<f64>, j: usize) -> DVector<f64> {
    let mut c = b.tr_mul(&b.column(j));
    c.apply(|v| *v *= *v);
    c
}

struct DOptHessian {
    factor: Arc<DOptFactor>,
}

impl HessianOperator for DOptHessian {
    fn dim(&self) -> usize {
        self.factor.whitened.ncols()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let b = &self.factor.whitened;
        let (n, p) = b.shape();
        if p <= n {
            let mut out = DVector::zeros(p);
            for (k, &vk) in v.iter().enumerate() {
                if vk != 0.0 {
                    out.axpy(vk, &column_from_whitened(b, k), 1.0);
                }
            }
            return out;
        }
        // W = B Diag(v) B^T, then (Hv)_j = b_j^T W b_j
        let mut scaled = b.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= v[k];
        }
        let w = scaled * b.transpose();
        let wb = &w * b;
        DVector::from_iterator(p, (0..p).map(|j| b.column(j).dot(&wb.column(j))))
    }

    fn column(&self, j: usize) -> DVector<f64> {
        column_from_whitened(&self.factor.whitened, j)
    }
}

impl Objective for DOptProblem {
    fn dim(&self) -> usize {
        self.points.ncols()
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        self.factor(x).is_ok()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        match self.factor(x) {
            Ok(f) => -f.log_det,
            Err(_) => f64::INFINITY,
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let f = self.factor(x)?;
        Ok(DVector::from_iterator(
            self.points.ncols(),
            f.whitened.column_iter().map(|c| -c.norm_squared()),
        ))
    }

    fn hessian_at<'a>(&'a self, x: &DVector<f64>) -> Result<Box<dyn HessianOperator + 'a>> {
        Ok(Box::new(DOptHessian { factor: self.factor(x)? }))
    }

    fn excess(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_dim(x, self.points.ncols())?;
        let fy = self.factor(y)?;
        // f(x) - f(y) = -log det(I + B_y Diag(x - y) B_y^T)
        let b = &fy.whitened;
        let mut scaled = b.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= x[k] - y[k];
        }
        let n = b.nrows();
        let e = DMatrix::<f64>::identity(n, n) + scaled * b.transpose();
        match Cholesky::<f64, Dyn>::new(e) {
            Some(c) => Ok(-2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()),
            None => Ok(f64::INFINITY),
        }
    }

    fn value_lower_bound(&self) -> Option<f64> {
        // log det M <= n ln(tr M / n) and tr M <= max_j ||a_j||^2 on the simplex
        let n = self.space_dim() as f64;
        let max_sq = self.points.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
        (max_sq > 0.0).then(|| -n * (max_sq / n).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_design() {
        let d = DOptProblem::new(DMatrix::identity(2, 2)).unwrap();
        let x = DVector::from_vec(vec![0.5, 0.5]);
        assert_abs_diff_eq!(d.value(&x), -(0.25f64).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(d.gradient(&x).unwrap(), DVector::from_vec(vec![-2.0, -2.0]), epsilon = 1e-14);
    }

    #[test]
    fn symmetric_optimum_has_zero_step() {
        let n = 4;
        let d = DOptProblem::new(DMatrix::identity(n, n)).unwrap();
        let x = DVector::from_element(n, 1.0 / n as f64);
        for j in 0..n {
            assert_eq!(d.linesearch_step(&x, j).unwrap(), 0.0);
        }
    }

    #[test]
    fn stationary_leverage_gives_zero_step() {
        assert_eq!(closed_form_step(3.0, 3.0, 0.0, 1.0), 0.0);
        assert!(closed_form_step(5.0, 3.0, 0.0, 1.0) > 0.0);
        assert_eq!(closed_form_step(1.0, 3.0, -0.5, 1.0), -0.5);
        // low-leverage point: f decreases all the way along the away direction
        assert_eq!(closed_form_step(0.4, 2.0, -0.3, 0.0), -0.3);
    }

    #[test]
    fn rank_deficient_point_is_outside_domain() {
        let d = DOptProblem::new(DMatrix::identity(2, 2)).unwrap();
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(d.value(&x), f64::INFINITY);
        assert!(d.gradient(&x).is_err());
    }
}
