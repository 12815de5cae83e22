use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::oracles::{HessianOperator, Objective};

/// Convex quadratic `f(x) = 0.5 x^T Q x + c^T x`. Self-concordant with
/// parameter 0, so Newton models are exact.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    q: DMatrix<f64>,
    c: DVector<f64>,
}

impl QuadraticObjective {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() != c.len() {
            return Err(Error::Dimension { expected: c.len(), got: q.nrows() });
        }
        Ok(Self { q, c })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        x.len() == self.c.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(x, self.c.len())?;
        Ok(&self.q * x + &self.c)
    }

    fn hessian_at<'a>(&'a self, x: &DVector<f64>) -> Result<Box<dyn HessianOperator + 'a>> {
        check_dim(x, self.c.len())?;
        Ok(Box::new(self.q.clone()))
    }

    fn excess(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        let d = x - y;
        Ok(d.dot(&(&self.q * y + &self.c)) + 0.5 * d.dot(&(&self.q * &d)))
    }
}
