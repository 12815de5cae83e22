use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::oracles::{HessianOperator, Objective};

/// Log-utility portfolio objective `f(x) = -sum_i ln(a_i^T x)` with scenario
/// returns as rows of `A` (`n x p`).
#[derive(Debug, Clone)]
pub struct PortfolioProblem {
    returns: DMatrix<f64>,
}

impl PortfolioProblem {
    pub fn new(returns: DMatrix<f64>) -> Result<Self> {
        if returns.nrows() == 0 || returns.ncols() == 0 {
            return Err(Error::data("empty return matrix"));
        }
        if returns.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite return entry"));
        }
        Ok(Self { returns })
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    fn scenario_values(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(x, self.returns.ncols())?;
        let r = &self.returns * x;
        if let Some(i) = r.iter().position(|&ri| !(ri > 0.0)) {
            return Err(Error::Domain(format!("portfolio return {} is {:e}", i, r[i])));
        }
        Ok(r)
    }
}

struct PortfolioHessian<'a> {
    returns: &'a DMatrix<f64>,
    // 1 / (a_i^T x)^2
    weights: DVector<f64>,
}

impl HessianOperator for PortfolioHessian<'_> {
    fn dim(&self) -> usize {
        self.returns.ncols()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let av = self.returns * v;
        self.returns.tr_mul(&av.component_mul(&self.weights))
    }

    fn column(&self, j: usize) -> DVector<f64> {
        let weighted = self.returns.column(j).component_mul(&self.weights);
        self.returns.tr_mul(&weighted)
    }
}

impl Objective for PortfolioProblem {
    fn dim(&self) -> usize {
        self.returns.ncols()
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        self.scenario_values(x).is_ok()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        match self.scenario_values(x) {
            Ok(r) => -r.iter().map(|ri| ri.ln()).sum::<f64>(),
            Err(_) => f64::INFINITY,
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let r = self.scenario_values(x)?;
        Ok(-self.returns.tr_mul(&r.map(|ri| 1.0 / ri)))
    }

    fn hessian_at<'a>(&'a self, x: &DVector<f64>) -> Result<Box<dyn HessianOperator + 'a>> {
        let r = self.scenario_values(x)?;
        Ok(Box::new(PortfolioHessian { returns: &self.returns, weights: r.map(|ri| 1.0 / (ri * ri)) }))
    }

    fn excess(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        let ry = self.scenario_values(y)?;
        if !self.in_domain(x) {
            return Ok(f64::INFINITY);
        }
        let dr = &self.returns * (x - y);
        Ok(-dr.iter().zip(ry.iter()).map(|(d, r)| (d / r).ln_1p()).sum::<f64>())
    }

    fn max_step(&self, x: &DVector<f64>, d: &DVector<f64>, cap: f64) -> f64 {
        let r = &self.returns * x;
        let ad = &self.returns * d;
        let mut t = cap;
        for (ri, adi) in r.iter().zip(ad.iter()) {
            if *adi < 0.0 {
                // stay a relative margin inside the boundary
                t = t.min((1.0 - 1e-10) * ri / -adi);
            }
        }
        t.max(0.0)
    }

    fn value_lower_bound(&self) -> Option<f64> {
        // on the simplex a_i^T x <= max_j a_ij
        let mut bound = 0.0;
        for row in self.returns.row_iter() {
            let m = row.max();
            if m <= 0.0 {
                return None;
            }
            bound -= m.ln();
        }
        Some(bound)
    }
}
