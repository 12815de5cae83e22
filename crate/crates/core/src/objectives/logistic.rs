use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::oracles::{HessianOperator, Objective};
use crate::sparse::CsrMatrix;

/// `max(z, 0) + ln(1 + exp(-|z|))`
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Ridge-regularized logistic loss
/// `f(x) = (1/n) sum_i ln(1 + exp(-y_i a_i^T x)) + (mu/2) ||x||^2`,
/// optionally multiplied by a constant `scale`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    // row i is -y_i a_i
    rows: CsrMatrix,
    cols: CsrMatrix,
    mu: f64,
    scale: f64,
}

impl LogisticProblem {
    /// `features` holds one sample per row; labels must be `-1` or `+1`.
    pub fn new(features: &CsrMatrix, labels: &[f64], mu: f64) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Dimension { expected: features.nrows(), got: labels.len() });
        }
        if features.nrows() == 0 {
            return Err(Error::data("no samples"));
        }
        if !(mu > 0.0) {
            return Err(Error::InvalidParams(format!("ridge weight must be positive, got {mu}")));
        }
        let mut rows = features.clone();
        for (i, &y) in labels.iter().enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(Error::data_at(i + 1, format!("label {y} is not +-1")));
            }
            rows.scale_row(i, -y);
        }
        let cols = rows.transpose();
        Ok(Self { rows, cols, mu, scale: 1.0 })
    }

    /// Multiply the objective by `M^2 / 4`, where `M = max_i ||a_i|| / sqrt(mu)`
    /// estimates its self-concordance parameter.
    pub fn standardized(mut self) -> Self {
        self.scale = self.standardization_factor();
        self
    }

    pub fn standardization_factor(&self) -> f64 {
        let max_sq = (0..self.rows.nrows()).map(|i| self.rows.row_norm_squared(i)).fold(0.0, f64::max);
        (max_sq / self.mu / 4.0).max(f64::MIN_POSITIVE)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn num_samples(&self) -> usize {
        self.rows.nrows()
    }

    fn margins(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(x, self.rows.ncols())?;
        Ok(self.rows.mul_vec(x))
    }
}

struct LogisticHessian<'a> {
    problem: &'a LogisticProblem,
    // scale * s_i (1 - s_i) / n
    weights: DVector<f64>,
}

impl HessianOperator for LogisticHessian<'_> {
    fn dim(&self) -> usize {
        self.problem.rows.ncols()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let rv = self.problem.rows.mul_vec(v).component_mul(&self.weights);
        let mut out = self.problem.rows.tr_mul_vec(&rv);
        out.axpy(self.problem.scale * self.problem.mu, v, 1.0);
        out
    }

    fn column(&self, j: usize) -> DVector<f64> {
        let p = self.problem;
        let mut out = DVector::zeros(p.rows.ncols());
        for (i, rij) in p.cols.row(j) {
            let coef = self.weights[i] * rij;
            for (c, v) in p.rows.row(i) {
                out[c] += coef * v;
            }
        }
        out[j] += p.scale * p.mu;
        out
    }
}

impl Objective for LogisticProblem {
    fn dim(&self) -> usize {
        self.rows.ncols()
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        x.len() == self.rows.ncols() && x.iter().all(|v| v.is_finite())
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        match self.margins(x) {
            Ok(z) => {
                let loss = z.iter().map(|&zi| softplus(zi)).sum::<f64>() / z.len() as f64;
                self.scale * (loss + 0.5 * self.mu * x.norm_squared())
            }
            Err(_) => f64::INFINITY,
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let z = self.margins(x)?;
        let n = z.len() as f64;
        let s = z.map(|zi| sigmoid(zi) / n);
        let mut g = self.rows.tr_mul_vec(&s);
        g.axpy(self.mu, x, 1.0);
        g *= self.scale;
        Ok(g)
    }

    fn hessian_at<'a>(&'a self, x: &DVector<f64>) -> Result<Box<dyn HessianOperator + 'a>> {
        let z = self.margins(x)?;
        let n = z.len() as f64;
        let weights = z.map(|zi| {
            let s = sigmoid(zi);
            self.scale * s * (1.0 - s) / n
        });
        Ok(Box::new(LogisticHessian { problem: self, weights }))
    }

    fn excess(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        let zy = self.margins(y)?;
        let dz = self.margins(&(x - y))?;
        let n = zy.len() as f64;
        let mut loss = 0.0;
        for (&b, &d) in zy.iter().zip(dz.iter()) {
            // softplus(b + d) - softplus(b) = ln(1 + sigmoid(b) (e^d - 1))
            loss += if d.abs() < 1.0 {
                (sigmoid(b) * d.exp_m1()).ln_1p()
            } else {
                softplus(b + d) - softplus(b)
            };
        }
        let ridge = 0.5 * self.mu * (x - y).dot(&(x + y));
        Ok(self.scale * (loss / n + ridge))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn small() -> (CsrMatrix, Vec<f64>) {
        let d = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, -1.0, 0.0, 2.0]);
        (CsrMatrix::from_dense(&d), vec![1.0, -1.0, 1.0])
    }

    #[test]
    fn value_at_origin() {
        let (a, y) = small();
        let prob = LogisticProblem::new(&a, &y, 0.1).unwrap();
        let x = DVector::zeros(2);
        assert_abs_diff_eq!(prob.value(&x), 2f64.ln(), epsilon = 1e-15);
        // (1/(2n)) A e with A's columns -y_i a_i
        let mut expect = DVector::zeros(2);
        for i in 0..3 {
            let row = DVector::from_iterator(2, a.to_dense().row(i).iter().copied());
            expect.axpy(-y[i] / 6.0, &row, 1.0);
        }
        assert_abs_diff_eq!(prob.gradient(&x).unwrap(), expect, epsilon = 1e-15);
    }

    #[test]
    fn softplus_is_stable() {
        assert_abs_diff_eq!(softplus(50.0), 50.0, epsilon = 1e-15);
        assert!(softplus(1000.0).is_finite());
        assert_abs_diff_eq!(softplus(-50.0), (-50f64).exp(), epsilon = 1e-30);
    }

    #[test]
    fn rejects_bad_labels() {
        let (a, _) = small();
        assert!(LogisticProblem::new(&a, &[1.0, 0.0, 1.0], 0.1).is_err());
        assert!(LogisticProblem::new(&a, &[1.0, -1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn columns_match_apply() {
        let (a, y) = small();
        let prob = LogisticProblem::new(&a, &y, 0.3).unwrap().standardized();
        let x = DVector::from_vec(vec![0.4, -0.2]);
        let h = prob.hessian_at(&x).unwrap();
        for j in 0..2 {
            let mut e = DVector::zeros(2);
            e[j] = 1.0;
            assert_abs_diff_eq!(h.column(j), h.apply(&e), epsilon = 1e-15);
        }
        let y2 = DVector::from_vec(vec![0.41, -0.19]);
        assert_abs_diff_eq!(prob.excess(&y2, &x).unwrap(), prob.value(&y2) - prob.value(&x), epsilon = 1e-12);
    }
}
