//! Benchmark harness: synthetic data, dataset ingestion and experiment runs
//! that write one trace CSV per (problem, solver).

mod experiment;
mod io;

pub use experiment::{
    default_solvers, feasible_region_grid, run_experiment, write_trace_csv, DataFormat, DataSource, ExperimentConfig,
    ExperimentSummary, Problem, SolverKind, SolverOutcome, TRACE_HEADER,
};
pub use io::{parse_libsvm, parse_libsvm_str, read_dense_csv, read_price_csv, write_dense_csv, write_libsvm};

use nalgebra::{Cholesky, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

/// A data matrix with optional `+-1` labels (one per row).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Features,
    pub labels: Option<Vec<f64>>,
}

impl Dataset {
    pub fn dense(m: DMatrix<f64>) -> Self {
        Self { features: Features::Dense(m), labels: None }
    }

    pub fn nrows(&self) -> usize {
        match &self.features {
            Features::Dense(m) => m.nrows(),
            Features::Sparse(s) => s.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match &self.features {
            Features::Dense(m) => m.ncols(),
            Features::Sparse(s) => s.ncols(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.features {
            Features::Dense(m) => m.clone(),
            Features::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> CsrMatrix {
        match &self.features {
            Features::Dense(m) => CsrMatrix::from_dense(m),
            Features::Sparse(s) => s.clone(),
        }
    }

    /// Rejects non-finite entries and labels other than `+-1`.
    pub fn validate(&self) -> Result<()> {
        let finite = match &self.features {
            Features::Dense(m) => m.iter().all(|v| v.is_finite()),
            Features::Sparse(s) => (0..s.nrows()).all(|r| s.row(r).all(|(_, v)| v.is_finite())),
        };
        if !finite {
            return Err(Error::data("non-finite entry in data matrix"));
        }
        if let Some(y) = &self.labels {
            if y.len() != self.nrows() {
                return Err(Error::data(format!("{} labels for {} rows", y.len(), self.nrows())));
            }
            if let Some(i) = y.iter().position(|&v| v != 1.0 && v != -1.0) {
                return Err(Error::data_at(i + 1, format!("label {} is not +-1", y[i])));
            }
        }
        Ok(())
    }
}

/// Return matrix `n x p` with entries `1 + 0.1 N(0, 1)`. Rows whose mean is
/// not positive are redrawn so that `e/p` lies in the portfolio domain.
pub fn gen_portfolio(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParams(format!("portfolio size must be positive, got {n} x {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(1.0, 0.1).expect("valid normal");
    let mut m = DMatrix::zeros(n, p);
    let mut row = vec![0.0; p];
    for i in 0..n {
        loop {
            row.iter_mut().for_each(|v| *v = rng.sample(noise));
            if row.iter().sum::<f64>() > 0.0 {
                break;
            }
        }
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(Dataset::dense(m))
}

/// `p` points in `R^n`, drawn i.i.d. from `N(0, cov)` (identity when `None`),
/// stored as the columns of an `n x p` matrix. Rank-deficient draws are
/// redrawn a few times before giving up.
pub fn gen_dopt_points(n: usize, p: usize, seed: u64, cov: Option<&DMatrix<f64>>) -> Result<Dataset> {
    if n == 0 || p < n {
        return Err(Error::InvalidParams(format!("need p >= n >= 1 design points, got n = {n}, p = {p}")));
    }
    let root = match cov {
        Some(c) => {
            if c.shape() != (n, n) {
                return Err(Error::Dimension { expected: n, got: c.nrows() });
            }
            Some(Cholesky::new(c.clone()).ok_or_else(|| Error::data("covariance is not positive definite"))?.l())
        }
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..8 {
        let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = match &root {
            Some(l) => l * z,
            None => z,
        };
        if has_full_row_rank(&a) {
            return Ok(Dataset::dense(a));
        }
    }
    Err(Error::data("could not draw a rank-n point set"))
}

pub(crate) fn has_full_row_rank(a: &DMatrix<f64>) -> bool {
    let gram = a * a.transpose();
    match Cholesky::new(gram) {
        Some(c) => {
            let d = c.l_dirty().diagonal();
            let max = d.amax();
            d.iter().all(|&v| v > 1e-10 * max)
        }
        None => false,
    }
}

/// Sparse binary classification data: each entry of an `n x p` matrix is
/// nonzero with probability `density`, labels are the signs of a random
/// linear score plus unit noise.
pub fn gen_logistic(n: usize, p: usize, density: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 || !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParams(format!("bad logistic size {n} x {p} or density {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let mut indptr = vec![0];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut score = 0.0;
        for (j, wj) in w.iter().enumerate() {
            if rng.random::<f64>() < density {
                let v: f64 = rng.sample(StandardNormal);
                indices.push(j);
                values.push(v);
                score += v * wj;
            }
        }
        indptr.push(indices.len());
        let noise: f64 = rng.sample(StandardNormal);
        labels.push(if score + noise >= 0.0 { 1.0 } else { -1.0 });
    }
    let features = CsrMatrix::new(n, p, indptr, indices, values)?;
    Ok(Dataset { features: Features::Sparse(features), labels: Some(labels) })
}
