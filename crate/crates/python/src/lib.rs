//! Python bindings. Vectors and matrices cross the boundary as lists of
//! floats (matrices as lists of rows).

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use newton_fw::baselines::{fw_away_dopt, fw_linesearch_with, fw_standard, pg_bb, BaselineConfig, BaselineMethod};
use newton_fw::bench::{self, write_trace_csv};
use newton_fw::oracles::{FeasibleSet, Objective};
use newton_fw::report::{Budget, SolverReport};
use newton_fw::solver::{nfw_solve, NfwOptions};
use newton_fw::{sc, CsrMatrix, Error, Vertex};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParams(_)
        | Error::Config(_)
        | Error::Dimension { .. }
        | Error::Domain(_)
        | Error::ScalarDomain { .. }
        | Error::Data { .. }
        | Error::Infeasible
        | Error::Unsupported(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("expected a non-empty rectangular list of rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vector(v: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(v)
}

#[pyfunction]
fn omega(tau: f64) -> PyResult<f64> {
    sc::omega(tau).map_err(py_err)
}

#[pyfunction]
fn omega_star(tau: f64) -> PyResult<f64> {
    sc::omega_star(tau).map_err(py_err)
}

#[pyfunction]
fn h(tau: f64) -> PyResult<f64> {
    sc::h(tau).map_err(py_err)
}

#[pyfunction]
fn h_inv(y: f64) -> PyResult<f64> {
    sc::h_inv(y).map_err(py_err)
}

#[pyfunction]
fn c2() -> f64 {
    sc::c2()
}

#[pyfunction]
fn nu_exponent(beta: f64, sigma: f64) -> PyResult<f64> {
    sc::nu_exponent(beta, sigma).map_err(py_err)
}

#[pyclass(name = "SolverParams", from_py_object)]
#[derive(Clone)]
struct PySolverParams {
    #[pyo3(get, set)]
    beta: f64,
    #[pyo3(get, set)]
    sigma: f64,
    #[pyo3(get, set)]
    c_big: f64,
    #[pyo3(get, set)]
    c_one: f64,
    #[pyo3(get, set)]
    delta: f64,
    #[pyo3(get, set)]
    eps: f64,
}

impl PySolverParams {
    fn inner(&self) -> sc::SolverParams {
        sc::SolverParams {
            beta: self.beta,
            sigma: self.sigma,
            c_big: self.c_big,
            c_one: self.c_one,
            delta: self.delta,
            eps: self.eps,
        }
    }
}

#[pymethods]
impl PySolverParams {
    #[new]
    #[pyo3(signature = (beta=0.05, sigma=0.17, c_big=10.0, c_one=0.25, delta=0.95, eps=1e-6))]
    fn new(beta: f64, sigma: f64, c_big: f64, c_one: f64, delta: f64, eps: f64) -> Self {
        Self { beta, sigma, c_big, c_one, delta, eps }
    }

    /// Violated conditions; empty when valid.
    fn violations(&self) -> Vec<String> {
        self.inner().validate().violations.iter().map(|v| v.to_string()).collect()
    }

    fn is_valid(&self) -> bool {
        self.inner().validate().is_valid()
    }

    fn eta0(&self) -> PyResult<f64> {
        self.inner().eta0().map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SolverParams(beta={}, sigma={}, c_big={}, c_one={}, delta={}, eps={})",
            self.beta, self.sigma, self.c_big, self.c_one, self.delta, self.eps
        )
    }
}

// One #[pymethods] block per class: shared methods are spliced in by macro.
macro_rules! objective_class {
    ($ty:ident { $($extra:tt)* }) => {
        #[pymethods]
        impl $ty {
            $($extra)*

            #[getter]
            fn dim(&self) -> usize {
                self.0.dim()
            }

            fn value(&self, x: Vec<f64>) -> f64 {
                self.0.value(&vector(x))
            }

            fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
                Ok(self.0.gradient(&vector(x)).map_err(py_err)?.data.into())
            }

            fn hvp(&self, x: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
                Ok(self.0.hvp(&vector(x), &vector(v)).map_err(py_err)?.data.into())
            }
        }
    };
}

macro_rules! set_class {
    ($ty:ident { $($extra:tt)* }) => {
        #[pymethods]
        impl $ty {
            $($extra)*

            #[getter]
            fn dim(&self) -> usize {
                self.0.dim()
            }

            #[getter]
            fn diameter(&self) -> f64 {
                self.0.diameter()
            }

            /// `(index, value)` of the minimizing vertex `value * e_index`.
            fn lmo(&self, g: Vec<f64>) -> PyResult<(usize, f64)> {
                let v: Vertex = self.0.lmo(&vector(g)).map_err(py_err)?;
                Ok((v.index, v.value))
            }

            fn project(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
                Ok(self.0.project(&vector(y)).map_err(py_err)?.data.into())
            }

            fn default_start(&self) -> Vec<f64> {
                self.0.default_start().data.into()
            }
        }
    };
}

#[pyclass(name = "PortfolioProblem", frozen)]
struct PyPortfolio(newton_fw::PortfolioProblem);

objective_class!(PyPortfolio {
    /// `returns`: n rows of p asset returns.
    #[new]
    fn new(returns: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self(newton_fw::PortfolioProblem::new(matrix(returns)?).map_err(py_err)?))
    }
});

#[pyclass(name = "DOptProblem", frozen)]
struct PyDOpt(newton_fw::DOptProblem);

objective_class!(PyDOpt {
    /// `points`: n rows, one column per design point.
    #[new]
    fn new(points: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self(newton_fw::DOptProblem::new(matrix(points)?).map_err(py_err)?))
    }

    fn linesearch_step(&self, x: Vec<f64>, j: usize) -> PyResult<f64> {
        self.0.linesearch_step(&vector(x), j).map_err(py_err)
    }
});

#[pyclass(name = "LogisticProblem", frozen)]
struct PyLogistic(newton_fw::LogisticProblem);

objective_class!(PyLogistic {
    /// `features`: one dense row per sample; `labels` in {-1, +1}.
    #[new]
    #[pyo3(signature = (features, labels, mu=None, standardize=false))]
    fn new(features: Vec<Vec<f64>>, labels: Vec<f64>, mu: Option<f64>, standardize: bool) -> PyResult<Self> {
        let a = CsrMatrix::from_dense(&matrix(features)?);
        let mu = mu.unwrap_or(1.0 / a.nrows() as f64);
        let mut prob = newton_fw::LogisticProblem::new(&a, &labels, mu).map_err(py_err)?;
        if standardize {
            prob = prob.standardized();
        }
        Ok(Self(prob))
    }
});

#[pyclass(name = "Simplex", frozen)]
struct PySimplex(newton_fw::Simplex);

set_class!(PySimplex {
    #[new]
    fn new(dim: usize) -> Self {
        Self(newton_fw::Simplex::new(dim))
    }
});

#[pyclass(name = "L1Ball", frozen)]
struct PyL1Ball(newton_fw::L1Ball);

set_class!(PyL1Ball {
    #[new]
    fn new(dim: usize, radius: f64) -> Self {
        Self(newton_fw::L1Ball::new(dim, radius))
    }
});

#[pyclass(name = "Report", frozen)]
struct PyReport {
    problem: String,
    inner: SolverReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn solver(&self) -> String {
        self.inner.solver.clone()
    }

    #[getter]
    fn termination(&self) -> String {
        self.inner.termination.to_string()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.termination.is_converged()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.data.as_vec().clone()
    }

    #[getter]
    fn final_value(&self) -> f64 {
        self.inner.final_value()
    }

    #[getter]
    fn lmo_calls(&self) -> usize {
        self.inner.lmo_calls()
    }

    #[getter]
    fn fvals(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.fval).collect()
    }

    #[getter]
    fn gap_proxies(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.gap_proxy).collect()
    }

    #[getter]
    fn stages(&self) -> Vec<Option<String>> {
        self.inner.rows.iter().map(|r| r.stage.map(|s| s.to_string())).collect()
    }

    #[getter]
    fn events(&self) -> Vec<String> {
        self.inner.events.clone()
    }

    /// The trace in the benchmark CSV schema.
    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_trace_csv(&self.problem, &self.inner, &mut buf).map_err(py_err)?;
        Ok(String::from_utf8(buf).expect("ascii csv"))
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(solver={}, termination='{}', f={}, lmo_calls={})",
            self.inner.solver,
            self.inner.termination,
            self.inner.final_value(),
            self.inner.lmo_calls()
        )
    }
}

/// Runs `solver` (NFW, FW, FW-LS, PG-BB or FW-AWAY-DOPT) from `x0`, or from
/// the set's default start.
#[pyfunction]
#[pyo3(signature = (problem, set, solver="NFW", params=None, x0=None, max_iters=100_000, max_lmo=None, max_seconds=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    problem: &Bound<'_, PyAny>,
    set: &Bound<'_, PyAny>,
    solver: &str,
    params: Option<PySolverParams>,
    x0: Option<Vec<f64>>,
    max_iters: usize,
    max_lmo: Option<usize>,
    max_seconds: Option<f64>,
) -> PyResult<PyReport> {
    let budget = Budget {
        max_iters,
        max_lmo: max_lmo.unwrap_or(usize::MAX),
        max_seconds: max_seconds.unwrap_or(f64::INFINITY),
    };
    let params = params.map_or_else(sc::SolverParams::default, |p| p.inner());

    let simplex = set.extract::<PyRef<PySimplex>>().ok();
    let ball = set.extract::<PyRef<PyL1Ball>>().ok();
    let set: &dyn FeasibleSet = match (&simplex, &ball) {
        (Some(s), _) => &s.0,
        (_, Some(b)) => &b.0,
        _ => return Err(PyValueError::new_err("set must be a Simplex or an L1Ball")),
    };

    let portfolio = problem.extract::<PyRef<PyPortfolio>>().ok();
    let dopt = problem.extract::<PyRef<PyDOpt>>().ok();
    let logistic = problem.extract::<PyRef<PyLogistic>>().ok();
    let (objective, tag): (&dyn Objective, &str) = match (&portfolio, &dopt, &logistic) {
        (Some(p), _, _) => (&p.0, "portfolio"),
        (_, Some(d), _) => (&d.0, "dopt"),
        (_, _, Some(l)) => (&l.0, "logistic"),
        _ => return Err(PyValueError::new_err("unsupported problem type")),
    };
    let dopt_inner = dopt.as_ref().map(|d| &d.0);
    let x0 = x0.map_or_else(|| set.default_start(), vector);

    let report = py
        .detach(|| -> newton_fw::Result<SolverReport> {
            if solver.eq_ignore_ascii_case("NFW") {
                let opts = NfwOptions { budget, fstar_lower: objective.value_lower_bound(), ..NfwOptions::default() };
                return nfw_solve(objective, set, &params, &x0, &opts);
            }
            let method: BaselineMethod = solver.parse()?;
            let cfg = BaselineConfig::new(method).with_budget(budget);
            match method {
                BaselineMethod::Fw => fw_standard(objective, set, &x0, &cfg),
                BaselineMethod::FwLs => match dopt_inner {
                    Some(d) => {
                        let exact = |x: &DVector<f64>, v: &Vertex| d.linesearch_step(x, v.index);
                        fw_linesearch_with(objective, set, &x0, &cfg, Some(&exact))
                    }
                    None => fw_linesearch_with(objective, set, &x0, &cfg, None),
                },
                BaselineMethod::PgBb => pg_bb(objective, set, &x0, &cfg),
                BaselineMethod::FwAwayDopt => match dopt_inner {
                    Some(d) => fw_away_dopt(d, &x0, &cfg),
                    None => Err(Error::Unsupported("FW-AWAY-DOPT outside D-optimal design")),
                },
            }
        })
        .map_err(py_err)?;
    Ok(PyReport { problem: tag.into(), inner: report })
}

#[pyfunction]
fn gen_portfolio(n: usize, p: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&bench::gen_portfolio(n, p, seed).map_err(py_err)?.to_dense()))
}

#[pyfunction]
fn gen_dopt_points(n: usize, p: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&bench::gen_dopt_points(n, p, seed, None).map_err(py_err)?.to_dense()))
}

/// `(features, labels)` with dense feature rows.
#[pyfunction]
#[pyo3(signature = (n, p, seed, density=0.1))]
fn gen_logistic(n: usize, p: usize, seed: u64, density: f64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let d = bench::gen_logistic(n, p, density, seed).map_err(py_err)?;
    Ok((rows(&d.to_dense()), d.labels.unwrap_or_default()))
}

#[pymodule]
fn pynfw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(omega, m)?)?;
    m.add_function(wrap_pyfunction!(omega_star, m)?)?;
    m.add_function(wrap_pyfunction!(h, m)?)?;
    m.add_function(wrap_pyfunction!(h_inv, m)?)?;
    m.add_function(wrap_pyfunction!(c2, m)?)?;
    m.add_function(wrap_pyfunction!(nu_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(gen_portfolio, m)?)?;
    m.add_function(wrap_pyfunction!(gen_dopt_points, m)?)?;
    m.add_function(wrap_pyfunction!(gen_logistic, m)?)?;
    m.add_class::<PySolverParams>()?;
    m.add_class::<PyPortfolio>()?;
    m.add_class::<PyDOpt>()?;
    m.add_class::<PyLogistic>()?;
    m.add_class::<PySimplex>()?;
    m.add_class::<PyL1Ball>()?;
    m.add_class::<PyReport>()?;
    Ok(())
}
