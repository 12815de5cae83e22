//! Experiment configuration, orchestration and trace output.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;

use super::{gen_dopt_points, gen_logistic, gen_portfolio, parse_libsvm, read_dense_csv, read_price_csv, Dataset};
use crate::baselines::{fw_away_dopt, fw_linesearch_with, fw_standard, pg_bb, BaselineConfig, BaselineMethod};
use crate::error::{Error, Result};
use crate::objectives::{DOptProblem, LogisticProblem, PortfolioProblem};
use crate::oracles::{FeasibleSet, L1Ball, Objective, Simplex, Vertex};
use crate::report::{Budget, SolverReport, Termination};
use crate::sc::{contraction_lhs, SolverParams};
use crate::solver::{nfw_solve, InnerMethod, NfwOptions};

pub const TRACE_HEADER: &str =
    "problem,solver,iter,time_s,fval,gap_proxy,gamma,eta,lambda,stage,alpha,lmo_calls_cum,grad_evals_cum,hess_ops_cum";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Portfolio,
    Dopt,
    Logistic,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Portfolio => "portfolio",
            Problem::Dopt => "dopt",
            Problem::Logistic => "logistic",
        })
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "portfolio" => Ok(Problem::Portfolio),
            "dopt" => Ok(Problem::Dopt),
            "logistic" => Ok(Problem::Logistic),
            _ => Err(Error::Config(format!("unknown problem '{s}' (portfolio, dopt, logistic)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Numeric CSV holding the problem matrix as is.
    Matrix,
    /// Price table converted to return ratios (portfolio only).
    Prices,
    Libsvm,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix" => Ok(DataFormat::Matrix),
            "prices" => Ok(DataFormat::Prices),
            "libsvm" => Ok(DataFormat::Libsvm),
            _ => Err(Error::Config(format!("unknown data format '{s}' (matrix, prices, libsvm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { n: usize, p: usize, seed: u64 },
    File { path: PathBuf, format: DataFormat },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Nfw,
    Baseline(BaselineMethod),
}

impl SolverKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SolverKind::Nfw => "NFW",
            SolverKind::Baseline(m) => m.tag(),
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("NFW") {
            return Ok(SolverKind::Nfw);
        }
        s.parse()
            .map(SolverKind::Baseline)
            .map_err(|_| Error::Config(format!("unknown solver '{s}' (NFW, FW, FW-LS, PG-BB, FW-AWAY-DOPT)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub data: DataSource,
    pub solvers: Vec<SolverKind>,
    pub params: SolverParams,
    pub budget: Budget,
    /// Output directory.
    pub out: PathBuf,
    /// Ridge weight for logistic regression; `1/n` when unset.
    pub mu: Option<f64>,
    /// l1-ball radius for logistic regression.
    pub radius: f64,
    pub standardize: bool,
    /// Nonzero fraction of synthetic logistic features.
    pub density: f64,
    pub inner: InnerMethod,
}

const KEYS: &[&str] = &[
    "problem", "data", "data-format", "n", "p", "seed", "solvers", "beta", "sigma", "cbig", "c1", "delta", "eps",
    "max-lmo", "max-seconds", "max-iters", "out", "mu", "radius", "standardize", "density", "inner",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let v = v.trim().trim_matches('"');
            pairs.push((k.trim().to_owned(), v.to_owned()));
        }
        Ok(pairs)
    }

    /// Builds a config from key/value pairs; later pairs override earlier ones.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: impl IntoIterator<Item = (K, V)>) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for (k, v) in pairs {
            let k = k.as_ref().trim().replace('_', "-");
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown key '{k}'")));
            }
            map.insert(k, v.as_ref().trim().to_owned());
        }
        let get = |k: &str| map.get(k).map(String::as_str);

        let problem: Problem = get("problem").ok_or_else(|| Error::Config("problem is required".into()))?.parse()?;
        let synthetic = ["n", "p", "seed"].iter().any(|k| map.contains_key(*k));
        let data = match (get("data"), synthetic) {
            (Some(_), true) => return Err(Error::Config("give either a data file or n/p/seed, not both".into())),
            (Some(path), false) => {
                let format = match get("data-format") {
                    Some(f) => f.parse()?,
                    None if problem == Problem::Logistic => DataFormat::Libsvm,
                    None => DataFormat::Matrix,
                };
                DataSource::File { path: path.into(), format }
            }
            (None, _) => {
                let need = |k: &str| get(k).ok_or_else(|| Error::Config(format!("synthetic data needs {k}")));
                DataSource::Synthetic {
                    n: parse_value("n", need("n")?)?,
                    p: parse_value("p", need("p")?)?,
                    seed: parse_value("seed", need("seed")?)?,
                }
            }
        };
        let solvers = match get("solvers") {
            Some(list) => list.split(',').map(|s| s.trim().parse()).collect::<Result<Vec<SolverKind>>>()?,
            None => default_solvers(problem),
        };
        if solvers.is_empty() {
            return Err(Error::Config("empty solver list".into()));
        }
        if problem != Problem::Dopt && solvers.contains(&SolverKind::Baseline(BaselineMethod::FwAwayDopt)) {
            return Err(Error::Config("FW-AWAY-DOPT applies to the dopt problem only".into()));
        }

        let mut params = SolverParams::default();
        for (key, slot) in [
            ("beta", &mut params.beta),
            ("sigma", &mut params.sigma),
            ("cbig", &mut params.c_big),
            ("c1", &mut params.c_one),
            ("delta", &mut params.delta),
            ("eps", &mut params.eps),
        ] {
            if let Some(v) = get(key) {
                *slot = parse_value(key, v)?;
            }
        }
        let mut budget = Budget::default();
        if let Some(v) = get("max-iters") {
            budget.max_iters = parse_value("max-iters", v)?;
        }
        if let Some(v) = get("max-lmo") {
            budget.max_lmo = parse_value("max-lmo", v)?;
        }
        if let Some(v) = get("max-seconds") {
            budget.max_seconds = parse_value("max-seconds", v)?;
        }
        if budget.max_iters == 0 || budget.max_lmo == 0 || !(budget.max_seconds > 0.0) {
            return Err(Error::Config("budgets must be positive".into()));
        }
        let inner = match get("inner") {
            None | Some("away") => InnerMethod::Away,
            Some("plain") => InnerMethod::Plain,
            Some(other) => return Err(Error::Config(format!("unknown inner method '{other}' (away, plain)"))),
        };
        Ok(Self {
            problem,
            data,
            solvers,
            params,
            budget,
            out: get("out").ok_or_else(|| Error::Config("out is required".into()))?.into(),
            mu: get("mu").map(|v| parse_value("mu", v)).transpose()?,
            radius: get("radius").map_or(Ok(10.0), |v| parse_value("radius", v))?,
            standardize: get("standardize").map_or(Ok(false), |v| parse_value("standardize", v))?,
            density: get("density").map_or(Ok(0.1), |v| parse_value("density", v))?,
            inner,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_pairs(Self::parse_key_values(&fs::read_to_string(path)?)?)
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let data = match &self.data {
            DataSource::Synthetic { n, p, seed } => match self.problem {
                Problem::Portfolio => gen_portfolio(*n, *p, *seed)?,
                Problem::Dopt => gen_dopt_points(*n, *p, *seed, None)?,
                Problem::Logistic => gen_logistic(*n, *p, self.density, *seed)?,
            },
            DataSource::File { path, format } => match format {
                DataFormat::Matrix => Dataset::dense(read_dense_csv(path)?),
                DataFormat::Prices => Dataset::dense(read_price_csv(path)?),
                DataFormat::Libsvm => parse_libsvm(path)?,
            },
        };
        data.validate()?;
        if (self.problem == Problem::Logistic) != data.labels.is_some() {
            return Err(Error::data("labels are required for logistic data and only for it"));
        }
        Ok(data)
    }
}

pub fn default_solvers(problem: Problem) -> Vec<SolverKind> {
    let mut s = vec![
        SolverKind::Nfw,
        SolverKind::Baseline(BaselineMethod::Fw),
        SolverKind::Baseline(BaselineMethod::FwLs),
        SolverKind::Baseline(BaselineMethod::PgBb),
    ];
    if problem == Problem::Dopt {
        s.push(SolverKind::Baseline(BaselineMethod::FwAwayDopt));
    }
    s
}

enum Instance {
    Portfolio(PortfolioProblem),
    Dopt(DOptProblem),
    Logistic(LogisticProblem),
}

impl Instance {
    fn objective(&self) -> &dyn Objective {
        match self {
            Instance::Portfolio(p) => p,
            Instance::Dopt(p) => p,
            Instance::Logistic(p) => p,
        }
    }
}

struct Setup {
    instance: Instance,
    set: Box<dyn FeasibleSet>,
    x0: DVector<f64>,
    /// Ridge weight actually used (logistic only).
    mu: Option<f64>,
}

fn build(config: &ExperimentConfig, data: &Dataset) -> Result<Setup> {
    let (instance, set, mu): (Instance, Box<dyn FeasibleSet>, _) = match config.problem {
        Problem::Portfolio => {
            let prob = PortfolioProblem::new(data.to_dense())?;
            let p = prob.dim();
            (Instance::Portfolio(prob), Box::new(Simplex::new(p)), None)
        }
        Problem::Dopt => {
            let prob = DOptProblem::new(data.to_dense())?;
            let p = prob.dim();
            (Instance::Dopt(prob), Box::new(Simplex::new(p)), None)
        }
        Problem::Logistic => {
            let labels = data.labels.as_deref().expect("validated labels");
            let mu = config.mu.unwrap_or(1.0 / data.nrows() as f64);
            let mut prob = LogisticProblem::new(&data.to_sparse(), labels, mu)?;
            if config.standardize {
                prob = prob.standardized();
            }
            if !(config.radius > 0.0) {
                return Err(Error::Config("radius must be positive".into()));
            }
            let p = prob.dim();
            (Instance::Logistic(prob), Box::new(L1Ball::new(p, config.radius)), Some(mu))
        }
    };
    let x0 = set.default_start();
    if !instance.objective().in_domain(&x0) {
        return Err(Error::data("default starting point is outside the objective domain"));
    }
    Ok(Setup { instance, set, x0, mu })
}

fn run_solver(config: &ExperimentConfig, setup: &Setup, kind: SolverKind) -> Result<SolverReport> {
    let objective = setup.instance.objective();
    let set = setup.set.as_ref();
    match kind {
        SolverKind::Nfw => {
            let opts = NfwOptions {
                budget: config.budget,
                inner: config.inner,
                fstar_lower: objective.value_lower_bound(),
                ..NfwOptions::default()
            };
            nfw_solve(objective, set, &config.params, &setup.x0, &opts)
        }
        SolverKind::Baseline(method) => {
            let cfg = BaselineConfig::new(method).with_budget(config.budget);
            match (method, &setup.instance) {
                (BaselineMethod::Fw, _) => fw_standard(objective, set, &setup.x0, &cfg),
                (BaselineMethod::FwLs, Instance::Dopt(d)) => {
                    let exact = |x: &DVector<f64>, v: &Vertex| d.linesearch_step(x, v.index);
                    fw_linesearch_with(objective, set, &setup.x0, &cfg, Some(&exact))
                }
                (BaselineMethod::FwLs, _) => fw_linesearch_with(objective, set, &setup.x0, &cfg, None),
                (BaselineMethod::PgBb, _) => pg_bb(objective, set, &setup.x0, &cfg),
                (BaselineMethod::FwAwayDopt, Instance::Dopt(d)) => fw_away_dopt(d, &setup.x0, &cfg),
                (BaselineMethod::FwAwayDopt, _) => Err(Error::Unsupported("FW-AWAY-DOPT outside D-optimal design")),
            }
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the header and one line per trace row.
pub fn write_trace_csv(problem: &str, report: &SolverReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            problem,
            report.solver,
            r.iter,
            r.time_s,
            r.fval,
            r.gap_proxy,
            fmt_opt(r.gamma),
            fmt_opt(r.eta),
            fmt_opt(r.lambda),
            r.stage.map(|s| s.to_string()).unwrap_or_default(),
            fmt_opt(r.alpha),
            r.lmo_calls_cum,
            r.grad_evals_cum,
            r.hess_ops_cum,
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub solver: String,
    pub trace: PathBuf,
    pub report: std::result::Result<SolverReport, String>,
}

impl SolverOutcome {
    pub fn succeeded(&self) -> bool {
        matches!(&self.report, Ok(r) if !matches!(r.termination, Termination::Failed(_)))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub outcomes: Vec<SolverOutcome>,
    pub metadata: PathBuf,
}

impl ExperimentSummary {
    pub fn all_succeeded(&self) -> bool {
        self.outcomes.iter().all(SolverOutcome::succeeded)
    }
}

/// Runs every configured solver, writing `<problem>_<solver>.csv` and
/// `metadata.txt` into the output directory. A solver error is recorded in
/// the metadata next to a header-only trace; data and configuration errors
/// abort the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let data = config.load_dataset()?;
    let setup = build(config, &data)?;
    fs::create_dir_all(&config.out)?;

    let problem = config.problem.to_string();
    let mut outcomes = Vec::new();
    for &kind in &config.solvers {
        let trace = config.out.join(format!("{problem}_{}.csv", kind.tag()));
        let mut file = BufWriter::new(fs::File::create(&trace)?);
        let report = match run_solver(config, &setup, kind) {
            Ok(rep) => {
                write_trace_csv(&problem, &rep, &mut file)?;
                Ok(rep)
            }
            Err(e) => {
                writeln!(file, "{TRACE_HEADER}")?;
                Err(e.to_string())
            }
        };
        file.flush()?;
        outcomes.push(SolverOutcome { solver: kind.tag().into(), trace, report });
    }

    let metadata = config.out.join("metadata.txt");
    fs::write(&metadata, metadata_text(config, &data, &setup, &outcomes))?;
    Ok(ExperimentSummary { outcomes, metadata })
}

fn metadata_text(config: &ExperimentConfig, data: &Dataset, setup: &Setup, outcomes: &[SolverOutcome]) -> String {
    let p = &config.params;
    let mut lines = vec![
        format!("version = {}", env!("CARGO_PKG_VERSION")),
        format!("problem = {}", config.problem),
    ];
    match &config.data {
        DataSource::Synthetic { n, p, seed } => {
            lines.push(format!("data = synthetic n={n} p={p} seed={seed}"));
        }
        DataSource::File { path, format } => lines.push(format!("data = {} ({format:?})", path.display())),
    }
    lines.push(format!("rows = {}", data.nrows()));
    lines.push(format!("cols = {}", data.ncols()));
    lines.push(format!("dim = {}", setup.x0.len()));
    lines.push(format!("solvers = {}", config.solvers.iter().map(SolverKind::tag).collect::<Vec<_>>().join(",")));
    lines.push(format!(
        "beta = {}\nsigma = {}\ncbig = {}\nc1 = {}\ndelta = {}\neps = {}",
        p.beta, p.sigma, p.c_big, p.c_one, p.delta, p.eps
    ));
    lines.push(format!("max-iters = {}", config.budget.max_iters));
    lines.push(format!(
        "max-lmo = {}",
        if config.budget.max_lmo == usize::MAX { "none".into() } else { config.budget.max_lmo.to_string() }
    ));
    lines.push(format!("max-seconds = {}", config.budget.max_seconds));
    lines.push(format!("inner = {:?}", config.inner));
    if config.problem == Problem::Logistic {
        lines.push(format!("mu = {}", fmt_opt(setup.mu)));
        lines.push(format!("radius = {}", config.radius));
        lines.push(format!("standardize = {}", config.standardize));
        if let DataSource::Synthetic { .. } = config.data {
            lines.push(format!("density = {}", config.density));
        }
    }
    lines.push("bb-step = <dx,dg>/<dg,dg> clamped to [1e-10, 1e10]".into());
    lines.push("lambda = certificate bound on ||x - x*||_{x*}, valid under the parameter conditions".into());
    for o in outcomes {
        let status = match &o.report {
            Ok(r) => format!(
                "{} after {} rows, f = {}, lmo = {}",
                r.termination,
                r.rows.len(),
                r.final_value(),
                r.lmo_calls()
            ),
            Err(e) => format!("error: {e}"),
        };
        lines.push(format!("result.{} = {status}", o.solver));
        if let Ok(r) = &o.report {
            for ev in &r.events {
                lines.push(format!("event.{} = {ev}", o.solver));
            }
        }
    }
    lines.join("\n") + "\n"
}

/// Feasible-region table for the contraction conditions: for each `C` and a
/// grid of `beta` values, the smallest admissible `sigma` and the second
/// condition's left-hand side.
pub fn feasible_region_grid(c_values: &[f64], beta_steps: usize) -> String {
    let mut out = String::from("beta,c_big,sigma_min,cond2_lhs,feasible\n");
    for &c in c_values {
        for i in 1..beta_steps {
            let beta = 0.5 * i as f64 / beta_steps as f64;
            let (sigma_min, second) = contraction_lhs(beta, c);
            let feasible = sigma_min < 1.0 && second <= 2.0;
            out.push_str(&format!("{beta},{c},{sigma_min},{second},{}\n", u8::from(feasible)));
        }
    }
    out
}
