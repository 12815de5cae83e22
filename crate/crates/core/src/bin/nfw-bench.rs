//! `nfw-bench gen | run | check`
//!
//! Exit codes: 0 success, 1 usage error, 2 solver failure, 3 data error.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use newton_fw::bench::{
    feasible_region_grid, gen_dopt_points, gen_logistic, gen_portfolio, run_experiment, write_dense_csv,
    write_libsvm, ExperimentConfig, Problem,
};
use newton_fw::{Error, SolverParams};

const USAGE: u8 = 1;
const SOLVER: u8 = 2;
const DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "nfw-bench", version, about = "Newton Frank-Wolfe benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Gen(GenArgs),
    /// Run solvers and write one trace CSV per solver.
    Run(RunArgs),
    /// Validate parameters and optionally write the feasible-region grid.
    Check(CheckArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    seed: u64,
    /// Nonzero fraction for logistic features.
    #[arg(long, default_value_t = 0.1)]
    density: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ParamArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    cbig: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
}

impl ParamArgs {
    fn pairs(&self) -> Vec<(String, String)> {
        [
            ("beta", self.beta),
            ("sigma", self.sigma),
            ("cbig", self.cbig),
            ("c1", self.c1),
            ("delta", self.delta),
            ("eps", self.eps),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_owned(), v.to_string())))
        .collect()
    }
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// matrix, prices or libsvm.
    #[arg(long)]
    data_format: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated solver tags: NFW, FW, FW-LS, PG-BB, FW-AWAY-DOPT.
    #[arg(long)]
    solvers: Option<String>,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    max_lmo: Option<usize>,
    #[arg(long)]
    max_seconds: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Logistic ridge weight (default 1/n).
    #[arg(long)]
    mu: Option<f64>,
    /// Logistic l1-ball radius (default 10).
    #[arg(long)]
    radius: Option<f64>,
    /// Rescale the logistic objective to standard self-concordant form.
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    density: Option<f64>,
    /// Inner solver: away or plain.
    #[arg(long)]
    inner: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Feasible-region grid CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of beta grid intervals on (0, 0.5).
    #[arg(long, default_value_t = 200)]
    steps: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidParams(_) | Error::Unsupported(_)) => USAGE,
        Some(Error::Data { .. } | Error::Io(_) | Error::Domain(_) | Error::Dimension { .. }) => DATA,
        Some(_) => SOLVER,
        None if e.downcast_ref::<io::Error>().is_some() => DATA,
        None => SOLVER,
    }
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn gen(a: GenArgs) -> anyhow::Result<u8> {
    let problem: Problem = a.problem.parse()?;
    let mut out = output(a.out.as_ref())?;
    match problem {
        Problem::Portfolio => write_dense_csv(&gen_portfolio(a.n, a.p, a.seed)?.to_dense(), &mut out)?,
        Problem::Dopt => write_dense_csv(&gen_dopt_points(a.n, a.p, a.seed, None)?.to_dense(), &mut out)?,
        Problem::Logistic => write_libsvm(&gen_logistic(a.n, a.p, a.density, a.seed)?, &mut out)?,
    }
    out.flush()?;
    Ok(0)
}

fn run(a: RunArgs) -> anyhow::Result<u8> {
    let mut pairs = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::parse_key_values(&text)?
        }
        None => Vec::new(),
    };
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_owned(), v));
        }
    };
    set("problem", a.problem);
    set("data", a.data.map(|p| p.display().to_string()));
    set("data-format", a.data_format);
    set("n", a.n.map(|v| v.to_string()));
    set("p", a.p.map(|v| v.to_string()));
    set("seed", a.seed.map(|v| v.to_string()));
    set("solvers", a.solvers);
    set("max-lmo", a.max_lmo.map(|v| v.to_string()));
    set("max-seconds", a.max_seconds.map(|v| v.to_string()));
    set("max-iters", a.max_iters.map(|v| v.to_string()));
    set("mu", a.mu.map(|v| v.to_string()));
    set("radius", a.radius.map(|v| v.to_string()));
    set("standardize", a.standardize.then(|| "true".to_owned()));
    set("density", a.density.map(|v| v.to_string()));
    set("inner", a.inner);
    set("out", a.out.map(|p| p.display().to_string()));
    pairs.extend(a.params.pairs());

    let config = ExperimentConfig::from_pairs(pairs)?;
    let check = config.params.validate();
    if !check.is_valid() {
        return Err(Error::InvalidParams(check.to_string()).into());
    }
    let summary = run_experiment(&config)?;
    for o in &summary.outcomes {
        match &o.report {
            Ok(r) => println!(
                "{:<13} {:<28} f = {:<24} lmo = {:<10} -> {}",
                o.solver,
                r.termination.to_string(),
                r.final_value(),
                r.lmo_calls(),
                o.trace.display()
            ),
            Err(e) => println!("{:<13} error: {e}", o.solver),
        }
    }
    Ok(if summary.all_succeeded() { 0 } else { SOLVER })
}

fn check(a: CheckArgs) -> anyhow::Result<u8> {
    let mut params = SolverParams::default();
    if let Some(v) = a.params.beta {
        params.beta = v;
    }
    if let Some(v) = a.params.sigma {
        params.sigma = v;
    }
    if let Some(v) = a.params.cbig {
        params.c_big = v;
    }
    if let Some(v) = a.params.c1 {
        params.c_one = v;
    }
    if let Some(v) = a.params.delta {
        params.delta = v;
    }
    if let Some(v) = a.params.eps {
        params.eps = v;
    }
    let check = params.validate();
    println!(
        "beta = {}, sigma = {}, C = {}, C1 = {}, delta = {}, eps = {}",
        params.beta, params.sigma, params.c_big, params.c_one, params.delta, params.eps
    );
    if let Some(path) = &a.out {
        let mut cs = vec![2.0, 5.0, 10.0, 20.0, 50.0];
        if params.c_big > 1.0 && !cs.contains(&params.c_big) {
            cs.push(params.c_big);
            cs.sort_by(f64::total_cmp);
        }
        if a.steps < 2 {
            return Err(Error::Config("steps must be at least 2".into()).into());
        }
        fs::write(path, feasible_region_grid(&cs, a.steps)).with_context(|| format!("writing {}", path.display()))?;
        println!("grid written to {}", path.display());
    }
    if check.is_valid() {
        println!("valid; eta0 = {}, nu = {}", params.eta0()?, params.nu()?);
        Ok(0)
    } else {
        println!("invalid:\n{check}");
        Ok(USAGE)
    }
}
