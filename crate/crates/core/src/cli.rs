//! Command-line front end: list | solve | sweep | lipschitz | compare |
//! simulate. Data goes to `--output` (or stdout), diagnostics to stderr.
//! Exit codes: 0 success, 1 usage error, 2 solver/assumption error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    self, compare_methods, estimate_lipschitz, grid_points, sweep, LipschitzReport,
    MethodComparison, SweepSettings,
};
use crate::geometry::{NewtonSettings, ProviderTag};
use crate::problem::{
    instantiate, registry_get, Domain, FeasiblePointProvider, ParametricProblem, REGISTRY_NAMES,
};
use crate::sim::{simulate, write_trajectory_csv, Dynamics, SimSettings};
use crate::solvers::{
    solve_qcqp, solve_qp_oracle, solve_socp, Method, QcqpSettings, SolveResult,
};

type Real = f64;

#[derive(Parser)]
#[command(
    name = "lipsol",
    about = "Lipschitz-continuous SOCP reformulations of parametric QPs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Built-in problem name or path to a problem JSON file.
    #[arg(long)]
    problem: String,
    /// Feasible-point provider: expr | analytic_center | steiner.
    #[arg(long, default_value = "expr")]
    provider: String,
    /// Steiner sample count (required with --provider steiner).
    #[arg(long)]
    samples: Option<usize>,
    /// RNG seed; LIPSOL_SEED overrides; default 0.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// QCQP ball parameter k.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    k: Real,
    /// Iterate-change tolerance for the QCQP solver.
    #[arg(long, default_value_t = 1e-10)]
    tol: Real,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in problems.
    List,
    /// Solve one instance at a parameter point.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Parameter point, comma-separated (e.g. `0,0`).
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Method: socp | qcqp | qp.
        #[arg(long, default_value = "socp")]
        method: String,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Evaluate methods over a full-domain grid; CSV out.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Comma-separated methods (socp,qcqp,qp).
        #[arg(long, default_value = "socp")]
        method: String,
        /// Grid step.
        #[arg(long)]
        step: Real,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Empirical Lipschitz estimation across refinement levels; JSON out.
    Lipschitz {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Comma-separated refinement steps, coarsest first (e.g. `1e-2,1e-3`).
        #[arg(long)]
        steps: String,
        /// Comma-separated methods.
        #[arg(long, default_value = "socp")]
        method: String,
        /// Cells per axis of the window grid at each level.
        #[arg(long, default_value_t = 100)]
        cells: usize,
        /// Window center, comma-separated (domain midpoint when omitted).
        #[arg(long, allow_hyphen_values = true)]
        center: Option<String>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Suboptimality of socp/qcqp against the exact QP oracle; JSON out.
    Compare {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        step: Real,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Closed-loop RK4 simulation; trajectory CSV out.
    Simulate {
        #[command(flatten)]
        problem: ProblemArgs,
        /// One expression per state coordinate (repeat the flag).
        #[arg(long = "dynamics", required = true)]
        dynamics: Vec<String>,
        /// Controller: socp | qcqp | qp.
        #[arg(long, default_value = "socp")]
        controller: String,
        /// Initial state, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 1e-3)]
        dt: Real,
        #[arg(long, default_value_t = 1.0)]
        t_final: Real,
        /// Hold the input constant over each step instead of re-solving at
        /// every RK4 stage.
        #[arg(long)]
        zero_order_hold: bool,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
}

enum CliError {
    Usage(String),
    Run(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Run(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Run(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn run_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Run(msg.to_string())
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version print to stdout with success
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::List => {
            for name in REGISTRY_NAMES {
                let p = registry_get(name).map_err(run_err)?;
                println!(
                    "{name}: n={} m={} p={} domain=[{}]",
                    p.n,
                    p.m,
                    p.p,
                    p.domain
                        .lower
                        .iter()
                        .zip(&p.domain.upper)
                        .map(|(l, u)| format!("{l}..{u}"))
                        .collect::<Vec<_>>()
                        .join(", ")
                );
            }
            Ok(())
        }
        Command::Solve { problem, x, method, solver, out } => {
            cmd_solve(&problem, &x, &method, &solver, &out)
        }
        Command::Sweep { problem, method, step, solver, out } => {
            cmd_sweep(&problem, &method, step, &solver, &out)
        }
        Command::Lipschitz { problem, steps, method, cells, center, solver, out } => {
            cmd_lipschitz(&problem, &steps, &method, cells, center.as_deref(), &solver, &out)
        }
        Command::Compare { problem, step, solver, out } => {
            cmd_compare(&problem, step, &solver, &out)
        }
        Command::Simulate {
            problem,
            dynamics,
            controller,
            x0,
            dt,
            t_final,
            zero_order_hold,
            solver,
            out,
        } => cmd_simulate(
            &problem,
            &dynamics,
            &controller,
            &x0,
            dt,
            t_final,
            zero_order_hold,
            &solver,
            &out,
        ),
    }
}

fn load_problem(source: &str) -> Result<ParametricProblem<Real>, CliError> {
    if REGISTRY_NAMES.contains(&source) {
        return registry_get(source).map_err(run_err);
    }
    let path = PathBuf::from(source);
    if !path.exists() {
        return Err(usage(format!(
            "`{source}` is neither a built-in ({}) nor an existing file",
            REGISTRY_NAMES.join(", ")
        )));
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read {source}: {e}")))?;
    ParametricProblem::from_json(&text).map_err(run_err)
}

fn parse_vec(text: &str, expected: usize, what: &str) -> Result<Vec<Real>, CliError> {
    let vals: Result<Vec<Real>, _> = text.split(',').map(|t| t.trim().parse()).collect();
    let vals = vals.map_err(|e| usage(format!("cannot parse {what} `{text}`: {e}")))?;
    if vals.len() != expected {
        return Err(usage(format!(
            "{what} has {} entries, problem expects {expected}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn parse_methods(text: &str) -> Result<Vec<Method>, CliError> {
    text.split(',')
        .map(|t| t.trim().parse::<Method>().map_err(usage))
        .collect()
}

fn seed_of(args: &ProblemArgs) -> Result<u64, CliError> {
    if let Some(seed) = args.seed {
        return Ok(seed);
    }
    match std::env::var("LIPSOL_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|e| usage(format!("LIPSOL_SEED `{v}` is not a u64: {e}"))),
        Err(_) => Ok(0),
    }
}

fn provider_settings(args: &ProblemArgs) -> Result<(ProviderTag, usize, u64), CliError> {
    let tag: ProviderTag = args.provider.parse().map_err(usage)?;
    let seed = seed_of(args)?;
    let samples = match (tag, args.samples) {
        (ProviderTag::Steiner, None) => {
            return Err(usage("--provider steiner requires --samples"));
        }
        (_, s) => s.unwrap_or(4096),
    };
    Ok((tag, samples, seed))
}

fn sweep_settings(args: &ProblemArgs, solver: &SolverArgs) -> Result<SweepSettings<Real>, CliError> {
    let (provider, steiner_samples, seed) = provider_settings(args)?;
    Ok(SweepSettings {
        qcqp: QcqpSettings { k: solver.k, tol: solver.tol, max_iter: solver.max_iter },
        provider,
        newton: NewtonSettings::default(),
        steiner_samples,
        seed,
    })
}

fn write_out(out: &OutputArgs, content: &[u8]) -> Result<(), CliError> {
    match &out.output {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(content)
            .map_err(|e| run_err(format!("stdout: {e}"))),
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    problem: &'a str,
    x: &'a [Real],
    result: &'a SolveResult<Real>,
}

fn cmd_solve(
    problem_args: &ProblemArgs,
    x_text: &str,
    method_text: &str,
    solver: &SolverArgs,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let problem = load_problem(&problem_args.problem)?;
    let x = parse_vec(x_text, problem.n, "--x")?;
    let method: Method = method_text.parse().map_err(usage)?;
    let settings = sweep_settings(problem_args, solver)?;
    let mut provider = provider_of(&settings);
    let provider_ref = provider
        .as_mut()
        .map(|b| &mut **b as &mut dyn FeasiblePointProvider<Real>);
    let instance = instantiate(&problem, &x, provider_ref).map_err(run_err)?;
    let result = match method {
        Method::Socp => solve_socp(&instance),
        Method::Qcqp => solve_qcqp(&instance, &settings.qcqp),
        Method::QpOracle => solve_qp_oracle(&instance),
    }
    .map_err(run_err)?;
    let payload = SolveOutput { problem: &problem.name, x: &x, result: &result };
    let mut text = serde_json::to_string_pretty(&payload).map_err(run_err)?;
    text.push('\n');
    write_out(out, text.as_bytes())
}

fn provider_of(
    settings: &SweepSettings<Real>,
) -> Option<Box<dyn FeasiblePointProvider<Real>>> {
    match settings.provider {
        ProviderTag::Expr => None,
        ProviderTag::AnalyticCenter => Some(Box::new(
            crate::geometry::AnalyticCenterProvider::new(settings.newton),
        )),
        ProviderTag::Steiner => Some(Box::new(crate::geometry::SteinerProvider {
            samples: settings.steiner_samples,
            seed: settings.seed,
        })),
    }
}

fn cmd_sweep(
    problem_args: &ProblemArgs,
    method_text: &str,
    step: Real,
    solver: &SolverArgs,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let problem = load_problem(&problem_args.problem)?;
    let methods = parse_methods(method_text)?;
    let settings = sweep_settings(problem_args, solver)?;
    let points = grid_points(&problem.domain, step).map_err(run_err)?;
    let records = sweep(&problem, &methods, &points, &settings);
    let mut buf = Vec::new();
    analysis::write_sweep_csv(&mut buf, &records, problem.n, problem.m).map_err(run_err)?;
    write_out(out, &buf)
}

#[derive(Serialize)]
struct LipschitzOutput {
    problem: String,
    provider: String,
    steps: Vec<Real>,
    reports: Vec<LipschitzReport<Real>>,
    verdicts: BTreeMap<String, String>,
}

/// Per-level window grid: `cells` cells per axis at the level's step,
/// centered at `center` and clipped to the domain. Finer levels therefore
/// zoom toward the center, keeping every level the same size.
fn window_domain(
    domain: &Domain<Real>,
    center: &[Real],
    step: Real,
    cells: usize,
) -> Domain<Real> {
    let half = step * cells as Real / 2.0;
    let lower = center
        .iter()
        .zip(&domain.lower)
        .map(|(c, l)| (c - half).max(*l))
        .collect();
    let upper = center
        .iter()
        .zip(&domain.upper)
        .map(|(c, u)| (c + half).min(*u))
        .collect();
    Domain { lower, upper }
}

fn cmd_lipschitz(
    problem_args: &ProblemArgs,
    steps_text: &str,
    method_text: &str,
    cells: usize,
    center_text: Option<&str>,
    solver: &SolverArgs,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let problem = load_problem(&problem_args.problem)?;
    let steps: Vec<Real> = steps_text
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(format!("cannot parse --steps `{steps_text}`: {e}")))?;
    if steps.is_empty() {
        return Err(usage("--steps needs at least one step"));
    }
    let methods = parse_methods(method_text)?;
    let center = match center_text {
        Some(t) => parse_vec(t, problem.n, "--center")?,
        None => problem
            .domain
            .lower
            .iter()
            .zip(&problem.domain.upper)
            .map(|(l, u)| (l + u) / 2.0)
            .collect(),
    };
    let settings = sweep_settings(problem_args, solver)?;
    let mut levels = Vec::new();
    for &step in &steps {
        let window = window_domain(&problem.domain, &center, step, cells);
        let points = grid_points(&window, step).map_err(run_err)?;
        levels.push((step, sweep(&problem, &methods, &points, &settings)));
    }
    let mut reports = Vec::new();
    let mut verdicts = BTreeMap::new();
    for &method in &methods {
        let report = estimate_lipschitz(&levels, method).map_err(run_err)?;
        verdicts.insert(method.to_string(), report.verdict.to_string());
        reports.push(report);
    }
    let payload = LipschitzOutput {
        problem: problem.name.clone(),
        provider: problem_args.provider.clone(),
        steps,
        reports,
        verdicts,
    };
    let mut text = serde_json::to_string_pretty(&payload).map_err(run_err)?;
    text.push('\n');
    write_out(out, text.as_bytes())
}

#[derive(Serialize)]
struct CompareOutput {
    problem: String,
    step: Real,
    points: usize,
    table: Vec<MethodComparison<Real>>,
}

fn cmd_compare(
    problem_args: &ProblemArgs,
    step: Real,
    solver: &SolverArgs,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let problem = load_problem(&problem_args.problem)?;
    let settings = sweep_settings(problem_args, solver)?;
    let points = grid_points(&problem.domain, step).map_err(run_err)?;
    let methods = [Method::Socp, Method::Qcqp, Method::QpOracle];
    let records = sweep(&problem, &methods, &points, &settings);
    // desired points for the objective-gap metric
    let mut des = Vec::with_capacity(points.len());
    for x in &points {
        let instance = instantiate(&problem, x, None).map_err(run_err)?;
        des.push(instance.pi_des);
    }
    let table = compare_methods(&records, &des).map_err(run_err)?;
    let payload = CompareOutput {
        problem: problem.name.clone(),
        step,
        points: points.len(),
        table,
    };
    let mut text = serde_json::to_string_pretty(&payload).map_err(run_err)?;
    text.push('\n');
    write_out(out, text.as_bytes())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    problem_args: &ProblemArgs,
    dynamics_texts: &[String],
    controller_text: &str,
    x0_text: &str,
    dt: Real,
    t_final: Real,
    zero_order_hold: bool,
    solver: &SolverArgs,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let problem = load_problem(&problem_args.problem)?;
    let sources: Vec<&str> = dynamics_texts.iter().map(String::as_str).collect();
    let dynamics = Dynamics::parse(&sources).map_err(run_err)?;
    let controller: Method = controller_text.parse().map_err(usage)?;
    let x0 = parse_vec(x0_text, problem.n, "--x0")?;
    let settings = sweep_settings(problem_args, solver)?;
    let sim_settings = SimSettings {
        dt,
        t_final,
        zero_order_hold,
        qcqp: settings.qcqp,
    };
    let mut provider = provider_of(&settings);
    let provider_ref = provider
        .as_mut()
        .map(|b| &mut **b as &mut dyn FeasiblePointProvider<Real>);
    let traj = simulate(&problem, &dynamics, controller, &x0, &sim_settings, provider_ref)
        .map_err(run_err)?;
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &traj, problem.n, problem.m).map_err(run_err)?;
    write_out(out, &buf)
}
