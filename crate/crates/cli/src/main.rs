//! `obd`: compile domain models, solve them, simulate controllers and export
//! graphs.
//!
//! Exit status 0 on success, 1 on malformed input or a missing file, 2 when
//! the expanded state space exceeds `--max-states`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use obd_core::compiler::{compile, CompileError, CompileOptions, Compilation, MdpModel, DEFAULT_GAMMA};
use obd_core::dsl::{parse_domain_with_spans, Severity};
use obd_core::io::{self as formats, MDP_FORMAT};
use obd_core::sim::{self, ControllerKind, DEFAULT_PLANNER_BUDGET};
use obd_core::solver::{self, Method, SolverOptions, Strategy, DEFAULT_EPSILON};
use obd_core::space::DEFAULT_MAX_STATES;
use obd_core::Execution;

#[derive(Parser, Debug)]
#[command(name = "obd", version, about = "Compile requirement-driven domain models into MDPs, solve and simulate them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile a model to `obdmdp/1`.
    Compile {
        #[command(flatten)]
        model: ModelArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute an optimal strategy and write it as `obdpolicy/1`.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Value)]
        method: MethodArg,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the strategy as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run controllers on a model and write per-run metrics as CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated list of reflex, replan and random.
        #[arg(long, value_delimiter = ',', default_value = "reflex")]
        controller: Vec<ControllerKind>,
        #[arg(long, default_value_t = 10_000)]
        ticks: u64,
        /// Number of runs per controller, seeded 0, 1, ...
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Strategy for the reflex controller.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Expansion budget per planner call of the replanning controller.
        #[arg(long, default_value_t = DEFAULT_PLANNER_BUDGET)]
        budget: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a Graphviz DOT rendering of a model.
    ExportDot {
        #[command(flatten)]
        model: ModelArgs,
        /// Draw the edges chosen by this strategy.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Draw every action's edges.
        #[arg(long)]
        full: bool,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// A `.obd` model, or for solve and export-dot an `obdmdp/1` file.
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Value,
    Policy,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Value => Method::ValueIteration,
            MethodArg::Policy => Method::PolicyIteration,
        }
    }
}

/// A reported failure; the message is already on stderr.
struct Failure(u8);

type Outcome = Result<(), Failure>;

fn fail(message: impl AsRef<str>) -> Failure {
    eprintln!("obd: error: {}", message.as_ref());
    Failure(1)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| fail(format!("{}: {e}", path.display()))),
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(|e| fail(format!("stdout: {e}"))),
    }
}

/// Parses, validates and compiles a `.obd` file, printing diagnostics.
fn compile_file(args: &ModelArgs) -> Result<Compilation, Failure> {
    let file = args.input.display().to_string();
    let text = read(&args.input)?;
    let (model, spans) = parse_domain_with_spans(&text).map_err(|e| {
        eprintln!("{file}:{}:{}: error: {}", e.line, e.col, e.kind);
        Failure(1)
    })?;
    let options = CompileOptions { gamma: args.gamma, max_states: args.max_states, execution: Execution::default() };
    match compile(&model, &options) {
        Ok(c) => {
            for d in &c.warnings {
                eprintln!("{}", d.render(&file, Some(&spans)));
            }
            Ok(c)
        }
        Err(CompileError::Invalid(diags)) => {
            for d in &diags {
                eprintln!("{}", d.render(&file, Some(&spans)));
            }
            let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
            Err(fail(format!("{file}: {errors} error(s)")))
        }
        Err(CompileError::StateLimit(e)) => {
            eprintln!("{file}: error: {e}");
            Err(Failure(2))
        }
        Err(e) => Err(fail(format!("{file}: {e}"))),
    }
}

/// Loads an `obdmdp/1` file or compiles a model.
fn load_mdp(args: &ModelArgs) -> Result<MdpModel, Failure> {
    let text = read(&args.input)?;
    if text.lines().next().map(str::trim) == Some(MDP_FORMAT) {
        let file = args.input.display();
        let mdp = formats::read_mdp(&text).map_err(|e| fail(format!("{file}:{}:1: {}", e.line, e.message)))?;
        if mdp.num_states() > args.max_states {
            eprintln!("{file}: error: {} states exceed the limit of {}", mdp.num_states(), args.max_states);
            return Err(Failure(2));
        }
        return Ok(mdp);
    }
    Ok(compile_file(args)?.mdp)
}

fn load_policy(path: &Path, mdp: &MdpModel) -> Result<Strategy, Failure> {
    let text = read(path)?;
    let names: Vec<&str> = mdp.actions.iter().map(|a| a.name.as_str()).collect();
    let strategy =
        formats::read_policy(&text, &names).map_err(|e| fail(format!("{}:{}:1: {}", path.display(), e.line, e.message)))?;
    if strategy.actions.len() != mdp.num_states() {
        return Err(fail(format!(
            "{}: policy covers {} states but the model has {}",
            path.display(),
            strategy.actions.len(),
            mdp.num_states()
        )));
    }
    Ok(strategy)
}

fn cmd_compile(model: &ModelArgs, out: Option<&Path>) -> Outcome {
    let start = Instant::now();
    let c = compile_file(model)?;
    let elapsed = start.elapsed();
    let mdp = &c.mdp;
    eprintln!(
        "{} states, {} actions (incl. noop), {} transitions, built in {:.1} ms",
        mdp.num_states(),
        mdp.num_actions(),
        mdp.num_transitions(),
        elapsed.as_secs_f64() * 1e3
    );
    emit(out, &formats::write_mdp(mdp))
}

fn cmd_solve(model: &ModelArgs, epsilon: f64, method: MethodArg, out: Option<&Path>, json: Option<&Path>) -> Outcome {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(fail(format!("--epsilon must be positive, got {epsilon}")));
    }
    let mdp = load_mdp(model)?;
    let options = SolverOptions { epsilon, ..SolverOptions::default() };
    let strategy = solver::solve(&mdp, method.into(), &options).map_err(|e| fail(e.to_string()))?;
    eprintln!(
        "{} iteration: {} iterations, residual {:e}, V(initial) = {}",
        strategy.method,
        strategy.iterations,
        strategy.residual,
        strategy.values[mdp.initial_state]
    );
    if let Some(path) = json {
        emit(Some(path), &formats::policy_json(&mdp, &strategy))?;
    }
    emit(out, &formats::write_policy(&mdp, &strategy))
}

const CSV_HEADER: [&str; 7] = ["seed", "controller", "ticks", "goals_per_tick", "mean_reward", "median_latency_ns", "plan_failures"];

fn metrics_csv(rows: &[sim::Metrics]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for m in rows {
        w.write_record([
            m.seed.to_string(),
            m.controller.clone(),
            m.ticks.to_string(),
            m.goals_per_tick.to_string(),
            m.mean_reward.to_string(),
            m.median_latency_ns.to_string(),
            m.plan_failures.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    model: &ModelArgs,
    kinds: &[ControllerKind],
    ticks: u64,
    seeds: u64,
    policy: Option<&Path>,
    budget: usize,
    out: Option<&Path>,
) -> Outcome {
    if kinds.contains(&ControllerKind::Reflex) && policy.is_none() {
        return Err(fail("the reflex controller needs a strategy: pass --policy FILE (see `obd solve`)"));
    }
    let c = compile_file(model)?;
    let strategy = policy.map(|p| load_policy(p, &c.mdp)).transpose()?;
    let seeds: Vec<u64> = (0..seeds).collect();
    let rows = sim::run_many(&c.dynamics, kinds, &seeds, ticks, strategy.as_ref(), budget, Execution::default());
    for kind in kinds {
        let name = kind.to_string();
        let runs: Vec<&sim::Metrics> = rows.iter().filter(|m| m.controller == name).collect();
        if runs.is_empty() {
            continue;
        }
        let mean = |f: fn(&sim::Metrics) -> f64| runs.iter().map(|m| f(m)).sum::<f64>() / runs.len() as f64;
        eprintln!(
            "{name}: {:.4} goals/tick, {:.3} reward/tick, {:.0} ns median decision",
            mean(|m| m.goals_per_tick),
            mean(|m| m.mean_reward),
            mean(|m| m.median_latency_ns)
        );
    }
    let text = metrics_csv(&rows).map_err(|e| fail(e.to_string()))?;
    emit(out, &text)
}

fn cmd_export_dot(model: &ModelArgs, policy: Option<&Path>, full: bool, out: Option<&Path>) -> Outcome {
    if policy.is_none() && !full {
        return Err(fail("nothing to draw: pass --policy FILE or --full"));
    }
    let mdp = load_mdp(model)?;
    let strategy = match (policy, full) {
        (Some(p), false) => Some(load_policy(p, &mdp)?),
        _ => None,
    };
    emit(out, &formats::write_dot(&mdp, strategy.as_ref()))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Compile { model, out } => cmd_compile(&model, out.as_deref()),
        Command::Solve { model, epsilon, method, out, json } => {
            cmd_solve(&model, epsilon, method, out.as_deref(), json.as_deref())
        }
        Command::Simulate { model, controller, ticks, seeds, policy, budget, out } => {
            cmd_simulate(&model, &controller, ticks, seeds, policy.as_deref(), budget, out.as_deref())
        }
        Command::ExportDot { model, policy, full, out } => cmd_export_dot(&model, policy.as_deref(), full, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code)) => ExitCode::from(code),
    }
}
