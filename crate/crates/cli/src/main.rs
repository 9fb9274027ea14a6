use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use qubo_mapf::bench::{format_table, run_benchmark, SCHEMA_VERSION};
use qubo_mapf::multi::{monolithic_spec, plan_multi};
use qubo_mapf::oracle::{annealer_agrees, check_exhaustive, enumerate_cases, OracleOutcome};
use qubo_mapf::penalty::{raw_admissible, PenaltyBuilder};
use qubo_mapf::preprocess::prepare_window;
use qubo_mapf::render::{write_svg, RenderPath};
use qubo_mapf::scenario::{parse_scenario, ScenarioSpec};
use qubo_mapf::solver::sub_seed;
use qubo_mapf::{Backend, PenaltyWeights, Plan, PlanError, SolverConfig, WindowConfig};

#[derive(Parser)]
#[command(
    name = "qmapf",
    version,
    about = "Windowed QUBO multi-robot path planning on grids"
)]
struct Cli {
    /// Log window repairs and retries to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct SolverFlags {
    /// Sampler: `annealer` or `exhaustive`.
    #[arg(long)]
    backend: Option<Backend>,
    #[arg(long)]
    reads: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    /// Base seed; every random choice derives from it.
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverFlags {
    fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(b) = self.backend {
            cfg.backend = b;
        }
        if let Some(r) = self.reads {
            cfg.num_reads = r;
        }
        if let Some(s) = self.sweeps {
            cfg.sweeps = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Plan a scenario and print the plan as JSON.
    Plan {
        scenario: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Include wall-clock timings in the JSON.
        #[arg(long)]
        timings: bool,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render the plan as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Compare classical and QUBO path lengths over seeded repeats.
    Bench {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
        /// Overrides the scenario's repeat count.
        #[arg(long)]
        repeats: Option<usize>,
        /// Print JSON instead of the text table.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        timings: bool,
    },
    /// Plan a scenario and draw it as SVG.
    Render {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Exhaustive-versus-A* and annealer-versus-exhaustive checks on every tiny grid.
    OracleCheck {
        #[arg(long, default_value_t = 3)]
        max_rows: usize,
        #[arg(long, default_value_t = 3)]
        max_cols: usize,
        #[arg(long, default_value_t = 4)]
        window: usize,
        /// Cases also solved by the annealer.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Write the QUBO of the whole problem as "a b w" triples.
    ExportQubo {
        scenario: PathBuf,
        /// Export after logical and numeric fixing instead of the raw model.
        #[arg(long)]
        reduced: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    /// Bad input: exit code 2.
    Input(anyhow::Error),
    /// The planner ran but did not succeed: exit code 1.
    Planning(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Planning(msg)) => {
            eprintln!("planning failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> anyhow::Result<ScenarioSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut spec = parse_scenario(&text).with_context(|| format!("parsing {}", path.display()))?;
    if spec.name.is_empty() {
        spec.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(spec)
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

/// Config problems are input errors; anything else the planner reports is a planning failure.
fn plan_scenario(spec: &ScenarioSpec, verbose: bool) -> Result<Plan, Failure> {
    let plan = plan_multi(
        &spec.map,
        &spec.robots,
        &spec.weights,
        &spec.window,
        &spec.solver,
    )
    .map_err(|e| match e {
        PlanError::Config(_)
        | PlanError::Weights(_)
        | PlanError::Robot { .. }
        | PlanError::Robots(_) => Failure::Input(anyhow!(e)),
        other => Failure::Planning(other.to_string()),
    })?;
    if verbose {
        log_windows(&plan);
    }
    Ok(plan)
}

fn log_windows(plan: &Plan) {
    for w in &plan.window_log {
        eprintln!(
            "window {} t={} len={}{} robots {:?}: {} -> {} vars, {} solver call(s), {}",
            w.index,
            w.start_time,
            w.window_len,
            if w.escalated { " (escalated)" } else { "" },
            w.robots,
            w.preprocess.original_count,
            w.preprocess.reduced_count,
            w.solver_calls,
            if w.success { "ok" } else { "failed" }
        );
        for e in &w.events {
            let robot = e.robot.map_or_else(String::new, |r| format!(" robot {r}"));
            eprintln!("  attempt {}{robot}: {} {}", e.attempt, e.kind, e.detail);
        }
    }
    for c in &plan.clash.unresolved {
        eprintln!("unresolved conflict: {c:?}");
    }
}

fn check_outcome(plan: &Plan) -> Result<(), Failure> {
    if plan.all_reached() {
        return Ok(());
    }
    let failed: Vec<String> = plan
        .robots
        .iter()
        .filter(|r| r.status != qubo_mapf::PlanStatus::ReachedGoal)
        .map(|r| format!("robot {} {}", r.id, r.status.as_str()))
        .collect();
    Err(Failure::Planning(failed.join(", ")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Plan {
            scenario,
            solver,
            timings,
            out,
            svg,
        } => {
            let mut spec = load(&scenario)?;
            solver.apply(&mut spec.solver);
            let plan = plan_scenario(&spec, cli.verbose)?;
            let mut v = json!({
                "schema": SCHEMA_VERSION,
                "scenario": spec.name,
                "seed": spec.solver.seed,
                "backend": spec.solver.backend,
                "valid": qubo_mapf::validate_plan(&spec.map, &plan).is_ok(),
            });
            v["plan"] = plan.to_json(timings);
            emit(&pretty(&v), out.as_deref())?;
            if let Some(path) = svg {
                write_svg(&path, &spec.map, &RenderPath::from_plan(&plan))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            check_outcome(&plan)
        }
        Command::Bench {
            scenarios,
            solver,
            repeats,
            json,
            timings,
        } => {
            let specs = scenarios
                .iter()
                .map(|p| {
                    let mut s = load(p)?;
                    solver.apply(&mut s.solver);
                    Ok(s)
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let reports: Vec<_> = specs
                .iter()
                .map(|s| run_benchmark(s, repeats.unwrap_or(s.repeats)))
                .collect();
            if json {
                let all: Vec<Value> = reports.iter().map(|r| r.to_json(timings)).collect();
                print!(
                    "{}",
                    pretty(&json!({ "schema": SCHEMA_VERSION, "reports": all }))
                );
            } else {
                print!("{}", format_table(&reports, timings));
            }
            let hopeless: Vec<&str> = reports
                .iter()
                .filter(|r| !r.runs.is_empty() && r.success_rate() == 0.0)
                .map(|r| r.name.as_str())
                .collect();
            if hopeless.is_empty() {
                Ok(())
            } else {
                Err(Failure::Planning(format!(
                    "no successful run for {}",
                    hopeless.join(", ")
                )))
            }
        }
        Command::Render {
            scenario,
            out,
            solver,
        } => {
            let mut spec = load(&scenario)?;
            solver.apply(&mut spec.solver);
            let plan = plan_scenario(&spec, cli.verbose)?;
            write_svg(&out, &spec.map, &RenderPath::from_plan(&plan))
                .with_context(|| format!("writing {}", out.display()))?;
            check_outcome(&plan)
        }
        Command::OracleCheck {
            max_rows,
            max_cols,
            window,
            samples,
            solver,
        } => oracle_check(max_rows, max_cols, window, samples, &solver),
        Command::ExportQubo {
            scenario,
            reduced,
            out,
        } => {
            let spec = load(&scenario)?;
            let whole = monolithic_spec(&spec.map, &spec.robots, &spec.weights);
            let model = if reduced {
                prepare_window(&whole, spec.window.aggressiveness)
                    .map_err(|e| Failure::Planning(e.to_string()))?
                    .folded
                    .model
            } else {
                PenaltyBuilder::new(&whole, &raw_admissible(&whole)).build()
            };
            emit(&model.to_triples(), out.as_deref())?;
            Ok(())
        }
    }
}

fn oracle_check(
    max_rows: usize,
    max_cols: usize,
    window: usize,
    samples: usize,
    flags: &SolverFlags,
) -> Result<(), Failure> {
    if max_rows * max_cols > 16 {
        return Err(Failure::Input(anyhow!(
            "oracle grids are limited to 16 cells"
        )));
    }
    let weights = PenaltyWeights::default();
    let aggressiveness = WindowConfig::default().aggressiveness;
    let mut solver = SolverConfig::default();
    flags.apply(&mut solver);
    let cases = enumerate_cases(max_rows, max_cols, window);
    let (mut optimal, mut skipped) = (0usize, 0usize);
    let mut failures = Vec::new();
    for c in &cases {
        match check_exhaustive(c, &weights, aggressiveness) {
            OracleOutcome::Optimal { .. } => optimal += 1,
            OracleOutcome::Skipped { .. } => skipped += 1,
            OracleOutcome::Failed(msg) => failures.push(json!({
                "map": c.map.to_text(),
                "start": [c.start.i, c.start.j],
                "goal": [c.goal.i, c.goal.j],
                "allow_wait": c.allow_wait,
                "reason": msg,
            })),
        }
    }
    let stride = (cases.len() / samples.max(1)).max(1);
    let (mut checked, mut agreed) = (0usize, 0usize);
    for (k, c) in cases.iter().enumerate().step_by(stride).take(samples) {
        let cfg = solver.with_seed(sub_seed(solver.seed, k as u64));
        if let Some(ok) = annealer_agrees(c, &weights, aggressiveness, &cfg) {
            checked += 1;
            agreed += usize::from(ok);
        }
    }
    let rate = if checked == 0 {
        1.0
    } else {
        agreed as f64 / checked as f64
    };
    let failed = failures.len();
    failures.truncate(20);
    let report = json!({
        "schema": SCHEMA_VERSION,
        "cases": cases.len(),
        "optimal": optimal,
        "skipped": skipped,
        "failed": failed,
        "failures": failures,
        "annealer": { "checked": checked, "agreed": agreed, "rate": rate },
    });
    print!("{}", pretty(&report));
    if failed > 0 || rate < 0.95 {
        return Err(Failure::Planning(format!(
            "{failed} oracle failure(s), annealer agreement {:.1}%",
            rate * 100.0
        )));
    }
    Ok(())
}
