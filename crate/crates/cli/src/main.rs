use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use qsl_cli::commands::{self, read_json, OptimizeTarget, DOMINANCE_FLAG};
use qsl_cli::experiment::{ExperimentSpec, Format, ProblemSpec, TimeAxis};
use qsl_cli::{
    exit_code, write_json, write_table, InvariantFailure, NotConverged, EXIT_OK, EXIT_USAGE,
};
use qsl_core::dynamics::{QaoaAngles, Schedule};
use qsl_core::optimize::{Aggregation, SearchGrid};

/// Quantum speed limits for annealing and QAOA.
#[derive(Parser)]
#[command(name = "qsl", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON experiment file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    segments: Option<usize>,
    /// Target fidelity for minimal-time searches.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// How restarts are combined into one figure.
    #[arg(long, global = true, value_enum)]
    aggregate: Option<AggregateArg>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    Avg,
    Best,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Grover,
    Pspin,
    PerturbedPspin,
    SpinGraph,
}

#[derive(Args, Default)]
struct ProblemArgs {
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Qubit count (Grover) or logical spin count (p-spin).
    #[arg(long)]
    n: Option<usize>,
    /// Grover search space size.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    marked: Option<Vec<usize>>,
    /// Spin graph JSON file.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    f_max: Option<f64>,
    #[arg(long)]
    g_max: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Every applicable lower bound on the annealing time.
    Bound {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Schedule JSON for the schedule-dependent bounds.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Fidelity reached by a schedule or QAOA circuit.
    Simulate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, conflicts_with = "angles")]
        schedule: Option<PathBuf>,
        #[arg(long)]
        angles: Option<PathBuf>,
    },
    /// Optimize a schedule at fixed time, or QAOA angles at fixed depth.
    Optimize {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, conflicts_with = "layers", required_unless_present = "layers")]
        time: Option<f64>,
        /// Leave the cost amplitude unbounded (large finite cap).
        #[arg(long, requires = "time", conflicts_with = "layers")]
        unconstrained_f: bool,
        #[arg(long)]
        layers: Option<usize>,
    },
    /// Grover fidelity error against annealing time.
    SweepGrover {
        #[arg(long, value_delimiter = ',')]
        d: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        g_max: Option<Vec<f64>>,
        #[arg(long)]
        f_max: Option<f64>,
        /// Explicit annealing times.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["t_min", "t_max", "t_points"])]
        times: Option<Vec<f64>>,
        #[arg(long, requires_all = ["t_max", "t_points"])]
        t_min: Option<f64>,
        #[arg(long, requires_all = ["t_min", "t_points"])]
        t_max: Option<f64>,
        #[arg(long, requires_all = ["t_min", "t_max"])]
        t_points: Option<usize>,
    },
    /// Minimal QAOA runtime for the perturbed p-spin model.
    SweepPspin {
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<u32>>,
        /// Total spin counts.
        #[arg(long, value_delimiter = ',')]
        spins: Option<Vec<usize>>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        max_depth: Option<usize>,
        /// Search grid bounds in units of time.
        #[arg(long, requires = "search_max")]
        search_min: Option<f64>,
        #[arg(long, requires = "search_min")]
        search_max: Option<f64>,
    },
    /// QAOA layer-count certificate, optionally checked against a circuit.
    QaoaDepth {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        angles: Option<PathBuf>,
    },
    /// Randomized invariant checks.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

fn base_spec(g: &GlobalArgs) -> Result<ExperimentSpec> {
    let mut spec = match &g.config {
        Some(p) => ExperimentSpec::load(p)?,
        None => ExperimentSpec::default(),
    };
    if let Some(s) = g.seed {
        spec.optimizer.seed = s;
    }
    if let Some(r) = g.restarts {
        spec.optimizer.restarts = r;
    }
    if let Some(k) = g.segments {
        spec.optimizer.n_segments = k;
    }
    if let Some(t) = g.threshold {
        spec.threshold = t;
    }
    if let Some(a) = g.aggregate {
        spec.aggregation = Some(match a {
            AggregateArg::Avg => Aggregation::Average,
            AggregateArg::Best => Aggregation::Best,
        });
    }
    if g.out.is_some() {
        spec.output.path = g.out.clone();
    }
    if g.format.is_some() {
        spec.output.format = g.format;
    }
    Ok(spec)
}

fn apply_problem(spec: &mut ExperimentSpec, a: &ProblemArgs) -> Result<()> {
    if let Some(f) = a.f_max {
        spec.f_max = f;
    }
    if let Some(g) = a.g_max {
        spec.g_max = g;
    }
    let Some(model) = a.model else {
        if a.n.is_some()
            || a.d.is_some()
            || a.p.is_some()
            || a.lambda.is_some()
            || a.marked.is_some()
            || a.graph.is_some()
        {
            bail!("problem flags need --model");
        }
        return Ok(());
    };
    spec.problem = Some(match model {
        ModelArg::Grover => ProblemSpec::Grover {
            n: a.n,
            d: a.d,
            marked: a.marked.clone().unwrap_or_else(|| vec![0]),
        },
        ModelArg::Pspin => ProblemSpec::Pspin {
            n: need(a.n, "n")?,
            p: need(a.p, "p")?,
        },
        ModelArg::PerturbedPspin => ProblemSpec::PerturbedPspin {
            n: need(a.n, "n")?,
            p: need(a.p, "p")?,
            lambda: a.lambda.unwrap_or(1.0),
        },
        ModelArg::SpinGraph => ProblemSpec::SpinGraph {
            path: Some(need(a.graph.clone(), "graph")?),
            graph: None,
        },
    });
    Ok(())
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| anyhow::anyhow!("this --model needs --{flag}"))
}

fn run(cli: Cli) -> Result<()> {
    let mut spec = base_spec(&cli.global)?;
    match cli.command {
        Command::Bound { problem, schedule } => {
            apply_problem(&mut spec, &problem)?;
            spec.validate()?;
            let schedule: Option<Schedule> =
                schedule.map(|p| read_json(&p, "schedule")).transpose()?;
            let reports = commands::cmd_bound(&spec, schedule.as_ref())?;
            match spec.output.format {
                Some(Format::Csv) => {
                    write_table(&spec, &commands::bounds_table(&reports), Format::Csv)?
                }
                _ => write_json(&spec, &reports)?,
            }
        }
        Command::Simulate {
            problem,
            schedule,
            angles,
        } => {
            apply_problem(&mut spec, &problem)?;
            spec.validate()?;
            let schedule: Option<Schedule> =
                schedule.map(|p| read_json(&p, "schedule")).transpose()?;
            let angles: Option<QaoaAngles> = angles.map(|p| read_json(&p, "angles")).transpose()?;
            let sim = commands::cmd_simulate(&spec, schedule.as_ref(), angles.as_ref())?;
            write_json(&spec, &sim)?;
        }
        Command::Optimize {
            problem,
            time,
            unconstrained_f,
            layers,
        } => {
            apply_problem(&mut spec, &problem)?;
            spec.validate()?;
            let target = match (time, layers) {
                (Some(total), None) => OptimizeTarget::Schedule {
                    total,
                    unconstrained_f,
                },
                (None, Some(layers)) => OptimizeTarget::Qaoa { layers },
                _ => bail!("optimize needs exactly one of --time or --layers"),
            };
            let result = commands::cmd_optimize(&spec, &target)?;
            write_json(&spec, &result)?;
            if !result.converged {
                return Err(NotConverged(format!(
                    "best restart missed the gradient tolerance ({} BFGS iterations over all restarts)",
                    result.iterations_used
                ))
                .into());
            }
        }
        Command::SweepGrover {
            d,
            g_max,
            f_max,
            times,
            t_min,
            t_max,
            t_points,
        } => {
            if d.is_some() {
                spec.sweep.d = d;
            }
            if g_max.is_some() {
                spec.sweep.g_max = g_max;
            }
            if let Some(f) = f_max {
                spec.f_max = f;
            }
            if let Some(ts) = times {
                spec.sweep.t = Some(TimeAxis::List(ts));
            }
            if let (Some(min), Some(max), Some(points)) = (t_min, t_max, t_points) {
                spec.sweep.t = Some(TimeAxis::Geometric { min, max, points });
            }
            let table = commands::cmd_sweep_grover(&spec)?;
            write_table(&spec, &table, Format::Csv)?;
            let col = table.column("flag").expect("flag column");
            let flagged = table
                .rows
                .iter()
                .filter(|r| r[col] == DOMINANCE_FLAG)
                .count();
            if flagged > 0 {
                return Err(InvariantFailure(format!(
                    "{flagged} rows reach the target faster than the Grover bound allows"
                ))
                .into());
            }
        }
        Command::SweepPspin {
            p,
            spins,
            lambda,
            max_depth,
            search_min,
            search_max,
        } => {
            if p.is_some() {
                spec.sweep.p = p;
            }
            if spins.is_some() {
                spec.sweep.n = spins;
            }
            if lambda.is_some() {
                spec.sweep.lambda = lambda;
            }
            if let Some(m) = max_depth {
                spec.optimizer.max_depth = m;
            }
            if let (Some(min), Some(max)) = (search_min, search_max) {
                spec.sweep.search = Some(SearchGrid::new(min, max));
            }
            let table = commands::cmd_sweep_pspin(&spec)?;
            write_table(&spec, &table, Format::Csv)?;
        }
        Command::QaoaDepth { problem, angles } => {
            apply_problem(&mut spec, &problem)?;
            spec.validate()?;
            let angles: Option<QaoaAngles> = angles.map(|p| read_json(&p, "angles")).transpose()?;
            let cert = commands::cmd_qaoa_depth(&spec, angles.as_ref())?;
            write_json(&spec, &cert)?;
            if cert.satisfied == Some(false) {
                return Err(InvariantFailure(format!(
                    "circuit of depth {} reaches the target below the certificate {}",
                    cert.depth.unwrap_or(0),
                    cert.certificate
                ))
                .into());
            }
        }
        Command::Verify { suite, trials } => {
            let report = commands::cmd_verify(&suite, trials, spec.optimizer.seed)?;
            write_json(&spec, &report)?;
            if !report.passed {
                return Err(InvariantFailure(format!(
                    "{}: {} violations",
                    report.suite, report.violations
                ))
                .into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
