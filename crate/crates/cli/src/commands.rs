use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use qsl_core::bounds::{
    auto_select_for_problem, commutator_bound, equal_superposition_bound, generic_bounds,
    grover_bound, pspin_closed_form_bound, qaoa_layer_bound, spin_network_bound, BoundReport,
    Witness, WitnessFamily, WitnessSide,
};
use qsl_core::dynamics::{
    fidelity, propagate_schedule, qaoa_evolve, qaoa_runtime, QaoaAngles, Schedule,
};
use qsl_core::linalg::Axis;
use qsl_core::models::{grover_problem_dim, perturbed_pspin_problem, AnnealingProblem};
use qsl_core::optimize::{
    minimal_annealing_time, optimize_qaoa, optimize_schedule, Aggregation, OptimizationResult,
    SearchGrid, SearchMode,
};
use qsl_core::verify::{run_suite, SuiteReport};

use crate::experiment::{Built, ExperimentSpec, Model, TimeAxis};

pub const DOMINANCE_FLAG: &str = "DOMINANCE-VIOLATION";

/// Rows for CSV or JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self, comment: &str) -> String {
        let mut out = format!("# {comment}\n{}\n", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    Value::Object(
                        self.columns
                            .iter()
                            .cloned()
                            .zip(r.iter().cloned())
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) if s.contains([',', '"', '\n']) => {
            format!("\"{}\"", s.replace('"', "\"\""))
        }
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn build(spec: &ExperimentSpec) -> Result<Built> {
    spec.validate()?;
    spec.problem_spec()?.build(spec.f_max, spec.g_max)
}

fn witnesses(problem: &AnnealingProblem) -> (Option<Witness>, Option<Witness>) {
    if !problem.dim().is_power_of_two() {
        return (None, None);
    }
    let family = WitnessFamily::SingleSitePaulis;
    let pick = |side| {
        auto_select_for_problem(problem, side, &family)
            .ok()
            .map(|(w, _)| w)
    };
    (pick(WitnessSide::Final), pick(WitnessSide::Initial))
}

fn uniform_initial_state(problem: &AnnealingProblem) -> bool {
    let a = problem.psi0.amplitudes();
    let target = 1.0 / (a.len() as f64).sqrt();
    a.iter()
        .all(|z| (z.re - target).abs() < 1e-12 && z.im.abs() < 1e-12)
}

/// Every bound that applies to the problem (and to `schedule`, if given),
/// sorted by value, largest first.
pub fn cmd_bound(spec: &ExperimentSpec, schedule: Option<&Schedule>) -> Result<Vec<BoundReport>> {
    let Built { problem, model } = build(spec)?;
    let mut reports = generic_bounds(&problem, schedule)?;
    match &model {
        Model::Grover { d, marked } => {
            reports.push(grover_bound(*d, *marked, problem.f_max, problem.g_max)?);
            if *marked == 1 && uniform_initial_state(&problem) {
                reports.push(equal_superposition_bound(&problem.h_f, problem.g_max)?);
            }
        }
        Model::Pspin => {}
        Model::PerturbedPspin { n, p, lambda } => {
            if *lambda > 0.0 {
                reports.push(pspin_closed_form_bound(*n, *p, *lambda, problem.g_max)?);
            }
            let w = Witness::pauli(
                n + 1,
                n + 1,
                Axis::X,
                WitnessSide::Initial,
                &problem.h_i,
                &problem.psi0,
            )?;
            reports.push(commutator_bound(
                &problem.h_f,
                &w,
                &problem.psi_t,
                problem.g_max,
            )?);
        }
        Model::SpinGraph(g) => {
            let sn = spin_network_bound(g, &problem.psi_t, Axis::X, problem.g_max)?;
            reports.push(sn.estimate);
            reports.push(sn.exact);
        }
    }
    reports.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulation {
    pub fidelity: f64,
    pub epsilon: f64,
    /// Schedule duration or QAOA runtime `sum |beta| + |gamma|`.
    pub time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid {what} file {}", path.display()))
}

pub fn cmd_simulate(
    spec: &ExperimentSpec,
    schedule: Option<&Schedule>,
    angles: Option<&QaoaAngles>,
) -> Result<Simulation> {
    let Built { problem, .. } = build(spec)?;
    let (state, time, depth) = match (schedule, angles) {
        (Some(s), None) => (propagate_schedule(&problem, s)?, s.total_time(), None),
        (None, Some(a)) => (qaoa_evolve(&problem, a)?, qaoa_runtime(a), Some(a.depth())),
        _ => bail!("simulate needs exactly one of --schedule or --angles"),
    };
    let f = fidelity(&state, &problem.ground_projector)?;
    Ok(Simulation {
        fidelity: f,
        epsilon: 1.0 - f,
        time,
        depth,
    })
}

pub enum OptimizeTarget {
    Schedule { total: f64, unconstrained_f: bool },
    Qaoa { layers: usize },
}

pub fn cmd_optimize(spec: &ExperimentSpec, target: &OptimizeTarget) -> Result<OptimizationResult> {
    let Built { problem, .. } = build(spec)?;
    Ok(match target {
        OptimizeTarget::Schedule {
            total,
            unconstrained_f,
        } => optimize_schedule(&problem, *total, &spec.optimizer, *unconstrained_f)?,
        OptimizeTarget::Qaoa { layers } => optimize_qaoa(&problem, *layers, &spec.optimizer)?,
    })
}

/// Grover bound for a preparation that only reaches fidelity `1 - eps`:
/// the reached state is at least `D_B(psi_T, psi_0) - D_B(psi_T, reached)`
/// from `psi_0`, and the `g_max` term of the schedule-independent bound
/// holds for any reached state.
pub fn grover_bound_at_error(d: usize, g_max: f64, eps: f64) -> f64 {
    let q = 1.0 / d as f64;
    let db = (2.0 * (1.0 - q.sqrt())).sqrt();
    let miss = (2.0 * (1.0 - (1.0 - eps.clamp(0.0, 1.0)).sqrt())).sqrt();
    ((db - miss) / (g_max * (q - q * q).sqrt())).max(0.0)
}

/// Fidelity error against annealing time for Grover search with one marked
/// item and unconstrained `f`, over the `d`, `g_max` and `T` axes.
pub fn cmd_sweep_grover(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let ds = spec.sweep.d.clone().unwrap_or_else(|| vec![4, 8, 16, 32]);
    let gs = spec.sweep.g_max.clone().unwrap_or_else(|| vec![spec.g_max]);
    let ts = spec
        .sweep
        .t
        .clone()
        .unwrap_or(TimeAxis::Geometric {
            min: 0.5,
            max: 20.0,
            points: 20,
        })
        .values()?;
    if ds.is_empty() || gs.is_empty() {
        bail!("sweep axes d and g_max must be nonempty");
    }
    if let Some(g) = gs.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        bail!("g_max values must be positive and finite, got {g}");
    }
    let aggregation = spec.aggregation.unwrap_or(Aggregation::Average);
    let mut cells = Vec::new();
    for &d in &ds {
        for &g in &gs {
            for &t in &ts {
                cells.push((d, g, t));
            }
        }
    }
    let rows: Vec<Vec<Value>> = cells
        .par_iter()
        .map(|&(d, g, t)| -> Result<Vec<Value>> {
            let problem = grover_problem_dim(d, &[0], spec.f_max, g)?;
            let bound = grover_bound(d, 1, f64::INFINITY, g)?.value;
            let r = optimize_schedule(&problem, t, &spec.optimizer, true)?;
            let eps = r.aggregate(aggregation);
            let violation = t < grover_bound_at_error(d, g, r.best_objective) * (1.0 - 1e-9);
            let flag = if violation { DOMINANCE_FLAG } else { "" };
            Ok(vec![
                json!(d),
                json!(g),
                json!(t),
                json!(eps),
                json!(bound),
                json!(flag),
            ])
        })
        .collect::<Result<_>>()?;
    let eps_col = format!("epsilon_{}", aggregation.label());
    let mut table = Table::new(&["d", "g_max", "T", &eps_col, "bound_value", "flag"]);
    table.rows = rows;
    Ok(table)
}

/// Minimal QAOA runtime for the perturbed p-spin model against total spin count.
pub fn cmd_sweep_pspin(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let lambda = spec.sweep.lambda.unwrap_or(1.0);
    if lambda == 0.0 {
        bail!("lambda = 0 makes the closed-form bound inapplicable; the p-spin sweep needs lambda != 0");
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        bail!("lambda must be positive and finite, got {lambda}");
    }
    let ps = spec.sweep.p.clone().unwrap_or_else(|| vec![2, 3]);
    let totals = spec.sweep.n.clone().unwrap_or_else(|| (4..=8).collect());
    if ps.is_empty() || totals.is_empty() {
        bail!("sweep axes p and n must be nonempty");
    }
    if let Some(t) = totals.iter().find(|t| **t < 2) {
        bail!("total spin count must be at least 2, got {t}");
    }
    let aggregation = spec.aggregation.unwrap_or(Aggregation::Best);
    let g_max = spec.g_max;
    let mut cells = Vec::new();
    for &p in &ps {
        for &total in &totals {
            cells.push((p, total));
        }
    }
    // Build every problem first so size errors surface before any optimization.
    let problems: Vec<AnnealingProblem> = cells
        .iter()
        .map(|&(p, total)| perturbed_pspin_problem(total - 1, p, lambda, spec.f_max, g_max))
        .collect::<qsl_core::Result<_>>()?;
    let rows: Vec<Vec<Value>> = cells
        .par_iter()
        .zip(problems.par_iter())
        .map(|(&(p, total), problem)| -> Result<Vec<Value>> {
            let bound = pspin_closed_form_bound(total - 1, p, lambda, g_max)?.value;
            let grid = spec.sweep.search.unwrap_or(SearchGrid {
                t_min: 0.5 * bound,
                t_max: 6.0 * bound,
                scan_points: 10,
                relative_width: 0.05,
            });
            let m = minimal_annealing_time(
                problem,
                spec.threshold,
                SearchMode::Qaoa,
                &spec.optimizer,
                &grid,
                aggregation,
            )?;
            Ok(vec![
                json!(p),
                json!(total),
                json!(m.t_star),
                json!(bound),
                json!(m.depth),
            ])
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["p", "total_spins", "T_star", "bound_value", "depth"]);
    table.rows = rows;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthCertificate {
    pub bound: BoundReport,
    pub certificate: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satisfied: Option<bool>,
}

/// QAOA layer-count certificate, optionally checked against a circuit.
pub fn cmd_qaoa_depth(
    spec: &ExperimentSpec,
    angles: Option<&QaoaAngles>,
) -> Result<DepthCertificate> {
    let Built { problem, .. } = build(spec)?;
    let (v, w) = witnesses(&problem);
    let bound = qaoa_layer_bound(&problem, v.as_ref(), w.as_ref())?;
    let certificate = bound.certificate.unwrap_or(0);
    let depth = angles.map(|a| a.depth());
    let satisfied = angles.map(|a| {
        let reached =
            qaoa_evolve(&problem, a).and_then(|s| fidelity(&s, &problem.ground_projector));
        // Only a circuit that prepares the target is constrained.
        !matches!(reached, Ok(f) if f > 1.0 - 1e-9) || a.depth() as u64 >= certificate
    });
    Ok(DepthCertificate {
        bound,
        certificate,
        depth,
        satisfied,
    })
}

pub fn cmd_verify(suite: &str, trials: usize, seed: u64) -> Result<SuiteReport> {
    Ok(run_suite(suite, trials, seed)?)
}

/// Bound reports as table rows.
pub fn bounds_table(reports: &[BoundReport]) -> Table {
    let mut t = Table::new(&[
        "name",
        "value",
        "status",
        "certificate",
        "citation",
        "diagnostic",
    ]);
    for r in reports {
        t.rows.push(vec![
            serde_json::to_value(r.name).expect("name serializes"),
            json!(r.value),
            serde_json::to_value(r.status).expect("status serializes"),
            json!(r.certificate),
            json!(r.citation),
            json!(r.diagnostic),
        ]);
    }
    t
}
