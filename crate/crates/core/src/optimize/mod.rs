//! Multi-start BFGS optimization of preparation fidelity and the search
//! for minimal annealing times.
//!
//! All objectives are evaluated on the [`DynamicalSubspace`] of the problem.
//! The best point of every optimization is re-run through the full dense
//! dynamics before it is reported.

mod bfgs;
mod objective;

pub use bfgs::{central_difference, FnObjective, Objective};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    fidelity, propagate_schedule, qaoa_evolve, qaoa_runtime, DynamicalSubspace, QaoaAngles,
    Schedule,
};
use crate::error::{invalid, Error, Result};
use crate::models::AnnealingProblem;
use bfgs::{BfgsOutcome, BfgsSettings};
use objective::{BudgetQaoaObjective, QaoaObjective, ScheduleObjective};

/// Restarts run in fixed-size batches so that early exit stays deterministic.
const RESTART_BATCH: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub finite_difference_step: f64,
    pub restarts: usize,
    pub seed: u64,
    pub n_segments: usize,
    pub init_amplitude_scale: f64,
    /// Soft cap on `|f|`, as a multiple of `f_max`, when `f` is unconstrained.
    pub unconstrained_f_factor: f64,
    /// Deepest circuit tried per budget by the QAOA minimal-time search.
    pub max_depth: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-8,
            finite_difference_step: 1e-6,
            restarts: 100,
            seed: 0,
            n_segments: 100,
            init_amplitude_scale: 1.0,
            unconstrained_f_factor: 20.0,
            max_depth: 10,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("gradient_tolerance", self.gradient_tolerance)?;
        positive("finite_difference_step", self.finite_difference_step)?;
        positive("init_amplitude_scale", self.init_amplitude_scale)?;
        positive("unconstrained_f_factor", self.unconstrained_f_factor)?;
        for (name, v) in [
            ("max_iterations", self.max_iterations),
            ("restarts", self.restarts),
            ("n_segments", self.n_segments),
            ("max_depth", self.max_depth),
        ] {
            if v == 0 {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    fn settings(&self, target: Option<f64>) -> BfgsSettings {
        BfgsSettings {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            step: self.finite_difference_step,
            target,
        }
    }
}

/// Minimizes `obj` from `x0` with the configured BFGS settings, returning
/// `(x_star, f_star)`.
pub fn bfgs_minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    if x0.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            actual: x0.len(),
        });
    }
    let out = bfgs::minimize(obj, x0, &cfg.settings(None))
        .map_err(|_| Error::NonFiniteObjective { restart: 0 })?;
    Ok((out.x, out.value))
}

/// How restart results are reduced to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Mean fidelity error over restarts.
    #[serde(alias = "avg")]
    Average,
    /// Smallest fidelity error over restarts.
    Best,
}

impl Aggregation {
    pub fn label(self) -> &'static str {
        match self {
            Aggregation::Average => "avg",
            Aggregation::Best => "best",
        }
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "avg" | "average" => Ok(Aggregation::Average),
            "best" => Ok(Aggregation::Best),
            other => Err(invalid(format!("unknown aggregation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parameters {
    Schedule { schedule: Schedule },
    Qaoa { angles: QaoaAngles },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedRestart {
    pub restart: usize,
    pub diagnostic: String,
}

/// Outcome of a multi-start optimization. Objective values are fidelity
/// errors `1 - F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_objective: f64,
    pub mean_objective: f64,
    /// Fidelity of `best_parameters` recomputed with the full dynamics.
    pub best_fidelity: f64,
    pub best_parameters: Parameters,
    /// Final objective of every completed restart, in restart order.
    pub per_restart_values: Vec<f64>,
    pub restart_indices: Vec<usize>,
    pub aborted: Vec<AbortedRestart>,
    /// BFGS iterations summed over completed restarts.
    pub iterations_used: usize,
    /// Whether the best restart met its stopping criterion.
    pub converged: bool,
    pub seed: u64,
    pub config: OptimizerConfig,
    pub flags: Vec<String>,
}

impl OptimizationResult {
    pub fn aggregate(&self, aggregation: Aggregation) -> f64 {
        match aggregation {
            Aggregation::Average => self.mean_objective,
            Aggregation::Best => self.best_objective,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-restart seed, independent of execution order.
pub fn restart_seed(seed: u64, restart: usize) -> u64 {
    splitmix64(seed ^ splitmix64(restart as u64 ^ 0x5851_f42d_4c95_7f2d))
}

struct Restarts {
    done: Vec<(usize, BfgsOutcome)>,
    aborted: Vec<AbortedRestart>,
}

/// Runs restarts `0..cfg.restarts`. Restart 0 starts from `warm` when given.
/// With `stop_below`, no further batch is started once a restart has
/// reached that objective.
fn run_restarts<O, F>(
    obj: &O,
    cfg: &OptimizerConfig,
    target: Option<f64>,
    stop_below: Option<f64>,
    warm: Option<Vec<f64>>,
    init: F,
) -> Result<Restarts>
where
    O: Objective,
    F: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    let settings = cfg.settings(target);
    let mut done = Vec::new();
    let mut aborted = Vec::new();
    let mut start = 0;
    while start < cfg.restarts {
        let end = (start + RESTART_BATCH).min(cfg.restarts);
        let batch: Vec<_> = (start..end)
            .into_par_iter()
            .map(|r| {
                let x0 = match (&warm, r) {
                    (Some(w), 0) => w.clone(),
                    _ => init(&mut ChaCha8Rng::seed_from_u64(restart_seed(cfg.seed, r))),
                };
                (r, bfgs::minimize(obj, &x0, &settings))
            })
            .collect();
        for (r, out) in batch {
            match out {
                Ok(o) if o.value.is_finite() => done.push((r, o)),
                _ => aborted.push(AbortedRestart {
                    restart: r,
                    diagnostic: "objective is not finite at the starting point".into(),
                }),
            }
        }
        start = end;
        if let Some(stop) = stop_below {
            if done.iter().any(|(_, o)| o.value < stop) {
                break;
            }
        }
    }
    if done.is_empty() {
        return Err(Error::NonFiniteObjective {
            restart: aborted.first().map_or(0, |a| a.restart),
        });
    }
    Ok(Restarts { done, aborted })
}

/// Picks the best restart (earliest on ties) and assembles the result.
fn assemble(
    runs: Restarts,
    cfg: &OptimizerConfig,
    finish: impl FnOnce(&[f64]) -> Result<(Parameters, f64, Vec<String>)>,
) -> Result<OptimizationResult> {
    let values: Vec<f64> = runs.done.iter().map(|(_, o)| o.value).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (k, v)| if *v < values[b] { k } else { b });
    let (parameters, best_fidelity, flags) = finish(&runs.done[best].1.x)?;
    Ok(OptimizationResult {
        best_objective: values[best],
        mean_objective: values.iter().sum::<f64>() / values.len() as f64,
        best_fidelity,
        best_parameters: parameters,
        restart_indices: runs.done.iter().map(|(r, _)| *r).collect(),
        iterations_used: runs.done.iter().map(|(_, o)| o.iterations).sum(),
        converged: runs.done[best].1.converged,
        per_restart_values: values,
        aborted: runs.aborted,
        seed: cfg.seed,
        config: cfg.clone(),
        flags,
    })
}

fn finite_cap(name: &str, cap: f64) -> Result<f64> {
    if cap.is_finite() {
        Ok(cap)
    } else {
        Err(invalid(format!(
            "{name} must be finite for schedule optimization"
        )))
    }
}

/// Effective `(f_cap, g_cap)` used by the schedule parameterization.
pub fn schedule_caps(
    problem: &AnnealingProblem,
    cfg: &OptimizerConfig,
    unconstrained_f: bool,
) -> Result<(f64, f64)> {
    let f_cap = finite_cap("f_max", problem.f_max)?;
    let g_cap = finite_cap("g_max", problem.g_max)?;
    let f_cap = if unconstrained_f {
        cfg.unconstrained_f_factor * f_cap
    } else {
        f_cap
    };
    Ok((f_cap, g_cap))
}

fn schedule_search(
    problem: &AnnealingProblem,
    sub: &DynamicalSubspace,
    total: f64,
    cfg: &OptimizerConfig,
    unconstrained_f: bool,
    target: Option<f64>,
    stop_below: Option<f64>,
    warm: Option<&Schedule>,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    if !(total > 0.0 && total.is_finite()) {
        return Err(invalid(format!("total time must be positive, got {total}")));
    }
    let (f_cap, g_cap) = schedule_caps(problem, cfg, unconstrained_f)?;
    let k = cfg.n_segments;
    let obj = ScheduleObjective::new(sub, total, k, f_cap, g_cap);
    let warm = warm.map(|s| obj.parameters(&rescale(s, total, k)));
    let scale = cfg.init_amplitude_scale;
    let init = |rng: &mut ChaCha8Rng| {
        let draw = |rng: &mut ChaCha8Rng, cap: f64| {
            let a: f64 = rng.gen_range(-scale..=scale);
            (a / cap).clamp(-0.999, 0.999).atanh()
        };
        let mut x: Vec<f64> = (0..k).map(|_| draw(rng, f_cap)).collect();
        x.extend((0..k).map(|_| draw(rng, g_cap)));
        x
    };
    let runs = run_restarts(&obj, cfg, target, stop_below, warm, init)?;
    assemble(runs, cfg, |x| {
        let amps = obj.amplitudes(x);
        let schedule = Schedule::uniform(total, &amps, f_cap, g_cap)?;
        let state = propagate_schedule(problem, &schedule)?;
        let f = fidelity(&state, &problem.ground_projector)?;
        let mut flags = Vec::new();
        if unconstrained_f && amps.iter().any(|(f, _)| f.abs() > 0.9 * f_cap) {
            flags.push(format!(
                "f-cap-binding: some |f_k| exceeds 0.9 of the soft cap {f_cap}"
            ));
        }
        Ok((Parameters::Schedule { schedule }, f, flags))
    })
}

/// Time-rescales `s` to total time `total` on `k` equal segments: the
/// amplitude profile is resampled and scaled by `T_old / total`, so the
/// integrated controls are preserved.
fn rescale(s: &Schedule, total: f64, k: usize) -> Vec<(f64, f64)> {
    let old = s.total_time();
    let ratio = old / total;
    let segs = s.segments();
    let mut edges = Vec::with_capacity(segs.len());
    let mut acc = 0.0;
    for seg in segs {
        acc += seg.dt;
        edges.push(acc);
    }
    (0..k)
        .map(|j| {
            let t = (j as f64 + 0.5) / k as f64 * old;
            let idx = edges.partition_point(|&e| e <= t).min(segs.len() - 1);
            (segs[idx].f * ratio, segs[idx].g * ratio)
        })
        .collect()
}

/// Minimizes `1 - F` over `cfg.n_segments` piecewise-constant amplitude pairs
/// of equal duration `T / n_segments`, best of `cfg.restarts` random starts.
///
/// Amplitudes are kept within the caps by `a = cap tanh(u)`. With
/// `unconstrained_f` the `f` cap is `unconstrained_f_factor * f_max`, and the
/// result is flagged when that soft cap comes close to binding.
pub fn optimize_schedule(
    problem: &AnnealingProblem,
    total: f64,
    cfg: &OptimizerConfig,
    unconstrained_f: bool,
) -> Result<OptimizationResult> {
    let sub = DynamicalSubspace::new(problem)?;
    schedule_search(problem, &sub, total, cfg, unconstrained_f, None, None, None)
}

fn finish_qaoa(
    problem: &AnnealingProblem,
    angles: Vec<f64>,
) -> Result<(Parameters, f64, Vec<String>)> {
    let angles = QaoaAngles::from_flat(&angles)?;
    let state = qaoa_evolve(problem, &angles)?;
    let f = fidelity(&state, &problem.ground_projector)?;
    Ok((Parameters::Qaoa { angles }, f, Vec::new()))
}

/// Minimizes `1 - F` over the `2L` free angles of a depth-`L` circuit,
/// starting from angles uniform in `[-pi, pi]`.
pub fn optimize_qaoa(
    problem: &AnnealingProblem,
    layers: usize,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    if layers == 0 {
        return Err(invalid("QAOA needs at least one layer"));
    }
    let sub = DynamicalSubspace::new(problem)?;
    let obj = QaoaObjective::new(&sub, layers);
    let init = |rng: &mut ChaCha8Rng| (0..2 * layers).map(|_| rng.gen_range(-PI..=PI)).collect();
    let runs = run_restarts(&obj, cfg, None, None, None, init)?;
    assemble(runs, cfg, |x| finish_qaoa(problem, x.to_vec()))
}

fn budget_search(
    problem: &AnnealingProblem,
    sub: &DynamicalSubspace,
    layers: usize,
    budget: f64,
    cfg: &OptimizerConfig,
    target: Option<f64>,
    stop_below: Option<f64>,
    warm: Option<&QaoaAngles>,
) -> Result<OptimizationResult> {
    let obj = BudgetQaoaObjective::new(sub, layers, budget);
    let warm = warm
        .filter(|a| a.depth() == layers)
        .map(|a| obj.parameters(&a.to_flat()));
    let init = |rng: &mut ChaCha8Rng| {
        let mut x: Vec<f64> = (0..2 * layers).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        x.extend((0..2 * layers).map(|_| rng.gen_range(-PI..=PI)));
        x
    };
    let runs = run_restarts(&obj, cfg, target, stop_below, warm, init)?;
    assemble(runs, cfg, |x| finish_qaoa(problem, obj.angles(x)))
}

/// Minimizes `1 - F` over depth-`L` circuits with runtime `sum |beta| + |gamma|`
/// at most `budget` and every angle inside `(-2 pi, 2 pi)`.
pub fn optimize_qaoa_budget(
    problem: &AnnealingProblem,
    layers: usize,
    budget: f64,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    if layers == 0 {
        return Err(invalid("QAOA needs at least one layer"));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(invalid(format!(
            "runtime budget must be positive, got {budget}"
        )));
    }
    let sub = DynamicalSubspace::new(problem)?;
    budget_search(problem, &sub, layers, budget, cfg, None, None, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SearchMode {
    /// Piecewise-constant annealing schedules on `T`.
    Schedule { unconstrained_f: bool },
    /// QAOA circuits whose runtime fits the budget `T`, depth `1..=max_depth`.
    Qaoa,
}

/// Geometric scan followed by bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub scan_points: usize,
    /// Bisection stops once `hi / lo <= 1 + relative_width`.
    pub relative_width: f64,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            t_min: 0.1,
            t_max: 100.0,
            scan_points: 12,
            relative_width: 0.05,
        }
    }
}

impl SearchGrid {
    pub fn new(t_min: f64, t_max: f64) -> Self {
        Self {
            t_min,
            t_max,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max >= self.t_min && self.t_max.is_finite()) {
            return Err(invalid(format!(
                "invalid scan range [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.scan_points == 0 || !(self.relative_width > 0.0) {
            return Err(invalid(
                "scan needs at least one point and a positive relative width",
            ));
        }
        Ok(())
    }

    fn points(&self) -> Vec<f64> {
        let n = self.scan_points;
        if n == 1 {
            return vec![self.t_max];
        }
        let ratio = (self.t_max / self.t_min).ln();
        (0..n)
            .map(|k| self.t_min * (ratio * k as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub time: f64,
    pub success: bool,
    /// Aggregated fidelity error at this time.
    pub objective: f64,
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalTime {
    /// Smallest succeeding time; in QAOA mode the runtime of the succeeding circuit.
    pub t_star: f64,
    /// Smallest succeeding scan or bisection time.
    pub budget: f64,
    /// Largest failing time below `budget`, if any was tried.
    pub last_failure: Option<f64>,
    /// Circuit depth at `t_star` (QAOA mode).
    pub depth: Option<usize>,
    pub aggregation: Aggregation,
    pub threshold: f64,
    /// Every time tried, in the order tried.
    pub frontier: Vec<FrontierPoint>,
    pub result: OptimizationResult,
}

struct Probe {
    success: bool,
    objective: f64,
    depth: Option<usize>,
    result: OptimizationResult,
}

/// Smallest time at which preparation succeeds: the aggregated fidelity
/// error over restarts drops below `1 - threshold`.
///
/// Times are scanned geometrically upward from `grid.t_min` until the first
/// success, then bisected geometrically between the last failure and the
/// first success down to `grid.relative_width`. Each time is warm-started
/// from the nearest success found so far, time-rescaled.
pub fn minimal_annealing_time(
    problem: &AnnealingProblem,
    threshold: f64,
    mode: SearchMode,
    cfg: &OptimizerConfig,
    grid: &SearchGrid,
    aggregation: Aggregation,
) -> Result<MinimalTime> {
    cfg.validate()?;
    grid.validate()?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let sub = DynamicalSubspace::new(problem)?;
    let goal = 1.0 - threshold;
    // Only best-of aggregation can stop a restart or the restart loop early;
    // an average needs every restart fully converged.
    let (target, stop_below) = match aggregation {
        Aggregation::Best => (Some(goal), Some(goal)),
        Aggregation::Average => (None, None),
    };

    let probe = |t: f64, warm: Option<&Parameters>| -> Result<Probe> {
        match mode {
            SearchMode::Schedule { unconstrained_f } => {
                let warm = match warm {
                    Some(Parameters::Schedule { schedule }) => Some(schedule),
                    _ => None,
                };
                let result = schedule_search(
                    problem,
                    &sub,
                    t,
                    cfg,
                    unconstrained_f,
                    target,
                    stop_below,
                    warm,
                )?;
                let objective = result.aggregate(aggregation);
                Ok(Probe {
                    success: objective < goal,
                    objective,
                    depth: None,
                    result,
                })
            }
            SearchMode::Qaoa => {
                let warm = match warm {
                    Some(Parameters::Qaoa { angles }) => Some(angles),
                    _ => None,
                };
                let mut best: Option<Probe> = None;
                for layers in 1..=cfg.max_depth {
                    let result =
                        budget_search(problem, &sub, layers, t, cfg, target, stop_below, warm)?;
                    let objective = result.aggregate(aggregation);
                    let p = Probe {
                        success: objective < goal,
                        objective,
                        depth: Some(layers),
                        result,
                    };
                    let done = p.success;
                    if best.as_ref().is_none_or(|b| p.objective < b.objective) || done {
                        best = Some(p);
                    }
                    if done {
                        break;
                    }
                }
                Ok(best.expect("max_depth >= 1"))
            }
        }
    };

    let mut frontier = Vec::new();
    let mut best_fidelity: f64 = 0.0;
    let record = |t: f64, p: &Probe, frontier: &mut Vec<FrontierPoint>| {
        frontier.push(FrontierPoint {
            time: t,
            success: p.success,
            objective: p.objective,
            depth: p.depth,
        });
    };

    let mut lo: Option<f64> = None;
    let mut hit: Option<(f64, Probe)> = None;
    for t in grid.points() {
        let p = probe(t, None)?;
        record(t, &p, &mut frontier);
        best_fidelity = best_fidelity.max(p.result.best_fidelity);
        if p.success {
            hit = Some((t, p));
            break;
        }
        lo = Some(t);
    }
    let Some((mut hi, mut hi_probe)) = hit else {
        return Err(Error::SearchExhausted {
            lo: grid.t_min,
            hi: grid.t_max,
            best_fidelity,
        });
    };
    while let Some(l) = lo {
        if hi / l <= 1.0 + grid.relative_width {
            break;
        }
        let mid = (l * hi).sqrt();
        let p = probe(mid, Some(&hi_probe.result.best_parameters))?;
        record(mid, &p, &mut frontier);
        if p.success {
            hi = mid;
            hi_probe = p;
        } else {
            lo = Some(mid);
        }
    }
    let t_star = match &hi_probe.result.best_parameters {
        Parameters::Qaoa { angles } => qaoa_runtime(angles),
        Parameters::Schedule { .. } => hi,
    };
    Ok(MinimalTime {
        t_star,
        budget: hi,
        last_failure: lo,
        depth: hi_probe.depth,
        aggregation,
        threshold,
        frontier,
        result: hi_probe.result,
    })
}
