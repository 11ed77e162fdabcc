//! Randomized invariant suites, shared by the test harness and the CLI.
//!
//! Every trial draws its instance from a generator seeded with
//! `restart_seed(seed, trial)`, so reports are reproducible and
//! independent of how trials are scheduled.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{
    commutator_bound, generic_bounds, pspin_closed_form_bound, spin_network_bound, BoundName,
    BoundReport, Witness, WitnessSide,
};
use crate::dynamics::{
    propagate_schedule, qaoa_evolve, DynamicalSubspace, QaoaAngles, QaoaLayer, Schedule, Segment,
};
use crate::error::{invalid, Result};
use crate::linalg::{
    commutator, hermitian_eig, matrix_exp_unitary, pauli_string, spectral_norm, Axis, CMatrix,
    CVector, Operator, StateVector, C64,
};
use crate::models::{
    grover_problem, perturbed_pspin_problem, pspin_problem, spin_network_hf, spin_network_problem,
    AnnealingProblem, Coupling, SpinGraph,
};
use crate::optimize::restart_seed;
use crate::tol;

pub const SUITES: [&str; 5] = [
    "bures-inequality",
    "bound-dominance",
    "closed-form",
    "unitarity",
    "commutator-estimate",
];

/// Midpoint-rule steps for the Bures inequality integral.
pub const QUADRATURE_STEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub seed: u64,
    pub passed: bool,
    pub violations: usize,
    /// Largest `lhs - allowed` over all checks; negative when every check has room.
    pub max_excess: f64,
    /// Full instance of the first violating trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
}

struct Trial {
    excess: f64,
    instance: Value,
}

pub fn run_suite(name: &str, trials: usize, seed: u64) -> Result<SuiteReport> {
    let trial: fn(&mut ChaCha8Rng) -> Result<Trial> = match name {
        "bures-inequality" => bures_trial,
        "bound-dominance" => dominance_trial,
        "closed-form" => return closed_form_suite(trials, seed),
        "unitarity" => unitarity_trial,
        "commutator-estimate" => commutator_estimate_trial,
        other => {
            return Err(invalid(format!(
                "unknown suite '{other}'; known suites: {}",
                SUITES.join(", ")
            )))
        }
    };
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    let results: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|k| trial(&mut ChaCha8Rng::seed_from_u64(restart_seed(seed, k))))
        .collect::<Result<_>>()?;
    Ok(summarize(name, trials, seed, results))
}

fn summarize(name: &str, trials: usize, seed: u64, results: Vec<Trial>) -> SuiteReport {
    let violations = results.iter().filter(|t| t.excess > 0.0).count();
    let max_excess = results
        .iter()
        .map(|t| t.excess)
        .fold(f64::NEG_INFINITY, f64::max);
    let counterexample = results
        .into_iter()
        .find(|t| t.excess > 0.0)
        .map(|t| t.instance);
    SuiteReport {
        suite: name.to_string(),
        trials,
        seed,
        passed: violations == 0,
        violations,
        max_excess,
        counterexample,
    }
}

// ---------------------------------------------------------------------------
// Random instances

/// Hermitian matrix with entries of order `scale / sqrt(d)`.
pub fn random_hermitian<R: Rng>(rng: &mut R, d: usize, scale: f64) -> CMatrix {
    let s = scale / (d as f64).sqrt();
    let m = CMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-s..s), rng.gen_range(-s..s))
    });
    (&m + m.adjoint()).unscale(2.0)
}

pub fn random_state<R: Rng>(rng: &mut R, d: usize) -> StateVector {
    loop {
        let v = CVector::from_fn(d, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        if v.norm() > 1e-3 {
            return StateVector::normalized(v).expect("nonzero vector");
        }
    }
}

/// Random graph on `n` vertices: each pair is an edge with probability
/// 1/2 (at least one edge), carrying 1 to 3 distinct axis pairs with
/// couplings uniform in `[-1, 1]`.
pub fn random_spin_graph<R: Rng>(rng: &mut R, n: usize) -> SpinGraph {
    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
        .filter(|_| rng.gen_bool(0.5))
        .collect();
    if pairs.is_empty() {
        let i = rng.gen_range(1..n);
        pairs.push((i, i + 1));
    }
    let axes: Vec<(Axis, Axis)> = Axis::ALL
        .iter()
        .flat_map(|&a| Axis::ALL.iter().map(move |&b| (a, b)))
        .collect();
    let mut edges = Vec::new();
    for (i, j) in pairs {
        let k = rng.gen_range(1..=3);
        for &(a, b) in axes.choose_multiple(rng, k) {
            let h = loop {
                let h: f64 = rng.gen_range(-1.0..1.0);
                if h.abs() > 1e-3 {
                    break h;
                }
            };
            edges.push(Coupling { i, j, a, b, h });
        }
    }
    SpinGraph::new(n, edges).expect("generated graph is valid")
}

fn random_ising_graph<R: Rng>(rng: &mut R, n: usize) -> SpinGraph {
    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
        .filter(|_| rng.gen_bool(0.6))
        .collect();
    if pairs.is_empty() {
        pairs.push((1, 2));
    }
    let edges = pairs
        .into_iter()
        .map(|(i, j)| Coupling {
            i,
            j,
            a: Axis::Z,
            b: Axis::Z,
            h: rng.gen_range(0.2..1.0) * [-1.0, 1.0][rng.gen_range(0..2)],
        })
        .collect();
    SpinGraph::new(n, edges).expect("generated graph is valid")
}

// ---------------------------------------------------------------------------
// Suites

/// `D_B(U(t) psi, U~(t) psi) <= int_0^t ||(H - H~) U~(s) psi|| ds` for
/// constant Hermitian `H`, `H~`.
fn bures_trial(rng: &mut ChaCha8Rng) -> Result<Trial> {
    let d = rng.gen_range(2..=6);
    let scale = rng.gen_range(0.2..3.0);
    let h = Operator::hermitian(random_hermitian(rng, d, scale))?;
    let ht = if rng.gen_bool(0.2) {
        // Nearby pairs probe the regime where the inequality is nearly tight.
        let eps = 10f64.powf(rng.gen_range(-4.0..-1.0));
        Operator::hermitian(h.matrix() + random_hermitian(rng, d, eps))?
    } else {
        Operator::hermitian(random_hermitian(rng, d, scale))?
    };
    let psi = random_state(rng, d);
    let t: f64 = 5.0 * (1.0 - rng.gen_range(0.0..1.0));
    let a = StateVector::normalized(matrix_exp_unitary(&h, t)? * psi.amplitudes())?;
    let b = StateVector::normalized(matrix_exp_unitary(&ht, t)? * psi.amplitudes())?;
    let lhs = crate::linalg::bures_distance(&a, &b)?;
    let diff = h.matrix() - ht.matrix();
    let eig = hermitian_eig(&ht)?;
    let dt = t / QUADRATURE_STEPS as f64;
    let rhs: f64 = (0..QUADRATURE_STEPS)
        .map(|k| (&diff * eig.evolve(psi.amplitudes(), (k as f64 + 0.5) * dt)).norm())
        .sum::<f64>()
        * dt;
    let allowance = 1e-6 * rhs + 1e-9;
    Ok(Trial {
        excess: lhs - rhs - allowance,
        instance: json!({
            "h": matrix_json(h.matrix()),
            "h_tilde": matrix_json(ht.matrix()),
            "psi": vector_json(psi.amplitudes()),
            "t": t,
            "bures_distance": lhs,
            "integral": rhs,
        }),
    })
}

/// A random problem on at most four spins, plus its graph for spin networks.
fn random_problem(rng: &mut ChaCha8Rng) -> Result<(AnnealingProblem, Option<SpinGraph>, Value)> {
    let f_max = rng.gen_range(0.5..2.0);
    let g_max = rng.gen_range(0.5..2.0);
    Ok(match rng.gen_range(0..4) {
        0 => {
            let n = rng.gen_range(2..=4);
            let d = 1usize << n;
            let m = rng.gen_range(1..=2);
            let mut marked: Vec<usize> = (0..d).collect();
            marked.shuffle(rng);
            marked.truncate(m);
            let desc = json!({"model": "grover", "n": n, "marked": marked, "f_max": f_max, "g_max": g_max});
            (grover_problem(n, &marked, f_max, g_max)?, None, desc)
        }
        1 => {
            let n = rng.gen_range(2..=3);
            let p = rng.gen_range(1..=3);
            let lambda = rng.gen_range(0.5..2.0);
            let desc = json!({"model": "perturbed_pspin", "n": n, "p": p, "lambda": lambda, "f_max": f_max, "g_max": g_max});
            (
                perturbed_pspin_problem(n, p, lambda, f_max, g_max)?,
                None,
                desc,
            )
        }
        2 => {
            let n = rng.gen_range(2..=4);
            let p = rng.gen_range(1..=3);
            let desc = json!({"model": "pspin", "n": n, "p": p, "f_max": f_max, "g_max": g_max});
            (pspin_problem(n, p, f_max, g_max)?, None, desc)
        }
        _ => {
            let n = rng.gen_range(3..=4);
            let g = random_ising_graph(rng, n);
            let desc = json!({"model": "spin_network", "graph": g, "f_max": f_max, "g_max": g_max});
            (spin_network_problem(&g, f_max, g_max)?, Some(g), desc)
        }
    })
}

/// Random schedule within the caps. With `energy_class`, every segment also
/// satisfies `|f + g| <= 1`.
fn random_schedule(
    rng: &mut ChaCha8Rng,
    f_max: f64,
    g_max: f64,
    energy_class: bool,
) -> Result<Schedule> {
    let k = rng.gen_range(1..=6);
    let segments = (0..k)
        .map(|_| {
            let dt = rng.gen_range(0.05..1.5);
            let mut f = rng.gen_range(-f_max..=f_max);
            let mut g = rng.gen_range(-g_max..=g_max);
            if energy_class && (f + g).abs() > 1.0 {
                let s = 1.0 / (f + g).abs();
                f *= s;
                g *= s;
            }
            Segment { dt, f, g }
        })
        .collect();
    Schedule::new(segments, f_max, g_max)
}

/// No applicable time bound exceeds the duration of a schedule that reaches
/// the (substituted) target exactly.
fn dominance_trial(rng: &mut ChaCha8Rng) -> Result<Trial> {
    let (problem, graph, desc) = random_problem(rng)?;
    let energy_class = rng.gen_bool(0.5);
    let schedule = random_schedule(rng, problem.f_max, problem.g_max, energy_class)?;
    let reached = propagate_schedule(&problem, &schedule)?;
    let q = problem.with_target(reached.clone())?;
    let mut reports: Vec<BoundReport> = generic_bounds(&q, Some(&schedule))?
        .into_iter()
        .filter(|r| r.name != BoundName::QaoaLayers)
        .filter(|r| energy_class || r.name != BoundName::EnergyTransfer)
        .collect();
    if let Some(g) = &graph {
        let sn = spin_network_bound(g, &reached, Axis::X, q.g_max)?;
        reports.push(sn.estimate);
        reports.push(sn.exact);
    }
    let t = schedule.total_time();
    let allowed = t + tol::DOMINANCE_SLACK * t.max(1.0);
    let worst = reports
        .iter()
        .filter(|r| r.is_applicable())
        .max_by(|a, b| a.value.total_cmp(&b.value));
    let excess = worst.map_or(-allowed, |r| r.value - allowed);
    Ok(Trial {
        excess,
        instance: json!({
            "problem": desc,
            "schedule": schedule,
            "total_time": t,
            "reached_state": vector_json(reached.amplitudes()),
            "bounds": reports,
        }),
    })
}

/// The generic witness bound with `W = sigma_x^(n+1)` reproduces the
/// perturbed p-spin closed form on the grid `n in 3..=6`, `p in 1..=3`,
/// `lambda in {0.5, 1, 2}`, once per trial with a random `g_max`.
fn closed_form_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    let mut grid = Vec::new();
    for n in 3..=6usize {
        for p in 1..=3u32 {
            for lambda in [0.5, 1.0, 2.0] {
                grid.push((n, p, lambda));
            }
        }
    }
    let results: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|k| -> Result<Trial> {
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(seed, k));
            let (n, p, lambda) = grid[k % grid.len()];
            let g_max = if k < grid.len() {
                1.0
            } else {
                rng.gen_range(0.25..4.0)
            };
            closed_form_check(n, p, lambda, g_max)
        })
        .collect::<Result<_>>()?;
    Ok(summarize("closed-form", trials, seed, results))
}

/// Relative gap between the generic commutator bound and the closed form.
pub fn closed_form_gap(
    n: usize,
    p: u32,
    lambda: f64,
    g_max: f64,
) -> Result<(BoundReport, BoundReport, f64)> {
    let problem = perturbed_pspin_problem(n, p, lambda, 1.0, g_max)?;
    let w = Witness::pauli(
        n + 1,
        n + 1,
        Axis::X,
        WitnessSide::Initial,
        &problem.h_i,
        &problem.psi0,
    )?;
    let generic = commutator_bound(&problem.h_f, &w, &problem.psi_t, g_max)?;
    let closed = pspin_closed_form_bound(n, p, lambda, g_max)?;
    let rel = (generic.value - closed.value).abs() / closed.value.abs().max(f64::MIN_POSITIVE);
    Ok((generic, closed, rel))
}

fn closed_form_check(n: usize, p: u32, lambda: f64, g_max: f64) -> Result<Trial> {
    let (generic, closed, rel) = closed_form_gap(n, p, lambda, g_max)?;
    Ok(Trial {
        excess: rel - 1e-10,
        instance: json!({"n": n, "p": p, "lambda": lambda, "g_max": g_max, "generic": generic, "closed_form": closed}),
    })
}

/// Eigendecomposition residuals, propagator unitarity (dense and reduced),
/// and QAOA / bang-bang equivalence.
fn unitarity_trial(rng: &mut ChaCha8Rng) -> Result<Trial> {
    let d = rng.gen_range(2..=32);
    let scale = 10f64.powf(rng.gen_range(-1.0..1.5));
    let a = Operator::hermitian(random_hermitian(rng, d, scale))?;
    let t = 5.0 * (1.0 - rng.gen_range(0.0..1.0));
    let eig = hermitian_eig(&a)?;
    let norm = spectral_norm(a.matrix())?;
    let residual = eig.reconstruction_residual(a.matrix());
    let u = Operator::general(matrix_exp_unitary(&a, t)?)?;
    let dense = u.unitarity_defect();

    let n = rng.gen_range(2..=3);
    let p = rng.gen_range(1..=3);
    let lambda = rng.gen_range(0.5..2.0);
    let problem = perturbed_pspin_problem(n, p, lambda, 1.0, 1.0)?;
    let sub = DynamicalSubspace::new(&problem)?;
    let pr = Operator::general(sub.segment_propagator(
        rng.gen_range(0.01..3.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
    ))?;
    let reduced = pr.unitarity_defect();

    let layers = rng.gen_range(1..=4);
    let tau = 2.0 * std::f64::consts::PI;
    let angles = QaoaAngles::new(
        (0..layers)
            .map(|_| QaoaLayer {
                beta: rng.gen_range(-tau..tau),
                gamma: rng.gen_range(-tau..tau),
            })
            .collect(),
    )?;
    let circuit = qaoa_evolve(&problem, &angles)?;
    let bang = propagate_schedule(&problem, &angles.to_bang_bang()?)?;
    let equivalence = (circuit.amplitudes() - bang.amplitudes()).norm();

    let excess = [
        residual - 1e-9 * norm.max(f64::MIN_POSITIVE),
        dense - tol::UNITARY,
        reduced - tol::UNITARY,
        equivalence - 1e-9,
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    Ok(Trial {
        excess,
        instance: json!({
            "dim": d,
            "scale": scale,
            "t": t,
            "matrix": matrix_json(a.matrix()),
            "eigen_residual": residual,
            "spectral_norm": norm,
            "dense_unitarity_defect": dense,
            "reduced_unitarity_defect": reduced,
            "qaoa_problem": {"n": n, "p": p, "lambda": lambda},
            "angles": angles,
            "bang_bang_gap": equivalence,
        }),
    })
}

/// `||[H_f, sigma_a^(i)]|| <= 6 h_max delta_i N` at every vertex and axis.
fn commutator_estimate_trial(rng: &mut ChaCha8Rng) -> Result<Trial> {
    let n = rng.gen_range(2..=6);
    let g = random_spin_graph(rng, n);
    let excess = commutator_estimate_excess(&g)?;
    Ok(Trial {
        excess,
        instance: json!({"graph": g}),
    })
}

/// Largest `||[H_f, sigma_a^(i)]|| - 6 h_max delta_i N` over vertices and axes.
pub fn commutator_estimate_excess(g: &SpinGraph) -> Result<f64> {
    let n = g.n_vertices();
    let h_f = spin_network_hf(g, g.normalization())?;
    let norm = g.normalization_value(g.normalization())?.abs();
    let mut worst = f64::NEG_INFINITY;
    for i in 1..=n {
        let premise = 6.0 * g.h_max() * g.degree(i) as f64 * norm;
        for axis in Axis::ALL {
            let w = pauli_string(n, &[(i, axis)])?;
            let c = spectral_norm(&commutator(h_f.matrix(), w.matrix())?)?;
            worst = worst.max(c - premise * (1.0 + 1e-10) - tol::ZERO);
        }
    }
    Ok(worst)
}

fn matrix_json(m: &CMatrix) -> Value {
    json!((0..m.nrows())
        .map(|r| (0..m.ncols())
            .map(|c| [m[(r, c)].re, m[(r, c)].im])
            .collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn vector_json(v: &CVector) -> Value {
    json!(v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(run_suite("nonexistent", 10, 0).is_err());
        assert!(run_suite("unitarity", 0, 0).is_err());
    }

    #[test]
    fn suites_pass_on_small_runs() {
        for name in SUITES {
            let r = run_suite(name, 12, 3).unwrap();
            assert!(r.passed, "{name}: {r:?}");
            assert_eq!(r.trials, 12);
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_suite("bound-dominance", 8, 11).unwrap();
        let b = run_suite("bound-dominance", 8, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn violation_produces_counterexample() {
        // Five coupling terms on one edge exceed the factor-6 estimate.
        let h = 1.0;
        let edges = [
            (Axis::Y, Axis::X, h),
            (Axis::Y, Axis::Y, h),
            (Axis::Y, Axis::Z, h),
            (Axis::Z, Axis::X, h),
            (Axis::Z, Axis::Y, -h),
        ]
        .into_iter()
        .map(|(a, b, h)| Coupling {
            i: 1,
            j: 2,
            a,
            b,
            h,
        })
        .collect();
        let g = SpinGraph::new(2, edges).unwrap();
        assert!(commutator_estimate_excess(&g).unwrap() > 0.0);
        let results = vec![
            Trial {
                excess: -1.0,
                instance: json!(1),
            },
            Trial {
                excess: 0.5,
                instance: json!({"graph": g}),
            },
        ];
        let r = summarize("commutator-estimate", 2, 0, results);
        assert!(!r.passed && r.violations == 1 && r.counterexample.is_some());
    }

    #[test]
    fn random_graphs_have_edges_and_distinct_axis_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let g = random_spin_graph(&mut rng, 4);
            assert!(g.n_edges() >= 1);
            let mut seen = std::collections::BTreeSet::new();
            for e in g.edges() {
                assert!(seen.insert((e.i, e.j, e.a.label(), e.b.label())));
            }
        }
    }
}
