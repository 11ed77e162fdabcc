//! Exact propagation of piecewise-constant annealing schedules and QAOA
//! circuits, and the fidelity functionals evaluated on their output.

mod subspace;

pub use subspace::DynamicalSubspace;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eig, EigenDecomposition, Operator, StateVector};
use crate::models::AnnealingProblem;
use crate::tol;

/// One constant piece of `H(t) = f H_i + g H_f`, lasting `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub dt: f64,
    pub f: f64,
    pub g: f64,
}

/// Piecewise-constant control schedule with amplitude caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct Schedule {
    segments: Vec<Segment>,
    f_cap: f64,
    g_cap: f64,
}

#[derive(Deserialize)]
struct RawSchedule {
    segments: Vec<Segment>,
    f_cap: f64,
    g_cap: f64,
}

impl TryFrom<RawSchedule> for Schedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        Schedule::new(raw.segments, raw.f_cap, raw.g_cap)
    }
}

impl Schedule {
    pub fn new(segments: Vec<Segment>, f_cap: f64, g_cap: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid("schedule has no segments"));
        }
        if !(f_cap >= 0.0) || !(g_cap >= 0.0) {
            return Err(invalid("amplitude caps must be nonnegative"));
        }
        for (k, s) in segments.iter().enumerate() {
            if !(s.dt > 0.0 && s.dt.is_finite()) {
                return Err(invalid(format!(
                    "segment {k}: duration must be positive, got {}",
                    s.dt
                )));
            }
            if !s.f.is_finite() || !s.g.is_finite() {
                return Err(invalid(format!("segment {k}: amplitudes must be finite")));
            }
            if s.f.abs() > f_cap + tol::CAP || s.g.abs() > g_cap + tol::CAP {
                return Err(invalid(format!(
                    "segment {k}: amplitudes (f={}, g={}) exceed caps (f_cap={f_cap}, g_cap={g_cap})",
                    s.f, s.g
                )));
            }
        }
        Ok(Self {
            segments,
            f_cap,
            g_cap,
        })
    }

    /// Equal-duration segments covering `[0, total]`.
    pub fn uniform(total: f64, amplitudes: &[(f64, f64)], f_cap: f64, g_cap: f64) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(invalid("schedule has no segments"));
        }
        let dt = total / amplitudes.len() as f64;
        let segments = amplitudes
            .iter()
            .map(|&(f, g)| Segment { dt, f, g })
            .collect();
        Self::new(segments, f_cap, g_cap)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn f_cap(&self) -> f64 {
        self.f_cap
    }

    pub fn g_cap(&self) -> f64 {
        self.g_cap
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.dt).sum()
    }

    /// Largest `|f|` actually used.
    pub fn f_peak(&self) -> f64 {
        self.segments.iter().fold(0.0, |acc, s| acc.max(s.f.abs()))
    }

    /// Largest `|g|` actually used.
    pub fn g_peak(&self) -> f64 {
        self.segments.iter().fold(0.0, |acc, s| acc.max(s.g.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaoaLayer {
    pub beta: f64,
    pub gamma: f64,
}

/// QAOA angles; layer `j` applies `exp(-i gamma_j H_f)` then `exp(-i beta_j H_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAngles")]
pub struct QaoaAngles {
    layers: Vec<QaoaLayer>,
}

#[derive(Deserialize)]
struct RawAngles {
    layers: Vec<QaoaLayer>,
}

impl TryFrom<RawAngles> for QaoaAngles {
    type Error = Error;

    fn try_from(raw: RawAngles) -> Result<Self> {
        QaoaAngles::new(raw.layers)
    }
}

impl QaoaAngles {
    pub fn new(layers: Vec<QaoaLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("QAOA needs at least one layer"));
        }
        if layers
            .iter()
            .any(|l| !l.beta.is_finite() || !l.gamma.is_finite())
        {
            return Err(invalid("QAOA angles must be finite"));
        }
        Ok(Self { layers })
    }

    /// Builds angles from the flat layout `[beta_1, gamma_1, beta_2, gamma_2, ...]`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(invalid("flat angle vector must have even length"));
        }
        Self::new(
            flat.chunks(2)
                .map(|c| QaoaLayer {
                    beta: c[0],
                    gamma: c[1],
                })
                .collect(),
        )
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| [l.beta, l.gamma]).collect()
    }

    pub fn layers(&self) -> &[QaoaLayer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Checks `|beta_j|, |gamma_j| <= 2 pi`.
    pub fn is_periodic_convention(&self) -> bool {
        let cap = 2.0 * std::f64::consts::PI + tol::CAP;
        self.layers
            .iter()
            .all(|l| l.beta.abs() <= cap && l.gamma.abs() <= cap)
    }

    /// The equivalent bang-bang schedule: `(|gamma|, f = 0, g = sign gamma)`
    /// followed by `(|beta|, f = sign beta, g = 0)` per layer. Zero angles
    /// are skipped.
    pub fn to_bang_bang(&self) -> Result<Schedule> {
        let mut segments = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            if l.gamma != 0.0 {
                segments.push(Segment {
                    dt: l.gamma.abs(),
                    f: 0.0,
                    g: l.gamma.signum(),
                });
            }
            if l.beta != 0.0 {
                segments.push(Segment {
                    dt: l.beta.abs(),
                    f: l.beta.signum(),
                    g: 0.0,
                });
            }
        }
        Schedule::new(segments, 1.0, 1.0)
    }
}

/// `sum_j |beta_j| + |gamma_j|`.
pub fn qaoa_runtime(angles: &QaoaAngles) -> f64 {
    angles
        .layers
        .iter()
        .map(|l| l.beta.abs() + l.gamma.abs())
        .sum()
}

fn check_dims(problem: &AnnealingProblem, state: &StateVector) -> Result<()> {
    if problem.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            actual: state.dim(),
        });
    }
    Ok(())
}

/// Applies the segments in order (or their adjoints in reverse order when
/// `backward`), caching the eigendecomposition across repeated amplitudes.
fn run_segments(
    problem: &AnnealingProblem,
    schedule: &Schedule,
    state: &StateVector,
    backward: bool,
) -> Result<StateVector> {
    check_dims(problem, state)?;
    let mut v = state.amplitudes().clone();
    let mut cache: Option<((f64, f64), EigenDecomposition)> = None;
    let order: Box<dyn Iterator<Item = &Segment>> = if backward {
        Box::new(schedule.segments.iter().rev())
    } else {
        Box::new(schedule.segments.iter())
    };
    for seg in order {
        let key = (seg.f, seg.g);
        let reuse = matches!(&cache, Some((k, _)) if *k == key);
        if !reuse {
            let h = problem.h_i.combine(seg.f, &problem.h_f, seg.g)?;
            cache = Some((key, hermitian_eig(&h)?));
        }
        let eig = &cache.as_ref().unwrap().1;
        let t = if backward { -seg.dt } else { seg.dt };
        v = eig.evolve(&v, t);
    }
    StateVector::normalized(v)
}

/// `psi(T) = prod_k exp(-i dt_k (f_k H_i + g_k H_f)) psi_0`, in time order.
pub fn propagate_schedule(problem: &AnnealingProblem, schedule: &Schedule) -> Result<StateVector> {
    run_segments(problem, schedule, &problem.psi0, false)
}

/// Propagates an arbitrary starting state forward through the schedule.
pub fn propagate_from(
    problem: &AnnealingProblem,
    schedule: &Schedule,
    state: &StateVector,
) -> Result<StateVector> {
    run_segments(problem, schedule, state, false)
}

/// Undoes [`propagate_from`]: reversed segment order with adjoint propagators.
pub fn propagate_backward(
    problem: &AnnealingProblem,
    schedule: &Schedule,
    state: &StateVector,
) -> Result<StateVector> {
    run_segments(problem, schedule, state, true)
}

/// `prod_j exp(-i beta_j H_i) exp(-i gamma_j H_f) psi_0`: the phase gate acts first in each layer.
pub fn qaoa_evolve(problem: &AnnealingProblem, angles: &QaoaAngles) -> Result<StateVector> {
    let eig_i = hermitian_eig(&problem.h_i)?;
    let eig_f = hermitian_eig(&problem.h_f)?;
    let mut v = problem.psi0.amplitudes().clone();
    for l in &angles.layers {
        v = eig_f.evolve(&v, l.gamma);
        v = eig_i.evolve(&v, l.beta);
    }
    StateVector::normalized(v)
}

/// `<psi|P|psi>` for an orthogonal projector `P`.
pub fn fidelity(state: &StateVector, projector: &Operator) -> Result<f64> {
    let defect = projector.projector_defect();
    if defect > tol::PROJECTOR {
        return Err(Error::NotProjector(defect));
    }
    let pv = projector.apply(state)?;
    Ok(state.amplitudes().dotc(&pv).re.clamp(0.0, 1.0))
}

/// `1 - F`.
pub fn fidelity_error(state: &StateVector, projector: &Operator) -> Result<f64> {
    Ok(1.0 - fidelity(state, projector)?)
}

/// `sum_k dt_k sqrt(Var_{psi_0}(f_k H_i + g_k H_f))`, exact for piecewise-constant controls.
pub fn integrated_variance(problem: &AnnealingProblem, schedule: &Schedule) -> Result<f64> {
    let psi = problem.psi0.amplitudes();
    let a = problem.h_i.apply(&problem.psi0)?;
    let b = problem.h_f.apply(&problem.psi0)?;
    let mut total = 0.0;
    for seg in schedule.segments() {
        let hv = a.scale(seg.f) + b.scale(seg.g);
        let mean = psi.dotc(&hv).re;
        let var = (hv - psi.scale(mean)).norm_squared();
        total += seg.dt * var.sqrt();
    }
    Ok(total)
}
