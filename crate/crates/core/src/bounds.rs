//! Lower bounds on annealing time and QAOA depth.
//!
//! Every bound returns a [`BoundReport`] carrying its value, an applicability
//! status and a record of the operands. Ratios follow one 0/0 policy: a
//! vanishing numerator makes the bound vacuous (value 0); a vanishing
//! denominator with a positive numerator makes it inapplicable, since the
//! formal value would be infinite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{integrated_variance, Schedule};
use crate::error::{invalid, Error, Result};
use crate::linalg::{
    bures_distance, commutator, expectation, max_abs, pauli_string, spectral_norm, variance, Axis,
    CMatrix, Operator, StateVector, C64,
};
use crate::models::{min_degree_vertex, spin_network_hf, AnnealingProblem, SpinGraph};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundName {
    Variance,
    ScheduleIndependent,
    EqualSuperposition,
    Grover,
    Commutator,
    CombinedCommutator,
    SpinNetwork,
    SpinNetworkExact,
    EnergyTransfer,
    PspinClosedForm,
    QaoaLayers,
}

impl BoundName {
    pub fn citation(self) -> &'static str {
        match self {
            BoundName::Variance => "variance speed limit along the schedule",
            BoundName::ScheduleIndependent => "schedule-independent variance bound",
            BoundName::EqualSuperposition => "equal-superposition scaling bound",
            BoundName::Grover => "analog Grover search bound",
            BoundName::Commutator => "witness commutator bound",
            BoundName::CombinedCommutator => "combined initial/final witness bound",
            BoundName::SpinNetwork => "minimum-degree spin-network bound",
            BoundName::SpinNetworkExact => "minimum-degree spin-network bound, exact commutator",
            BoundName::EnergyTransfer => "energy-transfer commutator bound",
            BoundName::PspinClosedForm => "perturbed p-spin closed form",
            BoundName::QaoaLayers => "QAOA layer-count bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundStatus {
    Applicable,
    /// The bound carries no information; value 0.
    Vacuous,
    /// Zero denominator or failed hypothesis; value 0.
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: BoundName,
    /// Lower bound on `T` (or on the layer count for [`BoundName::QaoaLayers`]).
    pub value: f64,
    pub status: BoundStatus,
    pub citation: String,
    pub inputs: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    /// Integer layer certificate `ceil(value)`, QAOA bounds only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<u64>,
}

impl BoundReport {
    fn new(name: BoundName, value: f64, status: BoundStatus, inputs: Value) -> Self {
        Self {
            name,
            value,
            status,
            citation: name.citation().to_string(),
            inputs,
            diagnostic: None,
            certificate: None,
        }
    }

    fn with_diagnostic(mut self, msg: impl Into<String>) -> Self {
        self.diagnostic = Some(msg.into());
        self
    }

    fn inapplicable(mut self, msg: impl Into<String>) -> Self {
        self.value = 0.0;
        self.status = BoundStatus::Inapplicable;
        self.diagnostic = Some(msg.into());
        self
    }

    pub fn is_applicable(&self) -> bool {
        self.status == BoundStatus::Applicable
    }
}

/// `numerator / denominator` under the 0/0 policy.
fn ratio(
    name: BoundName,
    numerator: f64,
    denominator: f64,
    inputs: Value,
    unreachable: &str,
) -> BoundReport {
    if numerator < tol::ZERO {
        return BoundReport::new(name, 0.0, BoundStatus::Vacuous, inputs);
    }
    if denominator < tol::ZERO {
        return BoundReport::new(name, 0.0, BoundStatus::Inapplicable, inputs).with_diagnostic(
            format!("denominator vanishes with positive numerator; {unreachable}"),
        );
    }
    BoundReport::new(
        name,
        numerator / denominator,
        BoundStatus::Applicable,
        inputs,
    )
}

/// Bures distance with overlap rounding snapped to zero: `2 (1 - |<a|b>|)`
/// below [`tol::ZERO`] counts as coincident states.
fn bures_numerator(d: f64) -> f64 {
    if d * d < tol::ZERO {
        0.0
    } else {
        d
    }
}

fn check_positive(label: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || x.is_nan() {
        return Err(invalid(format!("{label} must be positive, got {x}")));
    }
    Ok(())
}

fn is_eigenstate(psi: &StateVector, h: &Operator) -> Result<bool> {
    let scale = max_abs(h.matrix()).max(1.0);
    Ok(variance(psi, h)?.sqrt() <= tol::EIGENSTATE * scale)
}

/// `|<psi|U|psi>|`, clamped to `[0, 1]`.
fn overlap_magnitude(psi: &StateVector, u: &CMatrix) -> f64 {
    let a = psi.amplitudes();
    a.dotc(&(u * a)).norm().min(1.0)
}

/// `sqrt(2 (1 - |<psi|U|psi>|))`.
fn witness_distance(psi: &StateVector, u: &CMatrix) -> f64 {
    bures_numerator((2.0 * (1.0 - overlap_magnitude(psi, u))).max(0.0).sqrt())
}

// ---------------------------------------------------------------------------
// Witnesses

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WitnessSide {
    /// Commutes with `H_i` and fixes `psi_0`; bounds the `H_f` control.
    Initial,
    /// Commutes with `H_f` and fixes `psi_T`; bounds the `H_i` control.
    Final,
}

/// A validated unitary `W` (initial side) or `V` (final side).
#[derive(Debug, Clone)]
pub struct Witness {
    unitary: Operator,
    description: String,
    side: WitnessSide,
}

impl Witness {
    /// Checks unitarity, `[U, h_commute] = 0` and `U |fixed> = e^{i phi} |fixed>`.
    pub fn new(
        unitary: CMatrix,
        description: impl Into<String>,
        side: WitnessSide,
        h_commute: &Operator,
        fixed: &StateVector,
    ) -> Result<Self> {
        let description = description.into();
        let op = Operator::general(unitary)?;
        if op.dim() != h_commute.dim() || op.dim() != fixed.dim() {
            return Err(Error::DimensionMismatch {
                expected: h_commute.dim(),
                actual: op.dim(),
            });
        }
        let defect = op.unitarity_defect();
        if defect > tol::UNITARY {
            return Err(Error::NotUnitary(defect));
        }
        let scale = max_abs(h_commute.matrix()).max(1.0);
        let comm = spectral_norm(&commutator(op.matrix(), h_commute.matrix())?)?;
        if comm > tol::COMMUTATION * scale {
            return Err(Error::InvalidWitness(format!(
                "{description}: does not commute with the Hamiltonian (||[W, H]|| = {comm:.3e})"
            )));
        }
        let fix = overlap_magnitude(fixed, op.matrix());
        if (1.0 - fix).abs() > tol::NORM {
            return Err(Error::InvalidWitness(format!(
                "{description}: does not fix the state up to a phase (|<psi|W|psi>| = {fix:.12})"
            )));
        }
        Ok(Self {
            unitary: op,
            description,
            side,
        })
    }

    /// Validates against `H_i, psi_0` (initial side) or `H_f, psi_T` (final side).
    pub fn for_problem(
        unitary: CMatrix,
        description: impl Into<String>,
        side: WitnessSide,
        problem: &AnnealingProblem,
    ) -> Result<Self> {
        let (h, psi) = match side {
            WitnessSide::Initial => (&problem.h_i, &problem.psi0),
            WitnessSide::Final => (&problem.h_f, &problem.psi_t),
        };
        Self::new(unitary, description, side, h, psi)
    }

    /// Single-site Pauli `sigma_axis^(site)` on `n` spins.
    pub fn pauli(
        n: usize,
        site: usize,
        axis: Axis,
        side: WitnessSide,
        h_commute: &Operator,
        fixed: &StateVector,
    ) -> Result<Self> {
        let op = pauli_string(n, &[(site, axis)])?;
        Self::new(
            op.matrix().clone(),
            pauli_label(site, axis),
            side,
            h_commute,
            fixed,
        )
    }

    /// Same witness times a global phase `e^{i theta}`.
    pub fn with_phase(&self, theta: f64) -> Self {
        let m = self.unitary.matrix() * C64::from_polar(1.0, theta);
        Self {
            unitary: Operator::general(m).expect("phase preserves shape"),
            description: format!("{} * exp(i {theta})", self.description),
            side: self.side,
        }
    }

    pub fn unitary(&self) -> &Operator {
        &self.unitary
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn side(&self) -> WitnessSide {
        self.side
    }
}

fn pauli_label(site: usize, axis: Axis) -> String {
    format!("sigma_{}^({site})", axis.label())
}

/// Candidate witnesses for [`auto_select_witness`].
#[derive(Debug, Clone)]
pub enum WitnessFamily {
    /// `sigma_a^(i)` for every site and axis; needs a `2^n` dimension.
    SingleSitePaulis,
    Custom(Vec<(CMatrix, String)>),
}

// ---------------------------------------------------------------------------
// Bounds

/// `D_B(psi_T, psi_0) / ((1/T) int sqrt(Var_{psi_0} H(t)) dt)` for a given schedule.
pub fn variance_bound(problem: &AnnealingProblem, schedule: &Schedule) -> Result<BoundReport> {
    let t = schedule.total_time();
    if !(t > 0.0) {
        return Err(invalid("schedule has zero duration"));
    }
    let d = bures_numerator(bures_distance(&problem.psi_t, &problem.psi0)?);
    let mean_dev = integrated_variance(problem, schedule)? / t;
    let inputs = json!({
        "dim": problem.dim(),
        "total_time": t,
        "segments": schedule.segments().len(),
        "bures_distance": d,
        "mean_deviation": mean_dev,
    });
    Ok(ratio(
        BoundName::Variance,
        d,
        mean_dev,
        inputs,
        "the schedule never moves the initial state, so the target is unreachable",
    ))
}

/// `max{D_B / (g_max sqrt(Var_{psi_0} H_f)), D_B / (f_max sqrt(Var_{psi_T} H_i))}`.
///
/// The first term needs `psi_0` to be an eigenstate of `H_i`, the second
/// needs `psi_T` to be an eigenstate of `H_f`. A term whose hypothesis fails
/// or whose variance vanishes is dropped from the max and flagged.
pub fn schedule_independent_bound(problem: &AnnealingProblem) -> Result<BoundReport> {
    check_positive("f_max", problem.f_max)?;
    check_positive("g_max", problem.g_max)?;
    let d = bures_numerator(bures_distance(&problem.psi_t, &problem.psi0)?);
    let var_f = variance(&problem.psi0, &problem.h_f)?;
    let var_i = variance(&problem.psi_t, &problem.h_i)?;
    let mut inputs = json!({
        "dim": problem.dim(),
        "f_max": problem.f_max,
        "g_max": problem.g_max,
        "bures_distance": d,
        "var_psi0_hf": var_f,
        "var_psiT_hi": var_i,
    });
    let name = BoundName::ScheduleIndependent;
    if d < tol::ZERO {
        return Ok(BoundReport::new(name, 0.0, BoundStatus::Vacuous, inputs));
    }
    let terms = [
        (
            "g_max term",
            is_eigenstate(&problem.psi0, &problem.h_i)?,
            "psi_0 is not an eigenstate of H_i",
            problem.g_max,
            var_f,
        ),
        (
            "f_max term",
            is_eigenstate(&problem.psi_t, &problem.h_f)?,
            "psi_T is not an eigenstate of H_f",
            problem.f_max,
            var_i,
        ),
    ];
    let mut best: Option<f64> = None;
    let mut flags = Vec::new();
    let mut term_values = Vec::new();
    for (label, hypothesis, why, amp, var) in terms {
        let denom = amp * var.sqrt();
        if !hypothesis {
            flags.push(format!("{label} dropped: {why}"));
            term_values.push(Value::Null);
        } else if denom < tol::ZERO {
            flags.push(format!(
                "{label} dropped: zero variance makes it formally infinite"
            ));
            term_values.push(Value::Null);
        } else {
            let v = d / denom;
            term_values.push(json!(v));
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    inputs["terms"] = Value::Array(term_values);
    let report = match best {
        Some(v) => BoundReport::new(name, v, BoundStatus::Applicable, inputs),
        None => BoundReport::new(name, 0.0, BoundStatus::Inapplicable, inputs),
    };
    Ok(if flags.is_empty() {
        report
    } else {
        BoundReport {
            diagnostic: Some(flags.join("; ")),
            ..report
        }
    })
}

/// `sqrt(2 d (1 - 1/sqrt(d))) / (g_max sqrt(Tr H_f^2))`.
pub fn equal_superposition_bound(h_f: &Operator, g_max: f64) -> Result<BoundReport> {
    check_positive("g_max", g_max)?;
    if !h_f.is_hermitian() {
        return Err(Error::NotHermitian(crate::linalg::hermiticity_defect(
            h_f.matrix(),
        )));
    }
    let d = h_f.dim() as f64;
    let tr2 = h_f.trace_of_square();
    let num = (2.0 * d * (1.0 - 1.0 / d.sqrt())).sqrt();
    let inputs = json!({ "dim": h_f.dim(), "g_max": g_max, "trace_hf_squared": tr2 });
    Ok(ratio(
        BoundName::EqualSuperposition,
        num,
        g_max * tr2.sqrt(),
        inputs,
        "H_f vanishes",
    ))
}

/// Analog Grover search with `m` marked items among `d`.
///
/// Evaluates the schedule-independent bound in closed form: overlap
/// `sqrt(M/d)` and both variances `M/d - M^2/d^2`. Either cap may be
/// `f64::INFINITY`.
pub fn grover_bound(d: usize, m: usize, f_max: f64, g_max: f64) -> Result<BoundReport> {
    if m == 0 || m >= d {
        return Err(invalid(format!("need 1 <= M < d, got M={m}, d={d}")));
    }
    check_positive("f_max", f_max)?;
    check_positive("g_max", g_max)?;
    let q = m as f64 / d as f64;
    let num = (2.0 * (1.0 - q.sqrt())).sqrt();
    let den = (q - q * q).sqrt();
    let amp = (1.0 / g_max).max(1.0 / f_max);
    let inputs = json!({
        "dim": d,
        "solutions": m,
        "f_max": finite_or_str(f_max),
        "g_max": finite_or_str(g_max),
    });
    Ok(BoundReport::new(
        BoundName::Grover,
        amp * num / den,
        BoundStatus::Applicable,
        inputs,
    ))
}

fn finite_or_str(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

/// `sqrt(2) sqrt(1 - |<anchor|W|anchor>|) / (amp_max ||[H_ctrl, W]||)`.
///
/// The witness must already be validated for the opposite side: an initial
/// witness with `H_ctrl = H_f` evaluated on `psi_T`, or a final witness with
/// `H_ctrl = H_i` evaluated on `psi_0`.
pub fn commutator_bound(
    h_ctrl: &Operator,
    witness: &Witness,
    anchor: &StateVector,
    amp_max: f64,
) -> Result<BoundReport> {
    check_positive("amp_max", amp_max)?;
    let u = witness.unitary.matrix();
    if h_ctrl.dim() != u.nrows() || anchor.dim() != u.nrows() {
        return Err(Error::DimensionMismatch {
            expected: u.nrows(),
            actual: h_ctrl.dim(),
        });
    }
    let num = witness_distance(anchor, u);
    let comm = spectral_norm(&commutator(h_ctrl.matrix(), u)?)?;
    let inputs = json!({
        "dim": h_ctrl.dim(),
        "amp_max": amp_max,
        "witness": witness.description,
        "side": witness.side,
        "commutator_norm": comm,
        "witness_distance": num,
    });
    Ok(ratio(
        BoundName::Commutator,
        num,
        amp_max * comm,
        inputs,
        "the witness certifies the target unreachable under this control term alone",
    ))
}

fn term_for(problem: &AnnealingProblem, w: &Witness) -> Result<BoundReport> {
    match w.side {
        WitnessSide::Initial => commutator_bound(&problem.h_f, w, &problem.psi_t, problem.g_max),
        WitnessSide::Final => commutator_bound(&problem.h_i, w, &problem.psi0, problem.f_max),
    }
}

fn side_check(w: &Witness, want: WitnessSide, label: &str) -> Result<()> {
    if w.side != want {
        return Err(Error::InvalidWitness(format!(
            "{label} must be a {want:?}-side witness"
        )));
    }
    Ok(())
}

/// Max of the final-side (`V`, `f_max`) and initial-side (`W`, `g_max`)
/// commutator terms, skipping terms that are not applicable.
pub fn combined_commutator_bound(
    problem: &AnnealingProblem,
    v: Option<&Witness>,
    w: Option<&Witness>,
) -> Result<BoundReport> {
    let mut terms = Vec::new();
    if let Some(v) = v {
        side_check(v, WitnessSide::Final, "V")?;
        terms.push(term_for(problem, v)?);
    }
    if let Some(w) = w {
        side_check(w, WitnessSide::Initial, "W")?;
        terms.push(term_for(problem, w)?);
    }
    let best = terms
        .iter()
        .filter(|t| t.is_applicable())
        .map(|t| t.value)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        });
    let inputs = json!({
        "dim": problem.dim(),
        "f_max": problem.f_max,
        "g_max": problem.g_max,
        "v": v.map(|x| x.description.clone()),
        "w": w.map(|x| x.description.clone()),
        "terms": terms.iter().map(|t| json!({
            "witness": t.inputs["witness"],
            "value": t.value,
            "status": t.status,
        })).collect::<Vec<_>>(),
    });
    match best {
        Some(value) => Ok(BoundReport::new(
            BoundName::CombinedCommutator,
            value,
            BoundStatus::Applicable,
            inputs,
        )),
        None => Err(Error::NoApplicableTerm(
            "no witness term of the combined bound is applicable".into(),
        )),
    }
}

/// Factor-6 estimate and exact-commutator companion for a spin network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinNetworkBounds {
    pub estimate: BoundReport,
    pub exact: BoundReport,
}

/// Spin-network bound with `W = sigma_axis^(i)` at the minimum-degree vertex.
///
/// The estimate replaces `||[H_f, W]||` by `6 h_max delta N`. That premise
/// can fail for couplings spanning several axis pairs; the exact norm is
/// always computed, and the estimate is marked inapplicable whenever it
/// exceeds the premise. With the transverse-field mixer only `axis = x`
/// commutes with `H_i`.
pub fn spin_network_bound(
    g: &SpinGraph,
    psi_t: &StateVector,
    axis: Axis,
    g_max: f64,
) -> Result<SpinNetworkBounds> {
    check_positive("g_max", g_max)?;
    if g.n_edges() == 0 {
        return Err(invalid("spin-network bound needs at least one edge"));
    }
    let n = g.n_vertices();
    let h_f = spin_network_hf(g, g.normalization())?;
    if psi_t.dim() != h_f.dim() {
        return Err(Error::DimensionMismatch {
            expected: h_f.dim(),
            actual: psi_t.dim(),
        });
    }
    let norm = g.normalization_value(g.normalization())?;
    let (site, delta) = min_degree_vertex(g);
    let w = pauli_string(n, &[(site, axis)])?;
    let num = witness_distance(psi_t, w.matrix());
    let premise = 6.0 * g.h_max() * delta as f64 * norm.abs();
    let comm = spectral_norm(&commutator(h_f.matrix(), w.matrix())?)?;
    let inputs = json!({
        "n": n,
        "edges": g.n_edges(),
        "normalization": norm,
        "h_max": g.h_max(),
        "vertex": site,
        "degree": delta,
        "witness": pauli_label(site, axis),
        "g_max": g_max,
        "commutator_norm": comm,
        "commutator_estimate": premise,
    });
    let unreachable = "the witness certifies the target unreachable under H_f alone";
    let mut estimate = ratio(
        BoundName::SpinNetwork,
        num,
        g_max * premise,
        inputs.clone(),
        unreachable,
    );
    let mut exact = ratio(
        BoundName::SpinNetworkExact,
        num,
        g_max * comm,
        inputs,
        unreachable,
    );
    if estimate.is_applicable() && comm > premise * (1.0 + tol::DOMINANCE_SLACK) + tol::ZERO {
        estimate = estimate.inapplicable(format!(
            "commutator estimate violated: ||[H_f, W]|| = {comm:.6} > 6 h_max delta N = {premise:.6}"
        ));
    }
    if axis != Axis::X {
        let msg = "witness does not commute with the transverse-field mixer";
        if estimate.is_applicable() {
            estimate = estimate.inapplicable(msg);
        }
        if exact.is_applicable() {
            exact = exact.inapplicable(msg);
        }
    }
    Ok(SpinNetworkBounds { estimate, exact })
}

/// `(<H_i>_T - <H_i>_0 + <H_f>_0 - <H_f>_T) / ||[H_f, H_i]||`.
///
/// Holds for schedules with `|f(t) + g(t)| <= 1`. A negative numerator is
/// clamped to a vacuous bound.
pub fn energy_transfer_bound(problem: &AnnealingProblem) -> Result<BoundReport> {
    let hi_t = expectation(&problem.psi_t, &problem.h_i)?;
    let hi_0 = expectation(&problem.psi0, &problem.h_i)?;
    let hf_0 = expectation(&problem.psi0, &problem.h_f)?;
    let hf_t = expectation(&problem.psi_t, &problem.h_f)?;
    let num = hi_t - hi_0 + hf_0 - hf_t;
    let comm = spectral_norm(&commutator(problem.h_f.matrix(), problem.h_i.matrix())?)?;
    let inputs = json!({
        "dim": problem.dim(),
        "energy_change": num,
        "commutator_norm": comm,
    });
    let report = ratio(
        BoundName::EnergyTransfer,
        num.max(0.0),
        comm,
        inputs,
        "H_i and H_f commute, so the energy transfer cannot happen",
    );
    let caps = problem.f_max + problem.g_max;
    if report.is_applicable() && caps > 1.0 + tol::ZERO {
        return Ok(report.with_diagnostic(format!(
            "only valid for schedules with |f(t) + g(t)| <= 1; the caps allow up to {caps}"
        )));
    }
    Ok(report)
}

/// `n^{p-1} / (sqrt(2) g_max lambda)`.
pub fn pspin_closed_form_bound(n: usize, p: u32, lambda: f64, g_max: f64) -> Result<BoundReport> {
    check_positive("lambda", lambda)?;
    check_positive("g_max", g_max)?;
    if n == 0 || p == 0 {
        return Err(invalid("n and p must be positive"));
    }
    let value = (n as f64).powi(p as i32 - 1) / (std::f64::consts::SQRT_2 * g_max * lambda);
    let inputs = json!({ "n": n, "p": p, "lambda": lambda, "g_max": g_max });
    Ok(BoundReport::new(
        BoundName::PspinClosedForm,
        value,
        BoundStatus::Applicable,
        inputs,
    ))
}

/// Layer-count bound for QAOA with angles in `[0, 2 pi]`:
/// `max{D_B(psi_0, V psi_0) / (4 pi ||[H_i, V]||), D_B(psi_T, W psi_T) / (4 pi ||[H_f, W]||)}`.
pub fn qaoa_layer_bound(
    problem: &AnnealingProblem,
    v: Option<&Witness>,
    w: Option<&Witness>,
) -> Result<BoundReport> {
    let four_pi = 4.0 * std::f64::consts::PI;
    let mut terms = Vec::new();
    if let Some(v) = v {
        side_check(v, WitnessSide::Final, "V")?;
        terms.push(commutator_bound(&problem.h_i, v, &problem.psi0, four_pi)?);
    }
    if let Some(w) = w {
        side_check(w, WitnessSide::Initial, "W")?;
        terms.push(commutator_bound(&problem.h_f, w, &problem.psi_t, four_pi)?);
    }
    let best = terms
        .iter()
        .filter(|t| t.is_applicable())
        .map(|t| t.value)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        });
    let inputs = json!({
        "dim": problem.dim(),
        "v": v.map(|x| x.description.clone()),
        "w": w.map(|x| x.description.clone()),
        "terms": terms.iter().map(|t| json!({
            "witness": t.inputs["witness"],
            "value": t.value,
            "status": t.status,
        })).collect::<Vec<_>>(),
    });
    match best {
        Some(value) => {
            let mut r = BoundReport::new(
                BoundName::QaoaLayers,
                value,
                BoundStatus::Applicable,
                inputs,
            );
            r.certificate = Some(value.ceil() as u64);
            Ok(r)
        }
        None => Err(Error::NoApplicableTerm(
            "no witness term of the layer bound is applicable".into(),
        )),
    }
}

fn spin_count(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(invalid(format!(
            "single-site Pauli witnesses need a 2^n dimension, got {dim}"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Scans a witness family and returns the candidate with the largest
/// applicable commutator bound.
///
/// Candidates are validated against `h_commute` and `fixed`; the bound is
/// evaluated against `h_ctrl` on `anchor`. Ties (relative `1e-12`) go to the
/// earliest candidate, i.e. lowest site then axis `x < y < z`.
pub fn auto_select_witness(
    side: WitnessSide,
    h_commute: &Operator,
    fixed: &StateVector,
    anchor: &StateVector,
    h_ctrl: &Operator,
    amp_max: f64,
    family: &WitnessFamily,
) -> Result<(Witness, BoundReport)> {
    check_positive("amp_max", amp_max)?;
    let candidates: Vec<(CMatrix, String)> = match family {
        WitnessFamily::SingleSitePaulis => {
            let n = spin_count(h_commute.dim())?;
            let mut out = Vec::with_capacity(3 * n);
            for site in 1..=n {
                for axis in Axis::ALL {
                    out.push((
                        pauli_string(n, &[(site, axis)])?.matrix().clone(),
                        pauli_label(site, axis),
                    ));
                }
            }
            out
        }
        WitnessFamily::Custom(list) => list.clone(),
    };
    if candidates.is_empty() {
        return Err(Error::InvalidWitness("empty candidate family".into()));
    }
    let evaluated: Vec<Option<(Witness, BoundReport)>> = candidates
        .into_par_iter()
        .map(|(m, label)| {
            let w = Witness::new(m, label, side, h_commute, fixed).ok()?;
            let r = commutator_bound(h_ctrl, &w, anchor, amp_max).ok()?;
            Some((w, r))
        })
        .collect();
    let valid: Vec<(Witness, BoundReport)> = evaluated.into_iter().flatten().collect();
    if valid.is_empty() {
        return Err(Error::InvalidWitness(
            "no candidate passes witness validation".into(),
        ));
    }
    let mut best: Option<(Witness, BoundReport)> = None;
    for (w, r) in valid {
        if !r.is_applicable() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, b)) => r.value > b.value * (1.0 + 1e-12),
        };
        if better {
            best = Some((w, r));
        }
    }
    best.ok_or_else(|| {
        Error::NoApplicableTerm("no valid witness yields an applicable bound".into())
    })
}

/// [`auto_select_witness`] wired to a problem: an initial-side witness is
/// validated on `(H_i, psi_0)` and bounds `g_max` on `psi_T`; a final-side
/// witness is validated on `(H_f, psi_T)` and bounds `f_max` on `psi_0`.
pub fn auto_select_for_problem(
    problem: &AnnealingProblem,
    side: WitnessSide,
    family: &WitnessFamily,
) -> Result<(Witness, BoundReport)> {
    match side {
        WitnessSide::Initial => auto_select_witness(
            side,
            &problem.h_i,
            &problem.psi0,
            &problem.psi_t,
            &problem.h_f,
            problem.g_max,
            family,
        ),
        WitnessSide::Final => auto_select_witness(
            side,
            &problem.h_f,
            &problem.psi_t,
            &problem.psi0,
            &problem.h_i,
            problem.f_max,
            family,
        ),
    }
}

/// The model-independent bounds for a problem: schedule-independent,
/// combined witness (single-site Pauli witnesses, picked per side),
/// energy-transfer, the QAOA layer count, and the variance bound when a
/// schedule is given.
///
/// Witness bounds are omitted when the dimension is not `2^n` or no
/// candidate passes validation.
pub fn generic_bounds(
    problem: &AnnealingProblem,
    schedule: Option<&Schedule>,
) -> Result<Vec<BoundReport>> {
    let mut out = vec![schedule_independent_bound(problem)?];
    if let Some(s) = schedule {
        out.push(variance_bound(problem, s)?);
    }
    if problem.dim().is_power_of_two() {
        let family = WitnessFamily::SingleSitePaulis;
        let pick = |side| {
            auto_select_for_problem(problem, side, &family)
                .ok()
                .map(|(w, _)| w)
        };
        let (v, w) = (pick(WitnessSide::Final), pick(WitnessSide::Initial));
        if let Ok(r) = combined_commutator_bound(problem, v.as_ref(), w.as_ref()) {
            out.push(r);
        }
        if let Ok(r) = qaoa_layer_bound(problem, v.as_ref(), w.as_ref()) {
            out.push(r);
        }
    }
    out.push(energy_transfer_bound(problem)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Segment;
    use crate::models::{
        grover_problem_dim, perturbed_pspin_problem, spin_network_problem, transverse_field_hi,
        Coupling,
    };
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    fn initial_pauli(p: &AnnealingProblem, n: usize, site: usize, axis: Axis) -> Witness {
        Witness::pauli(n, site, axis, WitnessSide::Initial, &p.h_i, &p.psi0).unwrap()
    }

    #[test]
    fn variance_bound_examples() {
        let p = grover_problem_dim(4, &[2], 1.0, 1.0).unwrap();
        let s = Schedule::uniform(3.0, &[(0.0, 1.0)], 1.0, 1.0).unwrap();
        let r = variance_bound(&p, &s).unwrap();
        assert_eq!(r.status, BoundStatus::Applicable);
        // D_B = 1, Var = (1/4)(3/4).
        assert_abs_diff_eq!(r.value, 1.0 / (3.0f64 / 16.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.value, 2.3094, epsilon = 1e-4);

        let same = p.with_target(p.psi0.clone()).unwrap();
        let r = variance_bound(&same, &s).unwrap();
        assert_eq!((r.status, r.value), (BoundStatus::Vacuous, 0.0));

        let frozen = Schedule::uniform(2.0, &[(1.0, 0.0), (-0.5, 0.0)], 1.0, 1.0).unwrap();
        let r = variance_bound(&p, &frozen).unwrap();
        assert_eq!(r.status, BoundStatus::Inapplicable);
        assert!(r.diagnostic.is_some());
    }

    #[test]
    fn schedule_independent_examples() {
        let p = grover_problem_dim(10, &[3], 1.0, 1.0).unwrap();
        let r = schedule_independent_bound(&p).unwrap();
        let terms = r.inputs["terms"].as_array().unwrap();
        assert_abs_diff_eq!(
            terms[0].as_f64().unwrap(),
            terms[1].as_f64().unwrap(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(r.value, 3.898, epsilon = 1e-3);

        let same = p.with_target(p.psi0.clone()).unwrap();
        assert_eq!(
            schedule_independent_bound(&same).unwrap().status,
            BoundStatus::Vacuous
        );

        let loose_f = p.with_caps(100.0, 1.0).unwrap();
        let doubled = p.with_caps(100.0, 2.0).unwrap();
        let a = schedule_independent_bound(&loose_f).unwrap().value;
        let b = schedule_independent_bound(&doubled).unwrap().value;
        assert_abs_diff_eq!(b, a / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn schedule_independent_drops_terms_without_hypothesis() {
        let p = grover_problem_dim(8, &[1], 1.0, 1.0).unwrap();
        let reached = StateVector::from_slice(
            &(0..8)
                .map(|k| C64::new(1.0 + k as f64, 0.5))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let q = p.with_target(reached).unwrap();
        let r = schedule_independent_bound(&q).unwrap();
        assert_eq!(r.status, BoundStatus::Applicable);
        assert!(r.inputs["terms"][1].is_null());
        assert!(r.diagnostic.unwrap().contains("f_max term dropped"));
    }

    #[test]
    fn equal_superposition_examples() {
        let hf = Operator::diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let r = equal_superposition_bound(&hf, 1.0).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-12);
        let r = equal_superposition_bound(&Operator::zeros(4).unwrap(), 1.0).unwrap();
        assert_eq!(r.status, BoundStatus::Inapplicable);
        // Tr H_f^2 = 1 at every d: value / sqrt(d) -> sqrt(2).
        for d in [16usize, 256, 4096] {
            let mut diag = vec![0.0; d];
            diag[0] = 1.0;
            let v = equal_superposition_bound(&Operator::diagonal(&diag).unwrap(), 1.0)
                .unwrap()
                .value;
            let oracle = (2.0 * d as f64 * (1.0 - 1.0 / (d as f64).sqrt())).sqrt();
            assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn grover_examples() {
        assert_abs_diff_eq!(
            grover_bound(10, 1, 1.0, 1.0).unwrap().value,
            3.898,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            grover_bound(4, 1, 1.0, 1.0).unwrap().value,
            4.0 / 3f64.sqrt(),
            epsilon = 1e-12
        );
        let g_only = grover_bound(16, 1, f64::INFINITY, 1.0).unwrap().value;
        assert_abs_diff_eq!(
            g_only,
            grover_bound(16, 1, 1.0, 1.0).unwrap().value,
            epsilon = 1e-12
        );
        assert!(grover_bound(4, 4, 1.0, 1.0).is_err());
        // Multi-solution closed form agrees with the generic evaluation.
        let p = grover_problem_dim(16, &[1, 5, 9], 0.7, 1.3).unwrap();
        let generic = schedule_independent_bound(&p).unwrap().value;
        assert_abs_diff_eq!(
            grover_bound(16, 3, 0.7, 1.3).unwrap().value,
            generic,
            epsilon = 1e-10
        );
        // d >> M asymptote.
        let v = grover_bound(1 << 20, 4, 1.0, 1.0).unwrap().value;
        assert_abs_diff_eq!(v / ((1 << 20) as f64 / 4.0).sqrt(), SQRT_2, epsilon = 1e-2);
    }

    #[test]
    fn commutator_examples() {
        let p = perturbed_pspin_problem(4, 2, 1.0, 1.0, 1.0).unwrap();
        let w = initial_pauli(&p, 5, 5, Axis::X);
        let r = commutator_bound(&p.h_f, &w, &p.psi_t, 1.0).unwrap();
        assert_abs_diff_eq!(r.value, 4.0 / SQRT_2, epsilon = 1e-10);

        // Commutes with the control and has zero overlap: unreachable.
        let r = commutator_bound(&p.h_i, &w, &p.psi_t, 1.0).unwrap();
        assert_eq!(r.status, BoundStatus::Inapplicable);

        // Anchor is an eigenstate of W.
        let r = commutator_bound(&p.h_f, &w, &p.psi0, 1.0).unwrap();
        assert_eq!((r.status, r.value), (BoundStatus::Vacuous, 0.0));
    }

    #[test]
    fn commutator_bound_is_phase_invariant() {
        let p = perturbed_pspin_problem(3, 3, 0.5, 1.0, 1.0).unwrap();
        let w = initial_pauli(&p, 4, 4, Axis::X);
        let base = commutator_bound(&p.h_f, &w, &p.psi_t, 1.0).unwrap().value;
        for theta in [0.3, 1.7, -2.9] {
            let v = commutator_bound(&p.h_f, &w.with_phase(theta), &p.psi_t, 1.0)
                .unwrap()
                .value;
            assert_abs_diff_eq!(v, base, epsilon = 1e-12 * base);
        }
    }

    #[test]
    fn witness_validation_rejects_bad_candidates() {
        let p = perturbed_pspin_problem(3, 2, 1.0, 1.0, 1.0).unwrap();
        let z = pauli_string(4, &[(1, Axis::Z)]).unwrap().matrix().clone();
        assert!(matches!(
            Witness::for_problem(z, "z1", WitnessSide::Initial, &p),
            Err(Error::InvalidWitness(_))
        ));
        let not_unitary = CMatrix::identity(16, 16) * C64::new(2.0, 0.0);
        assert!(matches!(
            Witness::for_problem(not_unitary, "2I", WitnessSide::Initial, &p),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn combined_examples() {
        let p = perturbed_pspin_problem(3, 2, 1.0, 1.0, 1.0).unwrap();
        let id = CMatrix::identity(16, 16);
        let v = Witness::for_problem(id.clone(), "1", WitnessSide::Final, &p).unwrap();
        let w = Witness::for_problem(id, "1", WitnessSide::Initial, &p).unwrap();
        assert!(matches!(
            combined_commutator_bound(&p, Some(&v), Some(&w)),
            Err(Error::NoApplicableTerm(_))
        ));

        // Pendant Ising vertex: second term is sqrt(2) / (g_max ||[H_f, sigma_x]||).
        let g = SpinGraph::complete_plus_pendant_ising(4, 1.0).unwrap();
        let q = spin_network_problem(&g, 1.0, 1.0).unwrap();
        let w = initial_pauli(&q, 5, 5, Axis::X);
        let v = Witness::pauli(5, 1, Axis::Z, WitnessSide::Final, &q.h_f, &q.psi_t).unwrap();
        let comm =
            spectral_norm(&commutator(q.h_f.matrix(), w.unitary().matrix()).unwrap()).unwrap();
        let single_w = commutator_bound(&q.h_f, &w, &q.psi_t, 1.0).unwrap();
        assert_abs_diff_eq!(single_w.value, SQRT_2 / comm, epsilon = 1e-12);
        // N = 5/7, pendant coupling 1: ||[H_f, sigma_x]|| = 2 * 5/7.
        assert_abs_diff_eq!(single_w.value, SQRT_2 * 7.0 / 10.0, epsilon = 1e-12);
        let single_v = commutator_bound(&q.h_i, &v, &q.psi0, 1.0).unwrap();
        let both = combined_commutator_bound(&q, Some(&v), Some(&w)).unwrap();
        assert!(both.value >= single_w.value && both.value >= single_v.value);
        assert_abs_diff_eq!(
            both.value,
            single_w.value.max(single_v.value),
            epsilon = 1e-15
        );
    }

    #[test]
    fn combined_rejects_swapped_sides() {
        let p = perturbed_pspin_problem(3, 2, 1.0, 1.0, 1.0).unwrap();
        let w = initial_pauli(&p, 4, 4, Axis::X);
        assert!(combined_commutator_bound(&p, Some(&w), None).is_err());
    }

    #[test]
    fn spin_network_examples() {
        let g = SpinGraph::complete_plus_pendant_ising(4, 1.0).unwrap();
        let d = 32;
        let target = StateVector::basis(d, 0).unwrap();
        let r = spin_network_bound(&g, &target, Axis::X, 1.0).unwrap();
        assert_abs_diff_eq!(r.estimate.value, SQRT_2 / 6.0 * 7.0 / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.estimate.value, 0.3300, epsilon = 1e-4);
        assert_abs_diff_eq!(r.exact.value, SQRT_2 / 2.0 * 7.0 / 5.0, epsilon = 1e-12);
        assert!(r.estimate.value <= r.exact.value);

        let plus = StateVector::plus_state(5).unwrap();
        let r = spin_network_bound(&g, &plus, Axis::X, 1.0).unwrap();
        assert_eq!(r.estimate.status, BoundStatus::Vacuous);
        assert_eq!(r.exact.status, BoundStatus::Vacuous);

        let empty = SpinGraph::new(3, vec![]).unwrap();
        assert!(
            spin_network_bound(&empty, &StateVector::basis(8, 0).unwrap(), Axis::X, 1.0).is_err()
        );
    }

    #[test]
    fn spin_network_estimate_can_fail_for_full_tensor_couplings() {
        // One edge carrying every (a, b) pair with sign pattern aligned so
        // that ||[H_f, sigma_x^(1)]|| exceeds 6 h_max.
        let mut edges = Vec::new();
        for a in Axis::ALL {
            for b in Axis::ALL {
                let h = match (a, b) {
                    (Axis::Y, Axis::Y) | (Axis::Z, Axis::Z) => 1.0,
                    (Axis::Y, Axis::Z) => -1.0,
                    (Axis::Z, Axis::Y) => 1.0,
                    (Axis::Y, Axis::X) | (Axis::Z, Axis::X) => 1.0,
                    _ => 0.5,
                };
                edges.push(Coupling {
                    i: 1,
                    j: 2,
                    a,
                    b,
                    h,
                });
            }
        }
        let g = SpinGraph::new(2, edges).unwrap();
        let h_f = spin_network_hf(&g, g.normalization()).unwrap();
        let w = pauli_string(2, &[(1, Axis::X)]).unwrap();
        let comm = spectral_norm(&commutator(h_f.matrix(), w.matrix()).unwrap()).unwrap();
        let norm = g.normalization_value(g.normalization()).unwrap();
        assert!(comm > 6.0 * g.h_max() * norm);
        let r = spin_network_bound(&g, &StateVector::basis(4, 0).unwrap(), Axis::X, 1.0).unwrap();
        assert_eq!(r.estimate.status, BoundStatus::Inapplicable);
        assert!(r.estimate.value <= r.exact.value);
    }

    #[test]
    fn energy_transfer_examples() {
        // Diagonal H_i and H_f commute.
        let hi = Operator::diagonal(&[0.0, 1.0, 1.0, 2.0]).unwrap();
        let hf = Operator::diagonal(&[1.0, 0.0, 3.0, 2.0]).unwrap();
        let psi0 = StateVector::basis(4, 0).unwrap();
        let psit = StateVector::basis(4, 1).unwrap();
        let proj = Operator::projector_onto(&psit).unwrap();
        let p = AnnealingProblem::new(hi, hf, psi0, psit, proj, 1.0, 1.0).unwrap();
        assert_eq!(
            energy_transfer_bound(&p).unwrap().status,
            BoundStatus::Inapplicable
        );

        let h = transverse_field_hi(2).unwrap();
        let plus = StateVector::plus_state(2).unwrap();
        let proj = Operator::projector_onto(&plus).unwrap();
        let p = AnnealingProblem::new(h.clone(), h, plus.clone(), plus, proj, 1.0, 1.0).unwrap();
        let r = energy_transfer_bound(&p).unwrap();
        assert_eq!((r.status, r.value), (BoundStatus::Vacuous, 0.0));
    }

    #[test]
    fn energy_transfer_flags_wide_caps() {
        let wide = energy_transfer_bound(&grover_problem_dim(4, &[0], 1.0, 1.0).unwrap()).unwrap();
        assert!(wide.is_applicable());
        assert!(wide.diagnostic.unwrap().contains("|f(t) + g(t)| <= 1"));
        let narrow =
            energy_transfer_bound(&grover_problem_dim(4, &[0], 0.5, 0.5).unwrap()).unwrap();
        assert!(narrow.is_applicable() && narrow.diagnostic.is_none());
    }

    #[test]
    fn energy_transfer_stays_bounded_on_pendant_graphs() {
        let mut values = Vec::new();
        for k in 3..=6 {
            let g = SpinGraph::complete_plus_pendant_ising(k, -1.0).unwrap();
            let p = spin_network_problem(&g, 1.0, 1.0).unwrap();
            values.push(energy_transfer_bound(&p).unwrap().value);
        }
        assert!(values.iter().all(|&v| v > 0.0 && v < 3.0), "{values:?}");
    }

    #[test]
    fn pspin_closed_form_examples() {
        assert_abs_diff_eq!(
            pspin_closed_form_bound(4, 2, 1.0, 1.0).unwrap().value,
            2.8284,
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(
            pspin_closed_form_bound(4, 3, 1.0, 1.0).unwrap().value,
            11.3137,
            epsilon = 1e-4
        );
        for n in [2, 5, 9] {
            assert_abs_diff_eq!(
                pspin_closed_form_bound(n, 1, 2.0, 1.0).unwrap().value,
                1.0 / (SQRT_2 * 2.0),
                epsilon = 1e-15
            );
        }
        assert!(pspin_closed_form_bound(4, 2, 0.0, 1.0).is_err());
        assert!(pspin_closed_form_bound(4, 2, 1.0, -1.0).is_err());
    }

    #[test]
    fn pspin_closed_form_matches_generic_commutator_bound() {
        for n in 3..=6 {
            for p in 1..=3 {
                for lambda in [0.5, 1.0, 2.0] {
                    let prob = perturbed_pspin_problem(n, p, lambda, 1.0, 1.0).unwrap();
                    let w = initial_pauli(&prob, n + 1, n + 1, Axis::X);
                    let generic = commutator_bound(&prob.h_f, &w, &prob.psi_t, 1.0)
                        .unwrap()
                        .value;
                    let closed = pspin_closed_form_bound(n, p, lambda, 1.0).unwrap().value;
                    assert!(
                        ((generic - closed) / closed).abs() < 1e-10,
                        "n={n} p={p} lambda={lambda}"
                    );
                }
            }
        }
    }

    #[test]
    fn qaoa_layer_examples() {
        let p = perturbed_pspin_problem(4, 2, 1.0, 1.0, 1.0).unwrap();
        let w = initial_pauli(&p, 5, 5, Axis::X);
        let r = qaoa_layer_bound(&p, None, Some(&w)).unwrap();
        // D_B = sqrt(2), ||[H_f, W]|| = 2 lambda / n^{p-1} = 0.5.
        let oracle = SQRT_2 / (4.0 * std::f64::consts::PI * 0.5);
        assert_abs_diff_eq!(r.value, oracle, epsilon = 1e-12);
        assert_eq!(r.certificate, Some(1));
        // Term-by-term: the time bound at unit caps divided by 4 pi.
        let t = commutator_bound(&p.h_f, &w, &p.psi_t, 1.0).unwrap().value;
        assert_abs_diff_eq!(r.value, t / (4.0 * std::f64::consts::PI), epsilon = 1e-12);

        let id = CMatrix::identity(32, 32);
        let wid = Witness::for_problem(id, "1", WitnessSide::Initial, &p).unwrap();
        assert!(qaoa_layer_bound(&p, None, Some(&wid)).is_err());
    }

    #[test]
    fn auto_select_examples() {
        let hi = transverse_field_hi(3).unwrap();
        let plus = StateVector::plus_state(3).unwrap();
        for site in 1..=3 {
            assert!(Witness::pauli(3, site, Axis::X, WitnessSide::Initial, &hi, &plus).is_ok());
        }

        let p = perturbed_pspin_problem(4, 2, 1.0, 1.0, 1.0).unwrap();
        let (w, r) =
            auto_select_for_problem(&p, WitnessSide::Initial, &WitnessFamily::SingleSitePaulis)
                .unwrap();
        assert_eq!(w.description(), "sigma_x^(5)");
        assert_abs_diff_eq!(r.value, 4.0 / SQRT_2, epsilon = 1e-10);

        // Exhaustive oracle: every sigma_x^(j) is valid and the pendant wins.
        let values: Vec<f64> = (1..=5)
            .map(|j| {
                commutator_bound(&p.h_f, &initial_pauli(&p, 5, j, Axis::X), &p.psi_t, 1.0).unwrap()
            })
            .filter(|r| r.is_applicable())
            .map(|r| r.value)
            .collect();
        assert_abs_diff_eq!(
            values.iter().cloned().fold(0.0, f64::max),
            r.value,
            epsilon = 1e-15
        );

        assert!(
            auto_select_for_problem(&p, WitnessSide::Initial, &WitnessFamily::Custom(vec![]))
                .is_err()
        );
    }

    #[test]
    fn auto_select_breaks_ties_by_site() {
        // Symmetric star: every leaf gives the same bound.
        let g = SpinGraph::ising(4, &[(1, 2), (1, 3), (1, 4)], 1.0).unwrap();
        let p = spin_network_problem(&g, 1.0, 1.0).unwrap();
        let (w, _) =
            auto_select_for_problem(&p, WitnessSide::Initial, &WitnessFamily::SingleSitePaulis)
                .unwrap();
        assert_eq!(w.description(), "sigma_x^(2)");
    }

    #[test]
    fn reports_serialize_with_expected_shape() {
        let r = grover_bound(4, 1, 1.0, 1.0).unwrap();
        let v: Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["name"], "grover");
        assert_eq!(v["status"], "APPLICABLE");
        assert!(v["citation"].is_string() && v["inputs"].is_object());
        let back: BoundReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn cap_terms_obey_the_variance_bound_on_random_schedules() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let p = grover_problem_dim(8, &[5], 1.0, 1.0).unwrap();
        let term = schedule_independent_bound(&p).unwrap().inputs["terms"][0]
            .as_f64()
            .unwrap();
        let var_f = variance(&p.psi0, &p.h_f).unwrap();
        let d = bures_distance(&p.psi_t, &p.psi0).unwrap();
        for _ in 0..50 {
            let segs: Vec<Segment> = (0..10)
                .map(|_| Segment {
                    dt: rng.gen_range(0.05..0.5),
                    f: rng.gen_range(-1.0..1.0),
                    g: rng.gen_range(-1.0..1.0),
                })
                .collect();
            let s = Schedule::new(segs, 1.0, 1.0).unwrap();
            let t = s.total_time();
            let avg: f64 =
                s.segments().iter().map(|x| x.dt * x.g.abs()).sum::<f64>() / t * var_f.sqrt();
            assert!(d / avg >= term - 1e-12);
        }
    }
}
