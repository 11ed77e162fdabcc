//! Hamiltonian families: Grover search, 2-local spin networks, and the
//! (perturbed) p-spin model, together with ground-space extraction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    expectation, hermitian_eig, spin_dim, Axis, CMatrix, CVector, Operator, PauliMask, StateVector,
};
use crate::tol;

/// One coupling term `h * sigma_a^(i) sigma_b^(j)`; vertices are 1-based with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub a: Axis,
    pub b: Axis,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Normalization {
    /// `|V| / |E|`, which makes the Hamiltonian extensive.
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for Normalization {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Normalization::Auto => s.serialize_str("auto"),
            Normalization::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Normalization {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Normalization::Fixed(v)),
            Raw::Str(s) if s.eq_ignore_ascii_case("auto") => Ok(Normalization::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "normalization must be a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpinGraph")]
pub struct SpinGraph {
    #[serde(rename = "n")]
    n_vertices: usize,
    edges: Vec<Coupling>,
    #[serde(default)]
    normalization: Normalization,
}

#[derive(Deserialize)]
struct RawSpinGraph {
    n: usize,
    edges: Vec<Coupling>,
    #[serde(default)]
    normalization: Normalization,
}

impl TryFrom<RawSpinGraph> for SpinGraph {
    type Error = Error;

    fn try_from(raw: RawSpinGraph) -> Result<Self> {
        SpinGraph::with_normalization(raw.n, raw.edges, raw.normalization)
    }
}

impl SpinGraph {
    pub fn new(n_vertices: usize, edges: Vec<Coupling>) -> Result<Self> {
        Self::with_normalization(n_vertices, edges, Normalization::Auto)
    }

    pub fn with_normalization(
        n_vertices: usize,
        edges: Vec<Coupling>,
        normalization: Normalization,
    ) -> Result<Self> {
        if n_vertices == 0 {
            return Err(invalid("graph needs at least one vertex"));
        }
        let mut seen = BTreeSet::new();
        for (k, e) in edges.iter().enumerate() {
            if e.i == 0 || e.j > n_vertices || e.i >= e.j {
                return Err(invalid(format!(
                    "edge {k}: need 1 <= i < j <= {n_vertices}, got i={}, j={}",
                    e.i, e.j
                )));
            }
            if !e.h.is_finite() {
                return Err(invalid(format!("edge {k}: coupling is not finite")));
            }
            if !seen.insert((e.i, e.j, e.a, e.b)) {
                return Err(invalid(format!(
                    "edge {k}: duplicate coupling ({}, {}, {}, {})",
                    e.i,
                    e.j,
                    e.a.label(),
                    e.b.label()
                )));
            }
        }
        if let Normalization::Fixed(v) = normalization {
            if !v.is_finite() {
                return Err(invalid("normalization must be finite"));
            }
        }
        Ok(Self {
            n_vertices,
            edges,
            normalization,
        })
    }

    /// Single `zz` coupling of strength `h` on every listed pair.
    pub fn ising(n_vertices: usize, pairs: &[(usize, usize)], h: f64) -> Result<Self> {
        let edges = pairs
            .iter()
            .map(|&(i, j)| Coupling {
                i: i.min(j),
                j: i.max(j),
                a: Axis::Z,
                b: Axis::Z,
                h,
            })
            .collect();
        Self::new(n_vertices, edges)
    }

    /// Complete graph on vertices `1..=k` with a pendant vertex `k+1` attached to `k`.
    pub fn complete_plus_pendant_ising(k: usize, h: f64) -> Result<Self> {
        let mut pairs = Vec::new();
        for i in 1..=k {
            for j in i + 1..=k {
                pairs.push((i, j));
            }
        }
        pairs.push((k, k + 1));
        Self::ising(k + 1, &pairs, h)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[Coupling] {
        &self.edges
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Number of distinct vertex pairs carrying at least one coupling.
    pub fn n_edges(&self) -> usize {
        self.edges
            .iter()
            .map(|e| (e.i, e.j))
            .collect::<BTreeSet<_>>()
            .len()
    }

    fn neighbours(&self) -> BTreeMap<usize, BTreeSet<usize>> {
        let mut adj: BTreeMap<usize, BTreeSet<usize>> = (1..=self.n_vertices)
            .map(|v| (v, BTreeSet::new()))
            .collect();
        for e in &self.edges {
            adj.get_mut(&e.i).unwrap().insert(e.j);
            adj.get_mut(&e.j).unwrap().insert(e.i);
        }
        adj
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbours().get(&v).map_or(0, |s| s.len())
    }

    /// Largest coupling magnitude.
    pub fn h_max(&self) -> f64 {
        self.edges.iter().fold(0.0, |acc, e| acc.max(e.h.abs()))
    }

    /// Resolves the normalization constant actually used.
    pub fn normalization_value(&self, normalization: Normalization) -> Result<f64> {
        match normalization {
            Normalization::Fixed(v) => Ok(v),
            Normalization::Auto => {
                let e = self.n_edges();
                if e == 0 {
                    return Err(invalid("automatic normalization needs at least one edge"));
                }
                Ok(self.n_vertices as f64 / e as f64)
            }
        }
    }
}

/// Vertex with the fewest distinct neighbours, lowest index on ties.
pub fn min_degree_vertex(g: &SpinGraph) -> (usize, usize) {
    g.neighbours()
        .into_iter()
        .map(|(v, nb)| (v, nb.len()))
        .min_by_key(|&(v, deg)| (deg, v))
        .expect("graph has at least one vertex")
}

/// `N * sum h sigma_a^(i) sigma_b^(j)` over the graph's couplings.
pub fn spin_network_hf(g: &SpinGraph, normalization: Normalization) -> Result<Operator> {
    let n = g.n_vertices();
    let d = spin_dim(n)?;
    let norm = g.normalization_value(normalization)?;
    let mut m = CMatrix::zeros(d, d);
    for e in g.edges() {
        PauliMask::new(n, &[(e.i, e.a), (e.j, e.b)])?.add_to(&mut m, norm * e.h);
    }
    Operator::hermitian(m)
}

/// `-sum_j sigma_x^(j)`.
pub fn transverse_field_hi(n: usize) -> Result<Operator> {
    let d = spin_dim(n)?;
    let mut m = CMatrix::zeros(d, d);
    for j in 1..=n {
        PauliMask::new(n, &[(j, Axis::X)])?.add_to(&mut m, -1.0);
    }
    Operator::hermitian(m)
}

/// `sigma_z` eigenvalue (+1 for bit 0) of site `site` (1-based) in basis state `k`.
fn spin_z(n: usize, k: usize, site: usize) -> f64 {
    if (k >> (n - site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn magnetization(n_total: usize, k: usize, sites: std::ops::RangeInclusive<usize>) -> f64 {
    sites.map(|s| spin_z(n_total, k, s)).sum()
}

/// `n (1 - M_x / n) = n - M_x`, the p-spin mixer.
pub fn pspin_mixer(n: usize) -> Result<Operator> {
    let d = spin_dim(n)?;
    transverse_field_hi(n)?.combine(1.0, &Operator::identity(d)?, n as f64)
}

/// `n (1 - M_z^p / n^p)` as a diagonal operator.
pub fn pspin_hf(n: usize, p: u32) -> Result<Operator> {
    let d = spin_dim(n)?;
    let nf = n as f64;
    let diag: Vec<f64> = (0..d)
        .map(|k| nf * (1.0 - magnetization(n, k, 1..=n).powi(p as i32) / nf.powi(p as i32)))
        .collect();
    Operator::diagonal(&diag)
}

/// `n (1 - (M_z^p + lambda sigma_z^(n) sigma_z^(n+1)) / n^p)` on `n + 1` spins,
/// with `M_z` summed over the first `n` spins.
pub fn perturbed_pspin_hf(n: usize, p: u32, lambda: f64) -> Result<Operator> {
    if n < 2 {
        return Err(invalid("p-spin block needs at least two spins"));
    }
    if p == 0 {
        return Err(invalid("p must be positive"));
    }
    let total = n + 1;
    let d = spin_dim(total)?;
    let nf = n as f64;
    let diag: Vec<f64> = (0..d)
        .map(|k| {
            let mz = magnetization(total, k, 1..=n);
            let pert = lambda * spin_z(total, k, n) * spin_z(total, k, n + 1);
            nf * (1.0 - (mz.powi(p as i32) + pert) / nf.powi(p as i32))
        })
        .collect();
    Operator::diagonal(&diag)
}

/// Orthogonal projector onto the eigenspace of the lowest eigenvalue.
///
/// Levels within `degeneracy_tol * max(spectral range, 1)` of the minimum are
/// included.
pub fn ground_space_projector(h: &Operator, degeneracy_tol: f64) -> Result<Operator> {
    let eig = hermitian_eig(h)?;
    let lo = eig.eigenvalues[0];
    let hi = *eig.eigenvalues.last().unwrap();
    let cutoff = lo + degeneracy_tol * (hi - lo).max(1.0);
    let d = h.dim();
    let mut p = CMatrix::zeros(d, d);
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= cutoff {
            let v = eig.eigenvectors.column(j);
            p += v * v.adjoint();
        }
    }
    Operator::hermitian(p)
}

/// Everything needed to pose a preparation task under `H(t) = f(t) H_i + g(t) H_f`.
#[derive(Debug, Clone)]
pub struct AnnealingProblem {
    pub h_i: Operator,
    pub h_f: Operator,
    pub psi0: StateVector,
    /// Target state; a representative when the ground space is degenerate.
    pub psi_t: StateVector,
    /// Projector onto the full target ground space.
    pub ground_projector: Operator,
    pub f_max: f64,
    pub g_max: f64,
}

impl AnnealingProblem {
    /// Validates the problem invariants.
    pub fn new(
        h_i: Operator,
        h_f: Operator,
        psi0: StateVector,
        psi_t: StateVector,
        ground_projector: Operator,
        f_max: f64,
        g_max: f64,
    ) -> Result<Self> {
        let d = h_i.dim();
        for dim in [h_f.dim(), psi0.dim(), psi_t.dim(), ground_projector.dim()] {
            if dim != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: dim,
                });
            }
        }
        if !(f_max > 0.0) || !(g_max > 0.0) {
            return Err(invalid(format!(
                "amplitude caps must be positive, got f_max={f_max}, g_max={g_max}"
            )));
        }
        for (name, op) in [("H_i", &h_i), ("H_f", &h_f)] {
            if !op.is_hermitian() {
                return Err(invalid(format!("{name} is not Hermitian")));
            }
        }
        let e0 = hermitian_eig(&h_i)?.eigenvalues[0];
        let energy = expectation(&psi0, &h_i)?;
        if (energy - e0).abs() > tol::GROUND_ENERGY * e0.abs().max(1.0) {
            return Err(invalid(format!(
                "initial state has energy {energy} but the ground energy of H_i is {e0}"
            )));
        }
        let defect = ground_projector.projector_defect();
        if defect > tol::PROJECTOR {
            return Err(Error::NotProjector(defect));
        }
        let fixed: CVector = ground_projector.apply(&psi_t)?;
        let miss = (fixed - psi_t.amplitudes())
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        if miss > tol::EIGENSTATE {
            return Err(invalid(format!(
                "target state lies outside the ground space ({miss:.3e})"
            )));
        }
        Ok(Self {
            h_i,
            h_f,
            psi0,
            psi_t,
            ground_projector,
            f_max,
            g_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.h_i.dim()
    }

    /// Same Hamiltonians and initial state, different target state.
    ///
    /// The projector becomes `|target><target|`; used when a reached state is
    /// substituted as the target.
    pub fn with_target(&self, target: StateVector) -> Result<Self> {
        let projector = Operator::projector_onto(&target)?;
        let mut out = self.clone();
        out.psi_t = target;
        out.ground_projector = projector;
        Ok(out)
    }

    pub fn with_caps(&self, f_max: f64, g_max: f64) -> Result<Self> {
        if !(f_max > 0.0) || !(g_max > 0.0) {
            return Err(invalid("amplitude caps must be positive"));
        }
        let mut out = self.clone();
        out.f_max = f_max;
        out.g_max = g_max;
        Ok(out)
    }
}

/// Analog Grover search in dimension `dim` with the given marked items.
pub fn grover_problem_dim(
    dim: usize,
    marked: &[usize],
    f_max: f64,
    g_max: f64,
) -> Result<AnnealingProblem> {
    if marked.is_empty() {
        return Err(invalid("marked set must be nonempty"));
    }
    if dim < 2 {
        return Err(invalid("dimension must be at least 2"));
    }
    if dim > tol::MAX_DIM {
        return Err(Error::DimensionCap(dim));
    }
    let marked: BTreeSet<usize> = marked.iter().copied().collect();
    if let Some(&bad) = marked.iter().find(|&&k| k >= dim) {
        return Err(invalid(format!(
            "marked index {bad} out of range for dimension {dim}"
        )));
    }
    let psi0 = StateVector::uniform(dim)?;
    let id = Operator::identity(dim)?;
    let h_i = id.combine(1.0, &Operator::projector_onto(&psi0)?, -1.0)?;
    let diag: Vec<f64> = (0..dim)
        .map(|k| if marked.contains(&k) { 0.0 } else { 1.0 })
        .collect();
    let h_f = Operator::diagonal(&diag)?;
    let marked_vec: Vec<usize> = marked.into_iter().collect();
    let psi_t = StateVector::uniform_over(dim, &marked_vec)?;
    let proj_diag: Vec<f64> = diag.iter().map(|&x| 1.0 - x).collect();
    let projector = Operator::diagonal(&proj_diag)?;
    AnnealingProblem::new(h_i, h_f, psi0, psi_t, projector, f_max, g_max)
}

/// Analog Grover search on `n` qubits.
pub fn grover_problem(
    n: usize,
    marked: &[usize],
    f_max: f64,
    g_max: f64,
) -> Result<AnnealingProblem> {
    grover_problem_dim(spin_dim(n)?, marked, f_max, g_max)
}

fn lowest_diagonal_state(h: &Operator) -> Result<StateVector> {
    let m = h.matrix();
    let k = (0..h.dim())
        .min_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re))
        .unwrap();
    StateVector::basis(h.dim(), k)
}

/// The p-spin model with mixer `n (1 - M_x / n)`.
pub fn pspin_problem(n: usize, p: u32, f_max: f64, g_max: f64) -> Result<AnnealingProblem> {
    if n < 2 {
        return Err(invalid("p-spin model needs at least two spins"));
    }
    if p == 0 {
        return Err(invalid("p must be positive"));
    }
    let h_i = pspin_mixer(n)?;
    let h_f = pspin_hf(n, p)?;
    let psi_t = lowest_diagonal_state(&h_f)?;
    let projector = ground_space_projector(&h_f, tol::GROUND_DEGENERACY)?;
    AnnealingProblem::new(
        h_i,
        h_f,
        StateVector::plus_state(n)?,
        psi_t,
        projector,
        f_max,
        g_max,
    )
}

/// The p-spin block of `n` spins with a pendant spin `n + 1` coupled to spin `n`.
pub fn perturbed_pspin_problem(
    n: usize,
    p: u32,
    lambda: f64,
    f_max: f64,
    g_max: f64,
) -> Result<AnnealingProblem> {
    let h_f = perturbed_pspin_hf(n, p, lambda)?;
    let h_i = pspin_mixer(n + 1)?;
    let psi_t = lowest_diagonal_state(&h_f)?;
    let projector = ground_space_projector(&h_f, tol::GROUND_DEGENERACY)?;
    AnnealingProblem::new(
        h_i,
        h_f,
        StateVector::plus_state(n + 1)?,
        psi_t,
        projector,
        f_max,
        g_max,
    )
}

/// Transverse-field mixer with a spin-network target Hamiltonian.
///
/// The target state is the lowest-energy computational basis state when
/// `H_f` is diagonal, otherwise the first ground eigenvector.
pub fn spin_network_problem(g: &SpinGraph, f_max: f64, g_max: f64) -> Result<AnnealingProblem> {
    let n = g.n_vertices();
    let h_f = spin_network_hf(g, g.normalization())?;
    let h_i = transverse_field_hi(n)?;
    let projector = ground_space_projector(&h_f, tol::GROUND_DEGENERACY)?;
    let diagonal = g.edges().iter().all(|e| e.a == Axis::Z && e.b == Axis::Z);
    let psi_t = if diagonal {
        lowest_diagonal_state(&h_f)?
    } else {
        let eig = hermitian_eig(&h_f)?;
        StateVector::normalized(eig.eigenvectors.column(0).into_owned())?
    };
    AnnealingProblem::new(
        h_i,
        h_f,
        StateVector::plus_state(n)?,
        psi_t,
        projector,
        f_max,
        g_max,
    )
}
