//! Dense complex linear algebra for states and Hermitian operators.
//!
//! Everything here is exact dense arithmetic on `nalgebra` matrices. The
//! Hilbert-space dimension is capped at [`tol::MAX_DIM`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tol;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

fn check_dim(d: usize) -> Result<()> {
    if d > tol::MAX_DIM {
        return Err(Error::DimensionCap(d));
    }
    Ok(())
}

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: CVector,
}

impl StateVector {
    /// Wraps an amplitude vector that is already normalized.
    pub fn new(amps: CVector) -> Result<Self> {
        let d = amps.len();
        if d < 2 {
            return Err(invalid(format!(
                "state dimension must be at least 2, got {d}"
            )));
        }
        check_dim(d)?;
        let norm = amps.norm();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amps })
    }

    /// Normalizes `amps` and wraps it.
    pub fn normalized(amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized(norm));
        }
        Self::new(amps.unscale(norm))
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::normalized(CVector::from_column_slice(amps))
    }

    /// Computational basis state `|index>`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(invalid(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = CVector::zeros(dim);
        amps[index] = ONE;
        Self::new(amps)
    }

    /// Equal superposition over all basis states.
    pub fn uniform(dim: usize) -> Result<Self> {
        let a = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self::new(CVector::from_element(dim, a))
    }

    /// Equal superposition over the given basis states.
    pub fn uniform_over(dim: usize, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("empty support"));
        }
        let mut amps = CVector::zeros(dim);
        for &k in indices {
            if k >= dim {
                return Err(invalid(format!(
                    "basis index {k} out of range for dimension {dim}"
                )));
            }
            amps[k] = ONE;
        }
        Self::normalized(amps)
    }

    /// `|+>^{n}`, the ground state of the transverse-field mixer.
    pub fn plus_state(n: usize) -> Result<Self> {
        Self::uniform(spin_dim(n)?)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        same_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// Applies a unitary matrix, renormalizing away rounding drift.
    pub fn evolve(&self, u: &CMatrix) -> Result<StateVector> {
        same_dim(self.dim(), u.ncols())?;
        StateVector::normalized(u * &self.amps)
    }
}

/// `2^n`, checked against the dense cap.
pub fn spin_dim(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(invalid("spin count must be positive"));
    }
    if n > 12 {
        return Err(Error::DimensionCap(
            1usize.checked_shl(n as u32).unwrap_or(usize::MAX),
        ));
    }
    Ok(1 << n)
}

fn same_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Square complex matrix, optionally certified Hermitian at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    mat: CMatrix,
    hermitian: bool,
}

/// `max |A - A^dagger|` over entries.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            let dev = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(dev);
        }
    }
    worst
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// `max |A_ij - B_ij|`; infinite when the shapes differ.
pub fn max_entry_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

impl Operator {
    /// Checks Hermiticity and dimension and wraps the matrix.
    pub fn hermitian(mat: CMatrix) -> Result<Self> {
        Self::check_square(&mat)?;
        let defect = hermiticity_defect(&mat);
        if defect > tol::HERMITIAN * max_abs(&mat).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        // Symmetrize so later eigensolves see an exactly Hermitian input.
        let sym = (&mat + mat.adjoint()).unscale(2.0);
        Ok(Self {
            mat: sym,
            hermitian: true,
        })
    }

    /// Wraps an arbitrary square matrix (e.g. a unitary witness).
    pub fn general(mat: CMatrix) -> Result<Self> {
        Self::check_square(&mat)?;
        let hermitian = hermiticity_defect(&mat) <= tol::HERMITIAN * max_abs(&mat).max(1.0);
        Ok(Self { mat, hermitian })
    }

    fn check_square(mat: &CMatrix) -> Result<()> {
        if mat.nrows() != mat.ncols() {
            return Err(invalid(format!(
                "matrix is {}x{}, not square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.nrows() == 0 {
            return Err(invalid("empty matrix"));
        }
        check_dim(mat.nrows())
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::hermitian(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::hermitian(CMatrix::zeros(dim, dim))
    }

    /// Real diagonal operator.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let v = CVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self::hermitian(CMatrix::from_diagonal(&v))
    }

    /// `|psi><psi|`.
    pub fn projector_onto(psi: &StateVector) -> Result<Self> {
        let a = psi.amplitudes();
        Self::hermitian(a * a.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Real linear combination `a*self + b*other` of Hermitian operators.
    pub fn combine(&self, a: f64, other: &Operator, b: f64) -> Result<Operator> {
        same_dim(self.dim(), other.dim())?;
        let mat = self.mat.scale(a) + other.mat.scale(b);
        if self.hermitian && other.hermitian {
            Ok(Operator {
                mat,
                hermitian: true,
            })
        } else {
            Operator::general(mat)
        }
    }

    pub fn scaled(&self, a: f64) -> Operator {
        Operator {
            mat: self.mat.scale(a),
            hermitian: self.hermitian,
        }
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Operator) -> Result<Operator> {
        let mat = self.mat.kronecker(&other.mat);
        Self::check_square(&mat)?;
        Ok(Operator {
            mat,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn apply(&self, psi: &StateVector) -> Result<CVector> {
        same_dim(self.dim(), psi.dim())?;
        Ok(&self.mat * psi.amplitudes())
    }

    /// `max |U^dagger U - 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim();
        max_abs(&(self.mat.adjoint() * &self.mat - CMatrix::identity(d, d)))
    }

    /// `max(|P^2 - P|, |P - P^dagger|)`.
    pub fn projector_defect(&self) -> f64 {
        let idem = max_abs(&(&self.mat * &self.mat - &self.mat));
        idem.max(hermiticity_defect(&self.mat))
    }

    /// `Tr(A^2)` for Hermitian `A`, i.e. the squared Frobenius norm.
    pub fn trace_of_square(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Eigenvalues in ascending order with the matching column eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `exp(-i t H)` assembled from the spectral decomposition.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let phase = C64::from_polar(1.0, -lam * t);
            scaled.column_mut(j).scale_mut_c(phase);
        }
        scaled * q.adjoint()
    }

    /// `exp(-i t H) v` without forming the propagator.
    pub fn evolve(&self, v: &CVector, t: f64) -> CVector {
        let q = &self.eigenvectors;
        let mut coeffs = q.ad_mul(v);
        for (c, &lam) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= C64::from_polar(1.0, -lam * t);
        }
        q * coeffs
    }

    /// `max |A - Q diag(lambda) Q^dagger|`.
    pub fn reconstruction_residual(&self, a: &CMatrix) -> f64 {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        max_abs(&(a - scaled * q.adjoint()))
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let d = self.dim();
        max_abs(&(self.eigenvectors.adjoint() * &self.eigenvectors - CMatrix::identity(d, d)))
    }
}

trait ScaleComplex {
    fn scale_mut_c(&mut self, c: C64);
}

impl<S> ScaleComplex for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_c(&mut self, c: C64) {
        for z in self.iter_mut() {
            *z *= c;
        }
    }
}

const EIG_MAX_SWEEPS: usize = 10_000;

/// Full eigendecomposition of a Hermitian operator.
pub fn hermitian_eig(a: &Operator) -> Result<EigenDecomposition> {
    if !a.is_hermitian() {
        return Err(Error::NotHermitian(hermiticity_defect(a.matrix())));
    }
    eig_hermitian_matrix(a.matrix())
}

pub(crate) fn eig_hermitian_matrix(m: &CMatrix) -> Result<EigenDecomposition> {
    let d = m.nrows();
    if d == 1 {
        return Ok(EigenDecomposition {
            eigenvalues: vec![m[(0, 0)].re],
            eigenvectors: CMatrix::identity(1, 1),
        });
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIG_MAX_SWEEPS)
        .ok_or(Error::NoConvergence)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = CMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(invalid("spectral norm requires a square matrix"));
    }
    let scale = max_abs(a);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let slack = tol::HERMITIAN * scale.max(1.0);
    if hermiticity_defect(a) <= slack {
        return max_abs_eigenvalue(&(a + a.adjoint()).unscale(2.0));
    }
    // Commutators of Hermitian operators are anti-Hermitian; i*A is then Hermitian.
    let ia = a * I;
    if hermiticity_defect(&ia) <= slack {
        return max_abs_eigenvalue(&(&ia + ia.adjoint()).unscale(2.0));
    }
    let gram = a.adjoint() * a;
    let lam = max_abs_eigenvalue(&(&gram + gram.adjoint()).unscale(2.0))?;
    Ok(lam.max(0.0).sqrt())
}

fn max_abs_eigenvalue(h: &CMatrix) -> Result<f64> {
    let eig = eig_hermitian_matrix(h)?;
    let lo = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let hi = eig.eigenvalues.last().copied().unwrap_or(0.0);
    Ok(lo.abs().max(hi.abs()))
}

/// `exp(-i t H)` via the eigendecomposition of `H`.
pub fn matrix_exp_unitary(h: &Operator, t: f64) -> Result<CMatrix> {
    if !t.is_finite() {
        return Err(invalid("propagation time must be finite"));
    }
    Ok(hermitian_eig(h)?.propagator(t))
}

/// `sqrt(2 (1 - |<a|b>|))`.
pub fn bures_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    let overlap = a.inner(b)?.norm().min(1.0);
    Ok((2.0 * (1.0 - overlap)).max(0.0).sqrt())
}

/// Bures distance expressed through the overlap magnitude.
pub fn bures_from_overlap(overlap: f64) -> f64 {
    (2.0 * (1.0 - overlap.clamp(0.0, 1.0))).sqrt()
}

/// `<psi|A|psi>` for Hermitian `A`.
pub fn expectation(psi: &StateVector, a: &Operator) -> Result<f64> {
    if !a.is_hermitian() {
        return Err(Error::NotHermitian(hermiticity_defect(a.matrix())));
    }
    let z = psi.amplitudes().dotc(&a.apply(psi)?);
    if z.im.abs() > tol::IMAG_RESIDUE * z.re.abs().max(1.0) {
        return Err(invalid(format!(
            "expectation has imaginary part {:.3e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// `<A^2> - <A>^2`, evaluated as `||(A - <A>) psi||^2` so it is never negative.
pub fn variance(psi: &StateVector, a: &Operator) -> Result<f64> {
    let mean = expectation(psi, a)?;
    let av = a.apply(psi)?;
    let centered = av - psi.amplitudes().scale(mean);
    Ok(centered.norm_squared())
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(invalid(format!(
            "commutator shapes {:?} and {:?} are incompatible",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a * b - b * a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn label(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(invalid(format!("unknown Pauli axis {other:?}"))),
        }
    }
}

/// A product of single-site Paulis stored as bit masks.
///
/// Acting on `|k>` it flips the bits in `x_mask` and multiplies by
/// `i^{#y} (-1)^{popcount(k & z_mask)}`. Site `1` is the most significant bit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PauliMask {
    x_mask: usize,
    z_mask: usize,
    y_count: u32,
}

impl PauliMask {
    pub(crate) fn new(n: usize, factors: &[(usize, Axis)]) -> Result<Self> {
        let mut x_mask = 0usize;
        let mut z_mask = 0usize;
        let mut y_count = 0;
        let mut seen = 0usize;
        for &(site, axis) in factors {
            if site == 0 || site > n {
                return Err(invalid(format!("site {site} out of range 1..={n}")));
            }
            let bit = 1usize << (n - site);
            if seen & bit != 0 {
                return Err(invalid(format!("duplicate site {site} in Pauli string")));
            }
            seen |= bit;
            match axis {
                Axis::X => x_mask |= bit,
                Axis::Z => z_mask |= bit,
                Axis::Y => {
                    x_mask |= bit;
                    z_mask |= bit;
                    y_count += 1;
                }
            }
        }
        Ok(Self {
            x_mask,
            z_mask,
            y_count,
        })
    }

    /// Column `k` has a single nonzero entry at row `k ^ x_mask`.
    #[inline]
    pub(crate) fn entry(&self, k: usize) -> (usize, C64) {
        // Y = i X Z, so each Y contributes a factor i and a Z acting first.
        let sign = if (k & self.z_mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let phase = match self.y_count % 4 {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        };
        (k ^ self.x_mask, phase * sign)
    }

    pub(crate) fn add_to(&self, m: &mut CMatrix, coeff: f64) {
        for k in 0..m.ncols() {
            let (row, val) = self.entry(k);
            m[(row, k)] += val * coeff;
        }
    }
}

/// Tensor product of single-site Paulis, identity on the remaining sites.
/// Sites are 1-based.
pub fn pauli_string(n: usize, factors: &[(usize, Axis)]) -> Result<Operator> {
    let d = spin_dim(n)?;
    let mask = PauliMask::new(n, factors)?;
    let mut m = CMatrix::zeros(d, d);
    mask.add_to(&mut m, 1.0);
    Operator::hermitian(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sx() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }
    fn sy() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }
    fn sz() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    #[test]
    fn bures_examples() {
        let zero = StateVector::basis(2, 0).unwrap();
        let one = StateVector::basis(2, 1).unwrap();
        assert_abs_diff_eq!(bures_distance(&zero, &zero).unwrap(), 0.0);
        assert_abs_diff_eq!(
            bures_distance(&zero, &one).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        // overlap 1/sqrt(10), as for a single marked item among ten.
        let uni = StateVector::uniform(10).unwrap();
        let m = StateVector::basis(10, 3).unwrap();
        assert_abs_diff_eq!(
            bures_distance(&uni, &m).unwrap(),
            1.169_421_3,
            epsilon = 1e-6
        );
        assert!(bures_distance(&zero, &StateVector::uniform(4).unwrap()).is_err());
    }

    #[test]
    fn bures_ignores_global_phase() {
        let a = StateVector::from_slice(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let b = StateVector::new(a.amplitudes() * C64::from_polar(1.0, 1.234)).unwrap();
        assert!(bures_distance(&a, &b).unwrap() < 1e-7);
    }

    #[test]
    fn eig_pauli_and_identity() {
        let e = hermitian_eig(&Operator::hermitian(sz()).unwrap()).unwrap();
        assert_eq!(e.eigenvalues, vec![-1.0, 1.0]);
        let e = hermitian_eig(&Operator::identity(4).unwrap()).unwrap();
        for v in e.eigenvalues {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(Operator::hermitian(m.clone()).is_err());
        let op = Operator::general(m).unwrap();
        assert!(matches!(hermitian_eig(&op), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn spectral_norm_examples() {
        let c = commutator(&sz(), &sx()).unwrap();
        assert!(max_entry_diff(&c, &(sy() * C64::new(0.0, 2.0))) < 1e-15);
        assert_abs_diff_eq!(spectral_norm(&c).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            spectral_norm(&CMatrix::identity(5, 5)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // A non-normal matrix goes through the Gram route.
        let n = CMatrix::from_row_slice(2, 2, &[ZERO, C64::new(3.0, 0.0), ZERO, ZERO]);
        assert_abs_diff_eq!(spectral_norm(&n).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn exp_examples() {
        let h = Operator::hermitian(sz()).unwrap();
        let u0 = matrix_exp_unitary(&h, 0.0).unwrap();
        assert!(max_entry_diff(&u0, &CMatrix::identity(2, 2)) < 1e-14);
        let u = matrix_exp_unitary(&h, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((u[(0, 0)] + I).norm() < 1e-14);
        assert!((u[(1, 1)] - I).norm() < 1e-14);
        assert!(u[(0, 1)].norm() < 1e-14);
        // Rabi rotation: exp(-i t X)|0> = (cos t, -i sin t).
        let hx = Operator::hermitian(sx()).unwrap();
        for &t in &[0.3, 1.1, 2.9] {
            let psi = StateVector::basis(2, 0)
                .unwrap()
                .evolve(&matrix_exp_unitary(&hx, t).unwrap())
                .unwrap();
            assert!((psi.amplitudes()[0] - C64::new(t.cos(), 0.0)).norm() < 1e-13);
            assert!((psi.amplitudes()[1] - C64::new(0.0, -t.sin())).norm() < 1e-13);
        }
        assert!(matrix_exp_unitary(&hx, f64::NAN).is_err());
    }

    #[test]
    fn expectation_examples() {
        let zero = StateVector::basis(2, 0).unwrap();
        assert_abs_diff_eq!(
            expectation(&zero, &Operator::hermitian(sz()).unwrap()).unwrap(),
            1.0
        );
        let plus = StateVector::plus_state(3).unwrap();
        let mut hi = Operator::zeros(8).unwrap();
        for j in 1..=3 {
            hi = hi
                .combine(1.0, &pauli_string(3, &[(j, Axis::X)]).unwrap(), -1.0)
                .unwrap();
        }
        assert_abs_diff_eq!(expectation(&plus, &hi).unwrap(), -3.0, epsilon = 1e-12);
        let m = StateVector::basis(8, 5).unwrap();
        assert_abs_diff_eq!(
            expectation(&m, &pauli_string(3, &[(2, Axis::X)]).unwrap()).unwrap(),
            0.0
        );
        assert!(expectation(&zero, &hi).is_err());
    }

    #[test]
    fn variance_examples() {
        let zero = StateVector::basis(2, 0).unwrap();
        assert_eq!(
            variance(&zero, &Operator::hermitian(sz()).unwrap()).unwrap(),
            0.0
        );
        // Single marked state among four: 1/d - 1/d^2.
        let psi0 = StateVector::uniform(4).unwrap();
        let mut diag = vec![1.0; 4];
        diag[2] = 0.0;
        let hf = Operator::diagonal(&diag).unwrap();
        assert_abs_diff_eq!(variance(&psi0, &hf).unwrap(), 0.1875, epsilon = 1e-14);
    }

    #[test]
    fn pauli_string_examples() {
        assert_eq!(pauli_string(1, &[(1, Axis::Z)]).unwrap().matrix(), &sz());
        let zz = pauli_string(2, &[(1, Axis::Z), (2, Axis::Z)]).unwrap();
        let expected = Operator::diagonal(&[1.0, -1.0, -1.0, 1.0]).unwrap();
        assert_eq!(zz.matrix(), expected.matrix());
        let x2 = pauli_string(3, &[(2, Axis::X)]).unwrap();
        let id = CMatrix::identity(2, 2);
        assert_eq!(x2.matrix(), &id.kronecker(&sx()).kronecker(&id));
        let y1 = pauli_string(2, &[(1, Axis::Y)]).unwrap();
        assert_eq!(y1.matrix(), &sy().kronecker(&id));
        assert!(pauli_string(2, &[(1, Axis::X), (1, Axis::Z)]).is_err());
        assert!(pauli_string(2, &[(3, Axis::X)]).is_err());
        assert!(pauli_string(2, &[(0, Axis::X)]).is_err());
    }

    #[test]
    fn pauli_algebra() {
        let n = 3;
        let x1 = pauli_string(n, &[(1, Axis::X)]).unwrap();
        let z1 = pauli_string(n, &[(1, Axis::Z)]).unwrap();
        let z2 = pauli_string(n, &[(2, Axis::Z)]).unwrap();
        let anti = x1.matrix() * z1.matrix() + z1.matrix() * x1.matrix();
        assert_abs_diff_eq!(anti.norm(), 0.0);
        assert_abs_diff_eq!(commutator(x1.matrix(), z2.matrix()).unwrap().norm(), 0.0);
        let s = pauli_string(n, &[(1, Axis::Y), (3, Axis::X)]).unwrap();
        assert_eq!(s.matrix() * s.matrix(), CMatrix::identity(8, 8));
        assert!(s.unitarity_defect() < 1e-15);
    }

    #[test]
    fn dimension_guards() {
        assert!(StateVector::basis(1, 0).is_err());
        assert!(spin_dim(13).is_err());
        assert!(StateVector::new(CVector::from_element(2, ONE)).is_err());
        assert!(commutator(&CMatrix::identity(2, 2), &CMatrix::identity(3, 3)).is_err());
    }
}
