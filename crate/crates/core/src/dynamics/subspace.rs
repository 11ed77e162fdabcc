use crate::error::Result;
use crate::linalg::{eig_hermitian_matrix, CMatrix, CVector, EigenDecomposition, StateVector, C64};
use crate::models::AnnealingProblem;

/// Residual (relative to the operator scale) below which a Krylov direction
/// is considered already spanned.
const SPAN_TOL: f64 = 1e-10;

/// Smallest subspace containing `psi_0` that is invariant under both `H_i`
/// and `H_f`.
///
/// Every `H(t) = f H_i + g H_f` maps this subspace into itself, so the exact
/// dynamics never leaves it. Optimizers work in this (often tiny) basis: two
/// dimensions for Grover search, `O(n)` for permutation-symmetric spin models.
#[derive(Debug, Clone)]
pub struct DynamicalSubspace {
    basis: CMatrix,
    h_i: CMatrix,
    h_f: CMatrix,
    initial: CVector,
    /// `Q^dagger P Q = sum_j w_j w_j^dagger`.
    readout: Vec<CVector>,
    eig_i: EigenDecomposition,
    eig_f: EigenDecomposition,
}

fn inf_norm(m: &CMatrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()).unscale(2.0)
}

impl DynamicalSubspace {
    pub fn new(problem: &AnnealingProblem) -> Result<Self> {
        let hi = problem.h_i.matrix();
        let hf = problem.h_f.matrix();
        let scale = inf_norm(hi).max(inf_norm(hf)).max(1.0);
        let mut vecs: Vec<CVector> = vec![problem.psi0.amplitudes().clone()];
        let mut next = 0;
        while next < vecs.len() {
            let v = vecs[next].clone();
            next += 1;
            for h in [hi, hf] {
                let mut w = h * &v;
                // Two rounds of Gram-Schmidt.
                for _ in 0..2 {
                    for b in &vecs {
                        let c = b.dotc(&w);
                        w -= b * c;
                    }
                }
                let norm = w.norm();
                if norm > SPAN_TOL * scale {
                    vecs.push(w.unscale(norm));
                }
            }
        }
        let basis = CMatrix::from_columns(&vecs);
        let h_i = hermitize(basis.adjoint() * hi * &basis);
        let h_f = hermitize(basis.adjoint() * hf * &basis);
        let initial = basis.ad_mul(problem.psi0.amplitudes());
        let p_red = hermitize(basis.adjoint() * problem.ground_projector.matrix() * &basis);
        let p_eig = eig_hermitian_matrix(&p_red)?;
        let readout = p_eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &mu)| mu > 1e-14)
            .map(|(j, &mu)| p_eig.eigenvectors.column(j).scale(mu.sqrt()))
            .collect();
        let eig_i = eig_hermitian_matrix(&h_i)?;
        let eig_f = eig_hermitian_matrix(&h_f)?;
        Ok(Self {
            basis,
            h_i,
            h_f,
            initial,
            readout,
            eig_i,
            eig_f,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn initial(&self) -> &CVector {
        &self.initial
    }

    pub fn readout(&self) -> &[CVector] {
        &self.readout
    }

    pub fn eig_i(&self) -> &EigenDecomposition {
        &self.eig_i
    }

    pub fn eig_f(&self) -> &EigenDecomposition {
        &self.eig_f
    }

    /// `<c|P|c>` for a reduced state `c`.
    pub fn fidelity(&self, c: &CVector) -> f64 {
        self.readout.iter().map(|w| w.dotc(c).norm_sqr()).sum()
    }

    /// Reduced propagator `exp(-i dt (f H_i + g H_f))`.
    pub fn segment_propagator(&self, dt: f64, f: f64, g: f64) -> CMatrix {
        let h = self.h_i.scale(f) + self.h_f.scale(g);
        if h.nrows() == 2 {
            return exp_2x2(&h, dt);
        }
        match eig_hermitian_matrix(&h) {
            Ok(e) => e.propagator(dt),
            Err(_) => CMatrix::from_element(h.nrows(), h.ncols(), C64::new(f64::NAN, 0.0)),
        }
    }

    /// Maps a reduced state back to the full Hilbert space.
    pub fn lift(&self, c: &CVector) -> Result<StateVector> {
        StateVector::normalized(&self.basis * c)
    }
}

/// `exp(-i t H)` for a 2x2 Hermitian `H = a 1 + b . sigma`.
fn exp_2x2(h: &CMatrix, t: f64) -> CMatrix {
    let a = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let bz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let bx = h[(1, 0)].re;
    let by = h[(1, 0)].im;
    let r = (bx * bx + by * by + bz * bz).sqrt();
    let (c, s_over_r) = if r * t.abs() < 1e-8 {
        (
            1.0 - 0.5 * (r * t).powi(2),
            t * (1.0 - (r * t).powi(2) / 6.0),
        )
    } else {
        ((r * t).cos(), (r * t).sin() / r)
    };
    let phase = C64::from_polar(1.0, -a * t);
    let mi = C64::new(0.0, -1.0);
    // cos(rt) 1 - i sin(rt) (b . sigma) / r
    let u00 = C64::new(c, 0.0) + mi * s_over_r * bz;
    let u11 = C64::new(c, 0.0) - mi * s_over_r * bz;
    let u01 = mi * s_over_r * C64::new(bx, -by);
    let u10 = mi * s_over_r * C64::new(bx, by);
    CMatrix::from_row_slice(2, 2, &[u00 * phase, u01 * phase, u10 * phase, u11 * phase])
}
