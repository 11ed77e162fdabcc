//! Numerical tolerances shared by every module.
//!
//! All thresholds live here so that the checks in `linalg`, `models`,
//! `bounds` and `dynamics` agree with each other.

/// Largest Hilbert-space dimension handled by the dense routines (12 spins).
pub const MAX_DIM: usize = 4096;

/// Max-entry deviation `|A - A^dagger|` accepted for a Hermitian operator,
/// scaled by `max(1, max |A_ij|)`.
pub const HERMITIAN: f64 = 1e-12;

/// Max-entry deviation of `U^dagger U` from the identity.
pub const UNITARY: f64 = 1e-10;

/// Deviation of a state norm from one.
pub const NORM: f64 = 1e-10;

/// Max-entry deviation for `P^2 = P` and `P^dagger = P`.
pub const PROJECTOR: f64 = 1e-10;

/// Eigenvalue grouping tolerance for near-degenerate levels.
pub const DEGENERACY: f64 = 1e-10;

/// Default relative degeneracy tolerance when extracting a ground space.
pub const GROUND_DEGENERACY: f64 = 1e-8;

/// Ground-state energy check for initial states.
pub const GROUND_ENERGY: f64 = 1e-8;

/// Residual accepted for eigenvector equations such as `H psi = E psi`.
pub const EIGENSTATE: f64 = 1e-8;

/// Numerators and denominators of bound ratios below this are treated as zero.
pub const ZERO: f64 = 1e-12;

/// Imaginary residue allowed in an expectation value, relative to `max(1, |<A>|)`.
pub const IMAG_RESIDUE: f64 = 1e-10;

/// Commutation test for witnesses.
pub const COMMUTATION: f64 = 1e-10;

/// Slack allowed when checking that an achieved time dominates a bound.
pub const DOMINANCE_SLACK: f64 = 1e-6;

/// Amplitude-cap slack for schedules.
pub const CAP: f64 = 1e-12;
