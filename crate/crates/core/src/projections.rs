//! Euclidean projections onto the phase set, the trace-bounded PSD cone and
//! the discrete-phase codebook.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, RisError};
use crate::numerics::{self, CMatrix, CVector};
use crate::objective::{CovarianceMatrix, PhaseVector};

/// Hermitian tolerance for inputs to [`project_q`].
pub const PROJECT_Q_HERMITIAN_TOL: f64 = 1e-8;

/// Maps every entry onto the circle of radius `modulus`, keeping its phase.
/// Zero entries go to phase 0.
pub fn project_theta(u: &CVector, modulus: f64) -> Result<PhaseVector> {
    if !(modulus > 0.0) {
        return Err(RisError::InvalidParameter(format!("phase modulus must be positive, got {modulus}")));
    }
    let theta = u.map(|z| {
        let r = z.norm();
        if r == 0.0 {
            Complex64::new(modulus, 0.0)
        } else {
            z * (modulus / r)
        }
    });
    Ok(PhaseVector::from_raw(theta, modulus))
}

/// Projection onto `{Q >= 0, tr(Q) <= budget}`: eigen-decompose, water-fill
/// the clamped eigenvalues, recompose. Indefinite input is fine.
pub fn project_q(y: &CMatrix, budget: f64) -> Result<CovarianceMatrix> {
    let eig = numerics::hermitian_eig_with_tol(y, PROJECT_Q_HERMITIAN_TOL)?;
    let clamped: Vec<f64> = eig.eigenvalues.iter().map(|&s| s.max(0.0)).collect();
    let levels = numerics::waterfill_projection(&clamped, budget)?;
    let mut projected = eig.clone();
    projected.eigenvalues = nalgebra::DVector::from_vec(levels);
    Ok(CovarianceMatrix::from_raw(projected.recompose(), budget))
}

/// Rounds every phase to the nearest point of the `2^bits`-PSK grid, keeping
/// the modulus.
pub fn project_discrete_phases(theta: &PhaseVector, bits: u32) -> Result<PhaseVector> {
    if bits == 0 || bits > 30 {
        return Err(RisError::InvalidParameter(format!("phase resolution must be 1..=30 bits, got {bits}")));
    }
    let levels = 1u64 << bits;
    let step = 2.0 * PI / levels as f64;
    let modulus = theta.modulus();
    let out = theta.as_vector().map(|z| {
        let m = (z.arg() / step).round().rem_euclid(levels as f64);
        Complex64::from_polar(modulus, m * step)
    });
    Ok(PhaseVector::from_raw(out, modulus))
}
