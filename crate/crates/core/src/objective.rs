//! Achievable-rate objective `f(theta, Q) = ln det(I + Z(theta) Q Z(theta)^H)`
//! and its complex gradients with respect to `theta*` and `Q*`.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::channel::{ChannelSet, ScaledChannels};
use crate::error::{Result, RisError};
use crate::numerics::{self, CMatrix, CVector};

/// RIS reflection coefficients with a common modulus (1, or `1/k` when scaled).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    theta: CVector,
    modulus: f64,
}

impl PhaseVector {
    pub const MODULUS_TOL: f64 = 1e-9;

    pub fn new(theta: CVector, modulus: f64) -> Result<Self> {
        if !(modulus > 0.0) {
            return Err(RisError::InvalidParameter(format!("phase modulus must be positive, got {modulus}")));
        }
        if let Some((l, z)) = theta
            .iter()
            .enumerate()
            .find(|(_, z)| (z.norm() - modulus).abs() > Self::MODULUS_TOL)
        {
            return Err(RisError::Infeasible(format!(
                "|theta_{l}| = {} differs from the target modulus {modulus}",
                z.norm()
            )));
        }
        Ok(Self { theta, modulus })
    }

    /// All elements equal to `modulus` (zero phase).
    pub fn uniform(n: usize, modulus: f64) -> Self {
        Self {
            theta: CVector::from_element(n, Complex64::new(modulus, 0.0)),
            modulus,
        }
    }

    pub fn from_phases(phases: &[f64], modulus: f64) -> Self {
        Self {
            theta: CVector::from_iterator(phases.len(), phases.iter().map(|&p| Complex64::from_polar(modulus, p))),
            modulus,
        }
    }

    pub(crate) fn from_raw(theta: CVector, modulus: f64) -> Self {
        Self { theta, modulus }
    }

    pub fn as_vector(&self) -> &CVector {
        &self.theta
    }

    pub fn into_vector(self) -> CVector {
        self.theta
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.theta.iter().map(|z| z.arg()).collect()
    }

    /// Same phases on a different circle.
    pub fn rescaled(&self, modulus: f64) -> Self {
        Self {
            theta: self.theta.scale(modulus / self.modulus),
            modulus,
        }
    }
}

/// Transmit covariance: Hermitian, PSD, trace within `budget`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    q: CMatrix,
    budget: f64,
}

impl CovarianceMatrix {
    pub fn new(q: CMatrix, budget: f64) -> Result<Self> {
        if !(budget >= 0.0) {
            return Err(RisError::InvalidParameter(format!("power budget must be >= 0, got {budget}")));
        }
        let scale = numerics::max_abs(&q).max(budget).max(1.0);
        numerics::ensure_hermitian(&q, 1e-10)?;
        let eig = numerics::hermitian_eig_with_tol(&q, 1e-10)?;
        if let Some(&min) = eig.eigenvalues.iter().next() {
            if min < -1e-9 * scale {
                return Err(RisError::Infeasible(format!("covariance has negative eigenvalue {min}")));
            }
        }
        let trace = q.trace().re;
        if trace > budget + 1e-9 * scale {
            return Err(RisError::Infeasible(format!("trace {trace} exceeds the budget {budget}")));
        }
        Ok(Self {
            q: numerics::hermitize(&q),
            budget,
        })
    }

    /// `(budget / n) I`.
    pub fn scaled_identity(n: usize, budget: f64) -> Self {
        let diag = if n == 0 { 0.0 } else { budget / n as f64 };
        Self {
            q: CMatrix::identity(n, n).scale(diag),
            budget,
        }
    }

    pub fn zeros(n: usize, budget: f64) -> Self {
        Self {
            q: CMatrix::zeros(n, n),
            budget,
        }
    }

    pub(crate) fn from_raw(q: CMatrix, budget: f64) -> Self {
        Self { q, budget }
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.q
    }

    pub fn into_matrix(self) -> CMatrix {
        self.q
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn trace(&self) -> f64 {
        self.q.trace().re
    }

    /// `factor * Q` on the budget `factor * budget`.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            q: self.q.scale(factor),
            budget: self.budget * factor,
        }
    }
}

/// Gradients with respect to `theta*` and `Q*`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub g_theta: CVector,
    pub g_q: CMatrix,
}

fn check_dims(sc: &ScaledChannels, theta: &CVector, q: Option<&CMatrix>) -> Result<()> {
    if theta.len() != sc.n_ris() {
        return Err(RisError::DimensionMismatch(format!(
            "theta has {} entries, channels have {} RIS elements",
            theta.len(),
            sc.n_ris()
        )));
    }
    if let Some(q) = q {
        if q.nrows() != sc.tx_antennas() || q.ncols() != sc.tx_antennas() {
            return Err(RisError::DimensionMismatch(format!(
                "Q is {}x{}, expected {}x{}",
                q.nrows(),
                q.ncols(),
                sc.tx_antennas(),
                sc.tx_antennas()
            )));
        }
    }
    Ok(())
}

/// `H_2 diag(theta) H_1` without forming the diagonal matrix.
fn cascade(h2: &CMatrix, theta: &CVector, h1: &CMatrix) -> CMatrix {
    let mut h2f = h2.clone();
    for (l, t) in theta.iter().enumerate() {
        for x in h2f.column_mut(l).iter_mut() { *x *= *t; }
    }
    h2f * h1
}

/// `Z(theta) = Hbar_DIR + H_2 diag(theta) Hbar_1` for arbitrary coefficients.
pub fn effective_z_raw(sc: &ScaledChannels, theta: &CVector) -> Result<CMatrix> {
    check_dims(sc, theta, None)?;
    Ok(&sc.h_dir + cascade(&sc.h2, theta, &sc.h1))
}

pub fn effective_z(sc: &ScaledChannels, theta: &PhaseVector) -> Result<CMatrix> {
    effective_z_raw(sc, theta.as_vector())
}

fn gram_plus_identity(z: &CMatrix, q: &CMatrix) -> CMatrix {
    let n = z.nrows();
    numerics::hermitize(&(CMatrix::identity(n, n) + z * q * z.adjoint()))
}

/// `ln det(I + Z Q Z^H)` for arbitrary (theta, Q) of matching size.
pub fn rate_nats_raw(sc: &ScaledChannels, theta: &CVector, q: &CMatrix) -> Result<f64> {
    check_dims(sc, theta, Some(q))?;
    let z = effective_z_raw(sc, theta)?;
    numerics::ln_det_hpd(&gram_plus_identity(&z, q))
}

pub fn rate_nats(sc: &ScaledChannels, theta: &PhaseVector, q: &CovarianceMatrix) -> Result<f64> {
    rate_nats_raw(sc, theta.as_vector(), q.as_matrix())
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

/// Closed-form gradients; `K Z` comes from a Hermitian PD solve, never an inverse.
pub fn gradients_raw(sc: &ScaledChannels, theta: &CVector, q: &CMatrix) -> Result<GradientPair> {
    check_dims(sc, theta, Some(q))?;
    let z = effective_z_raw(sc, theta)?;
    let kz = numerics::solve_hpd(&gram_plus_identity(&z, q), &z)?;
    let g_q = numerics::hermitize(&(z.adjoint() * &kz));
    // diag(H_2^H K Z Q Hbar_1^H)
    let left = sc.h2.adjoint() * (&kz * q);
    let g_theta = CVector::from_iterator(
        sc.n_ris(),
        (0..sc.n_ris()).map(|l| {
            left.row(l)
                .iter()
                .zip(sc.h1.row(l).iter())
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
        }),
    );
    Ok(GradientPair { g_theta, g_q })
}

pub fn gradients(sc: &ScaledChannels, theta: &PhaseVector, q: &CovarianceMatrix) -> Result<GradientPair> {
    gradients_raw(sc, theta.as_vector(), q.as_matrix())
}

/// Rate in bits/s/Hz of the physical channel `H(theta)` in original variables,
/// `log2 det(I + H Q H^H / N_0)`.
pub fn channel_rate_bits(ch: &ChannelSet, theta: &CVector, q: &CMatrix) -> Result<f64> {
    if theta.len() != ch.n_ris() {
        return Err(RisError::DimensionMismatch(format!(
            "theta has {} entries, channel has {} RIS elements",
            theta.len(),
            ch.n_ris()
        )));
    }
    let h = ch.compose(theta);
    let n = h.nrows();
    let m = numerics::hermitize(&(CMatrix::identity(n, n) + (&h * q * h.adjoint()).unscale(ch.noise)));
    Ok(nats_to_bits(numerics::ln_det_hpd(&m)?))
}
