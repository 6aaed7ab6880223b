//! Dense complex linear-algebra kernels and the two water-filling routines.
//!
//! The matrix factorizations are delegated to `nalgebra`; this module pins
//! down the contracts the rest of the crate relies on (ascending eigenvalue
//! order, Hermitian validation, zero clamping) so call sites never touch the
//! raw decompositions.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, RisError};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance used when validating Hermitian inputs to the eigensolver.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues this close to zero (relative to the spectrum scale) are set to zero.
pub const EIGEN_ZERO_CLAMP: f64 = 1e-12;

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEigen {
    /// Rebuilds `U diag(λ) U^H`, optionally mapping each eigenvalue first.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = f(lambda);
            scaled.column_mut(j).scale_mut(v);
        }
        hermitize(&(scaled * u.adjoint()))
    }

    pub fn recompose(&self) -> CMatrix {
        self.recompose_with(|x| x)
    }
}

/// Rejects matrices holding NaN or infinite entries.
pub fn check_finite(m: &CMatrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(RisError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Largest entrywise deviation `|M_ij - conj(M_ji)|`.
pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Returns `(M + M^H) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn ensure_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(RisError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let tolerance = tol * max_abs(m).max(1.0);
    let asymmetry = hermitian_asymmetry(m);
    if asymmetry > tolerance {
        return Err(RisError::NotHermitian { asymmetry, tolerance });
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues come back ascending.
pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEigen> {
    hermitian_eig_with_tol(m, HERMITIAN_TOL)
}

pub(crate) fn hermitian_eig_with_tol(m: &CMatrix, tol: f64) -> Result<HermitianEigen> {
    ensure_hermitian(m, tol)?;
    check_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            eigenvalues: DVector::zeros(0),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let scale = eig.eigenvalues.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let eigenvalues = DVector::from_iterator(
        n,
        order.iter().map(|&k| {
            let v = eig.eigenvalues[k];
            if v.abs() <= EIGEN_ZERO_CLAMP * scale {
                0.0
            } else {
                v
            }
        }),
    );
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest singular value (spectral norm). Zero for empty or zero matrices.
pub fn largest_singular_value(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Solves `A X = B` for Hermitian positive-definite `A` via Cholesky.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(RisError::DimensionMismatch(format!(
            "solve_hpd: A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(cholesky_hpd(a)?.solve(b))
}

// nalgebra takes complex square roots of the pivots, so a negative pivot does
// not fail by itself; reject anything whose factor has a non-positive diagonal.
fn cholesky_hpd(a: &CMatrix) -> Result<Cholesky<Complex64, Dyn>> {
    let chol = Cholesky::new(hermitize(a)).ok_or(RisError::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    let ok = (0..a.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    if ok {
        Ok(chol)
    } else {
        Err(RisError::NotPositiveDefinite)
    }
}

/// `ln det(A)` for Hermitian positive-definite `A`.
pub fn ln_det_hpd(a: &CMatrix) -> Result<f64> {
    let chol = cholesky_hpd(a)?;
    let l = chol.l_dirty();
    Ok((0..a.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Euclidean projection of `sigma` onto `{d >= 0, sum d <= budget}`:
/// `d_i = (sigma_i - gamma)_+` with the water level found exactly by sorting.
pub fn waterfill_projection(sigma: &[f64], budget: f64) -> Result<Vec<f64>> {
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(RisError::InvalidParameter(format!(
            "water-filling budget must be non-negative, got {budget}"
        )));
    }
    if let Some(bad) = sigma.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(RisError::InvalidParameter(format!(
            "water-filling levels must be finite and non-negative, got {bad}"
        )));
    }
    let total: f64 = sigma.iter().sum();
    if total <= budget {
        return Ok(sigma.to_vec());
    }
    let mut sorted = sigma.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut gamma = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        prefix += s;
        let candidate = (prefix - budget) / (i + 1) as f64;
        if s - candidate > 0.0 {
            gamma = candidate;
        } else {
            break;
        }
    }
    Ok(sigma.iter().map(|&s| (s - gamma).max(0.0)).collect())
}

/// Capacity-achieving power allocation over parallel channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    /// Water level `mu`; zero when the channel is degenerate.
    pub water_level: f64,
    /// Set when every gain is zero and nothing can be allocated.
    pub degenerate: bool,
}

/// Classical water-filling: `p_i = (mu - noise / g_i)_+` with `sum p_i = budget`.
///
/// `mu` is located by bisection to `1e-12` (relative to its bracket); the
/// result is then rescaled so the budget is met to rounding error.
pub fn waterfill_capacity(gains: &[f64], budget: f64, noise: f64) -> Result<PowerAllocation> {
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(RisError::InvalidParameter(format!(
            "power budget must be non-negative, got {budget}"
        )));
    }
    if !(noise > 0.0) {
        return Err(RisError::InvalidParameter(format!(
            "noise power must be positive, got {noise}"
        )));
    }
    if let Some(bad) = gains.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
        return Err(RisError::InvalidParameter(format!(
            "channel gains must be finite and non-negative, got {bad}"
        )));
    }
    let floors: Vec<Option<f64>> = gains
        .iter()
        .map(|&g| (g > 0.0).then(|| noise / g))
        .collect();
    let max_floor = floors.iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if max_floor == f64::NEG_INFINITY {
        return Ok(PowerAllocation {
            powers: vec![0.0; gains.len()],
            water_level: 0.0,
            degenerate: true,
        });
    }
    let allocated = |mu: f64| -> f64 {
        floors
            .iter()
            .flatten()
            .map(|&fl| (mu - fl).max(0.0))
            .sum()
    };
    let min_floor = floors.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
    let mut lo = min_floor;
    let mut hi = max_floor + budget;
    let tol = 1e-12 * hi.abs().max(1.0);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if allocated(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let mut powers: Vec<f64> = floors
        .iter()
        .map(|fl| fl.map_or(0.0, |fl| (mu - fl).max(0.0)))
        .collect();
    let sum: f64 = powers.iter().sum();
    if sum > 0.0 {
        let r = budget / sum;
        powers.iter_mut().for_each(|p| *p *= r);
    }
    Ok(PowerAllocation {
        powers,
        water_level: mu,
        degenerate: false,
    })
}
