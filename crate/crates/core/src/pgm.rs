//! Projected gradient ascent on the scaled problem.
//!
//! Each iteration moves `theta` and `Q` together along their gradients and
//! projects back onto the feasible sets. The step is either a fixed value,
//! `0.999 / L` from the Lipschitz bound, or found by Armijo backtracking over
//! `L0 * rho^k`.

use rand::Rng;

use crate::channel::ScaledChannels;
use crate::error::{Result, RisError};
use crate::numerics::{self, CMatrix};
use crate::objective::{self, CovarianceMatrix, PhaseVector};
use crate::projections::{project_q, project_theta};
use crate::trace::{IterationRecord, IterationUnit, OptimizerTrace, RateProbe};

/// Fraction of `1/L` used by [`StepMode::Lipschitz`]; convergence needs `mu < 1/L`.
pub const LIPSCHITZ_STEP_FRACTION: f64 = 0.999;

/// Largest objective drop (nats) tolerated for a move at the minimum step.
pub const FLOOR_STEP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    /// `mu = 0.999 / L` with `L` from [`lipschitz_constant`].
    Lipschitz,
    /// Constant user-supplied step.
    Fixed(f64),
    /// Armijo backtracking over `L0 * rho^k`.
    LineSearch,
}

/// Optional early stop on stalled progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StallRule {
    pub relative_improvement: f64,
    pub window: usize,
}

impl Default for StallRule {
    fn default() -> Self {
        Self {
            relative_improvement: 1e-8,
            window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgmConfig {
    pub max_iterations: usize,
    pub step_mode: StepMode,
    /// Initial line-search step `L0`.
    pub l0: f64,
    /// Sufficient-increase constant `delta`.
    pub delta: f64,
    /// Backtracking ratio `rho`.
    pub rho: f64,
    /// Step threshold: the smallest trial step is the largest `L0 rho^k` below it.
    pub min_step: f64,
    pub stall: Option<StallRule>,
}

impl Default for PgmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_mode: StepMode::LineSearch,
            l0: 1e4,
            delta: 1e-5,
            rho: 0.5,
            min_step: 1e-4,
            stall: None,
        }
    }
}

impl PgmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l0 > 0.0) || !(self.delta > 0.0) || !(self.min_step > 0.0) {
            return Err(RisError::InvalidParameter("L0, delta and min_step must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(RisError::InvalidParameter(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if let StepMode::Fixed(mu) = self.step_mode {
            if !(mu > 0.0) {
                return Err(RisError::InvalidParameter(format!("fixed step must be positive, got {mu}")));
            }
        }
        Ok(())
    }

    /// Exponent of the smallest trial step: the least `k` with `L0 rho^k < min_step`.
    pub fn max_backtracks(&self) -> u32 {
        let mut k = 0u32;
        let mut step = self.l0;
        while step >= self.min_step {
            step *= self.rho;
            k += 1;
        }
        k
    }
}

/// `(L_theta^2, L_Q^2)` for the bounds `a`, `b` and scaled budget `P`.
pub fn lipschitz_polynomials(a: f64, b: f64, p: f64) -> (f64, f64) {
    let l_theta = (2.0 * a * b.powi(5) + 4.0 * a * a * b * b)
        + (a.powi(3) * b + 2.0 * a * b.powi(7) + 8.0 * a * a * b.powi(4)) * p
        + (3.0 * a.powi(3) * b.powi(3) + a.powi(4) + 4.0 * a * a * b.powi(6)) * p * p
        + (2.0 * a.powi(3) * b.powi(5) + 4.0 * a.powi(4) * b * b) * p.powi(3)
        + 4.0 * a.powi(4) * b.powi(4) * p.powi(4);
    let l_q = (a * a * b * b + b.powi(8) + 2.0 * a * b.powi(5))
        + (2.0 * a * a * b.powi(4) + a.powi(3) * b + 2.0 * a * b.powi(7)) * p
        + (a * a * b.powi(6) + 3.0 * a.powi(3) * b.powi(3)) * p * p
        + 2.0 * a.powi(3) * b.powi(5) * p.powi(3);
    (l_theta, l_q)
}

/// Lipschitz constant of the scaled objective's gradient.
pub fn lipschitz_constant(sc: &ScaledChannels) -> f64 {
    let a = numerics::largest_singular_value(&sc.h1) * numerics::largest_singular_value(&sc.h2);
    let b = numerics::largest_singular_value(&sc.h_dir) + a / sc.k;
    let (lt, lq) = lipschitz_polynomials(a, b, sc.budget);
    lt.max(lq).sqrt()
}

/// Default start in scaled variables: `theta = 1/k`, `Q = (P_t/N_t) I` scaled.
pub fn default_start(sc: &ScaledChannels) -> (PhaseVector, CovarianceMatrix) {
    (
        PhaseVector::uniform(sc.n_ris(), sc.phase_modulus()),
        CovarianceMatrix::scaled_identity(sc.tx_antennas(), sc.budget),
    )
}

/// Random start in scaled variables: uniform phases and a random full-power covariance.
pub fn random_start<R: Rng + ?Sized>(sc: &ScaledChannels, rng: &mut R) -> (PhaseVector, CovarianceMatrix) {
    let phases: Vec<f64> = (0..sc.n_ris())
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let nt = sc.tx_antennas();
    let a = crate::channel::complex_normal_matrix(rng, nt, nt);
    let g = numerics::hermitize(&(&a * a.adjoint()));
    let tr = g.trace().re;
    let q = if tr > 0.0 {
        g.scale(sc.budget / tr)
    } else {
        CMatrix::identity(nt, nt).scale(sc.budget / nt as f64)
    };
    (
        PhaseVector::from_phases(&phases, sc.phase_modulus()),
        CovarianceMatrix::from_raw(q, sc.budget),
    )
}

fn check_start(sc: &ScaledChannels, theta: &PhaseVector, q: &CovarianceMatrix) -> Result<()> {
    if theta.len() != sc.n_ris() || q.as_matrix().nrows() != sc.tx_antennas() {
        return Err(RisError::DimensionMismatch("starting point does not match the channel sizes".into()));
    }
    let target = sc.phase_modulus();
    PhaseVector::new(theta.as_vector().clone(), target)
        .map_err(|e| RisError::Infeasible(format!("initial phases: {e}")))?;
    CovarianceMatrix::new(q.as_matrix().clone(), sc.budget)
        .map_err(|e| RisError::Infeasible(format!("initial covariance: {e}")))?;
    Ok(())
}

struct Candidate {
    theta: PhaseVector,
    q: CovarianceMatrix,
    rate: f64,
    moved_sq: f64,
}

fn step_to(
    sc: &ScaledChannels,
    theta: &PhaseVector,
    q: &CovarianceMatrix,
    grad: &objective::GradientPair,
    mu: f64,
) -> Result<Candidate> {
    let next_theta = project_theta(&(theta.as_vector() + grad.g_theta.scale(mu)), sc.phase_modulus())?;
    let next_q = project_q(&(q.as_matrix() + grad.g_q.scale(mu)), sc.budget)?;
    let rate = objective::rate_nats(sc, &next_theta, &next_q)?;
    let moved_sq = (next_theta.as_vector() - theta.as_vector()).norm_squared()
        + (next_q.as_matrix() - q.as_matrix()).norm_squared();
    Ok(Candidate {
        theta: next_theta,
        q: next_q,
        rate,
        moved_sq,
    })
}

/// Runs the projected gradient method from a feasible scaled start.
pub fn run_pgm(
    sc: &ScaledChannels,
    cfg: &PgmConfig,
    init_theta: PhaseVector,
    init_q: CovarianceMatrix,
) -> Result<OptimizerTrace> {
    run_pgm_probed(sc, cfg, init_theta, init_q, None)
}

/// [`run_pgm`] with the recorded rates taken from `probe` instead of the
/// objective. The iterates themselves are unaffected.
pub fn run_pgm_probed(
    sc: &ScaledChannels,
    cfg: &PgmConfig,
    init_theta: PhaseVector,
    init_q: CovarianceMatrix,
    probe: Option<RateProbe<'_>>,
) -> Result<OptimizerTrace> {
    cfg.validate()?;
    check_start(sc, &init_theta, &init_q)?;

    let mut theta = init_theta;
    let mut q = init_q;
    let mut rate = objective::rate_nats(sc, &theta, &q)?;
    let k = sc.k;
    let report = |theta: &PhaseVector, q: &CovarianceMatrix, rate: f64| -> Result<f64> {
        match probe {
            Some(p) => p(&theta.as_vector().scale(k), &q.as_matrix().unscale(k * k)),
            None => Ok(objective::nats_to_bits(rate)),
        }
    };
    let mut records = Vec::with_capacity(cfg.max_iterations + 1);
    records.push(IterationRecord {
        rate_bits: report(&theta, &q, rate)?,
        step_size: 0.0,
        line_search_trials: 0,
    });

    let fixed_step = match cfg.step_mode {
        StepMode::Lipschitz => {
            let l = lipschitz_constant(sc);
            Some(if l > 0.0 { LIPSCHITZ_STEP_FRACTION / l } else { 1.0 })
        }
        StepMode::Fixed(mu) => Some(mu),
        StepMode::LineSearch => None,
    };
    let max_k = cfg.max_backtracks();
    let mut last_k = 0u32;
    let mut stopped_early = false;

    for _ in 0..cfg.max_iterations {
        let grad = objective::gradients(sc, &theta, &q)?;
        let (cand, mu, trials) = match fixed_step {
            Some(mu) => (Some(step_to(sc, &theta, &q, &grad, mu)?), mu, 0),
            None => {
                // warm start one step above the last accepted exponent
                let mut k = last_k.saturating_sub(1);
                let mut trials = 0u32;
                loop {
                    let mu = cfg.l0 * cfg.rho.powi(k as i32);
                    let cand = step_to(sc, &theta, &q, &grad, mu)?;
                    trials += 1;
                    if cand.rate >= rate + cfg.delta * cand.moved_sq {
                        last_k = k;
                        break (Some(cand), mu, trials);
                    }
                    if k >= max_k {
                        last_k = k;
                        let ok = cand.rate >= rate - FLOOR_STEP_SLACK;
                        break (ok.then_some(cand), mu, trials);
                    }
                    k += 1;
                }
            }
        };
        let Some(cand) = cand else {
            stopped_early = true;
            break;
        };
        theta = cand.theta;
        q = cand.q;
        rate = cand.rate;
        records.push(IterationRecord {
            rate_bits: report(&theta, &q, rate)?,
            step_size: mu,
            line_search_trials: trials,
        });
        if let Some(rule) = cfg.stall {
            if stalled(&records, rule) {
                stopped_early = true;
                break;
            }
        }
    }

    Ok(OptimizerTrace {
        unit: IterationUnit::Iteration,
        records,
        theta: theta.rescaled(1.0),
        covariance: q.rescaled(1.0 / (k * k)),
        stopped_early,
    })
}

fn stalled(records: &[IterationRecord], rule: StallRule) -> bool {
    if records.len() <= rule.window {
        return false;
    }
    let now = records[records.len() - 1].rate_bits;
    let then = records[records.len() - 1 - rule.window].rate_bits;
    (now - then).abs() <= rule.relative_improvement * now.abs().max(f64::MIN_POSITIVE)
}
