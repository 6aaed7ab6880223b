//! Alternating-optimization baseline.
//!
//! Phases are updated one element at a time in closed form with the
//! covariance fixed, then the covariance is water-filled for the new phases.
//! One outer iteration is a full sweep over the elements plus one covariance
//! update. Everything here works on the noise-normalized channel
//! `H = H_d + R diag(alpha) T` with unit noise.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::ChannelSet;
use crate::error::{Result, RisError};
use crate::numerics::{self, CMatrix, CVector};
use crate::objective::{self, CovarianceMatrix, PhaseVector};
use crate::trace::{IterationRecord, IterationUnit, OptimizerTrace, RateProbe};

/// Below this `|tr(A^-1 B)|` the phase is left unchanged.
pub const PHASE_UPDATE_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct AoConfig {
    /// Random phase candidates tried at initialization.
    pub initializations: usize,
    pub max_outer_iterations: usize,
    /// Optional stop on relative rate improvement per outer iteration.
    pub tolerance: Option<f64>,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            initializations: 100,
            max_outer_iterations: 20,
            tolerance: None,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initializations == 0 {
            return Err(RisError::InvalidParameter("AO needs at least one initial candidate".into()));
        }
        Ok(())
    }
}

/// Noise-normalized problem data.
#[derive(Debug, Clone, PartialEq)]
pub struct AoProblem {
    /// `H_DIR / sqrt(N_0)`.
    pub hd: CMatrix,
    /// `H_2`; column `m` is `r_m`.
    pub r: CMatrix,
    /// `H_1 sqrt(beta_INDIR^-1 / N_0)`; row `m` is `t_m^H`.
    pub t: CMatrix,
    pub transmit_power: f64,
}

impl AoProblem {
    pub fn new(ch: &ChannelSet, transmit_power: f64) -> Result<Self> {
        ch.validate()?;
        if !(transmit_power > 0.0) {
            return Err(RisError::InvalidParameter(format!(
                "transmit power must be positive, got {transmit_power}"
            )));
        }
        let sqrt_n0 = ch.noise.sqrt();
        Ok(Self {
            hd: ch.h_dir.unscale(sqrt_n0),
            r: ch.h2.clone(),
            t: ch.h1.scale((ch.beta_indir_inv / ch.noise).sqrt()),
            transmit_power,
        })
    }

    pub fn n_ris(&self) -> usize {
        self.t.nrows()
    }

    pub fn tx_antennas(&self) -> usize {
        self.hd.ncols()
    }

    pub fn channel(&self, alpha: &CVector) -> CMatrix {
        let mut rf = self.r.clone();
        for (m, a) in alpha.iter().enumerate() {
            for x in rf.column_mut(m).iter_mut() {
                *x *= *a;
            }
        }
        &self.hd + rf * &self.t
    }

    pub fn rate_bits(&self, alpha: &CVector, q: &CMatrix) -> Result<f64> {
        let h = self.channel(alpha);
        let n = h.nrows();
        let m = numerics::hermitize(&(CMatrix::identity(n, n) + &h * q * h.adjoint()));
        Ok(objective::nats_to_bits(numerics::ln_det_hpd(&m)?))
    }

    /// Capacity-achieving covariance for fixed phases: right singular vectors
    /// of `H` (rank `min(N_t, N_r)`) loaded by water-filling.
    pub fn waterfill_covariance(&self, alpha: &CVector) -> Result<CMatrix> {
        waterfill_covariance(&self.channel(alpha), self.transmit_power)
    }
}

/// `V diag(p) V^H` from the SVD of `h` with unit noise.
pub fn waterfill_covariance(h: &CMatrix, budget: f64) -> Result<CMatrix> {
    let nt = h.ncols();
    if h.nrows() == 0 || nt == 0 {
        return Ok(CMatrix::identity(nt, nt).scale(budget / nt.max(1) as f64));
    }
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| RisError::InvalidParameter("SVD did not converge".into()))?;
    let gains: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let alloc = numerics::waterfill_capacity(&gains, budget, 1.0)?;
    if alloc.degenerate {
        return Ok(CMatrix::identity(nt, nt).scale(budget / nt as f64));
    }
    let mut q = CMatrix::zeros(nt, nt);
    for (i, p) in alloc.powers.iter().enumerate() {
        if *p > 0.0 {
            let v = v_t.row(i).adjoint();
            q += (&v * v.adjoint()).scale(*p);
        }
    }
    Ok(numerics::hermitize(&q))
}

/// Unit-modulus `alpha` maximizing `det(A + alpha B + alpha* B^H)` for rank-one
/// `B`: the determinant is `det(A) (1 + 2 Re(alpha p) + const)` with
/// `p = tr(A^-1 B)`, so `alpha = exp(-j arg p)`. Keeps `current` when `p` vanishes.
pub fn closed_form_phase(a: &CMatrix, b: &CMatrix, current: Complex64) -> Result<Complex64> {
    let p = numerics::solve_hpd(a, b)?.trace();
    if p.norm() <= PHASE_UPDATE_EPS {
        Ok(current)
    } else {
        Ok(Complex64::from_polar(1.0, -p.arg()))
    }
}

/// Per-sweep state: `S = H' + R diag(alpha) T'` with `H' = H_d U Sigma^1/2`
/// and `T' = T U Sigma^1/2` for the fixed covariance `Q = U Sigma U^H`.
#[derive(Debug, Clone)]
pub struct AoSweep {
    pub s: CMatrix,
    pub r: CMatrix,
    pub t_prime: CMatrix,
    pub alpha: CVector,
}

impl AoSweep {
    pub fn new(problem: &AoProblem, alpha: CVector, q: &CMatrix) -> Result<Self> {
        let eig = numerics::hermitian_eig(q)?;
        let w = eig.eigenvectors.clone()
            * CMatrix::from_diagonal(&eig.eigenvalues.map(|s| Complex64::new(s.max(0.0).sqrt(), 0.0)));
        let h_prime = &problem.hd * &w;
        let t_prime = &problem.t * &w;
        let mut sweep = Self {
            s: h_prime,
            r: problem.r.clone(),
            t_prime,
            alpha,
        };
        sweep.s += sweep.cascade();
        Ok(sweep)
    }

    fn cascade(&self) -> CMatrix {
        let mut rf = self.r.clone();
        for (m, a) in self.alpha.iter().enumerate() {
            for x in rf.column_mut(m).iter_mut() {
                *x *= *a;
            }
        }
        rf * &self.t_prime
    }

    /// `r_m t'_m^H`.
    fn rank_one(&self, m: usize) -> CMatrix {
        self.r.column(m) * self.t_prime.row(m)
    }

    /// `(A_m, B_m)` for element `m` at the current state.
    pub fn element_terms(&self, m: usize) -> (CMatrix, CMatrix) {
        let g = self.rank_one(m);
        let s_m = &self.s - g.scale_c(self.alpha[m]);
        let n = s_m.nrows();
        let a = numerics::hermitize(&(CMatrix::identity(n, n) + &s_m * s_m.adjoint() + &g * g.adjoint()));
        let b = &g * s_m.adjoint();
        (a, b)
    }

    pub fn update_element(&mut self, m: usize) -> Result<()> {
        let (a, b) = self.element_terms(m);
        let next = closed_form_phase(&a, &b, self.alpha[m])?;
        let g = self.rank_one(m);
        self.s += g.scale_c(next - self.alpha[m]);
        self.alpha[m] = next;
        Ok(())
    }

    pub fn sweep(&mut self) -> Result<()> {
        for m in 0..self.alpha.len() {
            self.update_element(m)?;
        }
        Ok(())
    }

    /// `ln det(I + S S^H)`.
    pub fn objective_nats(&self) -> Result<f64> {
        let n = self.s.nrows();
        numerics::ln_det_hpd(&numerics::hermitize(&(CMatrix::identity(n, n) + &self.s * self.s.adjoint())))
    }

    /// `S` rebuilt from scratch for the current phases.
    pub fn rebuilt(&self, problem: &AoProblem, q: &CMatrix) -> Result<CMatrix> {
        Ok(Self::new(problem, self.alpha.clone(), q)?.s)
    }
}

trait ScaleC {
    fn scale_c(&self, a: Complex64) -> CMatrix;
}

impl ScaleC for CMatrix {
    fn scale_c(&self, a: Complex64) -> CMatrix {
        self.map(|x| x * a)
    }
}

/// Best of `initializations` uniform-phase candidates, each paired with its
/// water-filled covariance. Candidates are drawn up front so the result does
/// not depend on the worker count.
pub fn ao_init<R: Rng + ?Sized>(
    problem: &AoProblem,
    cfg: &AoConfig,
    rng: &mut R,
) -> Result<(CVector, CMatrix, f64)> {
    cfg.validate()?;
    let n = problem.n_ris();
    let candidates: Vec<CVector> = (0..cfg.initializations)
        .map(|_| {
            CVector::from_fn(n, |_, _| {
                Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
            })
        })
        .collect();
    let scored: Vec<(CMatrix, f64)> = candidates
        .par_iter()
        .map(|alpha| {
            let q = problem.waterfill_covariance(alpha)?;
            let rate = problem.rate_bits(alpha, &q)?;
            Ok((q, rate))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, (_, rate)) in scored.iter().enumerate() {
        if *rate > scored[best].1 {
            best = i;
        }
    }
    let (q, rate) = scored.into_iter().nth(best).expect("at least one candidate");
    Ok((candidates.into_iter().nth(best).expect("at least one candidate"), q, rate))
}

/// Runs AO from the best random start. Entry 0 of the trace is that start;
/// each later entry is the rate after one outer iteration.
pub fn run_ao<R: Rng + ?Sized>(ch: &ChannelSet, transmit_power: f64, cfg: &AoConfig, rng: &mut R) -> Result<OptimizerTrace> {
    run_ao_probed(ch, transmit_power, cfg, rng, None)
}

/// [`run_ao`] with recorded rates taken from `probe`.
pub fn run_ao_probed<R: Rng + ?Sized>(
    ch: &ChannelSet,
    transmit_power: f64,
    cfg: &AoConfig,
    rng: &mut R,
    probe: Option<RateProbe<'_>>,
) -> Result<OptimizerTrace> {
    let problem = AoProblem::new(ch, transmit_power)?;
    let (mut alpha, mut q, mut rate) = ao_init(&problem, cfg, rng)?;
    let report = |alpha: &CVector, q: &CMatrix, rate: f64| match probe {
        Some(p) => p(alpha, q),
        None => Ok(rate),
    };
    let mut records = vec![IterationRecord {
        rate_bits: report(&alpha, &q, rate)?,
        step_size: 0.0,
        line_search_trials: 0,
    }];
    let mut stopped_early = false;
    for _ in 0..cfg.max_outer_iterations {
        let mut sweep = AoSweep::new(&problem, alpha, &q)?;
        sweep.sweep()?;
        alpha = sweep.alpha;
        q = problem.waterfill_covariance(&alpha)?;
        let next = problem.rate_bits(&alpha, &q)?;
        let improvement = next - rate;
        rate = next;
        records.push(IterationRecord {
            rate_bits: report(&alpha, &q, rate)?,
            step_size: 0.0,
            line_search_trials: 0,
        });
        if let Some(tol) = cfg.tolerance {
            if improvement.abs() <= tol * rate.abs().max(f64::MIN_POSITIVE) {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(OptimizerTrace {
        unit: IterationUnit::Outer,
        records,
        theta: PhaseVector::from_raw(alpha, 1.0),
        covariance: CovarianceMatrix::from_raw(q, transmit_power),
        stopped_early,
    })
}
