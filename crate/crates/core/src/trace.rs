use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::{CMatrix, CVector};
use crate::objective::{CovarianceMatrix, PhaseVector};

/// Replaces the rate an optimizer reports for its iterates. Called with the
/// unscaled phases and covariance; used to score iterates against quantized
/// phases or a channel other than the one being optimized.
pub type RateProbe<'a> = &'a (dyn Fn(&CVector, &CMatrix) -> Result<f64> + Sync);

/// What one trace entry counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationUnit {
    /// One simultaneous update of all variables (PGM).
    Iteration,
    /// One full AO sweep: every RIS element plus the covariance, i.e.
    /// `N_ris + 1` conventional iterations.
    Outer,
}

impl IterationUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            IterationUnit::Iteration => "iteration",
            IterationUnit::Outer => "outer",
        }
    }

    /// Conventional iterations represented by `count` entries of this unit.
    pub fn conventional(self, count: usize, n_ris: usize) -> usize {
        match self {
            IterationUnit::Iteration => count,
            IterationUnit::Outer => count * (n_ris + 1),
        }
    }
}

impl fmt::Display for IterationUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Achievable rate in bits/s/Hz after this iteration.
    pub rate_bits: f64,
    /// Step size used (0 for the starting point and for AO).
    pub step_size: f64,
    /// Objective evaluations spent by the line search (0 when unused).
    pub line_search_trials: u32,
}

/// Per-iteration record of an optimizer run. Entry 0 is the starting point;
/// the final variables are in original (unscaled) units.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace {
    pub unit: IterationUnit,
    pub records: Vec<IterationRecord>,
    pub theta: PhaseVector,
    pub covariance: CovarianceMatrix,
    /// Set when the run stopped before its iteration budget.
    pub stopped_early: bool,
}

impl OptimizerTrace {
    pub fn rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rate_bits).collect()
    }

    pub fn final_rate(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.rate_bits)
    }

    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }
}
