//! Multiplication counts for PGM and the AO baseline.
//!
//! The formulas carry half-integer coefficients; they are evaluated on doubled
//! integers and rounded half up, which reproduces the tabulated counts.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityInputs {
    pub tx_antennas: u64,
    pub rx_antennas: u64,
    pub n_ris: u64,
    /// PGM iterations.
    pub pgm_iterations: u64,
    /// AO random initializations.
    pub ao_initializations: u64,
    /// AO outer iterations.
    pub ao_outer_iterations: u64,
}

impl ComplexityInputs {
    /// `D = min(N_t, N_r)`.
    pub fn rank(&self) -> u64 {
        self.tx_antennas.min(self.rx_antennas)
    }
}

fn halve_round(doubled: u64) -> u64 {
    doubled.div_ceil(2)
}

/// Multiplications per PGM iteration.
pub fn pgm_per_iteration(inp: &ComplexityInputs) -> u64 {
    let (nt, nr, n) = (inp.tx_antennas, inp.rx_antennas, inp.n_ris);
    let doubled = 4 * n * nt * nr
        + 4 * nt * nt * nr
        + 3 * nt * nr * nr
        + 2 * nr.pow(3)
        + 2 * nr * n
        + 2 * nt * n
        + 6 * n
        + 3 * nt.pow(3);
    halve_round(doubled)
}

pub fn pgm_total(inp: &ComplexityInputs) -> u64 {
    inp.pgm_iterations * pgm_per_iteration(inp)
}

/// Multiplications of AO: initialization plus `I_OI` outer iterations.
pub fn ao_total(inp: &ComplexityInputs) -> u64 {
    let (nt, nr, n) = (inp.tx_antennas, inp.rx_antennas, inp.n_ris);
    let d = inp.rank();
    let (l, i) = (inp.ao_initializations, inp.ao_outer_iterations);
    // D^3 + Nt^2 D / 2, doubled
    let svd_wf = 2 * d.pow(3) + nt * nt * d;
    let doubled = 2 * (l + 1) * nr * nt * n
        + l * svd_wf
        + i * (2 * nt.pow(3)
            + 2 * nt * nt * n
            + 4 * nr * nt * n
            + 2 * (2 * nr * nr * nt + 2 * nr.pow(3)) * n
            + svd_wf);
    halve_round(doubled)
}

/// Extra multiplications from `I_LS` line-search trials.
pub fn line_search_overhead(trials: u64, n_ris: u64, tx_antennas: u64) -> u64 {
    trials * (3 * n_ris + 2 * tx_antennas.pow(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableRow {
    pub direct_link: bool,
    pub inputs: ComplexityInputs,
}

impl TableRow {
    pub fn c_pgm_it(&self) -> u64 {
        pgm_per_iteration(&self.inputs)
    }

    pub fn c_pgm(&self) -> u64 {
        pgm_total(&self.inputs)
    }

    pub fn c_ao(&self) -> u64 {
        ao_total(&self.inputs)
    }
}

/// The paper-scale comparison: `N_t = 8`, `N_r = 4`, 100 AO initializations,
/// with the observed iteration counts for PGM and one AO outer iteration.
pub fn table1_rows() -> Vec<TableRow> {
    let present = [(100, 19), (225, 6), (400, 4), (625, 3)];
    let blocked = [(100, 2), (225, 2), (400, 2), (625, 2)];
    let mk = |direct_link, (n_ris, i_pgm): (u64, u64)| TableRow {
        direct_link,
        inputs: ComplexityInputs {
            tx_antennas: 8,
            rx_antennas: 4,
            n_ris,
            pgm_iterations: i_pgm,
            ao_initializations: 100,
            ao_outer_iterations: 1,
        },
    };
    present
        .into_iter()
        .map(|r| mk(true, r))
        .chain(blocked.into_iter().map(|r| mk(false, r)))
        .collect()
}

pub const TABLE1_HEADER: &str = "direct_link,n_ris,i_pgm,c_pgm_it,c_pgm,i_oi,c_ao";

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from(TABLE1_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            if r.direct_link { "present" } else { "blocked" },
            r.inputs.n_ris,
            r.inputs.pgm_iterations,
            r.c_pgm_it(),
            r.c_pgm(),
            r.inputs.ao_outer_iterations,
            r.c_ao()
        );
    }
    out
}
