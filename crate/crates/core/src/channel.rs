//! Scene geometry, free-space path loss and Rician channel synthesis.
//!
//! Coordinate frame: the transmit array lies in the wall `x = 0`, the receive
//! array in the wall `x = D`, and the RIS in the perpendicular wall `y = 0`.
//! Both ULAs run along `y` at height `z = 0`; the RIS grid spans `x`/`z`
//! around its center `(d_ris, 0, 0)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RisError};
use crate::numerics::{CMatrix, CVector};
use num_complex::Complex64;

/// Propagation speed used for frequency/wavelength conversion (2 GHz -> 15 cm).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub fn wavelength_from_frequency(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Deterministic scene description. All lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    /// Separation `D` between the transmit and receive walls.
    pub wall_distance: f64,
    /// Distance `d_ris` from the RIS center to the transmit wall.
    pub ris_offset: f64,
    /// Distance `l_t` from the transmit array midpoint to the RIS wall.
    pub tx_distance: f64,
    /// Distance `l_r` from the receive array midpoint to the RIS wall.
    pub rx_distance: f64,
    pub tx_spacing: f64,
    pub rx_spacing: f64,
    pub ris_spacing: f64,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    /// RIS grid size along the horizontal (`x`) dimension.
    pub ris_rows: usize,
    /// RIS grid size along the vertical (`z`) dimension.
    pub ris_cols: usize,
    pub wavelength: f64,
    pub direct_path_loss_exponent: f64,
    /// Rician factor `K`; `f64::INFINITY` selects pure line-of-sight channels.
    pub rician_factor: f64,
}

impl SceneGeometry {
    /// Outdoor link at 2 GHz with half-wavelength spacings everywhere.
    pub fn outdoor(
        ris_offset: f64,
        tx_distance: f64,
        rx_distance: f64,
        tx_antennas: usize,
        rx_antennas: usize,
        ris_side: usize,
    ) -> Self {
        let wavelength = wavelength_from_frequency(2.0e9);
        Self {
            wall_distance: 500.0,
            ris_offset,
            tx_distance,
            rx_distance,
            tx_spacing: wavelength / 2.0,
            rx_spacing: wavelength / 2.0,
            ris_spacing: wavelength / 2.0,
            tx_antennas,
            rx_antennas,
            ris_rows: ris_side,
            ris_cols: ris_side,
            wavelength,
            direct_path_loss_exponent: 3.0,
            rician_factor: 1.0,
        }
    }

    pub fn n_ris(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    /// Transmit-to-receive midpoint distance `d_0`.
    pub fn d0(&self) -> f64 {
        self.wall_distance.hypot(self.tx_distance - self.rx_distance)
    }

    /// Transmit midpoint to RIS center distance `d_1`.
    pub fn d1(&self) -> f64 {
        self.ris_offset.hypot(self.tx_distance)
    }

    /// RIS center to receive midpoint distance `d_2`.
    pub fn d2(&self) -> f64 {
        (self.wall_distance - self.ris_offset).hypot(self.rx_distance)
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("wall_distance", self.wall_distance),
            ("ris_offset", self.ris_offset),
            ("tx_distance", self.tx_distance),
            ("rx_distance", self.rx_distance),
            ("tx_spacing", self.tx_spacing),
            ("rx_spacing", self.rx_spacing),
            ("ris_spacing", self.ris_spacing),
            ("wavelength", self.wavelength),
        ];
        for (name, v) in lengths {
            if !(v > 0.0) || !v.is_finite() {
                return Err(RisError::InvalidGeometry(format!("{name} must be positive, got {v}")));
            }
        }
        if self.ris_offset >= self.wall_distance {
            return Err(RisError::InvalidGeometry(format!(
                "ris_offset {} must lie strictly inside (0, {})",
                self.ris_offset, self.wall_distance
            )));
        }
        if self.tx_antennas == 0 || self.rx_antennas == 0 {
            return Err(RisError::InvalidGeometry("antenna counts must be at least 1".into()));
        }
        if !(self.rician_factor >= 0.0) {
            return Err(RisError::InvalidGeometry(format!(
                "Rician factor must be non-negative, got {}",
                self.rician_factor
            )));
        }
        if !(self.direct_path_loss_exponent > 0.0) {
            return Err(RisError::InvalidGeometry("path-loss exponent must be positive".into()));
        }
        Ok(())
    }

    /// `(sqrt(K/(K+1)), sqrt(1/(K+1)))`, with `K = inf` mapped to `(1, 0)`.
    pub fn rician_weights(&self) -> (f64, f64) {
        rician_weights(self.rician_factor)
    }
}

pub fn rician_weights(k: f64) -> (f64, f64) {
    if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    }
}

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct ElementPositions {
    pub tx: Vec<Point>,
    pub rx: Vec<Point>,
    /// Row-major over the RIS grid: index `a * ris_cols + b`.
    pub ris: Vec<Point>,
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn centered(i: usize, n: usize, spacing: f64) -> f64 {
    (i as f64 - (n as f64 - 1.0) / 2.0) * spacing
}

pub fn element_positions(geom: &SceneGeometry) -> ElementPositions {
    let tx = (0..geom.tx_antennas)
        .map(|i| [0.0, geom.tx_distance + centered(i, geom.tx_antennas, geom.tx_spacing), 0.0])
        .collect();
    let rx = (0..geom.rx_antennas)
        .map(|i| {
            [
                geom.wall_distance,
                geom.rx_distance + centered(i, geom.rx_antennas, geom.rx_spacing),
                0.0,
            ]
        })
        .collect();
    let mut ris = Vec::with_capacity(geom.n_ris());
    for a in 0..geom.ris_rows {
        for b in 0..geom.ris_cols {
            ris.push([
                geom.ris_offset + centered(a, geom.ris_rows, geom.ris_spacing),
                0.0,
                centered(b, geom.ris_cols, geom.ris_spacing),
            ]);
        }
    }
    ElementPositions { tx, rx, ris }
}

/// Direct-link path loss `beta_DIR = (4 pi / lambda)^2 d_0^alpha`.
pub fn fspl_direct(geom: &SceneGeometry) -> f64 {
    (4.0 * PI / geom.wavelength).powi(2) * geom.d0().powf(geom.direct_path_loss_exponent)
}

/// Indirect-link gain `beta_INDIR^{-1}` of the RIS cascade (no phase gain).
pub fn fspl_indirect(geom: &SceneGeometry) -> f64 {
    let (d1, d2) = (geom.d1(), geom.d2());
    let cosines = geom.tx_distance / d1 + geom.rx_distance / d2;
    geom.wavelength.powi(4) / (256.0 * PI * PI) * cosines * cosines / (d1 * d1 * d2 * d2)
}

/// Deterministic line-of-sight matrices `(H_D,LOS, H_1,LOS, H_2,LOS)`.
pub fn los_matrices(geom: &SceneGeometry) -> (CMatrix, CMatrix, CMatrix) {
    let pos = element_positions(geom);
    let phasor = |d: f64| Complex64::from_polar(1.0, -2.0 * PI * d / geom.wavelength);
    let hd = CMatrix::from_fn(pos.rx.len(), pos.tx.len(), |r, t| phasor(distance(&pos.rx[r], &pos.tx[t])));
    let h1 = CMatrix::from_fn(pos.ris.len(), pos.tx.len(), |l, t| phasor(distance(&pos.ris[l], &pos.tx[t])));
    let h2 = CMatrix::from_fn(pos.rx.len(), pos.ris.len(), |r, l| phasor(distance(&pos.rx[r], &pos.ris[l])));
    (hd, h1, h2)
}

/// One `CN(0, 1)` draw: independent real and imaginary parts of variance 1/2.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    // column-major fill keeps the draw order tied to nalgebra's storage
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Direct channel `N_r x N_t`, path loss included.
    pub h_dir: CMatrix,
    /// Transmitter to RIS `N_ris x N_t`, no path loss.
    pub h1: CMatrix,
    /// RIS to receiver `N_r x N_ris`, no path loss.
    pub h2: CMatrix,
    pub beta_dir_inv: f64,
    pub beta_indir_inv: f64,
    /// Linear noise power `N_0`.
    pub noise: f64,
    pub direct_blocked: bool,
}

impl ChannelSet {
    pub fn tx_antennas(&self) -> usize {
        self.h_dir.ncols()
    }

    pub fn rx_antennas(&self) -> usize {
        self.h_dir.nrows()
    }

    pub fn n_ris(&self) -> usize {
        self.h1.nrows()
    }

    /// Same realization with the direct link removed.
    pub fn without_direct(&self) -> Self {
        let mut out = self.clone();
        out.h_dir.fill(Complex64::new(0.0, 0.0));
        out.direct_blocked = true;
        out
    }

    /// Same realization with the RIS removed (zero elements).
    pub fn without_ris(&self) -> Self {
        let mut out = self.clone();
        out.h1 = CMatrix::zeros(0, self.tx_antennas());
        out.h2 = CMatrix::zeros(self.rx_antennas(), 0);
        out
    }

    /// Full channel `H = H_DIR + sqrt(beta_INDIR^-1) H_2 diag(theta) H_1`.
    pub fn compose(&self, theta: &CVector) -> CMatrix {
        let mut h2f = self.h2.clone();
        for (l, t) in theta.iter().enumerate() {
            for x in h2f.column_mut(l).iter_mut() { *x *= *t; }
        }
        &self.h_dir + (h2f * &self.h1).scale(self.beta_indir_inv.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let (nr, nt, nris) = (self.rx_antennas(), self.tx_antennas(), self.n_ris());
        if self.h1.ncols() != nt || self.h2.nrows() != nr || self.h2.ncols() != nris {
            return Err(RisError::DimensionMismatch(format!(
                "H_DIR {}x{}, H1 {}x{}, H2 {}x{}",
                nr,
                nt,
                self.h1.nrows(),
                self.h1.ncols(),
                self.h2.nrows(),
                self.h2.ncols()
            )));
        }
        if !(self.beta_indir_inv > 0.0) || !(self.noise > 0.0) {
            return Err(RisError::InvalidParameter(
                "path-loss gain and noise power must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Draws one Rician realization of `(H_DIR, H_1, H_2)` for the scene.
pub fn sample_channels<R: Rng + ?Sized>(
    geom: &SceneGeometry,
    noise: f64,
    direct_blocked: bool,
    rng: &mut R,
) -> Result<ChannelSet> {
    geom.validate()?;
    if !(noise > 0.0) {
        return Err(RisError::InvalidParameter(format!("noise power must be positive, got {noise}")));
    }
    let (w_los, w_nlos) = geom.rician_weights();
    let (hd_los, h1_los, h2_los) = los_matrices(geom);
    let (nr, nt, nris) = (geom.rx_antennas, geom.tx_antennas, geom.n_ris());

    let hd_nlos = complex_normal_matrix(rng, nr, nt);
    let h1_nlos = complex_normal_matrix(rng, nris, nt);
    let h2_nlos = complex_normal_matrix(rng, nr, nris);

    let mix = |los: CMatrix, nlos: CMatrix| los.scale(w_los) + nlos.scale(w_nlos);
    let beta_dir_inv = 1.0 / fspl_direct(geom);
    let h_dir = if direct_blocked {
        CMatrix::zeros(nr, nt)
    } else {
        mix(hd_los, hd_nlos).scale(beta_dir_inv.sqrt())
    };
    Ok(ChannelSet {
        h_dir,
        h1: mix(h1_los, h1_nlos),
        h2: mix(h2_los, h2_nlos),
        beta_dir_inv,
        beta_indir_inv: fspl_indirect(geom),
        noise,
        direct_blocked,
    })
}

/// Channel estimate with additive `CN(0, sigma2)` errors on the path-loss-free
/// matrices. Path-loss scalars are carried over unchanged; a blocked direct
/// link stays blocked.
pub fn perturb_csi<R: Rng + ?Sized>(ch: &ChannelSet, sigma2: f64, rng: &mut R) -> Result<ChannelSet> {
    if !(sigma2 >= 0.0) {
        return Err(RisError::InvalidParameter(format!("CSI error variance must be >= 0, got {sigma2}")));
    }
    if sigma2 == 0.0 {
        return Ok(ch.clone());
    }
    let sd = sigma2.sqrt();
    let mut out = ch.clone();
    let e_dir = complex_normal_matrix(rng, ch.rx_antennas(), ch.tx_antennas()).scale(sd);
    let e1 = complex_normal_matrix(rng, ch.n_ris(), ch.tx_antennas()).scale(sd);
    let e2 = complex_normal_matrix(rng, ch.rx_antennas(), ch.n_ris()).scale(sd);
    if !ch.direct_blocked {
        let g = ch.beta_dir_inv.sqrt();
        // (H_DIR / g + E) * g
        out.h_dir = (ch.h_dir.unscale(g) + e_dir).scale(g);
    }
    out.h1 += e1;
    out.h2 += e2;
    Ok(out)
}

/// Noise-normalized (and optionally rescaled) problem data.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledChannels {
    /// `H_DIR / (k sqrt(N_0))`.
    pub h_dir: CMatrix,
    /// `H_1 sqrt(beta_INDIR^-1 / N_0)`.
    pub h1: CMatrix,
    pub h2: CMatrix,
    /// Scaling factor `k`.
    pub k: f64,
    /// Scaled power budget `k^2 P_t`.
    pub budget: f64,
    /// Original power budget `P_t`.
    pub transmit_power: f64,
}

impl ScaledChannels {
    pub fn tx_antennas(&self) -> usize {
        self.h_dir.ncols()
    }

    pub fn rx_antennas(&self) -> usize {
        self.h_dir.nrows()
    }

    pub fn n_ris(&self) -> usize {
        self.h1.nrows()
    }

    /// Unit modulus of the scaled phases, `1/k`.
    pub fn phase_modulus(&self) -> f64 {
        1.0 / self.k
    }
}

/// Heuristic scaling factor balancing the direct and RIS-assisted links.
///
/// `k = 10 max(1, 1/sqrt(P_t)) sqrt(||H_DIR|| / (sqrt(beta_INDIR^-1) ||H_2 H_1||))`
/// with `k = 10` for a vanishing direct link. When the cascade vanishes
/// instead (no RIS) the ratio is undefined and `k = 1` is used.
pub fn scaling_factor(ch: &ChannelSet, transmit_power: f64) -> f64 {
    let direct = ch.h_dir.norm();
    if ch.direct_blocked || direct == 0.0 {
        return 10.0;
    }
    let cascade = (&ch.h2 * &ch.h1).norm();
    if cascade == 0.0 {
        return 1.0;
    }
    10.0 * (1.0_f64).max(1.0 / transmit_power.sqrt())
        * (direct / (ch.beta_indir_inv.sqrt() * cascade)).sqrt()
}

/// Builds the scaled problem with the heuristic `k`.
pub fn scale_channels(ch: &ChannelSet, transmit_power: f64) -> Result<ScaledChannels> {
    scale_channels_with_factor(ch, transmit_power, scaling_factor(ch, transmit_power))
}

/// Builds the scaled problem for a caller-chosen `k` (`k = 1` is the plain
/// noise-normalized problem).
pub fn scale_channels_with_factor(ch: &ChannelSet, transmit_power: f64, k: f64) -> Result<ScaledChannels> {
    if !(transmit_power > 0.0) {
        return Err(RisError::InvalidParameter(format!(
            "transmit power must be positive, got {transmit_power}"
        )));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(RisError::InvalidParameter(format!("scaling factor must be positive, got {k}")));
    }
    ch.validate()?;
    let sqrt_n0 = ch.noise.sqrt();
    Ok(ScaledChannels {
        h_dir: ch.h_dir.unscale(k * sqrt_n0),
        h1: ch.h1.scale((ch.beta_indir_inv / ch.noise).sqrt()),
        h2: ch.h2.clone(),
        k,
        budget: k * k * transmit_power,
        transmit_power,
    })
}
