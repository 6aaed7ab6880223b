//! Total free-space path-loss ratio of the RIS and direct links, and a Monte
//! Carlo check of the Jensen bound behind it.
//!
//! `T = 16/lambda^2 (d1 d2)^2 / d0^alpha / ((lt/d1 + lr/d2)^2 N^2 E)` with
//! `E = (E|h2 h1|)^2` for unit-power Rician scalars. `T < 1` means the
//! optimally phased RIS path suffers less total attenuation than the direct one.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{self, SceneGeometry};
use crate::error::{Result, RisError};

/// Samples per chunk; chunk `c` draws from stream `c` of the seed, so results
/// do not depend on how many workers run.
pub const CHUNK_SAMPLES: usize = 1 << 14;

pub const MIN_SAMPLES: usize = 10_000;
pub const DEFAULT_REPORT_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FsplReport {
    /// Direct-link path loss `beta_DIR`.
    pub beta_dir_total: f64,
    /// Lower bound on the total indirect loss, `1 / (beta_INDIR^-1 N^2 E)`.
    pub beta_indir_total_bound: f64,
    pub t: f64,
    pub e_estimate: f64,
    pub samples_used: usize,
}

fn rician_scalar(rng: &mut ChaCha8Rng, w_los: f64, w_nlos: f64) -> Complex64 {
    // the LOS phase is immaterial to |h2 h1| since the NLOS part is circular
    Complex64::new(w_los, 0.0) + channel::complex_normal(rng).scale(w_nlos)
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Applies `f` to every chunk `(rng, size)` and returns the results in chunk order.
fn over_chunks<T, F>(samples: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = samples.div_ceil(CHUNK_SAMPLES);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let size = CHUNK_SAMPLES.min(samples - c * CHUNK_SAMPLES);
            f(&mut chunk_rng(seed, c), size)
        })
        .collect()
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(RisError::InvalidParameter(format!(
            "at least {MIN_SAMPLES} Monte Carlo samples are needed, got {samples}"
        )));
    }
    Ok(())
}

fn check_rician(k: f64) -> Result<()> {
    if !(k >= 0.0) {
        return Err(RisError::InvalidParameter(format!("Rician factor must be >= 0, got {k}")));
    }
    Ok(())
}

/// `(E|h2 h1|)^2` by Monte Carlo for Rician factor `k`.
pub fn estimate_e(k: f64, samples: usize, seed: u64) -> Result<f64> {
    check_samples(samples)?;
    check_rician(k)?;
    let (w_los, w_nlos) = channel::rician_weights(k);
    let sums = over_chunks(samples, seed, |rng, n| {
        (0..n)
            .map(|_| (rician_scalar(rng, w_los, w_nlos) * rician_scalar(rng, w_los, w_nlos)).norm())
            .sum::<f64>()
    });
    let mean = sums.iter().sum::<f64>() / samples as f64;
    Ok(mean * mean)
}

/// The total-FSPL ratio `T` of the scene for a given `E`.
pub fn fspl_ratio(geom: &SceneGeometry, e: f64) -> Result<f64> {
    geom.validate()?;
    if !(e > 0.0) {
        return Err(RisError::InvalidParameter(format!("E must be positive, got {e}")));
    }
    let (d0, d1, d2) = (geom.d0(), geom.d1(), geom.d2());
    let n = geom.n_ris() as f64;
    let cosines = geom.tx_distance / d1 + geom.rx_distance / d2;
    Ok(16.0 / geom.wavelength.powi(2) * (d1 * d2).powi(2) / d0.powf(geom.direct_path_loss_exponent)
        / (cosines * cosines * n * n * e))
}

/// Full report for the scene; `E` is estimated from the scene's Rician factor.
pub fn fspl_report(geom: &SceneGeometry, samples: usize, seed: u64) -> Result<FsplReport> {
    geom.validate()?;
    let e = estimate_e(geom.rician_factor, samples, seed)?;
    let n = geom.n_ris() as f64;
    let beta_dir_total = channel::fspl_direct(geom);
    let beta_indir_total_bound = 1.0 / (channel::fspl_indirect(geom) * n * n * e);
    Ok(FsplReport {
        beta_dir_total,
        beta_indir_total_bound,
        t: fspl_ratio(geom, e)?,
        e_estimate: e,
        samples_used: samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JensenCheck {
    /// `E{(sum_i |h2(i) h1(i)|)^2}`, the co-phased received power.
    pub lhs: f64,
    /// `N^2 (E|h2 h1|)^2`, estimated from the same draws.
    pub rhs: f64,
}

impl JensenCheck {
    pub fn relative_gap(&self) -> f64 {
        self.lhs / self.rhs - 1.0
    }
}

/// Monte Carlo comparison of the co-phased SISO power and its Jensen bound.
/// Both sides come from the same draws, so `lhs >= rhs` holds for every seed.
pub fn validate_jensen_bound(geom: &SceneGeometry, samples: usize, seed: u64) -> Result<JensenCheck> {
    if geom.tx_antennas != 1 || geom.rx_antennas != 1 {
        return Err(RisError::InvalidGeometry("the Jensen check needs a single-antenna link".into()));
    }
    check_samples(samples)?;
    check_rician(geom.rician_factor)?;
    let n = geom.n_ris();
    if n == 0 {
        return Err(RisError::InvalidGeometry("the Jensen check needs at least one RIS element".into()));
    }
    let (w_los, w_nlos) = geom.rician_weights();
    let partial = over_chunks(samples, seed, |rng, size| {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..size {
            let s: f64 = (0..n)
                .map(|_| (rician_scalar(rng, w_los, w_nlos) * rician_scalar(rng, w_los, w_nlos)).norm())
                .sum();
            sum += s;
            sum_sq += s * s;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mean = sum / samples as f64;
    let lhs = sum_sq / samples as f64;
    // keep the exact ordering despite rounding in the two sums
    Ok(JensenCheck { lhs: lhs.max(mean * mean), rhs: mean * mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn siso(n_side: usize, k: f64) -> SceneGeometry {
        let mut g = SceneGeometry::outdoor(40.0, 20.0, 100.0, 1, 1, n_side);
        g.rician_factor = k;
        g
    }

    #[test]
    fn e_limits() {
        assert_eq!(estimate_e(f64::INFINITY, MIN_SAMPLES, 1).unwrap(), 1.0);
        let e = estimate_e(0.0, 200_000, 2).unwrap();
        let expect = (std::f64::consts::PI / 4.0).powi(2);
        assert_relative_eq!(expect, 0.6168502750680849, max_relative = 1e-15);
        assert_relative_eq!(e, expect, max_relative = 0.01);
        assert!(estimate_e(1.0, 100, 1).is_err());
        assert!(estimate_e(-1.0, MIN_SAMPLES, 1).is_err());
    }

    #[test]
    fn e_at_unit_rician_matches_naive_sampler() {
        // a straightforward single-stream sampler with Box-Muller normals
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let w = 0.5f64.sqrt();
        let mut draw = || {
            let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
            let r = (-u1.ln()).sqrt() * w;
            Complex64::new(w + r * (std::f64::consts::TAU * u2).cos(), r * (std::f64::consts::TAU * u2).sin())
        };
        let n = 400_000;
        let mean = (0..n).map(|_| (draw() * draw()).norm()).sum::<f64>() / n as f64;
        let e = estimate_e(1.0, 400_000, 7).unwrap();
        assert_relative_eq!(e, mean * mean, max_relative = 0.01);
    }

    #[test]
    fn sampling_is_seed_reproducible() {
        let a = estimate_e(1.0, 50_000, 5).unwrap();
        let b = estimate_e(1.0, 50_000, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, estimate_e(1.0, 50_000, 6).unwrap());
    }

    #[test]
    fn ratio_recombines_from_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut g = SceneGeometry::outdoor(
                rng.random_range(5.0..495.0),
                rng.random_range(1.0..150.0),
                rng.random_range(1.0..150.0),
                1,
                1,
                rng.random_range(1..20),
            );
            g.direct_path_loss_exponent = rng.random_range(2.0..4.0);
            let e = rng.random_range(0.5..1.0);
            let n = g.n_ris() as f64;
            let t = fspl_ratio(&g, e).unwrap();
            let recombined = 1.0 / (channel::fspl_direct(&g) * channel::fspl_indirect(&g) * n * n * e);
            assert_relative_eq!(t, recombined, max_relative = 1e-12);
        }
    }

    #[test]
    fn doubling_elements_quarters_ratio() {
        let mut g = siso(4, 1.0);
        let t1 = fspl_ratio(&g, 0.8).unwrap();
        g.ris_rows = 8; // 4x4 -> 8x4
        let t2 = fspl_ratio(&g, 0.8).unwrap();
        assert_relative_eq!(t1 / t2, 4.0, max_relative = 1e-12);
        assert!(fspl_ratio(&g, 0.0).is_err());
    }

    #[test]
    fn ratio_peaks_mid_span() {
        let at = |x: f64| {
            let mut g = siso(10, 1.0);
            g.ris_offset = x;
            fspl_ratio(&g, 0.8).unwrap()
        };
        let xs: Vec<f64> = (1..50).map(|i| 10.0 * i as f64).collect();
        let ts: Vec<f64> = xs.iter().map(|&x| at(x)).collect();
        let imax = (0..ts.len()).max_by(|&a, &b| ts[a].total_cmp(&ts[b])).unwrap();
        assert!(xs[imax] > 150.0 && xs[imax] < 350.0, "peak at {}", xs[imax]);
        let lo = ts.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(lo == ts[0] || lo == *ts.last().unwrap());
    }

    #[test]
    fn report_is_consistent() {
        let r = fspl_report(&siso(6, 1.0), MIN_SAMPLES, 4).unwrap();
        assert_relative_eq!(r.t, r.beta_indir_total_bound / r.beta_dir_total, max_relative = 1e-12);
        assert_eq!(r.samples_used, MIN_SAMPLES);
    }

    #[test]
    fn jensen_special_cases() {
        let los = validate_jensen_bound(&siso(3, f64::INFINITY), MIN_SAMPLES, 1).unwrap();
        assert_relative_eq!(los.lhs, 81.0, max_relative = 1e-12);
        assert_relative_eq!(los.rhs, 81.0, max_relative = 1e-12);

        let one = validate_jensen_bound(&siso(1, 0.0), 100_000, 2).unwrap();
        assert!(one.lhs >= one.rhs);
        // E|h2 h1|^2 = 1 for unit-power scalars
        assert_relative_eq!(one.lhs, 1.0, max_relative = 0.02);

        let mimo = SceneGeometry::outdoor(40.0, 20.0, 100.0, 2, 1, 2);
        assert!(validate_jensen_bound(&mimo, MIN_SAMPLES, 1).is_err());
    }
}
