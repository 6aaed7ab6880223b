//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Oracles here are written independently of the library (grid scans, random
//! feasible points, direct determinant evaluation, closed-form SISO rates).

use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_core::ao::{closed_form_phase, AoProblem, AoSweep};
use ris_core::channel::{db_to_linear, sample_channels, scale_channels, scale_channels_with_factor, SceneGeometry, ScaledChannels};
use ris_core::complexity::table1_rows;
use ris_core::experiments::run_scenario;
use ris_core::fspl::validate_jensen_bound;
use ris_core::numerics::{hermitize, CMatrix, CVector};
use ris_core::objective::{channel_rate_bits, gradients_raw, nats_to_bits, rate_nats, rate_nats_raw, CovarianceMatrix, PhaseVector};
use ris_core::optimizer::{OptimizerRegistry, OptimizerSettings};
use ris_core::pgm::{default_start, run_pgm, PgmConfig, StepMode};
use ris_core::projections::{project_discrete_phases, project_q, project_theta};
use ris_core::scenario::{preset, Scale, Scenario};

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gauss_matrix(rng: &mut ChaCha8Rng, r: usize, c_: usize) -> CMatrix {
    CMatrix::from_fn(r, c_, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn unit_phases(rng: &mut ChaCha8Rng, n: usize, modulus: f64) -> CVector {
    CVector::from_fn(n, |_, _| Complex64::from_polar(modulus, rng.random_range(0.0..2.0 * PI)))
}

/// Random PSD matrix with trace exactly `t`.
fn psd_with_trace(rng: &mut ChaCha8Rng, n: usize, t: f64) -> CMatrix {
    let a = gauss_matrix(rng, n, n);
    let m = hermitize(&(&a * a.adjoint()));
    let tr = m.trace().re;
    m.scale(t / tr)
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------

fn table_exactness() -> Outcome {
    let it = [9436u64, 19311, 33136, 50911];
    let ao = [394304u64, 862304, 1517504, 2359904];
    let pgm_present = [179284u64, 115866, 132544, 152733];
    let pgm_blocked = [18872u64, 38622, 66272, 101822];
    let rows = table1_rows();
    ensure(rows.len() == 8, "expected 8 rows")?;
    for (i, r) in rows.iter().enumerate() {
        let j = i % 4;
        let want_total = if r.direct_link { pgm_present[j] } else { pgm_blocked[j] };
        ensure(r.c_pgm_it() == it[j], format!("row {i}: C_PGM,IT {} != {}", r.c_pgm_it(), it[j]))?;
        ensure(r.c_ao() == ao[j], format!("row {i}: C_AO {} != {}", r.c_ao(), ao[j]))?;
        ensure(r.c_pgm() == want_total, format!("row {i}: C_PGM {} != {want_total}", r.c_pgm()))?;
    }
    Ok("24 tabulated counts match exactly".into())
}

/// Finite-difference gradient, one real coordinate at a time: real and
/// imaginary parts of each theta entry, then a Hermitian basis of Q.
fn fd_and_analytic(sc: &ScaledChannels, theta: &CVector, q: &CMatrix, h: f64) -> (Vec<f64>, Vec<f64>) {
    let g = gradients_raw(sc, theta, q).unwrap();
    let f = |t: &CVector, q: &CMatrix| rate_nats_raw(sc, t, q).unwrap();
    let mut fd = Vec::new();
    let mut an = Vec::new();
    for l in 0..theta.len() {
        for (dir, want) in [(c(1.0, 0.0), 2.0 * g.g_theta[l].re), (c(0.0, 1.0), 2.0 * g.g_theta[l].im)] {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[l] += dir * h;
            tm[l] -= dir * h;
            fd.push((f(&tp, q) - f(&tm, q)) / (2.0 * h));
            an.push(want);
        }
    }
    let n = q.nrows();
    for j in 0..n {
        for k in j..n {
            let mut dirs = Vec::new();
            if j == k {
                let mut e = CMatrix::zeros(n, n);
                e[(j, j)] = c(1.0, 0.0);
                dirs.push((e, g.g_q[(j, j)].re));
            } else {
                let mut e = CMatrix::zeros(n, n);
                e[(j, k)] = c(1.0, 0.0);
                e[(k, j)] = c(1.0, 0.0);
                dirs.push((e, 2.0 * g.g_q[(k, j)].re));
                let mut e = CMatrix::zeros(n, n);
                e[(j, k)] = c(0.0, 1.0);
                e[(k, j)] = c(0.0, -1.0);
                dirs.push((e, -2.0 * g.g_q[(k, j)].im));
            }
            for (e, want) in dirs {
                fd.push((f(theta, &(q + e.scale(h))) - f(theta, &(q - e.scale(h)))) / (2.0 * h));
                an.push(want);
            }
        }
    }
    (fd, an)
}

fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let nt = rng.random_range(1..=4);
        let nr = rng.random_range(1..=4);
        let nris = rng.random_range(1..=8);
        let sc = ScaledChannels {
            h_dir: gauss_matrix(&mut rng, nr, nt),
            h1: gauss_matrix(&mut rng, nris, nt),
            h2: gauss_matrix(&mut rng, nr, nris),
            k: 1.0,
            budget: 1.0,
            transmit_power: 1.0,
        };
        let theta = unit_phases(&mut rng, nris, 1.0);
        let q = psd_with_trace(&mut rng, nt, 1.0);
        let (fd, an) = fd_and_analytic(&sc, &theta, &q, 1e-6);
        let num: f64 = fd.iter().zip(&an).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = an.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    ensure(worst <= 1e-5, format!("worst relative error {worst:.2e} > 1e-5"))?;
    Ok(format!("100 instances, worst relative error {worst:.2e} (tol 1e-5)"))
}

fn desk_geometry(i: usize) -> (SceneGeometry, bool) {
    let offsets = [40.0, 460.0, 250.0];
    let g = SceneGeometry::outdoor(offsets[i % 3], 20.0, 100.0, 4, 2, 6);
    (g, i % 4 == 3)
}

fn lipschitz_monotonicity() -> Outcome {
    let noise = db_to_linear(-120.0);
    let cfg = PgmConfig {
        max_iterations: 500,
        step_mode: StepMode::Lipschitz,
        ..PgmConfig::default()
    };
    let mut worst_drop: f64 = 0.0;
    for i in 0..20 {
        let (g, blocked) = desk_geometry(i);
        let ch = sample_channels(&g, noise, blocked, &mut ChaCha8Rng::seed_from_u64(300 + i as u64)).unwrap();
        let sc = scale_channels(&ch, 1.0).unwrap();
        let (theta, q) = default_start(&sc);
        let tr = run_pgm(&sc, &cfg, theta, q).unwrap();
        ensure(tr.iterations() == 500, format!("instance {i}: stopped after {} iterations", tr.iterations()))?;
        let rates = tr.rates();
        for w in rates.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    ensure(worst_drop <= 1e-9, format!("objective dropped by {worst_drop:.2e} > 1e-9"))?;
    Ok(format!("20 instances x 500 iterations, largest drop {worst_drop:.1e} (slack 1e-9)"))
}

fn projection_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for inst in 0..500 {
        let n = rng.random_range(1..=3);
        let budget = rng.random_range(0.1..5.0);
        // mix of indefinite, PSD-inside and PSD-outside inputs
        let y = match inst % 3 {
            0 => hermitize(&gauss_matrix(&mut rng, n, n).scale(3.0)),
            1 => {
                let t = budget * rng.random_range(0.1..1.0);
                psd_with_trace(&mut rng, n, t)
            }
            _ => {
                let t = budget * rng.random_range(1.0..4.0);
                psd_with_trace(&mut rng, n, t)
            }
        };
        let p = project_q(&y, budget).unwrap();
        let pm = p.as_matrix();
        let eig = pm.clone().symmetric_eigenvalues();
        ensure(eig.iter().all(|&s| s >= -1e-12), format!("instance {inst}: projection not PSD"))?;
        ensure(pm.trace().re <= budget * (1.0 + 1e-12), format!("instance {inst}: trace above budget"))?;
        let dp = (&y - pm).norm();
        for _ in 0..10_000 {
            let t = budget * rng.random::<f64>().powf(1.0 / (n * n) as f64);
            let x = psd_with_trace(&mut rng, n, t);
            if (&y - &x).norm() < dp - 1e-12 {
                return Err(format!("instance {inst}: a random feasible point is closer than the projection"));
            }
        }
    }

    // unit-modulus projection: idempotent and at least as close as a fine phase grid
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let modulus = rng.random_range(0.05..3.0);
        let u = gauss_matrix(&mut rng, n, 1).column(0).into_owned();
        let p = project_theta(&u, modulus).unwrap();
        let pp = project_theta(p.as_vector(), modulus).unwrap();
        ensure((pp.as_vector() - p.as_vector()).norm() <= 1e-12 * modulus, "project_theta not idempotent")?;
        for (z, pz) in u.iter().zip(p.as_vector().iter()) {
            let best = (0..3600)
                .map(|m| (z - Complex64::from_polar(modulus, 2.0 * PI * m as f64 / 3600.0)).norm())
                .fold(f64::INFINITY, f64::min);
            ensure((z - pz).norm() <= best + 1e-12, "project_theta beaten by a grid phase")?;
        }
    }

    // discrete phases: idempotent and the nearest of every codeword
    for bits in 1..=4u32 {
        let levels = 1usize << bits;
        for _ in 0..100 {
            let n = rng.random_range(1..=8);
            let modulus = rng.random_range(0.05..3.0);
            let theta = PhaseVector::new(unit_phases(&mut rng, n, modulus), modulus).unwrap();
            let d = project_discrete_phases(&theta, bits).unwrap();
            let dd = project_discrete_phases(&d, bits).unwrap();
            ensure((dd.as_vector() - d.as_vector()).norm() <= 1e-12 * modulus, "discrete projection not idempotent")?;
            for (z, dz) in theta.as_vector().iter().zip(d.as_vector().iter()) {
                let best = (0..levels)
                    .map(|m| (z - Complex64::from_polar(modulus, 2.0 * PI * m as f64 / levels as f64)).norm())
                    .fold(f64::INFINITY, f64::min);
                ensure((z - dz).norm() <= best + 1e-12, format!("{bits}-bit projection not nearest"))?;
            }
        }
    }
    Ok("500 PSD instances x 1e4 feasible points; phase and 1-4 bit codebook oracles".into())
}

fn complex_det(m: &CMatrix) -> f64 {
    let d: Complex64 = DMatrix::from(m.clone()).determinant();
    d.re
}

fn ao_element_optimality() -> Outcome {
    let noise = db_to_linear(-120.0);
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst: f64 = 0.0;
    for inst in 0..200 {
        let nt = rng.random_range(1..=4);
        let nr = rng.random_range(1..=4);
        let side = rng.random_range(1..=3);
        let offset = rng.random_range(20.0..480.0);
        let g = SceneGeometry::outdoor(offset, 20.0, 100.0, nt, nr, side);
        let ch = sample_channels(&g, noise, inst % 5 == 0, &mut rng).unwrap();
        let prob = AoProblem::new(&ch, 1.0).unwrap();
        let alpha = unit_phases(&mut rng, g.n_ris(), 1.0);
        let q = psd_with_trace(&mut rng, nt, 1.0);
        let sweep = AoSweep::new(&prob, alpha.clone(), &q).unwrap();
        let m = rng.random_range(0..g.n_ris());
        let (a, b) = sweep.element_terms(m);
        let value = |al: Complex64| complex_det(&(&a + b.scale(1.0) * al + b.adjoint() * al.conj()));
        let best_grid = (0..4096)
            .map(|i| value(Complex64::from_polar(1.0, 2.0 * PI * i as f64 / 4096.0)))
            .fold(f64::NEG_INFINITY, f64::max);
        let al = closed_form_phase(&a, &b, alpha[m]).unwrap();
        let got = value(al);
        let shortfall = (best_grid - got) / best_grid.abs();
        worst = worst.max(shortfall);
    }
    ensure(worst <= 1e-9, format!("closed form below grid maximum by {worst:.2e} (relative)"))?;
    Ok(format!("200 instances, 4096-point grid, worst relative shortfall {worst:.1e} (tol 1e-9)"))
}

fn siso_optimum() -> Outcome {
    let noise = db_to_linear(-120.0);
    let reg = OptimizerRegistry::default();
    let pgm = reg.create("pgm", &OptimizerSettings::default()).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let pt = db_to_linear(-10.0 + seed as f64);
        let g = SceneGeometry::outdoor(40.0 + 20.0 * seed as f64, 20.0, 100.0, 1, 1, 1);
        let ch = sample_channels(&g, noise, true, &mut ChaCha8Rng::seed_from_u64(600 + seed)).unwrap();
        let gain = (ch.h2[(0, 0)] * ch.h1[(0, 0)]).norm_sqr();
        let want = (1.0 + pt * ch.beta_indir_inv * gain / noise).ln() / LN_2;
        let tr = pgm.optimize(&ch, pt, &mut ChaCha8Rng::seed_from_u64(seed), None).unwrap();
        worst = worst.max((tr.final_rate() - want).abs());
    }
    ensure(worst <= 1e-6, format!("deviation {worst:.2e} bit/s/Hz > 1e-6"))?;
    Ok(format!("20 blocked SISO links, worst deviation {worst:.1e} bit/s/Hz (tol 1e-6)"))
}

fn jensen_bound() -> Outcome {
    let mut gaps = Vec::new();
    for side in [2usize, 4, 8, 16] {
        let g = SceneGeometry::outdoor(40.0, 20.0, 100.0, 1, 1, side);
        let j = validate_jensen_bound(&g, 200_000, 70 + side as u64).map_err(|e| e.to_string())?;
        ensure(j.lhs >= j.rhs, format!("N_ris={}: lhs {} < rhs {}", side * side, j.lhs, j.rhs))?;
        gaps.push(j.relative_gap());
    }
    ensure(gaps[2] <= 0.05, format!("gap at N_ris=64 is {:.4} > 0.05", gaps[2]))?;
    ensure(gaps.windows(2).all(|w| w[1] <= w[0]), format!("gaps not non-increasing: {gaps:?}"))?;
    let shown: Vec<String> = gaps.iter().map(|g| format!("{g:.4}")).collect();
    Ok(format!("gaps at N_ris 4/16/64/256 = {}", shown.join("/")))
}

fn only(mut s: Scenario, names: &[&str]) -> Scenario {
    s.optimizers = names.iter().map(|n| n.to_string()).collect();
    s
}

fn convergence_ordering() -> Outcome {
    let reg = OptimizerRegistry::default();
    let s = only(preset("outdoor-asym-near-tx", Scale::Desk).unwrap(), &["pgm", "ao"]);
    ensure(
        s.trials == 20 && s.geometry.tx_antennas == 4 && s.geometry.rx_antennas == 2 && s.geometry.n_ris() == 36,
        "desk scale is not 20 trials at 4x2 with 36 elements",
    )?;
    let r = run_scenario(&s, &reg).map_err(|e| e.to_string())?;
    let pgm = r.summary("pgm").unwrap().conventional_to_target;
    let ao = r.summary("ao").unwrap().conventional_to_target;

    let b = only(preset("blocked", Scale::Desk).unwrap(), &["pgm"]);
    let blocked = run_scenario(&b, &reg).map_err(|e| e.to_string())?.summary("pgm").unwrap().iterations_to_target;

    let near_rx = only(preset("outdoor-asym-near-rx", Scale::Desk).unwrap(), &["pgm", "ao"]);
    let rx = run_scenario(&near_rx, &reg).map_err(|e| e.to_string())?;
    let info = format!(
        "[info: near-rx pgm {} vs ao {}]",
        rx.summary("pgm").unwrap().conventional_to_target,
        rx.summary("ao").unwrap().conventional_to_target
    );

    ensure(5 * pgm <= ao, format!("near-tx pgm {pgm} iterations vs ao {ao} conventional (need 5x) {info}"))?;
    ensure(blocked <= 10, format!("blocked pgm needs {blocked} iterations > 10"))?;
    Ok(format!("near-tx pgm {pgm} vs ao {ao} conventional iterations to 95%; blocked pgm {blocked} {info}"))
}

struct Deltas {
    one_bit: f64,
    two_bit: f64,
    csi: f64,
    ideal: f64,
}

fn robustness_deltas(scale: Scale) -> Result<Deltas, String> {
    let reg = OptimizerRegistry::default();
    let rate = |name: &str| -> Result<f64, String> {
        let s = only(preset(name, scale).unwrap(), &["pgm"]);
        Ok(run_scenario(&s, &reg).map_err(|e| e.to_string())?.summary("pgm").unwrap().final_mean_rate)
    };
    let ideal = rate("outdoor-asym-near-tx")?;
    Ok(Deltas {
        one_bit: ideal - rate("discrete-1bit")?,
        two_bit: ideal - rate("discrete-2bit")?,
        csi: ideal - rate("imperfect-csi")?,
        ideal,
    })
}

fn robustness_desk() -> Outcome {
    let d = robustness_deltas(Scale::Desk)?;
    let msg = format!(
        "ideal {:.3}; losses 1-bit {:.3}, 2-bit {:.3}, csi {:.3} bit/s/Hz",
        d.ideal, d.one_bit, d.two_bit, d.csi
    );
    ensure(d.one_bit.is_finite() && d.two_bit.is_finite() && d.csi.is_finite(), format!("non-finite: {msg}"))?;
    ensure(d.two_bit > 0.0 && d.one_bit > d.two_bit, format!("need 0 < 2-bit < 1-bit: {msg}"))?;
    ensure(d.csi > 0.0, format!("imperfect CSI did not cost rate: {msg}"))?;
    Ok(msg)
}

fn robustness_paper() -> Outcome {
    let d = robustness_deltas(Scale::Paper)?;
    let msg = format!(
        "ideal {:.3}; losses 1-bit {:.3} (want 1.1 +-30%), 2-bit {:.3} (want 0.2 +-30%), csi {:.3}",
        d.ideal, d.one_bit, d.two_bit, d.csi
    );
    let within = |x: f64, target: f64| (x - target).abs() <= 0.3 * target;
    ensure(within(d.one_bit, 1.1) && within(d.two_bit, 0.2), msg.clone())?;
    Ok(msg)
}

fn scaling_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    for inst in 0..100 {
        let nt = rng.random_range(1..=4);
        let nr = rng.random_range(1..=4);
        let side = rng.random_range(1..=4);
        let g = SceneGeometry::outdoor(rng.random_range(10.0..490.0), 20.0, 100.0, nt, nr, side);
        let noise = db_to_linear(rng.random_range(-130.0..-90.0));
        let ch = sample_channels(&g, noise, inst % 4 == 0, &mut rng).unwrap();
        let pt = db_to_linear(rng.random_range(-30.0..20.0));
        let sc = if inst % 2 == 0 {
            scale_channels(&ch, pt).unwrap()
        } else {
            scale_channels_with_factor(&ch, pt, 10f64.powf(rng.random_range(-2.0..3.0))).unwrap()
        };
        let theta = unit_phases(&mut rng, g.n_ris(), 1.0);
        let t = pt * rng.random_range(0.1..1.0);
        let q = psd_with_trace(&mut rng, nt, t);
        let original = channel_rate_bits(&ch, &theta, &q).unwrap();
        let k = sc.k;
        let st = PhaseVector::new(theta.unscale(k), sc.phase_modulus()).unwrap();
        let sq = CovarianceMatrix::new(q.scale(k * k), sc.budget).unwrap();
        let scaled = nats_to_bits(rate_nats(&sc, &st, &sq).unwrap());
        worst = worst.max((original - scaled).abs() / original.abs().max(f64::MIN_POSITIVE));
    }
    ensure(worst <= 1e-10, format!("relative mismatch {worst:.2e} > 1e-10"))?;
    Ok(format!("100 instances, worst relative mismatch {worst:.1e} (tol 1e-10)"))
}

// ---------------------------------------------------------------------------

struct Criterion {
    id: &'static str,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let criteria = [
        Criterion { id: "1", name: "complexity table exactness", limit: s(1), run: table_exactness },
        Criterion { id: "2", name: "gradient fidelity", limit: s(30), run: gradient_fidelity },
        Criterion { id: "3", name: "monotone ascent with 0.999/L step", limit: s(120), run: lipschitz_monotonicity },
        Criterion { id: "4", name: "projection optimality", limit: s(60), run: projection_optimality },
        Criterion { id: "5", name: "AO element-update optimality", limit: s(60), run: ao_element_optimality },
        Criterion { id: "6", name: "SISO optimum", limit: s(1), run: siso_optimum },
        Criterion { id: "7", name: "Jensen bound", limit: s(60), run: jensen_bound },
        Criterion { id: "8", name: "convergence-speed ordering", limit: s(300), run: convergence_ordering },
        Criterion { id: "9", name: "robustness deltas, desk scale", limit: s(300), run: robustness_desk },
        Criterion { id: "9p", name: "robustness deltas, paper scale", limit: s(600), run: robustness_paper },
        Criterion { id: "10", name: "scaling invariance", limit: s(10), run: scaling_invariance },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > c.limit => Err(format!("{msg}; took {took:.2?} > {:?}", c.limit)),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {} -- {msg} [{took:.2?}]", c.id, c.name),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {} -- {msg} [{took:.2?}]", c.id, c.name);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
