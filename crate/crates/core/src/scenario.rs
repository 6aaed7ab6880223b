//! Named scenario presets and the TOML scenario format.
//!
//! A scenario file starts from a preset (`base`, default
//! `outdoor-asym-near-tx`) and overrides any of its fields:
//!
//! ```toml
//! base = "outdoor-asym-near-tx"
//! name = "my-run"
//!
//! [geometry]          # meters, Hz
//! ris_offset = 460.0
//! frequency = 2.0e9
//! ris_rows = 8
//! ris_cols = 8
//!
//! [power]             # dB
//! transmit_db = 0.0
//! noise_db = -120.0
//!
//! [optimizer]
//! names = ["pgm", "ao"]
//! trials = 20
//!
//! [robustness]
//! discrete_bits = 2
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::channel::{wavelength_from_frequency, SceneGeometry, SPEED_OF_LIGHT};
use crate::error::{Result, RisError};
use crate::optimizer::{OptimizerRegistry, OptimizerSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    /// `N_t = 4`, `N_r = 2`, 6x6 RIS, 20 trials.
    #[default]
    Desk,
    /// `N_t = 8`, `N_r = 4`, 15x15 RIS, 200 trials.
    Paper,
}

impl Scale {
    pub fn tx_antennas(self) -> usize {
        match self {
            Scale::Desk => 4,
            Scale::Paper => 8,
        }
    }

    pub fn rx_antennas(self) -> usize {
        match self {
            Scale::Desk => 2,
            Scale::Paper => 4,
        }
    }

    pub fn ris_side(self) -> usize {
        match self {
            Scale::Desk => 6,
            Scale::Paper => 15,
        }
    }

    pub fn trials(self) -> usize {
        match self {
            Scale::Desk => 20,
            Scale::Paper => 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Robustness {
    /// Quantize the phases to `2^bits` levels before scoring.
    pub discrete_bits: Option<u32>,
    /// Optimize on a channel estimate with `CN(0, sigma2)` errors.
    pub csi_sigma2: Option<f64>,
}

impl Robustness {
    pub fn is_ideal(&self) -> bool {
        self.discrete_bits.is_none() && self.csi_sigma2.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub geometry: SceneGeometry,
    pub transmit_power_db: f64,
    pub noise_db: f64,
    pub direct_blocked: bool,
    pub optimizers: Vec<String>,
    pub trials: usize,
    pub base_seed: u64,
    pub settings: OptimizerSettings,
    pub robustness: Robustness,
}

impl Scenario {
    pub fn validate(&self, registry: &OptimizerRegistry) -> Result<()> {
        self.geometry.validate()?;
        if self.trials == 0 {
            return Err(RisError::InvalidParameter("a scenario needs at least one trial".into()));
        }
        if self.optimizers.is_empty() {
            return Err(RisError::Empty("optimizer list"));
        }
        for name in &self.optimizers {
            if !registry.contains(name) {
                return Err(RisError::UnknownName {
                    kind: "optimizer",
                    name: name.clone(),
                    valid: registry.names(),
                });
            }
        }
        if !self.transmit_power_db.is_finite() || !self.noise_db.is_finite() {
            return Err(RisError::InvalidParameter("power levels must be finite".into()));
        }
        if let Some(bits) = self.robustness.discrete_bits {
            if bits == 0 || bits > 30 {
                return Err(RisError::InvalidParameter(format!("discrete_bits must be 1..=30, got {bits}")));
            }
        }
        if let Some(s2) = self.robustness.csi_sigma2 {
            if !(s2 >= 0.0) || !s2.is_finite() {
                return Err(RisError::InvalidParameter(format!("csi_sigma2 must be >= 0, got {s2}")));
            }
        }
        if self.settings.ao_initializations == 0 {
            return Err(RisError::InvalidParameter("ao_initializations must be at least 1".into()));
        }
        Ok(())
    }

    /// Sets the frequency and resets every spacing to half a wavelength.
    pub fn set_frequency(&mut self, frequency_hz: f64) {
        let lambda = wavelength_from_frequency(frequency_hz);
        self.geometry.wavelength = lambda;
        self.geometry.tx_spacing = lambda / 2.0;
        self.geometry.rx_spacing = lambda / 2.0;
        self.geometry.ris_spacing = lambda / 2.0;
    }
}

const BENCHMARKS: [&str; 4] = ["pgm", "ao", "direct_only", "indirect_only"];

pub const PRESET_NAMES: [&str; 14] = [
    "outdoor-asym-near-tx",
    "outdoor-asym-near-rx",
    "outdoor-sym-near-tx",
    "outdoor-sym-near-rx",
    "blocked",
    "blocked-near-rx",
    "indoor",
    "indoor-blocked",
    "discrete-1bit",
    "discrete-2bit",
    "imperfect-csi",
    "ablation",
    "init-random",
    "nris-sweep",
];

/// `N_ris` values of the element-count sweep.
pub const NRIS_SWEEP: [usize; 3] = [49, 196, 784];

pub fn preset_names() -> Vec<String> {
    PRESET_NAMES.iter().map(|s| s.to_string()).collect()
}

fn outdoor(name: &str, scale: Scale, ris_offset: f64, lt: f64, lr: f64, optimizers: &[&str]) -> Scenario {
    Scenario {
        name: name.to_string(),
        geometry: SceneGeometry::outdoor(
            ris_offset,
            lt,
            lr,
            scale.tx_antennas(),
            scale.rx_antennas(),
            scale.ris_side(),
        ),
        transmit_power_db: 0.0,
        noise_db: -120.0,
        direct_blocked: false,
        optimizers: optimizers.iter().map(|s| s.to_string()).collect(),
        trials: scale.trials(),
        base_seed: 1,
        settings: OptimizerSettings::default(),
        robustness: Robustness::default(),
    }
}

/// Resolves a preset name at the given scale.
pub fn preset(name: &str, scale: Scale) -> Result<Scenario> {
    let near_tx = 40.0;
    let near_rx = 500.0 - 40.0;
    let s = match name {
        "outdoor-asym-near-tx" => outdoor(name, scale, near_tx, 20.0, 100.0, &BENCHMARKS),
        "outdoor-asym-near-rx" => outdoor(name, scale, near_rx, 20.0, 100.0, &BENCHMARKS),
        "outdoor-sym-near-tx" => outdoor(name, scale, near_tx, 50.0, 50.0, &BENCHMARKS),
        "outdoor-sym-near-rx" => outdoor(name, scale, near_rx, 50.0, 50.0, &BENCHMARKS),
        "blocked" | "blocked-near-rx" => {
            let x = if name == "blocked" { near_tx } else { near_rx };
            let mut s = outdoor(name, scale, x, 20.0, 100.0, &["pgm", "ao"]);
            s.direct_blocked = true;
            s
        }
        "indoor" | "indoor-blocked" => {
            let mut s = outdoor(name, scale, 5.0, 3.0, 7.0, &BENCHMARKS);
            s.geometry.wall_distance = 30.0;
            s.geometry.ris_rows = 10;
            s.geometry.ris_cols = 10;
            s.transmit_power_db = -30.0;
            s.noise_db = -100.0;
            if name == "indoor-blocked" {
                s.direct_blocked = true;
                s.optimizers = vec!["pgm".into(), "ao".into()];
            }
            s
        }
        "discrete-1bit" | "discrete-2bit" => {
            let mut s = outdoor(name, scale, near_tx, 20.0, 100.0, &["pgm"]);
            s.robustness.discrete_bits = Some(if name == "discrete-1bit" { 1 } else { 2 });
            s
        }
        "imperfect-csi" => {
            let mut s = outdoor(name, scale, near_tx, 20.0, 100.0, &["pgm"]);
            s.robustness.csi_sigma2 = Some(0.2);
            s
        }
        "ablation" => outdoor(name, scale, near_rx, 20.0, 100.0, &["pgm", "pgm_no_linesearch", "pgm_no_scaling"]),
        "init-random" => {
            let mut s = outdoor(name, scale, near_tx, 20.0, 100.0, &["pgm"]);
            s.settings.random_init = true;
            s
        }
        // single point of the element-count sweep; `sweep --nris` varies it
        "nris-sweep" => {
            let mut s = outdoor(name, scale, near_tx, 20.0, 100.0, &["pgm"]);
            s.geometry.ris_rows = 7;
            s.geometry.ris_cols = 7;
            s
        }
        _ => {
            return Err(RisError::UnknownName {
                kind: "scenario",
                name: name.to_string(),
                valid: preset_names(),
            })
        }
    };
    Ok(s)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    base: Option<String>,
    geometry: Option<GeometrySection>,
    power: Option<PowerSection>,
    optimizer: Option<OptimizerSection>,
    robustness: Option<RobustnessSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySection {
    wall_distance: Option<f64>,
    ris_offset: Option<f64>,
    tx_distance: Option<f64>,
    rx_distance: Option<f64>,
    tx_antennas: Option<usize>,
    rx_antennas: Option<usize>,
    ris_rows: Option<usize>,
    ris_cols: Option<usize>,
    frequency: Option<f64>,
    tx_spacing: Option<f64>,
    rx_spacing: Option<f64>,
    ris_spacing: Option<f64>,
    path_loss_exponent: Option<f64>,
    rician_factor: Option<f64>,
    direct_blocked: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerSection {
    transmit_db: Option<f64>,
    noise_db: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerSection {
    names: Option<Vec<String>>,
    trials: Option<usize>,
    seed: Option<u64>,
    iterations: Option<usize>,
    ao_initializations: Option<usize>,
    init: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobustnessSection {
    discrete_bits: Option<u32>,
    csi_sigma2: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses a scenario from TOML text.
pub fn parse_scenario(text: &str, scale: Scale) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| RisError::Config(e.to_string()))?;
    let mut s = preset(file.base.as_deref().unwrap_or("outdoor-asym-near-tx"), scale)?;
    set(&mut s.name, file.name);

    if let Some(g) = file.geometry {
        if let Some(f) = g.frequency {
            if !(f > 0.0) || !f.is_finite() {
                return Err(RisError::Config(format!("frequency must be positive, got {f}")));
            }
            s.set_frequency(f);
        }
        let geom = &mut s.geometry;
        set(&mut geom.wall_distance, g.wall_distance);
        set(&mut geom.ris_offset, g.ris_offset);
        set(&mut geom.tx_distance, g.tx_distance);
        set(&mut geom.rx_distance, g.rx_distance);
        set(&mut geom.tx_antennas, g.tx_antennas);
        set(&mut geom.rx_antennas, g.rx_antennas);
        set(&mut geom.ris_rows, g.ris_rows);
        set(&mut geom.ris_cols, g.ris_cols);
        set(&mut geom.tx_spacing, g.tx_spacing);
        set(&mut geom.rx_spacing, g.rx_spacing);
        set(&mut geom.ris_spacing, g.ris_spacing);
        set(&mut geom.direct_path_loss_exponent, g.path_loss_exponent);
        set(&mut geom.rician_factor, g.rician_factor);
        set(&mut s.direct_blocked, g.direct_blocked);
    }
    if let Some(p) = file.power {
        set(&mut s.transmit_power_db, p.transmit_db);
        set(&mut s.noise_db, p.noise_db);
    }
    if let Some(o) = file.optimizer {
        set(&mut s.optimizers, o.names);
        set(&mut s.trials, o.trials);
        set(&mut s.base_seed, o.seed);
        set(&mut s.settings.iterations, o.iterations);
        set(&mut s.settings.ao_initializations, o.ao_initializations);
        match o.init.as_deref() {
            None => {}
            Some("fixed") => s.settings.random_init = false,
            Some("random") => s.settings.random_init = true,
            Some(other) => {
                return Err(RisError::Config(format!("init must be \"fixed\" or \"random\", got \"{other}\"")))
            }
        }
    }
    if let Some(r) = file.robustness {
        s.robustness = Robustness {
            discrete_bits: r.discrete_bits,
            csi_sigma2: r.csi_sigma2,
        };
    }
    s.validate(&OptimizerRegistry::default())?;
    Ok(s)
}

pub fn load_scenario(path: &Path, scale: Scale) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RisError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text, scale)
}

/// A preset name or a path to a scenario file.
pub fn resolve_scenario(name_or_path: &str, scale: Scale) -> Result<Scenario> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        load_scenario(path, scale)
    } else {
        preset(name_or_path, scale)
    }
}

/// Elements per side of a square aperture at half-wavelength spacing.
pub fn elements_per_side(aperture: f64, frequency_hz: f64) -> usize {
    let half_lambda = SPEED_OF_LIGHT / frequency_hz / 2.0;
    // guard against 19.999... where the ratio is an exact integer
    (aperture / half_lambda + 1e-9).floor() as usize
}
