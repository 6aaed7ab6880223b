//! Rate optimizers behind one interface, looked up by name.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::ao::{run_ao_probed, AoConfig};
use crate::channel::{scale_channels, scale_channels_with_factor, ChannelSet};
use crate::error::{Result, RisError};
use crate::pgm::{default_start, random_start, run_pgm_probed, PgmConfig, StallRule, StepMode};
use crate::trace::{IterationUnit, OptimizerTrace, RateProbe};

/// Fixed step of the no-line-search ablation.
pub const ABLATION_FIXED_STEP: f64 = 10.0;

/// Knobs shared by every optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    /// Budget in conventional iterations. AO gets the number of outer
    /// iterations that fits, and at least one.
    pub iterations: usize,
    pub ao_initializations: usize,
    /// Random instead of fixed PGM starting point.
    pub random_init: bool,
    pub stall: Option<StallRule>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            iterations: 500,
            ao_initializations: 100,
            random_init: false,
            stall: None,
        }
    }
}

pub trait RateOptimizer: Send + Sync {
    fn name(&self) -> &str;

    fn iteration_unit(&self) -> IterationUnit;

    /// The channel this optimizer actually works on (e.g. with a link removed).
    fn prepare(&self, ch: &ChannelSet) -> ChannelSet {
        ch.clone()
    }

    /// Optimizes on an already prepared channel. The returned variables are
    /// in original units.
    fn optimize(
        &self,
        ch: &ChannelSet,
        transmit_power: f64,
        rng: &mut ChaCha8Rng,
        probe: Option<RateProbe<'_>>,
    ) -> Result<OptimizerTrace>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Link {
    Both,
    DirectOnly,
    IndirectOnly,
}

/// PGM in its configurable variants.
#[derive(Debug, Clone)]
pub struct Pgm {
    name: &'static str,
    config: PgmConfig,
    scaled: bool,
    random_init: bool,
    link: Link,
}

impl Pgm {
    fn new(name: &'static str, settings: &OptimizerSettings) -> Self {
        Self {
            name,
            config: PgmConfig {
                max_iterations: settings.iterations,
                stall: settings.stall,
                ..PgmConfig::default()
            },
            scaled: true,
            random_init: settings.random_init,
            link: Link::Both,
        }
    }

    pub fn config(&self) -> &PgmConfig {
        &self.config
    }
}

impl RateOptimizer for Pgm {
    fn name(&self) -> &str {
        self.name
    }

    fn iteration_unit(&self) -> IterationUnit {
        IterationUnit::Iteration
    }

    fn prepare(&self, ch: &ChannelSet) -> ChannelSet {
        match self.link {
            Link::Both => ch.clone(),
            Link::DirectOnly => ch.without_ris(),
            Link::IndirectOnly => ch.without_direct(),
        }
    }

    fn optimize(
        &self,
        ch: &ChannelSet,
        transmit_power: f64,
        rng: &mut ChaCha8Rng,
        probe: Option<RateProbe<'_>>,
    ) -> Result<OptimizerTrace> {
        let sc = if self.scaled {
            scale_channels(ch, transmit_power)?
        } else {
            scale_channels_with_factor(ch, transmit_power, 1.0)?
        };
        let (theta, q) = if self.random_init {
            random_start(&sc, rng)
        } else {
            default_start(&sc)
        };
        run_pgm_probed(&sc, &self.config, theta, q, probe)
    }
}

#[derive(Debug, Clone)]
pub struct Ao {
    initializations: usize,
    budget: usize,
    tolerance: Option<f64>,
}

impl Ao {
    pub fn outer_iterations(&self, n_ris: usize) -> usize {
        (self.budget / (n_ris + 1)).max(1)
    }
}

impl RateOptimizer for Ao {
    fn name(&self) -> &str {
        "ao"
    }

    fn iteration_unit(&self) -> IterationUnit {
        IterationUnit::Outer
    }

    fn optimize(
        &self,
        ch: &ChannelSet,
        transmit_power: f64,
        rng: &mut ChaCha8Rng,
        probe: Option<RateProbe<'_>>,
    ) -> Result<OptimizerTrace> {
        let cfg = AoConfig {
            initializations: self.initializations,
            max_outer_iterations: self.outer_iterations(ch.n_ris()),
            tolerance: self.tolerance,
        };
        run_ao_probed(ch, transmit_power, &cfg, rng, probe)
    }
}

pub type OptimizerFactory = fn(&OptimizerSettings) -> Box<dyn RateOptimizer>;

/// Name -> constructor table.
#[derive(Clone)]
pub struct OptimizerRegistry {
    factories: BTreeMap<String, OptimizerFactory>,
}

impl Default for OptimizerRegistry {
    fn default() -> Self {
        let mut r = Self {
            factories: BTreeMap::new(),
        };
        r.register("pgm", |s| Box::new(Pgm::new("pgm", s)));
        r.register("pgm_no_linesearch", |s| {
            let mut p = Pgm::new("pgm_no_linesearch", s);
            p.config.step_mode = StepMode::Fixed(ABLATION_FIXED_STEP);
            Box::new(p)
        });
        r.register("pgm_no_scaling", |s| {
            let mut p = Pgm::new("pgm_no_scaling", s);
            p.scaled = false;
            Box::new(p)
        });
        r.register("direct_only", |s| {
            let mut p = Pgm::new("direct_only", s);
            p.link = Link::DirectOnly;
            Box::new(p)
        });
        r.register("indirect_only", |s| {
            let mut p = Pgm::new("indirect_only", s);
            p.link = Link::IndirectOnly;
            Box::new(p)
        });
        r.register("ao", |s| {
            Box::new(Ao {
                initializations: s.ao_initializations,
                budget: s.iterations,
                tolerance: None,
            })
        });
        r
    }
}

impl OptimizerRegistry {
    pub fn register(&mut self, name: &str, factory: OptimizerFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, settings: &OptimizerSettings) -> Result<Box<dyn RateOptimizer>> {
        let factory = self.factories.get(name).ok_or_else(|| RisError::UnknownName {
            kind: "optimizer",
            name: name.to_string(),
            valid: self.names(),
        })?;
        Ok(factory(settings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, SceneGeometry};
    use crate::objective::channel_rate_bits;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn channel(seed: u64) -> ChannelSet {
        let g = SceneGeometry::outdoor(40.0, 20.0, 100.0, 4, 2, 4);
        sample_channels(&g, 1e-12, false, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn registry_lists_and_rejects() {
        let reg = OptimizerRegistry::default();
        assert_eq!(
            reg.names(),
            ["ao", "direct_only", "indirect_only", "pgm", "pgm_no_linesearch", "pgm_no_scaling"]
        );
        match reg.create("sgd", &OptimizerSettings::default()) {
            Err(RisError::UnknownName { valid, .. }) => assert_eq!(valid.len(), 6),
            _ => panic!("expected an unknown-name error"),
        }
    }

    #[test]
    fn every_optimizer_returns_consistent_traces() {
        let reg = OptimizerRegistry::default();
        let s = OptimizerSettings { iterations: 60, ao_initializations: 8, ..Default::default() };
        let ch = channel(1);
        for name in reg.names() {
            let opt = reg.create(&name, &s).unwrap();
            assert_eq!(opt.name(), name);
            let prepared = opt.prepare(&ch);
            let tr = opt.optimize(&prepared, 1.0, &mut ChaCha8Rng::seed_from_u64(2), None).unwrap();
            assert_eq!(tr.unit, opt.iteration_unit());
            let rate = channel_rate_bits(&prepared, tr.theta.as_vector(), tr.covariance.as_matrix()).unwrap();
            assert_relative_eq!(rate, tr.final_rate(), max_relative = 1e-9);
        }
    }

    #[test]
    fn ablations_differ_in_one_mechanism() {
        let reg = OptimizerRegistry::default();
        let s = OptimizerSettings::default();
        let ch = channel(3);
        let base = reg.create("pgm", &s).unwrap();
        let fixed = reg.create("pgm_no_linesearch", &s).unwrap();
        let t = fixed.optimize(&ch, 1.0, &mut ChaCha8Rng::seed_from_u64(0), None).unwrap();
        assert!(t.records[1..].iter().all(|r| r.step_size == ABLATION_FIXED_STEP));
        let b = base.optimize(&ch, 1.0, &mut ChaCha8Rng::seed_from_u64(0), None).unwrap();
        assert_eq!(b.records[0], t.records[0]);
    }

    #[test]
    fn link_variants_remove_one_link() {
        let reg = OptimizerRegistry::default();
        let s = OptimizerSettings::default();
        let ch = channel(4);
        let d = reg.create("direct_only", &s).unwrap().prepare(&ch);
        assert_eq!(d.n_ris(), 0);
        assert_eq!(d.h_dir, ch.h_dir);
        let i = reg.create("indirect_only", &s).unwrap().prepare(&ch);
        assert!(i.direct_blocked && i.h_dir.norm() == 0.0);
        assert_eq!(i.h1, ch.h1);
    }

    #[test]
    fn ao_budget_in_outer_iterations() {
        let ao = Ao { initializations: 1, budget: 500, tolerance: None };
        assert_eq!(ao.outer_iterations(36), 13);
        assert_eq!(ao.outer_iterations(1000), 1);
    }
}
