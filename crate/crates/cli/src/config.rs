//! Experiment configuration (TOML).
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wtasnn::data::Encoding;
use wtasnn::filters::{make_exp_diff_filter, make_raised_cosine_bank, make_somatic_filter, FilterBank};
use wtasnn::learning::LearnerConfig;
use wtasnn::mathcore::SpikeSymbol;
use wtasnn::network::Wiring;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub epochs: usize,
    /// Independent runs with seeds `seed, seed + 1, …`.
    pub trials: usize,
    /// Write a metrics row every this many training examples.
    pub log_every: usize,
    pub network: NetworkConfig,
    pub filters: FilterConfig,
    pub learner: LearnerSection,
    pub data: DataConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Number of hidden circuits `H`.
    pub hidden: usize,
    /// Units per hidden and read-out circuit; defaults to the input encoding's.
    pub units: Option<usize>,
    pub wiring: Wiring,
    /// Standard deviation of the initial weights.
    pub init_std: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    RaisedCosine,
    ExpDiff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub kind: FilterKind,
    /// Number of synaptic filters `K`; `exp_diff` needs `k = 1`.
    pub k: usize,
    /// Filter duration `τ` in steps.
    pub tau: usize,
    pub tau1: f64,
    pub tau2: f64,
    /// Somatic time constant.
    pub tau3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    /// Learning rate; `0.05 / H` when absent.
    pub eta: Option<f64>,
    pub gamma: f64,
    pub kappa: f64,
    pub kappa_b: f64,
    pub alpha: f64,
    pub r: f64,
    pub halve_lr_each_epoch: bool,
    pub use_baseline: bool,
    pub grad_clip: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    pub encoding: Encoding,
    /// Center crop `[width, height]` applied before pooling.
    pub crop: Option<[usize; 2]>,
    pub pool: usize,
    pub shuffle: bool,
    /// Also evaluate the test set every this many training examples.
    pub test_every: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            epochs: 1,
            trials: 1,
            log_every: 100,
            network: NetworkConfig::default(),
            filters: FilterConfig::default(),
            learner: LearnerSection::default(),
            data: DataConfig::default(),
        }
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: 16,
            units: None,
            wiring: Wiring::FullyConnected,
            init_std: 0.1,
        }
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            kind: FilterKind::RaisedCosine,
            k: 8,
            tau: 10,
            tau1: 10.0,
            tau2: 5.0,
            tau3: 5.0,
        }
    }
}

impl Default for LearnerSection {
    fn default() -> Self {
        let d = LearnerConfig::defaults_for(1);
        LearnerSection {
            eta: None,
            gamma: d.gamma,
            kappa: d.kappa,
            kappa_b: d.kappa_b,
            alpha: d.alpha,
            r: d.r,
            halve_lr_each_epoch: d.halve_lr_each_epoch,
            use_baseline: d.use_baseline,
            grad_clip: d.grad_clip,
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train_manifest: None,
            test_manifest: None,
            encoding: Encoding::Wta,
            crop: None,
            pool: 1,
            shuffle: true,
            test_every: None,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError(msg));
        if self.trials == 0 {
            return fail("trials must be ≥ 1".into());
        }
        if self.log_every == 0 {
            return fail("log_every must be ≥ 1".into());
        }
        if let Some(u) = self.network.units {
            if u == 0 || u > SpikeSymbol::MAX_UNITS {
                return fail(format!("network.units = {u} outside 1..={}", SpikeSymbol::MAX_UNITS));
            }
        }
        if !(self.network.init_std >= 0.0 && self.network.init_std.is_finite()) {
            return fail(format!("network.init_std = {} must be ≥ 0", self.network.init_std));
        }
        let l = &self.learner;
        if let Some(eta) = l.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return fail(format!("learner.eta = {eta} must be > 0"));
            }
        }
        for (name, v) in [("gamma", l.gamma), ("kappa", l.kappa), ("kappa_b", l.kappa_b)] {
            if !(v > 0.0 && v < 1.0) {
                return fail(format!("learner.{name} = {v} outside (0, 1)"));
            }
        }
        if !(l.alpha >= 0.0 && l.alpha.is_finite()) {
            return fail(format!("learner.alpha = {} must be ≥ 0", l.alpha));
        }
        if !(l.r > 0.0 && l.r < 1.0) {
            return fail(format!("learner.r = {} outside (0, 1)", l.r));
        }
        if let Some(c) = l.grad_clip {
            if !(c > 0.0) {
                return fail(format!("learner.grad_clip = {c} must be > 0"));
            }
        }
        if self.data.pool == 0 {
            return fail("data.pool must be ≥ 1".into());
        }
        if self.data.test_every == Some(0) {
            return fail("data.test_every must be ≥ 1".into());
        }
        if self.filters.kind == FilterKind::ExpDiff && self.filters.k != 1 {
            return fail(format!("filters.kind = \"exp_diff\" needs k = 1, got {}", self.filters.k));
        }
        self.filter_bank().map(|_| ()).map_err(|e| ConfigError(format!("filters: {e}")))
    }

    /// Learner hyperparameters with the learning rate resolved.
    pub fn learner_config(&self) -> LearnerConfig {
        let l = &self.learner;
        LearnerConfig {
            eta: l.eta.unwrap_or(0.05 / self.network.hidden.max(1) as f64),
            gamma: l.gamma,
            kappa: l.kappa,
            kappa_b: l.kappa_b,
            alpha: l.alpha,
            r: l.r,
            halve_lr_each_epoch: l.halve_lr_each_epoch,
            use_baseline: l.use_baseline,
            grad_clip: l.grad_clip,
        }
    }

    pub fn filter_bank(&self) -> wtasnn::Result<FilterBank> {
        let f = &self.filters;
        let synaptic = match f.kind {
            FilterKind::RaisedCosine => make_raised_cosine_bank(f.k, f.tau)?,
            FilterKind::ExpDiff => vec![make_exp_diff_filter(f.tau1, f.tau2, f.tau)?],
        };
        FilterBank::new(synaptic, make_somatic_filter(f.tau3, f.tau)?)
    }

    /// Units of hidden and read-out circuits.
    pub fn circuit_units(&self) -> usize {
        self.network.units.unwrap_or(self.data.encoding.shape().1)
    }

    /// Configuration with every implicit default written out.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.learner.eta = Some(self.learner_config().eta);
        c.network.units = Some(self.circuit_units());
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the resolved configuration's TOML, as lowercase hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.resolved().to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let l = c.learner_config();
        assert_eq!(l.eta, 0.05 / 16.0);
        assert_eq!((l.gamma, l.kappa, l.kappa_b, l.alpha, l.r), (0.2, 0.2, 0.05, 1.0, 0.3));
        assert_eq!(c.filters.tau, 10);
        assert_eq!(c.filters.k, 8);
    }

    #[test]
    fn eta_defaults_to_point_zero_five_over_h() {
        let c = ExperimentConfig::parse("[network]\nhidden = 8\n").unwrap();
        assert_eq!(c.learner_config().eta, 0.00625);
        let c = ExperimentConfig::parse("[learner]\neta = 0.5\n").unwrap();
        assert_eq!(c.learner_config().eta, 0.5);
    }

    #[test]
    fn unknown_keys_and_bad_ranges_are_rejected() {
        assert!(ExperimentConfig::parse("sed = 1\n").is_err());
        assert!(ExperimentConfig::parse("[learner]\nlr = 1\n").is_err());
        assert!(ExperimentConfig::parse("[learner]\ngamma = 1.0\n").is_err());
        assert!(ExperimentConfig::parse("[learner]\nr = 0.0\n").is_err());
        assert!(ExperimentConfig::parse("[filters]\nk = 20\n").is_err());
        assert!(ExperimentConfig::parse("[filters]\nkind = \"exp_diff\"\n").is_err());
        assert!(ExperimentConfig::parse("[filters]\nkind = \"exp_diff\"\nk = 1\n").is_ok());
        assert!(ExperimentConfig::parse("trials = 0\n").is_err());
    }

    #[test]
    fn resolved_round_trip_and_hash() {
        let c = ExperimentConfig::parse("seed = 4\n[data]\nencoding = \"unsigned\"\n").unwrap();
        let r = c.resolved();
        assert_eq!(r.network.units, Some(1));
        assert_eq!(ExperimentConfig::parse(&r.to_toml()).unwrap(), r);
        assert_eq!(c.hash(), r.hash());
        assert_eq!(c.hash().len(), 64);
        assert_ne!(c.hash(), ExperimentConfig::default().hash());
    }
}
