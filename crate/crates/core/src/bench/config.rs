use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::synth::{TaskFamily, Transform, TransformPair, DEFAULT_MC_SAMPLES};

/// A declarative sweep, read from JSON.
///
/// Only `tasks`, `d`, `rho`, `n` and `estimators` are required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub tasks: Vec<TaskFamily>,
    #[serde(default = "default_transforms")]
    pub transforms: Vec<TransformPair>,
    pub d: Vec<usize>,
    pub rho: Vec<f64>,
    pub n: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Overrides on top of the estimator defaults.
    #[serde(default)]
    pub estimator_config: EstimatorConfig,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_transforms() -> Vec<TransformPair> {
    vec![TransformPair::both(Transform::Identity)]
}

fn default_seeds() -> usize {
    10
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: SweepConfig =
            serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("tasks", self.tasks.is_empty()),
            ("transforms", self.transforms.is_empty()),
            ("d", self.d.is_empty()),
            ("rho", self.rho.is_empty()),
            ("n", self.n.is_empty()),
            ("estimators", self.estimators.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::ConfigInvalid(format!("sweep grid `{name}` is empty")));
        }
        if self.seeds == 0 {
            return Err(Error::ConfigInvalid("seeds must be at least 1".into()));
        }
        let mixtures = self.tasks.iter().any(|t| matches!(t, TaskFamily::Mog1 | TaskFamily::Mog2));
        if mixtures && self.mc_samples < 1000 {
            return Err(Error::ConfigInvalid(format!("mc_samples {} is below 1000", self.mc_samples)));
        }
        for &k in &self.estimators {
            self.estimator_config.validate_for(k)?;
        }
        // Resolving every cell checks d, rho and the transforms.
        super::cells(self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"tasks": ["gauss"], "d": [1], "rho": [0.0], "n": [5000], "estimators": ["mime"]}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c: SweepConfig = serde_json::from_str(MINIMAL).unwrap();
        assert_eq!(c.seeds, 10);
        assert_eq!(c.transforms, vec![TransformPair::both(Transform::Identity)]);
        assert_eq!(c.mc_samples, DEFAULT_MC_SAMPLES);
        assert_eq!(c.estimator_config, EstimatorConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn overrides_and_unknown_fields() {
        let c: SweepConfig = serde_json::from_str(
            r#"{"tasks": ["gauss"], "d": [1], "rho": [0.5], "n": [100], "estimators": ["nwj"],
                "estimator_config": {"width": 32}}"#,
        )
        .unwrap();
        assert_eq!((c.estimator_config.width, c.estimator_config.batch_size), (32, 512));
        assert!(serde_json::from_str::<SweepConfig>(
            r#"{"tasks": ["gauss"], "d": [1], "rho": [0.5], "n": [100], "estimators": ["nwj"], "seed": 3}"#
        )
        .is_err());
        assert!(serde_json::from_str::<SweepConfig>(
            r#"{"tasks": ["gauss"], "d": [1], "rho": [0.5], "n": [100], "estimators": ["club"]}"#
        )
        .is_err());
    }

    #[test]
    fn invalid_grids() {
        let base: SweepConfig = serde_json::from_str(MINIMAL).unwrap();
        for bad in [
            SweepConfig { d: vec![], ..base.clone() },
            SweepConfig { seeds: 0, ..base.clone() },
            SweepConfig { rho: vec![1.0], ..base.clone() },
            SweepConfig { d: vec![0], ..base.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::ConfigInvalid(_))), "{bad:?}");
        }
    }

    #[test]
    fn shipped_default_config_is_valid() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default_sweep.json");
        let c = SweepConfig::load(path).unwrap();
        assert_eq!((c.d.len(), c.rho.len(), c.n), (4, 5, vec![10_000]));
    }
}
