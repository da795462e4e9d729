use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use crate::error::{Error, Result};

/// Instance shape `n x m`, written as `"6x6"` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Shape {
    pub jobs: usize,
    pub machines: usize,
}

impl Shape {
    pub fn new(jobs: usize, machines: usize) -> Self {
        Self { jobs, machines }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.jobs, self.machines)
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad shape '{s}', expected NxM"));
        let (n, m) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let jobs: usize = n.trim().parse().map_err(|_| bad())?;
        let machines: usize = m.trim().parse().map_err(|_| bad())?;
        if jobs == 0 || machines == 0 {
            return Err(bad());
        }
        Ok(Self { jobs, machines })
    }
}

impl TryFrom<String> for Shape {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Shape> for String {
    fn from(s: Shape) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub shapes: Vec<Shape>,
    pub instances_per_shape: usize,
    pub epochs: usize,
    pub beta_train: usize,
    pub batch_accum: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub holdout_per_shape: usize,
    pub beta_valid: usize,
    /// Extra validation every this many optimizer steps; 0 means per epoch only.
    pub validate_every: usize,
    pub seed: u64,
    pub checkpoint: PathBuf,
    /// Training log; defaults to the checkpoint path with a `.csv` extension.
    pub log: Option<PathBuf>,
    /// Use the small test architecture instead of the full one.
    pub tiny_model: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    /// Small run that finishes in minutes on one core.
    pub fn desk() -> Self {
        Self {
            shapes: vec![Shape::new(6, 6), Shape::new(8, 8)],
            instances_per_shape: 1000,
            epochs: 1,
            beta_train: 64,
            batch_accum: 16,
            lr: 2e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            holdout_per_shape: 50,
            beta_valid: 64,
            validate_every: 0,
            seed: 0,
            checkpoint: PathBuf::from("checkpoints/model.ckpt"),
            log: None,
            tiny_model: false,
        }
    }

    /// The full-scale regime: six shapes, 30000 instances, 20 epochs.
    pub fn full() -> Self {
        Self {
            shapes: [(10, 10), (15, 10), (15, 15), (20, 10), (20, 15), (20, 20)]
                .into_iter()
                .map(|(n, m)| Shape::new(n, m))
                .collect(),
            instances_per_shape: 5000,
            epochs: 20,
            beta_train: 256,
            holdout_per_shape: 100,
            beta_valid: 256,
            ..Self::desk()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn log_path(&self) -> PathBuf {
        self.log
            .clone()
            .unwrap_or_else(|| self.checkpoint.with_extension("csv"))
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(!self.shapes.is_empty(), "shapes must not be empty")?;
        check(self.beta_train >= 1, "beta_train must be at least 1")?;
        check(self.beta_valid >= 1, "beta_valid must be at least 1")?;
        check(self.batch_accum >= 1, "batch_accum must be at least 1")?;
        check(self.lr > 0.0 && self.lr.is_finite(), "lr must be positive")?;
        check(
            (0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2),
            "adam betas must lie in [0, 1)",
        )?;
        check(self.adam_eps > 0.0, "adam_eps must be positive")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
