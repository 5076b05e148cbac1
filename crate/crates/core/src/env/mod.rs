//! Bandit environments: synthetic linear, logistic, and wheel problems, plus
//! dataset-backed problems built from classification or reward-matrix files.
//!
//! Arm indices are zero-based throughout; arm `0` is the first arm.

mod dataset;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use dataset::{
    ColumnRole, DatasetEnv, DatasetSchema, RewardScheme, MUSHROOM_EAT, MUSHROOM_PASS,
};
pub(crate) use synthetic::sigmoid;
pub use synthetic::{
    wheel_optimal_action, LinearEnv, LinearEnvConfig, LogisticEnv, LogisticEnvConfig, ThetaInit,
    WheelEnv, WheelEnvConfig,
};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// The decision set for one round: one feature vector per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSet {
    pub arms: Vec<Vec<f64>>,
    pub round: usize,
}

impl ArmSet {
    pub fn new(arms: Vec<Vec<f64>>, round: usize) -> Result<Self> {
        let Some(first) = arms.first() else {
            return Err(Error::invalid("arm set must contain at least one arm"));
        };
        let m = first.len();
        if arms.iter().any(|a| a.len() != m) {
            return Err(Error::invalid("all arms must share one dimension"));
        }
        Ok(Self { arms, round })
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.arms.first().map_or(0, Vec::len)
    }

    pub fn arm(&self, i: usize) -> Result<&[f64]> {
        self.arms.get(i).map(Vec::as_slice).ok_or_else(|| {
            Error::invalid(format!("arm {i} out of range for {} arms", self.arms.len()))
        })
    }
}

/// Places `context` in block `arm` of a `context.len() * num_arms` vector.
pub fn block_feature_map(context: &[f64], arm: usize, num_arms: usize) -> Result<Vec<f64>> {
    if arm >= num_arms {
        return Err(Error::invalid(format!(
            "arm index {arm} out of range for {num_arms} arms"
        )));
    }
    let m = context.len();
    let mut out = vec![0.0; m * num_arms];
    out[arm * m..(arm + 1) * m].copy_from_slice(context);
    Ok(out)
}

pub(crate) fn check_arm(armset: &ArmSet, chosen: usize) -> Result<()> {
    if chosen < armset.len() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "arm {chosen} out of range for {} arms",
            armset.len()
        )))
    }
}

pub trait BanditEnv {
    fn name(&self) -> String;

    /// Length of every arm feature vector.
    fn feature_dim(&self) -> usize;

    fn num_arms(&self) -> usize;

    fn horizon(&self) -> usize;

    /// Next decision set; `Error::EndOfStream` once the horizon is consumed.
    fn observe(&mut self, rng: &mut SimRng) -> Result<ArmSet>;

    /// Draws a stochastic reward for `chosen`.
    fn reward(&mut self, armset: &ArmSet, chosen: usize, rng: &mut SimRng) -> Result<f64>;

    /// True mean reward of `chosen`.
    fn mean_reward(&self, armset: &ArmSet, chosen: usize) -> Result<f64>;

    /// Best true mean reward available in `armset`.
    fn optimal_mean(&self, armset: &ArmSet) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for i in 0..armset.len() {
            best = best.max(self.mean_reward(armset, i)?);
        }
        Ok(best)
    }
}

/// Environment selection as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Linear(LinearEnvConfig),
    Logistic(LogisticEnvConfig),
    Wheel(WheelEnvConfig),
    Dataset {
        path: std::path::PathBuf,
        schema: DatasetSchema,
        #[serde(default)]
        name: Option<String>,
    },
}

impl EnvConfig {
    pub fn name(&self) -> String {
        match self {
            EnvConfig::Linear(c) => format!("linear-{}d", c.param_dim()),
            EnvConfig::Logistic(c) => format!("logistic-{}d", c.dim),
            EnvConfig::Wheel(c) => format!("wheel-{}", c.delta),
            EnvConfig::Dataset { path, name, .. } => name.clone().unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into())
            }),
        }
    }

    /// Builds the environment for a run of `horizon` rounds; `setup` seeds
    /// any per-run randomness (θ*, dataset shuffle).
    pub fn build(&self, horizon: usize, setup: &mut SimRng) -> Result<Environment> {
        Ok(match self {
            EnvConfig::Linear(c) => Environment::Linear(LinearEnv::new(c.clone(), horizon, setup)?),
            EnvConfig::Logistic(c) => {
                Environment::Logistic(LogisticEnv::new(c.clone(), horizon, setup)?)
            }
            EnvConfig::Wheel(c) => Environment::Wheel(WheelEnv::new(c.clone(), horizon)?),
            EnvConfig::Dataset { path, schema, .. } => {
                let mut env = DatasetEnv::load_with_rng(path, schema, setup)?;
                env.set_horizon(horizon);
                if let Some(n) = self.name_override() {
                    env.set_name(n);
                }
                Environment::Dataset(env)
            }
        })
    }

    fn name_override(&self) -> Option<String> {
        match self {
            EnvConfig::Dataset { name, .. } => name.clone(),
            _ => None,
        }
    }
}

/// Closed set of environments, dispatching to each implementation.
#[derive(Debug, Clone)]
pub enum Environment {
    Linear(LinearEnv),
    Logistic(LogisticEnv),
    Wheel(WheelEnv),
    Dataset(DatasetEnv),
}

macro_rules! dispatch {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            Environment::Linear($e) => $body,
            Environment::Logistic($e) => $body,
            Environment::Wheel($e) => $body,
            Environment::Dataset($e) => $body,
        }
    };
}

impl BanditEnv for Environment {
    fn name(&self) -> String {
        dispatch!(self, e => e.name())
    }
    fn feature_dim(&self) -> usize {
        dispatch!(self, e => e.feature_dim())
    }
    fn num_arms(&self) -> usize {
        dispatch!(self, e => e.num_arms())
    }
    fn horizon(&self) -> usize {
        dispatch!(self, e => e.horizon())
    }
    fn observe(&mut self, rng: &mut SimRng) -> Result<ArmSet> {
        dispatch!(self, e => e.observe(rng))
    }
    fn reward(&mut self, armset: &ArmSet, chosen: usize, rng: &mut SimRng) -> Result<f64> {
        dispatch!(self, e => e.reward(armset, chosen, rng))
    }
    fn mean_reward(&self, armset: &ArmSet, chosen: usize) -> Result<f64> {
        dispatch!(self, e => e.mean_reward(armset, chosen))
    }
    fn optimal_mean(&self, armset: &ArmSet) -> Result<f64> {
        dispatch!(self, e => e.optimal_mean(armset))
    }
}
