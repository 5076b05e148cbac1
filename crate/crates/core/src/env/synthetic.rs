use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{block_feature_map, check_arm, ArmSet, BanditEnv};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, standard_normal_vec};
use crate::rng::SimRng;

/// How the hidden parameter θ* is drawn for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "init", rename_all = "snake_case")]
pub enum ThetaInit {
    /// `N(0, I)` rescaled to unit norm.
    UnitSphere,
    /// `N(0, sd² I)`.
    Gaussian {
        sd: f64,
    },
    Fixed {
        values: Vec<f64>,
    },
}

impl Default for ThetaInit {
    fn default() -> Self {
        ThetaInit::UnitSphere
    }
}

impl ThetaInit {
    fn draw(&self, dim: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        match self {
            ThetaInit::UnitSphere => loop {
                let v = standard_normal_vec(rng, dim);
                let n = norm(&v);
                if n > 0.0 {
                    return Ok(v.into_iter().map(|x| x / n).collect());
                }
            },
            ThetaInit::Gaussian { sd } => {
                if !(*sd > 0.0) {
                    return Err(Error::invalid(format!(
                        "theta sd must be positive, got {sd}"
                    )));
                }
                Ok(standard_normal_vec(rng, dim)
                    .into_iter()
                    .map(|x| sd * x)
                    .collect())
            }
            ThetaInit::Fixed { values } => {
                if values.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: values.len(),
                    });
                }
                Ok(values.clone())
            }
        }
    }
}

fn horizon_guard(consumed: &mut usize, horizon: usize) -> Result<usize> {
    if *consumed >= horizon {
        return Err(Error::EndOfStream { horizon });
    }
    *consumed += 1;
    Ok(*consumed)
}

// ---------------------------------------------------------------------------
// Linear

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearEnvConfig {
    pub context_dim: usize,
    pub num_arms: usize,
    pub noise_sd: f64,
    pub theta: ThetaInit,
}

impl Default for LinearEnvConfig {
    fn default() -> Self {
        Self {
            context_dim: 4,
            num_arms: 5,
            noise_sd: 0.5,
            theta: ThetaInit::UnitSphere,
        }
    }
}

impl LinearEnvConfig {
    pub fn param_dim(&self) -> usize {
        self.context_dim * self.num_arms
    }
}

/// Shared Gaussian context, block feature map per arm, `r = xᵀθ* + N(0, σ²)`.
#[derive(Debug, Clone)]
pub struct LinearEnv {
    cfg: LinearEnvConfig,
    theta_star: Vec<f64>,
    horizon: usize,
    consumed: usize,
}

impl LinearEnv {
    pub fn new(cfg: LinearEnvConfig, horizon: usize, setup: &mut SimRng) -> Result<Self> {
        if cfg.context_dim == 0 || cfg.num_arms == 0 {
            return Err(Error::invalid(
                "linear env needs context_dim ≥ 1 and num_arms ≥ 1",
            ));
        }
        if !(cfg.noise_sd >= 0.0) {
            return Err(Error::invalid("noise_sd must be non-negative"));
        }
        let theta_star = cfg.theta.draw(cfg.param_dim(), setup)?;
        Ok(Self {
            cfg,
            theta_star,
            horizon,
            consumed: 0,
        })
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }
}

impl BanditEnv for LinearEnv {
    fn name(&self) -> String {
        format!("linear-{}d", self.cfg.param_dim())
    }
    fn feature_dim(&self) -> usize {
        self.cfg.param_dim()
    }
    fn num_arms(&self) -> usize {
        self.cfg.num_arms
    }
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn observe(&mut self, rng: &mut SimRng) -> Result<ArmSet> {
        let round = horizon_guard(&mut self.consumed, self.horizon)?;
        let c = standard_normal_vec(rng, self.cfg.context_dim);
        let arms = (0..self.cfg.num_arms)
            .map(|i| block_feature_map(&c, i, self.cfg.num_arms))
            .collect::<Result<Vec<_>>>()?;
        ArmSet::new(arms, round)
    }

    fn reward(&mut self, armset: &ArmSet, chosen: usize, rng: &mut SimRng) -> Result<f64> {
        let mean = self.mean_reward(armset, chosen)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(mean + self.cfg.noise_sd * z)
    }

    fn mean_reward(&self, armset: &ArmSet, chosen: usize) -> Result<f64> {
        check_arm(armset, chosen)?;
        Ok(dot(&armset.arms[chosen], &self.theta_star))
    }
}

// ---------------------------------------------------------------------------
// Logistic

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticEnvConfig {
    pub dim: usize,
    pub num_arms: usize,
    /// θ* is always rescaled to unit norm.
    pub theta: ThetaInit,
}

impl Default for LogisticEnvConfig {
    fn default() -> Self {
        Self {
            dim: 20,
            num_arms: 50,
            theta: ThetaInit::UnitSphere,
        }
    }
}

pub(crate) fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Unit-norm Gaussian arm vectors, Bernoulli rewards with a logistic link.
#[derive(Debug, Clone)]
pub struct LogisticEnv {
    cfg: LogisticEnvConfig,
    theta_star: Vec<f64>,
    horizon: usize,
    consumed: usize,
}

impl LogisticEnv {
    pub fn new(cfg: LogisticEnvConfig, horizon: usize, setup: &mut SimRng) -> Result<Self> {
        if cfg.dim == 0 || cfg.num_arms == 0 {
            return Err(Error::invalid(
                "logistic env needs dim ≥ 1 and num_arms ≥ 1",
            ));
        }
        let raw = cfg.theta.draw(cfg.dim, setup)?;
        let n = norm(&raw);
        let theta_star = if n > 0.0 {
            raw.into_iter().map(|x| x / n).collect()
        } else {
            raw
        };
        Ok(Self {
            cfg,
            theta_star,
            horizon,
            consumed: 0,
        })
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }
}

impl BanditEnv for LogisticEnv {
    fn name(&self) -> String {
        format!("logistic-{}d", self.cfg.dim)
    }
    fn feature_dim(&self) -> usize {
        self.cfg.dim
    }
    fn num_arms(&self) -> usize {
        self.cfg.num_arms
    }
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn observe(&mut self, rng: &mut SimRng) -> Result<ArmSet> {
        let round = horizon_guard(&mut self.consumed, self.horizon)?;
        let arms = (0..self.cfg.num_arms)
            .map(|_| loop {
                let v = standard_normal_vec(rng, self.cfg.dim);
                let n = norm(&v);
                if n > 0.0 {
                    break v.into_iter().map(|x| x / n).collect();
                }
            })
            .collect();
        ArmSet::new(arms, round)
    }

    fn reward(&mut self, armset: &ArmSet, chosen: usize, rng: &mut SimRng) -> Result<f64> {
        let p = self.mean_reward(armset, chosen)?;
        let u: f64 = rng.random();
        Ok(if u < p { 1.0 } else { 0.0 })
    }

    fn mean_reward(&self, armset: &ArmSet, chosen: usize) -> Result<f64> {
        check_arm(armset, chosen)?;
        Ok(sigmoid(dot(&armset.arms[chosen], &self.theta_star)))
    }
}

// ---------------------------------------------------------------------------
// Wheel

pub const WHEEL_ARMS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WheelEnvConfig {
    pub delta: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub noise_sd: f64,
}

impl Default for WheelEnvConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            mu1: 1.2,
            mu2: 1.0,
            mu3: 50.0,
            noise_sd: 0.01,
        }
    }
}

/// Optimal wheel arm (zero-based) for a context in the unit disk.
///
/// Arm 0 wins inside the radius-`delta` disk (boundary included). Outside,
/// arms 1..=4 win in quadrants (+,+), (+,−), (−,−), (−,+); a zero coordinate
/// counts as positive.
pub fn wheel_optimal_action(x: [f64; 2], delta: f64) -> usize {
    if x[0].hypot(x[1]) <= delta {
        return 0;
    }
    match (x[0] >= 0.0, x[1] >= 0.0) {
        (true, true) => 1,
        (true, false) => 2,
        (false, false) => 3,
        (false, true) => 4,
    }
}

/// Two-dimensional context drawn uniformly from the unit disk; arm `i` sees
/// the context in block `i` of a 10-vector.
#[derive(Debug, Clone)]
pub struct WheelEnv {
    cfg: WheelEnvConfig,
    horizon: usize,
    consumed: usize,
}

impl WheelEnv {
    pub fn new(cfg: WheelEnvConfig, horizon: usize) -> Result<Self> {
        if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
            return Err(Error::invalid(format!(
                "wheel delta must lie in (0,1), got {}",
                cfg.delta
            )));
        }
        if !(cfg.mu2 < cfg.mu1 && cfg.mu1 < cfg.mu3) {
            return Err(Error::invalid("wheel means must satisfy mu2 < mu1 < mu3"));
        }
        Ok(Self {
            cfg,
            horizon,
            consumed: 0,
        })
    }

    /// Area-uniform draw from the unit disk.
    pub fn sample_context(rng: &mut SimRng) -> [f64; 2] {
        let r = rng.random::<f64>().sqrt();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        [r * phi.cos(), r * phi.sin()]
    }

    /// Recovers the shared context from block 0 of arm 0.
    pub fn context_of(armset: &ArmSet) -> Result<[f64; 2]> {
        let a = armset.arm(0)?;
        if a.len() != 2 * WHEEL_ARMS {
            return Err(Error::invalid("not a wheel arm set"));
        }
        Ok([a[0], a[1]])
    }
}

impl BanditEnv for WheelEnv {
    fn name(&self) -> String {
        format!("wheel-{}", self.cfg.delta)
    }
    fn feature_dim(&self) -> usize {
        2 * WHEEL_ARMS
    }
    fn num_arms(&self) -> usize {
        WHEEL_ARMS
    }
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn observe(&mut self, rng: &mut SimRng) -> Result<ArmSet> {
        let round = horizon_guard(&mut self.consumed, self.horizon)?;
        let x = Self::sample_context(rng);
        let arms = (0..WHEEL_ARMS)
            .map(|i| block_feature_map(&x, i, WHEEL_ARMS))
            .collect::<Result<Vec<_>>>()?;
        ArmSet::new(arms, round)
    }

    fn reward(&mut self, armset: &ArmSet, chosen: usize, rng: &mut SimRng) -> Result<f64> {
        let mean = self.mean_reward(armset, chosen)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(mean + self.cfg.noise_sd * z)
    }

    fn mean_reward(&self, armset: &ArmSet, chosen: usize) -> Result<f64> {
        check_arm(armset, chosen)?;
        let x = Self::context_of(armset)?;
        if chosen == 0 {
            return Ok(self.cfg.mu1);
        }
        let best = wheel_optimal_action(x, self.cfg.delta);
        Ok(if best == chosen {
            self.cfg.mu3
        } else {
            self.cfg.mu2
        })
    }

    fn optimal_mean(&self, armset: &ArmSet) -> Result<f64> {
        let x = Self::context_of(armset)?;
        Ok(if x[0].hypot(x[1]) <= self.cfg.delta {
            self.cfg.mu1
        } else {
            self.cfg.mu3
        })
    }
}
