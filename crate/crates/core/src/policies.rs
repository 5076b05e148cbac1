//! Arm-selection policies: uniform, ε-greedy, LinUCB, LinTS, and MCMC
//! Thompson sampling over a TS/FG/SFG likelihood.
//!
//! Every argmax breaks ties toward the lowest arm index.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::DesignState;
use crate::env::ArmSet;
use crate::error::{check_len, Error, Result};
use crate::likelihoods::{BanditPosterior, History, LikelihoodSpec};
use crate::linalg::{dot, standard_normal_vec};
use crate::rng::SimRng;
use crate::samplers::{ChainStats, Kernel, SamplerConfig, SamplerState};

fn default_reg() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    Uniform,
    EpsGreedy {
        eps: f64,
        /// Use `ε / t` at round `t`.
        #[serde(default)]
        decay: bool,
        #[serde(default = "default_reg")]
        reg: f64,
    },
    #[serde(rename = "linucb")]
    LinUcb {
        alpha: f64,
        #[serde(default = "default_reg")]
        reg: f64,
    },
    #[serde(rename = "lints")]
    LinTs {
        ts_scale: f64,
        #[serde(default = "default_reg")]
        reg: f64,
    },
    McmcTs {
        likelihood: LikelihoodSpec,
        sampler: SamplerConfig,
        #[serde(default = "default_reg")]
        reg: f64,
    },
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let reg_ok = |reg: f64| {
            if reg > 0.0 && reg.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("reg must be positive, got {reg}")))
            }
        };
        match self {
            PolicyConfig::Uniform => Ok(()),
            PolicyConfig::EpsGreedy { eps, reg, .. } => {
                if !(0.0..=1.0).contains(eps) {
                    return Err(Error::invalid(format!("eps must lie in [0, 1], got {eps}")));
                }
                reg_ok(*reg)
            }
            PolicyConfig::LinUcb { alpha, reg } => {
                if !(*alpha >= 0.0) {
                    return Err(Error::invalid(format!("alpha must be ≥ 0, got {alpha}")));
                }
                reg_ok(*reg)
            }
            PolicyConfig::LinTs { ts_scale, reg } => {
                if !(*ts_scale >= 0.0) {
                    return Err(Error::invalid(format!(
                        "ts_scale must be ≥ 0, got {ts_scale}"
                    )));
                }
                reg_ok(*reg)
            }
            PolicyConfig::McmcTs {
                likelihood,
                sampler,
                reg,
            } => {
                sampler.validate()?;
                // The schedule may still be waiting for dim/horizon here.
                let mut l = likelihood.clone();
                l.beta = l.beta.resolve(1, 2);
                l.validate()?;
                reg_ok(*reg)
            }
        }
    }
}

/// Index of the largest score; lowest index on ties.
pub fn argmax(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in scores.into_iter().enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

pub fn greedy_select(armset: &ArmSet, theta: &[f64]) -> usize {
    argmax(armset.arms.iter().map(|a| dot(a, theta)))
}

pub fn uniform_select(armset: &ArmSet, rng: &mut SimRng) -> usize {
    rng.random_range(0..armset.len())
}

pub fn eps_greedy_select(
    design: &DesignState,
    armset: &ArmSet,
    eps: f64,
    rng: &mut SimRng,
) -> Result<usize> {
    check_len(armset.dim(), design.dim())?;
    if eps > 0.0 && rng.random::<f64>() < eps {
        return Ok(uniform_select(armset, rng));
    }
    Ok(greedy_select(armset, &design.ridge_estimate()))
}

pub fn linucb_select(design: &DesignState, armset: &ArmSet, alpha: f64) -> Result<usize> {
    check_len(armset.dim(), design.dim())?;
    let theta = design.ridge_estimate();
    let mut scores = Vec::with_capacity(armset.len());
    for a in &armset.arms {
        scores.push(dot(a, &theta) + alpha * design.ucb_width(a)?);
    }
    Ok(argmax(scores))
}

/// Draws `θ ~ N(θ̂, v V⁻¹)`.
pub fn lints_sample(design: &DesignState, ts_scale: f64, rng: &mut SimRng) -> Result<Vec<f64>> {
    let mut theta = design.ridge_estimate();
    let z = standard_normal_vec(rng, design.dim());
    let w = design.whiten(&z)?;
    let s = ts_scale.sqrt();
    for (t, wi) in theta.iter_mut().zip(&w) {
        *t += s * wi;
    }
    Ok(theta)
}

pub fn lints_select(
    design: &DesignState,
    armset: &ArmSet,
    ts_scale: f64,
    rng: &mut SimRng,
) -> Result<usize> {
    check_len(armset.dim(), design.dim())?;
    Ok(greedy_select(armset, &lints_sample(design, ts_scale, rng)?))
}

/// Per-policy mutable state for one run.
#[derive(Debug, Clone)]
pub struct Policy {
    cfg: PolicyConfig,
    dim: usize,
    design: Option<DesignState>,
    history: Option<History>,
    chain: Option<SamplerState>,
    rounds_seen: usize,
    fresh_data: bool,
    last_stats: ChainStats,
    last_step: Option<f64>,
}

impl Policy {
    /// Builds a policy for arm features of length `dim` over `horizon`
    /// rounds; unset schedule fields are filled from these.
    pub fn new(cfg: PolicyConfig, dim: usize, horizon: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be ≥ 1"));
        }
        let mut cfg = cfg;
        if let PolicyConfig::McmcTs { likelihood, .. } = &mut cfg {
            likelihood.beta = likelihood.beta.resolve(dim, horizon);
        }
        cfg.validate()?;
        let (design, history, chain) = match &cfg {
            PolicyConfig::Uniform => (None, None, None),
            PolicyConfig::EpsGreedy { reg, .. }
            | PolicyConfig::LinUcb { reg, .. }
            | PolicyConfig::LinTs { reg, .. } => (Some(DesignState::new(dim, *reg)?), None, None),
            PolicyConfig::McmcTs {
                likelihood,
                sampler,
                reg,
            } => {
                likelihood.validate()?;
                let design = if sampler.precondition {
                    Some(DesignState::new(dim, *reg)?)
                } else {
                    None
                };
                (
                    design,
                    Some(History::new(dim)),
                    Some(SamplerState::zeros(dim, sampler.kind)),
                )
            }
        };
        Ok(Self {
            cfg,
            dim,
            design,
            history,
            chain,
            rounds_seen: 0,
            fresh_data: false,
            last_stats: ChainStats::default(),
            last_step: None,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn design(&self) -> Option<&DesignState> {
        self.design.as_ref()
    }

    pub fn history(&self) -> Option<&History> {
        self.history.as_ref()
    }

    pub fn chain(&self) -> Option<&SamplerState> {
        self.chain.as_ref()
    }

    pub fn rounds_seen(&self) -> usize {
        self.rounds_seen
    }

    /// Acceptance counts of the most recent chain.
    pub fn last_chain_stats(&self) -> ChainStats {
        self.last_stats
    }

    /// Step size used by the most recent chain.
    pub fn last_step(&self) -> Option<f64> {
        self.last_step
    }

    /// Chooses an arm at round `t` (1-based). `rng` drives the policy's own
    /// randomness and `sampler_rng` the MCMC noise.
    pub fn select(
        &mut self,
        armset: &ArmSet,
        t: usize,
        rng: &mut SimRng,
        sampler_rng: &mut SimRng,
    ) -> Result<usize> {
        check_len(armset.dim(), self.dim)?;
        match &self.cfg {
            PolicyConfig::Uniform => Ok(uniform_select(armset, rng)),
            PolicyConfig::EpsGreedy { eps, decay, .. } => {
                let e = if *decay { eps / t.max(1) as f64 } else { *eps };
                eps_greedy_select(self.design.as_ref().expect("design"), armset, e, rng)
            }
            PolicyConfig::LinUcb { alpha, .. } => {
                linucb_select(self.design.as_ref().expect("design"), armset, *alpha)
            }
            PolicyConfig::LinTs { ts_scale, .. } => lints_select(
                self.design.as_ref().expect("design"),
                armset,
                *ts_scale,
                rng,
            ),
            PolicyConfig::McmcTs { sampler, .. } => {
                let steps = if self.fresh_data {
                    sampler.inner_steps
                } else {
                    sampler.inner_steps_stale
                };
                self.mcmc_round(armset, t, steps, sampler_rng)
            }
        }
    }

    /// Advances the chain `steps` times against the round-`t` posterior and
    /// plays greedily under the final position.
    pub fn mcmc_round(
        &mut self,
        armset: &ArmSet,
        t: usize,
        steps: usize,
        sampler_rng: &mut SimRng,
    ) -> Result<usize> {
        let PolicyConfig::McmcTs {
            likelihood,
            sampler,
            ..
        } = &self.cfg
        else {
            return Err(Error::invalid("mcmc_round needs an MCMC policy"));
        };
        let history = self.history.as_ref().expect("history");
        let chain = self.chain.as_mut().expect("chain");
        if steps > 0 {
            let target = BanditPosterior::new(likelihood, history, t)?;
            let metric = if sampler.precondition {
                self.design.as_ref()
            } else {
                None
            };
            let step = sampler.resolve_step(|| target.curvature(metric.map(|m| m.chol())))?;
            let kernel = Kernel::new(sampler, step, metric)?;
            self.last_step = Some(step);
            self.last_stats = kernel
                .run_chain(chain, steps, &target, sampler_rng)
                .map_err(|e| match e {
                    Error::Divergence {
                        theta, inner_step, ..
                    } => Error::Divergence {
                        theta,
                        inner_step,
                        round: Some(t),
                    },
                    other => other,
                })?;
        }
        self.fresh_data = false;
        Ok(greedy_select(armset, &chain.theta))
    }

    pub fn update(&mut self, armset: &ArmSet, chosen: usize, reward: f64) -> Result<()> {
        check_len(armset.dim(), self.dim)?;
        let x = armset.arm(chosen)?;
        if let Some(d) = self.design.as_mut() {
            d.update(x, reward)?;
        }
        if let Some(h) = self.history.as_mut() {
            h.push(armset.clone(), chosen, reward)?;
        }
        self.rounds_seen += 1;
        self.fresh_data = true;
        Ok(())
    }
}
