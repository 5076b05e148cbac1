//! MCMC kernels targeting `π(θ) ∝ exp(−U(θ))` at unit temperature.
//!
//! Inverse temperature lives inside `U` (see [`crate::likelihoods`]). Every
//! kernel can optionally be preconditioned by a design matrix `V`: gradients
//! are multiplied by `V⁻¹` and injected noise has covariance `V⁻¹`.

use rand::Rng;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::design::DesignState;
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, dot, standard_normal_vec};

/// A differentiable potential `U`, optionally a finite sum of data terms
/// plus a prior: `U = Σᵢ uᵢ + u_prior`.
pub trait Target {
    fn dim(&self) -> usize;

    fn potential(&self, theta: &[f64]) -> Result<f64>;

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>>;

    /// Number of data terms available to stochastic-gradient estimators.
    fn num_terms(&self) -> usize {
        0
    }

    fn term_gradient(&self, i: usize, _theta: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Internal(format!(
            "target has no finite-sum structure (term {i} requested)"
        )))
    }

    fn prior_gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; theta.len()])
    }
}

/// `U(θ) = ½ (θ − μ)ᵀ A (θ − μ)` for a symmetric positive-definite `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    pub mean: Vec<f64>,
    pub precision: Vec<f64>,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, precision: Vec<f64>) -> Result<Self> {
        check_len(precision.len(), mean.len() * mean.len())?;
        Ok(Self { mean, precision })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            precision: linalg::identity(dim, 1.0),
        }
    }

    fn centred(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_len(theta.len(), self.mean.len())?;
        Ok(theta.iter().zip(&self.mean).map(|(t, m)| t - m).collect())
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn potential(&self, theta: &[f64]) -> Result<f64> {
        let c = self.centred(theta)?;
        Ok(0.5 * dot(&c, &linalg::matvec(&self.precision, &c)))
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let c = self.centred(theta)?;
        Ok(linalg::matvec(&self.precision, &c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Lmc,
    Mala,
    Hmc,
    Ulmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepSize {
    Fixed {
        step: f64,
    },
    /// `factor / λ_max` for LMC and MALA, `factor / √λ_max` for HMC and
    /// ULMC, with `λ_max` the largest curvature of the quadratic part of the
    /// target (in the preconditioned metric when preconditioning is on).
    Curvature {
        factor: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MhFilter {
    /// Metropolis–Hastings ratio including the proposal densities.
    #[default]
    Full,
    /// `min(1, exp(U(θ) − U(θ′)))` only; not exact for Langevin proposals.
    PotentialOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvrgConfig {
    pub batch: usize,
    /// Steps between snapshot refreshes within a chain; the snapshot is
    /// always refreshed when a chain starts.
    #[serde(default)]
    pub snapshot_period: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub step: StepSize,
    #[serde(default = "default_inner")]
    pub inner_steps: usize,
    #[serde(default = "default_inner_stale")]
    pub inner_steps_stale: usize,
    #[serde(default = "default_leapfrog")]
    pub leapfrog_steps: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default)]
    pub precondition: bool,
    #[serde(default)]
    pub svrg: Option<SvrgConfig>,
    #[serde(default)]
    pub mh_filter: MhFilter,
}

fn default_inner() -> usize {
    50
}
fn default_inner_stale() -> usize {
    10
}
fn default_leapfrog() -> usize {
    10
}
fn default_damping() -> f64 {
    0.1
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, step: StepSize) -> Self {
        Self {
            kind,
            step,
            inner_steps: default_inner(),
            inner_steps_stale: default_inner_stale(),
            leapfrog_steps: default_leapfrog(),
            damping: default_damping(),
            precondition: false,
            svrg: None,
            mh_filter: MhFilter::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.step {
            StepSize::Fixed { step } if !(step >= 0.0 && step.is_finite()) => {
                return Err(Error::invalid(format!(
                    "step must be non-negative, got {step}"
                )));
            }
            StepSize::Curvature { factor } if !(factor > 0.0 && factor.is_finite()) => {
                return Err(Error::invalid(format!(
                    "step factor must be positive, got {factor}"
                )));
            }
            _ => {}
        }
        if self.kind == SamplerKind::Hmc && self.leapfrog_steps == 0 {
            return Err(Error::invalid("HMC needs leapfrog_steps ≥ 1"));
        }
        if self.kind == SamplerKind::Ulmc {
            if !(self.damping >= 0.0 && self.damping.is_finite()) {
                return Err(Error::invalid(format!(
                    "damping must be non-negative, got {}",
                    self.damping
                )));
            }
            if self.precondition {
                return Err(Error::invalid(
                    "preconditioning is implemented for LMC, MALA and HMC only",
                ));
            }
        }
        if let Some(s) = &self.svrg {
            if s.batch == 0 {
                return Err(Error::invalid("SVRG batch must be ≥ 1"));
            }
            if s.snapshot_period == Some(0) {
                return Err(Error::invalid("SVRG snapshot_period must be ≥ 1"));
            }
            if !matches!(self.kind, SamplerKind::Lmc | SamplerKind::Ulmc) {
                return Err(Error::invalid(
                    "SVRG gradients are only supported by the unadjusted kernels (LMC, ULMC)",
                ));
            }
        }
        Ok(())
    }

    /// Resolves the step rule; `curvature` is only called for
    /// [`StepSize::Curvature`].
    pub fn resolve_step(&self, curvature: impl FnOnce() -> f64) -> Result<f64> {
        match self.step {
            StepSize::Fixed { step } => Ok(step),
            StepSize::Curvature { factor } => {
                let c = curvature();
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::NumericDegeneracy(format!(
                        "curvature estimate {c} cannot set a step size"
                    )));
                }
                Ok(match self.kind {
                    SamplerKind::Lmc | SamplerKind::Mala => factor / c,
                    SamplerKind::Hmc | SamplerKind::Ulmc => factor / c.sqrt(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrgSnapshot {
    pub theta: Vec<f64>,
    pub full_grad: Vec<f64>,
}

/// Chain position carried across rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub theta: Vec<f64>,
    pub velocity: Option<Vec<f64>>,
    pub snapshot: Option<SvrgSnapshot>,
    pub steps_since_snapshot: usize,
}

impl SamplerState {
    pub fn new(theta: Vec<f64>, kind: SamplerKind) -> Self {
        let velocity = (kind == SamplerKind::Ulmc).then(|| vec![0.0; theta.len()]);
        Self {
            theta,
            velocity,
            snapshot: None,
            steps_since_snapshot: 0,
        }
    }

    pub fn zeros(dim: usize, kind: SamplerKind) -> Self {
        Self::new(vec![0.0; dim], kind)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChainStats {
    pub steps: usize,
    pub accepted: usize,
}

impl ChainStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            1.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }
}

fn divergence(theta: &[f64]) -> Error {
    Error::Divergence {
        theta: theta.to_vec(),
        inner_step: 0,
        round: None,
    }
}

fn finite_or_diverge(v: Vec<f64>, theta: &[f64]) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(divergence(theta))
    }
}

/// `θ − step·g + √(2·step)·noise`, with `g` and `noise` already mapped into
/// the sampling metric.
pub fn lmc_move(theta: &[f64], g: &[f64], noise: &[f64], step: f64) -> Vec<f64> {
    let scale = (2.0 * step).sqrt();
    theta
        .iter()
        .zip(g)
        .zip(noise)
        .map(|((t, gi), e)| t - step * gi + scale * e)
        .collect()
}

/// One underdamped update; returns `(θ′, v′)`.
pub fn ulmc_move(
    theta: &[f64],
    v: &[f64],
    g: &[f64],
    noise: &[f64],
    step: f64,
    damping: f64,
) -> (Vec<f64>, Vec<f64>) {
    let decay = 1.0 - damping * step;
    let scale = (2.0 * damping * step).sqrt();
    let v_new: Vec<f64> = v
        .iter()
        .zip(g)
        .zip(noise)
        .map(|((vi, gi), e)| decay * vi - step * gi + scale * e)
        .collect();
    let theta_new = theta
        .iter()
        .zip(&v_new)
        .map(|(t, vi)| t + step * vi)
        .collect();
    (theta_new, v_new)
}

/// Leapfrog with identity mass: half kick, then `steps` drifts separated by
/// full kicks, then a closing half kick.
pub fn leapfrog(
    theta: &[f64],
    p: &[f64],
    grad: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    eps: f64,
    steps: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    leapfrog_with_metric(theta, p, grad, |p| p.to_vec(), eps, steps)
}

/// Leapfrog for `H = U(θ) + ½ pᵀ M⁻¹ p`; `inv_mass` applies `M⁻¹`.
pub fn leapfrog_with_metric(
    theta: &[f64],
    p: &[f64],
    mut grad: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    inv_mass: impl Fn(&[f64]) -> Vec<f64>,
    eps: f64,
    steps: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if steps == 0 {
        return Err(Error::invalid("leapfrog needs at least one step"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!(
            "leapfrog step must be positive, got {eps}"
        )));
    }
    let mut q = theta.to_vec();
    let mut mom = p.to_vec();
    let g = finite_or_diverge(grad(&q)?, &q)?;
    for (m, gi) in mom.iter_mut().zip(&g) {
        *m -= 0.5 * eps * gi;
    }
    for i in 0..steps {
        let vel = inv_mass(&mom);
        for (qi, vi) in q.iter_mut().zip(&vel) {
            *qi += eps * vi;
        }
        let g = finite_or_diverge(grad(&q)?, &q)?;
        let w = if i + 1 == steps { 0.5 * eps } else { eps };
        for (m, gi) in mom.iter_mut().zip(&g) {
            *m -= w * gi;
        }
    }
    if q.iter().chain(&mom).any(|v| !v.is_finite()) {
        return Err(divergence(&q));
    }
    Ok((q, mom))
}

/// A configured kernel: sampler settings, a resolved step, and an optional
/// preconditioner.
#[derive(Debug, Clone, Copy)]
pub struct Kernel<'a> {
    pub cfg: &'a SamplerConfig,
    pub step: f64,
    pub metric: Option<&'a DesignState>,
}

impl<'a> Kernel<'a> {
    pub fn new(cfg: &'a SamplerConfig, step: f64, metric: Option<&'a DesignState>) -> Result<Self> {
        cfg.validate()?;
        if !(step >= 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!(
                "step must be non-negative, got {step}"
            )));
        }
        if cfg.precondition && metric.is_none() {
            return Err(Error::invalid(
                "preconditioned kernel needs a design matrix",
            ));
        }
        Ok(Self {
            cfg,
            step,
            metric: if cfg.precondition { metric } else { None },
        })
    }

    fn precondition(&self, g: Vec<f64>) -> Result<Vec<f64>> {
        match self.metric {
            Some(m) => m.precondition(&g),
            None => Ok(g),
        }
    }

    fn noise<R: RngCore + ?Sized>(&self, rng: &mut R, dim: usize) -> Result<Vec<f64>> {
        let e = standard_normal_vec(rng, dim);
        match self.metric {
            Some(m) => m.whiten(&e),
            None => Ok(e),
        }
    }

    /// `‖v‖²` in the metric `V` (identity when unpreconditioned).
    fn metric_norm_sq(&self, v: &[f64]) -> Result<f64> {
        Ok(match self.metric {
            Some(m) => dot(v, &m.apply_v(v)?),
            None => dot(v, v),
        })
    }

    /// Langevin proposal mean `θ − step·P∇U(θ)`.
    fn langevin_mean(&self, target: &dyn Target, theta: &[f64]) -> Result<Vec<f64>> {
        let g = finite_or_diverge(target.gradient(theta)?, theta)?;
        let pg = self.precondition(g)?;
        Ok(theta
            .iter()
            .zip(&pg)
            .map(|(t, g)| t - self.step * g)
            .collect())
    }

    /// Log density (up to a constant shared by both directions) of proposing
    /// `to` from `from` under the Langevin move.
    pub fn proposal_log_density(
        &self,
        target: &dyn Target,
        from: &[f64],
        to: &[f64],
    ) -> Result<f64> {
        let mu = self.langevin_mean(target, from)?;
        let diff: Vec<f64> = to.iter().zip(&mu).map(|(a, b)| a - b).collect();
        Ok(-self.metric_norm_sq(&diff)? / (4.0 * self.step))
    }

    /// Log acceptance probability of the MALA move `from → to`.
    pub fn mala_log_accept(&self, target: &dyn Target, from: &[f64], to: &[f64]) -> Result<f64> {
        let mut log_ratio = target.potential(from)? - target.potential(to)?;
        if self.cfg.mh_filter == MhFilter::Full {
            log_ratio += self.proposal_log_density(target, to, from)?
                - self.proposal_log_density(target, from, to)?;
        }
        Ok(log_ratio.min(0.0))
    }

    fn svrg_refresh(&self, state: &mut SamplerState, target: &dyn Target) -> Result<()> {
        let full = finite_or_diverge(target.gradient(&state.theta)?, &state.theta)?;
        state.snapshot = Some(SvrgSnapshot {
            theta: state.theta.clone(),
            full_grad: full,
        });
        state.steps_since_snapshot = 0;
        Ok(())
    }

    /// Variance-reduced gradient estimate at `theta` against the state's
    /// snapshot.
    pub fn svrg_grad<R: RngCore + ?Sized>(
        &self,
        state: &SamplerState,
        theta: &[f64],
        target: &dyn Target,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let svrg = self
            .cfg
            .svrg
            .ok_or_else(|| Error::Internal("SVRG gradient requested without SVRG config".into()))?;
        let snap = state
            .snapshot
            .as_ref()
            .ok_or_else(|| Error::Internal("SVRG snapshot missing".into()))?;
        svrg_estimate(target, theta, snap, svrg.batch, rng)
    }

    fn gradient<R: RngCore + ?Sized>(
        &self,
        state: &SamplerState,
        target: &dyn Target,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let g = if self.cfg.svrg.is_some() {
            self.svrg_grad(state, &state.theta, target, rng)?
        } else {
            target.gradient(&state.theta)?
        };
        finite_or_diverge(g, &state.theta)
    }

    pub fn lmc_step<R: RngCore + ?Sized>(
        &self,
        state: &mut SamplerState,
        target: &dyn Target,
        rng: &mut R,
    ) -> Result<()> {
        let g = self.gradient(state, target, rng)?;
        let pg = self.precondition(g)?;
        let noise = self.noise(rng, state.theta.len())?;
        let next = lmc_move(&state.theta, &pg, &noise, self.step);
        state.theta = finite_or_diverge(next, &state.theta)?;
        Ok(())
    }

    /// Returns whether the proposal was accepted.
    pub fn mala_step<R: RngCore + ?Sized>(
        &self,
        state: &mut SamplerState,
        target: &dyn Target,
        rng: &mut R,
    ) -> Result<bool> {
        let mu = self.langevin_mean(target, &state.theta)?;
        let noise = self.noise(rng, state.theta.len())?;
        let scale = (2.0 * self.step).sqrt();
        let prop: Vec<f64> = mu.iter().zip(&noise).map(|(m, e)| m + scale * e).collect();
        let prop = finite_or_diverge(prop, &state.theta)?;
        let log_a = self.mala_log_accept(target, &state.theta, &prop)?;
        let u: f64 = rng.random();
        if log_a.is_nan() {
            return Err(divergence(&prop));
        }
        if u.ln() < log_a {
            state.theta = prop;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn kinetic(&self, p: &[f64]) -> Result<f64> {
        Ok(0.5
            * match self.metric {
                Some(m) => dot(p, &m.precondition(p)?),
                None => dot(p, p),
            })
    }

    pub fn hmc_step<R: RngCore + ?Sized>(
        &self,
        state: &mut SamplerState,
        target: &dyn Target,
        rng: &mut R,
    ) -> Result<bool> {
        let z = standard_normal_vec(rng, state.theta.len());
        let p = match self.metric {
            Some(m) => m.colour(&z)?,
            None => z,
        };
        let h_old = target.potential(&state.theta)? + self.kinetic(&p)?;
        let (q, p_new) = match self.metric {
            Some(m) => leapfrog_with_metric(
                &state.theta,
                &p,
                |x| target.gradient(x),
                |v| m.precondition(v).expect("dimension checked"),
                self.step,
                self.cfg.leapfrog_steps,
            )?,
            None => leapfrog(
                &state.theta,
                &p,
                |x| target.gradient(x),
                self.step,
                self.cfg.leapfrog_steps,
            )?,
        };
        let h_new = target.potential(&q)? + self.kinetic(&p_new)?;
        let delta = h_new - h_old;
        if delta.is_nan() {
            return Err(divergence(&q));
        }
        let u: f64 = rng.random();
        if delta <= 0.0 || u.ln() < -delta {
            state.theta = q;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn ulmc_step<R: RngCore + ?Sized>(
        &self,
        state: &mut SamplerState,
        target: &dyn Target,
        rng: &mut R,
    ) -> Result<()> {
        let g = self.gradient(state, target, rng)?;
        let noise = standard_normal_vec(rng, state.theta.len());
        let v = state
            .velocity
            .take()
            .unwrap_or_else(|| vec![0.0; state.theta.len()]);
        let (theta, v) = ulmc_move(&state.theta, &v, &g, &noise, self.step, self.cfg.damping);
        if theta.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(divergence(&state.theta));
        }
        state.theta = theta;
        state.velocity = Some(v);
        Ok(())
    }

    fn step_once<R: RngCore + ?Sized>(
        &self,
        state: &mut SamplerState,
        target: &dyn Target,
        rng: &mut R,
    ) -> Result<bool> {
        match self.cfg.kind {
            SamplerKind::Lmc => self.lmc_step(state, target, rng).map(|_| true),
            SamplerKind::Mala => self.mala_step(state, target, rng),
            SamplerKind::Hmc => self.hmc_step(state, target, rng),
            SamplerKind::Ulmc => self.ulmc_step(state, target, rng).map(|_| true),
        }
    }

    /// Applies the kernel `steps` times, warm-starting from `state`.
    pub fn run_chain<R: RngCore + ?Sized>(
        &self,
        state: &mut SamplerState,
        steps: usize,
        target: &dyn Target,
        rng: &mut R,
    ) -> Result<ChainStats> {
        check_len(state.theta.len(), target.dim())?;
        let mut stats = ChainStats::default();
        if steps == 0 {
            return Ok(stats);
        }
        let annotate = |e: Error, k: usize| match e {
            Error::Divergence { theta, round, .. } => Error::Divergence {
                theta,
                inner_step: k,
                round,
            },
            other => other,
        };
        if self.cfg.svrg.is_some() {
            self.svrg_refresh(state, target)
                .map_err(|e| annotate(e, 0))?;
        }
        for k in 0..steps {
            if let Some(period) = self.cfg.svrg.and_then(|s| s.snapshot_period) {
                if state.steps_since_snapshot >= period {
                    self.svrg_refresh(state, target)
                        .map_err(|e| annotate(e, k))?;
                }
            }
            let accepted = self
                .step_once(state, target, rng)
                .map_err(|e| annotate(e, k))?;
            stats.steps += 1;
            stats.accepted += accepted as usize;
            state.steps_since_snapshot += 1;
        }
        Ok(stats)
    }
}

/// `(n/B) Σ_{i∈𝓑} (∇uᵢ(θ) − ∇uᵢ(θ̃)) + μ̃ + ∇u_prior(θ) − ∇u_prior(θ̃)`, with
/// `𝓑` drawn uniformly with replacement (all indices once when `B ≥ n`).
pub fn svrg_estimate<R: RngCore + ?Sized>(
    target: &dyn Target,
    theta: &[f64],
    snap: &SvrgSnapshot,
    batch: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_len(theta.len(), snap.theta.len())?;
    let n = target.num_terms();
    let mut g = snap.full_grad.clone();
    let pg = target.prior_gradient(theta)?;
    let pg_snap = target.prior_gradient(&snap.theta)?;
    for i in 0..g.len() {
        g[i] += pg[i] - pg_snap[i];
    }
    if n == 0 {
        return Ok(g);
    }
    let mut add = |i: usize, w: f64| -> Result<()> {
        let a = target.term_gradient(i, theta)?;
        let b = target.term_gradient(i, &snap.theta)?;
        for k in 0..g.len() {
            g[k] += w * (a[k] - b[k]);
        }
        Ok(())
    };
    if batch >= n {
        for i in 0..n {
            add(i, 1.0)?;
        }
    } else {
        let w = n as f64 / batch as f64;
        for _ in 0..batch {
            add(rng.random_range(0..n), w)?;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn cfg(kind: SamplerKind, step: f64) -> SamplerConfig {
        SamplerConfig::new(kind, StepSize::Fixed { step })
    }

    #[test]
    fn zero_step_is_identity() {
        let t = GaussianTarget::standard(3);
        let c = cfg(SamplerKind::Lmc, 0.0);
        let k = Kernel::new(&c, 0.0, None).unwrap();
        let mut s = SamplerState::new(vec![0.3, -1.0, 2.0], SamplerKind::Lmc);
        let mut rng = stream_rng(1, Stream::Sampler);
        k.run_chain(&mut s, 5, &t, &mut rng).unwrap();
        assert_eq!(s.theta, vec![0.3, -1.0, 2.0]);

        let c = cfg(SamplerKind::Ulmc, 0.0);
        let k = Kernel::new(&c, 0.0, None).unwrap();
        let mut s = SamplerState::new(vec![0.3, -1.0, 2.0], SamplerKind::Ulmc);
        s.velocity = Some(vec![1.0, 2.0, 3.0]);
        k.run_chain(&mut s, 5, &t, &mut rng).unwrap();
        assert_eq!(s.theta, vec![0.3, -1.0, 2.0]);
        assert_eq!(s.velocity, Some(vec![1.0, 2.0, 3.0]));
    }

    #[test]
    fn noiseless_moves() {
        let th = [1.0, -2.0];
        let g = [0.5, 0.25];
        assert_eq!(lmc_move(&th, &g, &[0.0, 0.0], 0.1), vec![0.95, -2.025]);
        let (t2, v2) = ulmc_move(&th, &[1.0, 0.0], &g, &[0.0, 0.0], 0.1, 0.0);
        assert_eq!(v2, vec![1.0 - 0.05, -0.025]);
        assert_eq!(t2, vec![1.0 + 0.1 * 0.95, -2.0 + 0.1 * -0.025]);
    }

    #[test]
    fn mala_identical_states_accept() {
        let t = GaussianTarget::standard(2);
        let c = cfg(SamplerKind::Mala, 0.1);
        let k = Kernel::new(&c, 0.1, None).unwrap();
        let th = [0.4, -0.2];
        // θ′ = θ gives log acceptance 0 regardless of the proposal means.
        assert_eq!(k.mala_log_accept(&t, &th, &th).unwrap(), 0.0);
    }

    #[test]
    fn free_particle() {
        let (q, p) = leapfrog(
            &[1.0, 2.0],
            &[0.5, -1.0],
            |x| Ok(vec![0.0; x.len()]),
            0.1,
            7,
        )
        .unwrap();
        assert!((q[0] - (1.0 + 0.7 * 0.5)).abs() < 1e-14);
        assert!((q[1] - (2.0 - 0.7)).abs() < 1e-14);
        assert_eq!(p, vec![0.5, -1.0]);
    }

    #[test]
    fn divergence_is_reported() {
        let t = GaussianTarget::new(vec![0.0], vec![1e300]).unwrap();
        let c = cfg(SamplerKind::Lmc, 10.0);
        let k = Kernel::new(&c, 10.0, None).unwrap();
        let mut s = SamplerState::new(vec![1e10], SamplerKind::Lmc);
        let mut rng = stream_rng(3, Stream::Sampler);
        let err = k.run_chain(&mut s, 100, &t, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(SamplerKind::Hmc, 0.1);
        c.leapfrog_steps = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(SamplerKind::Mala, 0.1);
        c.svrg = Some(SvrgConfig {
            batch: 8,
            snapshot_period: None,
        });
        assert!(c.validate().is_err());
        let mut c = cfg(SamplerKind::Lmc, 0.1);
        c.precondition = true;
        assert!(Kernel::new(&c, 0.1, None).is_err());
        let c = SamplerConfig::new(SamplerKind::Lmc, StepSize::Curvature { factor: 0.5 });
        assert_eq!(c.resolve_step(|| 4.0).unwrap(), 0.125);
        assert!(c.resolve_step(|| 0.0).is_err());
    }

    #[test]
    fn svrg_requires_snapshot() {
        let t = GaussianTarget::standard(2);
        let mut c = cfg(SamplerKind::Lmc, 0.1);
        c.svrg = Some(SvrgConfig {
            batch: 4,
            snapshot_period: None,
        });
        let k = Kernel::new(&c, 0.1, None).unwrap();
        let s = SamplerState::zeros(2, SamplerKind::Lmc);
        let mut rng = stream_rng(0, Stream::Sampler);
        assert!(matches!(
            k.svrg_grad(&s, &[0.0, 0.0], &t, &mut rng),
            Err(Error::Internal(_))
        ));
    }
}
